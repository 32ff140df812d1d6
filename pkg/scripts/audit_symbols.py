"""Audit the structural conditions of every law and print a table."""
import argparse
from pathlib import Path

from activescalar.harness.config import expand_preset
from activescalar.laws import audit_condition


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=None)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    params = expand_preset("symbol-audit-all").params
    K = args.K or params["K"]
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'law':5} {'cond':5} {'sup':>14} {'rate':>8}  status")
    for law in params["laws"]:
        for cond in params["conditions"][law]:
            rep = audit_condition(law, cond, K, params["nu"])
            rate = "" if rep.fitted_rate is None else f"{rep.fitted_rate:.3f}"
            print(f"{law:5} {cond:5} {rep.measured_sup:14.6g} {rate:>8}  {'pass' if rep.passed else 'FAIL'}")
            if args.out:
                (args.out / f"{law}_{cond.replace('*', 'star')}.json").write_text(rep.to_json() + "\n")


if __name__ == "__main__":
    main()
