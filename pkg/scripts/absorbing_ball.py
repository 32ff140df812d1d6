"""Absorbing-ball observation for the forced, diffusive MG preset.

Writes one CSV of diagnostics per initial scale and the verdict JSON.
"""
import argparse
from pathlib import Path

from activescalar.diagnostics import NotAbsorbed, absorbing_ball_check
from activescalar.harness.config import expand_preset
from activescalar.records import records_to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/absorbing"))
    ap.add_argument("--multipliers", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    ap.add_argument("--t-end", type=float, default=None)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    p = expand_preset("absorbing-ball")
    cfg = p.config if args.t_end is None else p.config.with_params(t_end=args.t_end)
    try:
        verdict, series = absorbing_ball_check(
            cfg, args.multipliers, enter_by=p.params["enter_by"], workers=args.workers
        )
    except NotAbsorbed as exc:
        print(f"not absorbed: {exc}")
        raise SystemExit(1)
    args.out.mkdir(parents=True, exist_ok=True)
    for m, recs in series.items():
        (args.out / f"scale_{m:g}x.csv").write_text(records_to_csv(recs))
    (args.out / "verdict.json").write_text(verdict.to_json() + "\n")
    print(f"R = {verdict.measured['radius']:.6g}")
    for m, t in verdict.measured["entry_times"].items():
        print(f"  {m}x R: inside from t = {t:g}")
    print(verdict.status)


if __name__ == "__main__":
    main()
