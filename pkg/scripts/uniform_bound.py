"""Sup over t in [1,2] of the H^1 norm for the MG family at nu in {0, 0.01, 0.1, 1}."""
import argparse
from pathlib import Path

from activescalar.diagnostics import uniform_bound_check
from activescalar.evolution import run
from activescalar.harness.config import expand_preset
from activescalar.records import records_to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/uniform_bound"))
    ap.add_argument("--nu", type=float, nargs="+", default=[0.0, 0.01, 0.1, 1.0])
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    base = expand_preset("mg-diffusive-nu-sweep").config
    series = {}
    for nu in args.nu:
        series[nu] = run(base.with_params(nu=nu)).records
        (args.out / f"nu_{nu:g}.csv").write_text(records_to_csv(series[nu]))
        print(f"nu={nu:g} done, final H^1 {series[nu][-1].hs[1.0]:.6g}")
    v = uniform_bound_check(series)
    (args.out / "verdict.json").write_text(v.to_json() + "\n")
    print(f"ratio {v.measured['ratio']:.4f} (factor {v.measured['factor']:g}): {v.status}")


if __name__ == "__main__":
    main()
