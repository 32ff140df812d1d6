"""Vanishing-parameter convergence study for one of the sweep presets.

    python scripts/run_sweep.py ipmb-nu-sweep --out results/ipmb
"""
import argparse
import json
import os
from pathlib import Path

from activescalar.diagnostics import convergence_study
from activescalar.harness.config import expand_preset

SWEEPS = ("ipmb-nu-sweep", "sqg-critical-kappa-sweep", "mg-diffusive-nu-sweep")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("preset", choices=SWEEPS)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    p = expand_preset(args.preset)
    sw = p.sweep
    rep = convergence_study(
        p.config, sw.param, sw.values, sw.reference, sw.norms, sw.eval_times, sw.required_factor,
        workers=min(args.workers, len(sw.values)),
    )
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"{args.preset}.json").write_text(rep.to_json() + "\n")

    for t in rep.eval_times:
        for s in rep.norms:
            print(f"t={t:g}  H^{s:g} difference vs {sw.param}={rep.reference:g}")
            for v, d in sorted(rep.column(t, s), reverse=True):
                print(f"  {sw.param}={v:<8g} {d:.6e}")
    print(f"monotone={rep.monotone} min_factor={rep.min_factor} rates={json.dumps(rep.rates)}")
    print("pass" if rep.passed else "fail")


if __name__ == "__main__":
    main()
