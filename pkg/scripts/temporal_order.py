"""Richardson estimate of the RK4-IF (or AB2-IF) convergence order on a smooth SQG run."""
import argparse
import math

import numpy as np

from activescalar.evolution import SolverConfig, run
from activescalar.laws import ConstitutiveLaw


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--integrator", choices=["rk4-if", "ab2-if"], default="rk4-if")
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--n", type=int, default=64)
    args = ap.parse_args()

    cfg = SolverConfig(
        law=ConstitutiveLaw("sqg", 0.1), kappa=0.01, gamma=1.0, n=args.n, dt=args.dt, t_end=0.4,
        integrator=args.integrator, initial={"kind": "preset", "name": "smooth-2d"}, checkpoint_every=10**6,
    )
    steps = [args.dt / 2**i for i in range(4)]
    finals = [run(cfg.with_params(dt=h)).state.theta.coeffs for h in steps]
    errs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
    for h, e in zip(steps, errs):
        print(f"dt={h:<8g} |u_dt - u_dt/2| = {e:.3e}")
    for a, b in zip(errs, errs[1:]):
        print(f"observed order {math.log2(a / b):.3f}")


if __name__ == "__main__":
    main()
