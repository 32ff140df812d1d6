"""Measured observables and shape checks built on solver output.

The analytical bounds these checks mirror carry non-constructive constants,
so every check here tests a shape (monotonicity, sign of a fitted exponent,
boundedness of a ratio) and records the measured constants for tracking.
Fits whose relative residual exceeds 25% yield an ``inconclusive`` verdict.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .records import DiagnosticsRecord
from .spectral import SpectralField, gevrey_norm, shell_index, sobolev_norm

INCONCLUSIVE_RESIDUAL = 0.25


class InsufficientDecay(ValueError):
    pass


class SweepAborted(RuntimeError):
    def __init__(self, value: float, cause: Exception):
        self.value = value
        self.cause = cause
        super().__init__(f"sweep member {value!r} failed: {cause}")

    def __reduce__(self):
        return (SweepAborted, (self.value, self.cause))


class NotAbsorbed(RuntimeError):
    """A trajectory never entered the ball before the run ended; run longer."""

    def __init__(self, multiplier: float, l2: Sequence[float], radius: float):
        self.multiplier = multiplier
        self.l2 = list(l2)
        self.radius = radius
        super().__init__(
            f"trajectory started at {multiplier}x R never settled inside R={radius:.4g}; "
            "extend t_end"
        )

    def __reduce__(self):
        return (NotAbsorbed, (self.multiplier, self.l2, self.radius))


@dataclass
class Verdict:
    check: str
    status: str  # pass | fail | inconclusive
    measured: dict[str, Any] = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _status(ok: bool, rel_residual: float | None = None) -> str:
    if rel_residual is not None and rel_residual > INCONCLUSIVE_RESIDUAL:
        return "inconclusive"
    return "pass" if ok else "fail"


def h_minus1_norm(f: SpectralField) -> float:
    g = f.grid
    nz = g.k2 > 0
    a2 = np.abs(f.coeffs[nz]) ** 2 / g.k2[nz]
    return math.sqrt(math.fsum((a2 * g.weights[nz]).tolist()))


# ---------------------------------------------------------------- Gevrey radius


@dataclass
class GevreyEstimate:
    tau: float
    s: float
    residual: float
    shell_range: tuple[int, int]
    n_shells: int


def estimate_gevrey_radius(
    theta: SpectralField, s: float = 1.0, floor: float = 1e-14, drop: float = 0.1
) -> GevreyEstimate:
    """Fit |c_k| ~ exp(-tau |k|^{1/s}) to the per-shell maximum amplitude.

    Each shell contributes (|k|^{1/s}, log max|c|) taken at the mode attaining
    the maximum.  The fit starts at the first shell below ``drop`` times the
    peak and stops before the first shell below ``floor``.
    """
    if s < 1:
        raise ValueError("Gevrey index s must be >= 1")
    g = theta.grid
    K = g.dealias_cutoff
    shells = shell_index(g)
    amp = np.where(g.dealias_mask, np.abs(theta.coeffs), 0.0)
    sel = (shells >= 1) & (shells <= K)
    sh = shells[sel]
    a = amp[sel]
    km = g.kmag[sel]
    order = np.lexsort((-a, sh))
    sh, a, km = sh[order], a[order], km[order]
    first = np.r_[True, sh[1:] != sh[:-1]]
    shell_r, shell_a, shell_k = sh[first], a[first], km[first]
    if int((shell_a > floor).sum()) < 6:
        raise InsufficientDecay("fewer than 6 shells above the amplitude floor")
    ipeak = int(np.argmax(shell_a))
    peak = shell_a[ipeak]
    below = np.nonzero(shell_a[ipeak:] < drop * peak)[0]
    if below.size == 0:
        raise InsufficientDecay("spectrum never drops below 10% of its peak")
    start = ipeak + int(below[0])
    stop = len(shell_a)
    under = np.nonzero(shell_a[start:] < floor)[0]
    if under.size:
        stop = start + int(under[0])
    if stop - start < 4:
        raise InsufficientDecay(f"only {stop - start} usable shells")
    x = shell_k[start:stop] ** (1.0 / s)
    y = np.log(shell_a[start:stop])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    span = abs(slope) * (x[-1] - x[0])
    rel = float(np.sqrt(np.mean(resid**2)) / span) if span > 0 else float("inf")
    return GevreyEstimate(
        tau=max(float(-slope), 0.0),
        s=s,
        residual=rel,
        shell_range=(int(shell_r[start]), int(shell_r[stop - 1])),
        n_shells=stop - start,
    )


def check_radius_lower_bound(
    times: Sequence[float],
    taus: Sequence[float],
    theta0: SpectralField | None = None,
    forcing: SpectralField | None = None,
    s: float = 1.0,
    tolerance: float = 0.10,
) -> Verdict:
    """log tau(t) should fall at most linearly in t (single-exponential radius loss)."""
    t = np.asarray(times, dtype=float)
    tau = np.asarray(taus, dtype=float)
    if len(t) < 3:
        return Verdict("gevrey_radius", "inconclusive", message="need at least 3 estimates")
    if np.any(~np.isfinite(tau)) or np.any(tau <= 0):
        return Verdict(
            "gevrey_radius", "fail", {"tau": tau.tolist()}, "radius estimate vanished"
        )
    y = np.log(tau)
    slope, icpt = np.polyfit(t, y, 1)
    fit = slope * t + icpt
    resid = y - fit
    decay = float(-slope)
    scale = max(abs(decay) * (t[-1] - t[0]), 0.05)
    rel = float(np.max(np.abs(resid)) / scale)
    measured: dict[str, Any] = {
        "decay_constant": decay,
        "tau0": float(tau[0]),
        "relative_residual": rel,
        "max_below_fit": float(np.max(fit - y)),
        "tau_min": float(tau.min()),
    }
    if theta0 is not None:
        pref = gevrey_norm(theta0, float(tau[0]), s)
        if forcing is not None:
            pref += 2.0 * gevrey_norm(forcing, float(tau[0]), s)
        measured["bound_prefactor"] = pref
        measured["implied_C"] = decay / pref if pref > 0 else None
    ok = rel <= tolerance and decay > -0.05 * scale
    return Verdict("gevrey_radius", _status(ok, rel), measured)


# ---------------------------------------------------------------- energy / bounds


def energy_equality_check(records: Sequence[DiagnosticsRecord], tol: float = 1e-6) -> Verdict:
    scale = max(r.energy for r in records)
    rel = [abs(r.energy_residual) / scale if scale > 0 else abs(r.energy_residual) for r in records]
    worst = max(rel)
    return Verdict(
        "energy_equality",
        _status(worst <= tol),
        {"max_relative_residual": worst, "tolerance": tol, "per_checkpoint": rel},
    )


def l2_monotone_check(records: Sequence[DiagnosticsRecord], strict: bool = False) -> Verdict:
    l2 = np.array([r.l2 for r in records])
    inc = np.diff(l2)
    ok = bool(np.all(inc < 0)) if strict else bool(np.all(inc <= 0))
    return Verdict("l2_monotone", _status(ok), {"max_increment": float(inc.max()) if inc.size else 0.0})


def uniform_bound_check(
    series_by_param: Mapping[float, Sequence[DiagnosticsRecord]],
    s: float = 1.0,
    window: tuple[float, float] = (1.0, 2.0),
    factor: float = 3.0,
) -> Verdict:
    """sup over the window of ||theta||_{H^s} should vary by less than ``factor`` across the family."""
    sups = {}
    for p, recs in series_by_param.items():
        vals = [r.hs[float(s)] for r in recs if window[0] - 1e-12 <= r.t <= window[1] + 1e-12]
        sups[float(p)] = max(vals)
    ratio = max(sups.values()) / min(sups.values())
    return Verdict("uniform_bound", _status(ratio < factor), {"sups": sups, "ratio": ratio, "factor": factor})


def linf_boundedness_check(
    records: Sequence[DiagnosticsRecord],
    d: int,
    gamma: float,
    kappa: float,
    forcing_linf: float,
    t_plateau: float = 1.0,
    floor: float = 1e-12,
) -> Verdict:
    """Shape of the De Giorgi-type bound: bounded plateau, decaying early envelope."""
    t = np.array([r.t for r in records])
    linf = np.array([r.linf for r in records])
    paper_exponent = (d + 1 - gamma) / (2 * gamma)
    late = linf[t >= t_plateau]
    if late.size == 0 or not np.all(np.isfinite(late)):
        return Verdict("linf_bound", "fail", message="no finite late-time values")
    tail = late[-max(1, late.size // 5) :]
    plateau = float(np.mean(tail))
    measured: dict[str, Any] = {
        "sup_late": float(late.max()),
        "plateau": plateau,
        "paper_exponent": paper_exponent,
    }
    if forcing_linf > 0 and kappa > 0:
        measured["plateau_over_S_over_kappa"] = plateau / (forcing_linf / kappa)
    else:
        ok = plateau <= 1e-3 * max(linf[0], floor) or bool(np.all(np.diff(linf) <= 0))
        return Verdict("linf_bound", _status(ok), measured, "unforced: expect decay to zero")
    env = np.maximum(linf - plateau, floor)
    early = (t > 0) & (env > 10 * floor) & (t <= t_plateau)
    if early.sum() < 3:
        return Verdict("linf_bound", "inconclusive", measured, "too few early-time points")
    slope, icpt = np.polyfit(np.log(t[early]), np.log(env[early]), 1)
    measured["fitted_exponent"] = float(-slope)
    ok = bool(np.isfinite(late).all()) and -slope > 0
    return Verdict("linf_bound", _status(ok), measured)


def linf_kappa_scaling(plateaus: Mapping[float, float], factor: float = 2.0) -> Verdict:
    """Plateaus ~ 1/kappa: kappa * plateau agrees within ``factor`` across runs."""
    prods = {float(k): float(k) * p for k, p in plateaus.items()}
    ratio = max(prods.values()) / min(prods.values())
    return Verdict("linf_kappa_scaling", _status(ratio <= factor), {"kappa_times_plateau": prods, "ratio": ratio})


def grad_growth_check(records: Sequence[DiagnosticsRecord], forced: bool = False, tolerance: float = 0.10) -> Verdict:
    """||grad theta||_{L^d} should stay under a fitted exp(linear) envelope (exp(quadratic) if forced).

    The least-squares fit of log ||grad theta|| is the envelope; the norm may
    exceed it by at most ``tolerance`` (relative).  The rms fit residual over
    the range of the log-norm decides the inconclusive status.
    """
    t = np.array([r.t for r in records])
    g = np.array([r.grad_ld for r in records])
    if np.any(g <= 0):
        return Verdict("grad_growth", "inconclusive", message="vanishing gradient norm")
    y = np.log(g)
    deg = 2 if forced else 1
    coef = np.polyfit(t, y, deg)
    resid = y - np.polyval(coef, t)
    span = max(float(y.max() - y.min()), 0.1)
    rel = float(np.sqrt(np.mean(resid**2)) / span)
    excess = float(np.expm1(resid.max()))
    return Verdict(
        "grad_growth",
        _status(excess <= tolerance, rel),
        {"coefficients": [float(c) for c in coef], "max_excess": excess, "relative_residual": rel, "degree": deg},
    )


# ---------------------------------------------------------------- sweeps


@dataclass
class ConvergenceReport:
    swept: str
    values: list[float]
    reference: float
    eval_times: list[float]
    norms: list[float]
    table: list[dict]
    rates: dict[str, float]
    monotone: bool
    min_factor: float | None
    required_factor: float | None
    passed: bool
    labels: dict = field(default_factory=dict)

    def column(self, time: float, s: float) -> list[tuple[float, float]]:
        return [(r["value"], r["diff"]) for r in self.table if r["time"] == time and r["s"] == s]

    def to_dict(self) -> dict:
        d = _jsonable(asdict(self))
        d["pass"] = d.pop("passed")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _sweep_member(args):
    from .evolution import run

    config, steps = args
    res = run(config, snapshot_steps=steps)
    return {k: v.coeffs for k, v in res.snapshots.items()}


def _record_member(config):
    from .evolution import run

    return run(config).records


def _map_members(fn, jobs: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_members(configs: Sequence, snapshot_steps: Sequence[int], workers: int = 1, labels=None) -> list[dict]:
    """Run configs (optionally in a process pool); results come back in input order."""
    labels = labels or list(range(len(configs)))
    jobs = [(c, list(snapshot_steps)) for c in configs]
    out = []
    if workers <= 1:
        for lab, job in zip(labels, jobs):
            try:
                out.append(_sweep_member(job))
            except Exception as exc:  # labelled and re-raised
                raise SweepAborted(lab, exc) from exc
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_member, job) for job in jobs]
        for lab, fut in zip(labels, futures):
            try:
                out.append(fut.result())
            except Exception as exc:
                raise SweepAborted(lab, exc) from exc
    return out


def convergence_study(
    base,
    swept: str,
    values: Sequence[float],
    reference: float = 0.0,
    norms: Sequence[float] = (1.0,),
    eval_times: Sequence[float] = (0.5,),
    required_factor: float | None = None,
    workers: int = 1,
) -> ConvergenceReport:
    """Run every value of ``swept`` and tabulate ||theta^p - theta^ref||_{H^s}.

    All members share the grid, dt, data and forcing of ``base``; only the
    swept parameter changes.  Differences are taken at shared time steps.
    """
    if swept not in ("nu", "kappa"):
        raise ValueError("swept parameter must be 'nu' or 'kappa'")
    vals = [float(v) for v in values]
    if any(v < 0 for v in vals):
        raise ValueError("swept values must be nonnegative")
    reference = float(reference)
    steps = [int(round(t / base.dt)) for t in eval_times]
    members = vals if reference in vals else vals + [reference]
    configs = [base.with_params(**{swept: v}) for v in members]
    snaps = run_members(configs, steps, workers, labels=members)
    by_val = dict(zip(members, snaps))
    g = base.grid
    table = []
    for ti, st in zip(eval_times, steps):
        ref = SpectralField(g, by_val[reference][st])
        for v in vals:
            diff = SpectralField(g, by_val[v][st]) - ref
            for s in norms:
                table.append({"value": v, "time": float(ti), "s": float(s), "diff": sobolev_norm(diff, s)})
    rates: dict[str, float] = {}
    monotone = True
    factors = []
    for ti in eval_times:
        for s in norms:
            col = sorted(
                ((r["value"], r["diff"]) for r in table if r["time"] == ti and r["s"] == s and r["value"] != reference),
                key=lambda x: -x[0],
            )
            diffs = [d for _, d in col]
            if len(diffs) >= 2:
                monotone = monotone and all(a > b for a, b in zip(diffs, diffs[1:]))
                factors += [a / b if b > 0 else float("inf") for a, b in zip(diffs, diffs[1:])]
            pos = [(p, d) for p, d in col if p > 0 and d > 0]
            if len(pos) >= 2 and s == norms[0]:
                rates[repr(float(ti))] = float(
                    np.polyfit(np.log([p for p, _ in pos]), np.log([d for _, d in pos]), 1)[0]
                )
    min_factor = min(factors) if factors else None
    passed = monotone
    if required_factor is not None and min_factor is not None:
        passed = passed and min_factor >= required_factor
    return ConvergenceReport(
        swept=swept,
        values=vals,
        reference=reference,
        eval_times=[float(t) for t in eval_times],
        norms=[float(s) for s in norms],
        table=table,
        rates=rates,
        monotone=bool(monotone),
        min_factor=min_factor,
        required_factor=required_factor,
        passed=bool(passed),
    )


def absorbing_ball_check(
    config,
    multipliers: Sequence[float] = (1.0, 5.0, 10.0),
    enter_by: float | None = None,
    workers: int = 1,
    radius_factor: float = 1.1,
) -> tuple[Verdict, dict[float, list[DiagnosticsRecord]]]:
    """Start from data of L2 norm m*R and watch ||theta||_{L2} settle inside R.

    R = radius_factor * ||S||_{H^-1} / kappa.  The entry time of a trajectory
    is the first checkpoint after which it never leaves the ball.
    """
    from .fields import build_field
    from .spectral import l2_norm

    if config.kappa <= 0:
        raise ValueError("absorbing ball needs kappa > 0")
    g = config.grid
    S = build_field(g, config.forcing)
    R = radius_factor * h_minus1_norm(S) / config.kappa
    base = build_field(g, config.initial)
    bnorm = l2_norm(base)
    enter_by = config.t_end if enter_by is None else enter_by
    series: dict[float, list[DiagnosticsRecord]] = {}
    entries: dict[float, float | None] = {}
    members = []
    for m in multipliers:
        spec = dict(config.initial)
        target = m * R if R > 0 else m
        spec["scale"] = float(spec.get("scale", 1.0)) * (target / bnorm if bnorm > 0 else 0.0)
        members.append(config.with_params(initial=spec))
    all_records = _map_members(_record_member, members, min(workers, len(members)))
    for m, records in zip(multipliers, all_records):
        series[float(m)] = records
        l2 = [r.l2 for r in records]
        if R == 0:
            continue
        outside = [i for i, v in enumerate(l2) if v > R]
        if outside and outside[-1] == len(l2) - 1:
            raise NotAbsorbed(m, l2, R)
        entries[float(m)] = records[outside[-1] + 1].t if outside else 0.0
    if R == 0:
        ok = all(
            all(b <= a for a, b in zip([r.l2 for r in s], [r.l2 for r in s][1:])) for s in series.values()
        )
        return Verdict("absorbing_ball", _status(ok), {"radius": 0.0}, "unforced: decay to zero"), series
    ok = all(e is not None and e <= enter_by for e in entries.values())
    measured = {
        "radius": R,
        "forcing_h_minus1": h_minus1_norm(S),
        "entry_times": {repr(k): v for k, v in entries.items()},
        "enter_by": enter_by,
        "t_end": config.t_end,
        "final_l2": {repr(k): s[-1].l2 for k, s in series.items()},
    }
    return Verdict("absorbing_ball", _status(ok), measured), series
