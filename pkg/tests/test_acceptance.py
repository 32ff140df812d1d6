"""Acceptance criteria, each run at its stated tolerance.

Every test records a single PASS/FAIL line; the lines are collected in the
"acceptance criteria" section of the pytest terminal summary.
"""
import json
import math

import numpy as np
import pytest

from activescalar.diagnostics import (
    absorbing_ball_check,
    check_radius_lower_bound,
    convergence_study,
    energy_equality_check,
    uniform_bound_check,
)
from activescalar.evolution import SolverConfig, run
from activescalar.harness.checkpoint import load_checkpoint, save_checkpoint
from activescalar.harness.cli import main
from activescalar.harness.config import expand_preset
from activescalar.laws import LAW_NAMES, ConstitutiveLaw, ipmb_symbol, mg_symbol, sqg_symbol

AUDIT_NUS = (0.0, 1e-3, 0.1, 1.0)


def _lattice(d, K):
    r = np.arange(-K, K + 1)
    ks = np.meshgrid(*([r] * d), indexing="ij")
    ksq = sum(k * k for k in ks)
    keep = (ksq > 0) & (ksq <= K * K)
    return [k[keep] for k in ks], ksq[keep]


def test_criterion_01_symbol_values(criterion):
    cases = [
        (mg_symbol, 0.0, (1, 0, 1), (0.0, -1.0, 0.0)),
        (mg_symbol, 0.0, (0, 1, 1), (2 / 3, -1 / 3, 1 / 3)),
        (mg_symbol, 1.0, (0, 1, 1), (2 / 27, -5 / 27, 5 / 27)),
        (ipmb_symbol, 0.0, (1, 0), (0.0, -1.0)),
        (ipmb_symbol, 0.0, (1, 1), (0.5, -0.5)),
        (ipmb_symbol, 1.0, (1, 1), (1 / 6, -1 / 6)),
        (sqg_symbol, 0.0, (3, 4), (0.8, -0.6)),
        (sqg_symbol, 0.0, (0, 1), (1.0, 0.0)),
        (sqg_symbol, 0.5, (0, 1), (2 / 3, 0.0)),
    ]
    worst = 0.0
    for fn, nu, k, want in cases:
        got = fn(nu, k)
        for g, w in zip(got, want):
            worst = max(worst, abs(g - w) / abs(w) if w else abs(g))
    assert criterion(1, "symbol values", worst <= 1e-14, f"max relative error {worst:.2e}")


def test_criterion_02_divergence_free(criterion):
    worst = 0.0
    for name in LAW_NAMES:
        law = ConstitutiveLaw(name, 0.0)
        ks, _ = _lattice(law.dimension, 32)
        for nu in AUDIT_NUS:
            m, _ = ConstitutiveLaw(name, nu).symbol_arrays(ks)
            worst = max(worst, float(np.max(np.abs(sum(k * mj for k, mj in zip(ks, m))))))
    assert criterion(2, "divergence-free (A1)", worst <= 1e-12, f"sup |k.m| = {worst:.2e}")


def test_criterion_03_smoothing_audit(criterion):
    ks, ksq = _lattice(3, 32)
    mg = {}
    for nu in (0.1, 1.0):
        m, _ = ConstitutiveLaw("mg", nu).symbol_arrays(ks)
        mg[nu] = float(np.max(ksq * np.sqrt((m**2).sum(axis=0))))
    ks2, _ = _lattice(2, 32)
    a2star = 0.0
    for name in ("ipmb", "sqg"):
        for nu in AUDIT_NUS:
            m, _ = ConstitutiveLaw(name, nu).symbol_arrays(ks2)
            a2star = max(a2star, float(np.max(np.sqrt((m**2).sum(axis=0)))))
    ok = all(v <= 3 / nu for nu, v in mg.items()) and a2star <= 1 + 1e-12
    detail = f"MG |k|^2|m|: nu=0.1 -> {mg[0.1]:.4g} (<= 30), nu=1 -> {mg[1.0]:.4g} (<= 3); IPMB/SQG sup|m| = {a2star!r}"
    assert criterion(3, "smoothing audit (A3, A2*)", ok, detail)


def test_criterion_04_symbol_convergence(criterion):
    nus = np.logspace(-3, -1, 9)
    k = (1, 1)
    m0 = np.array(ipmb_symbol(0.0, k))
    gaps = np.array([np.linalg.norm(np.array(ipmb_symbol(nu, k)) - m0) for nu in nus])
    analytic = nus * 2 / (1 + nus * 2) * np.linalg.norm(m0)
    form_err = float(np.max(np.abs(gaps - analytic) / analytic))
    x, y = np.log(nus), np.log(gaps)
    slope, icpt = np.polyfit(x, y, 1)
    r2 = 1 - np.sum((y - (slope * x + icpt)) ** 2) / np.sum((y - y.mean()) ** 2)
    ok = r2 >= 0.999 and abs(slope - 1) <= 0.05 and form_err <= 1e-12
    detail = f"slope {slope:.4f}, R^2 {r2:.6f}, analytic form error {form_err:.1e}"
    assert criterion(4, "symbol convergence (A5)", ok, detail)


def _sqg_128(**kw):
    base = dict(
        law=ConstitutiveLaw("sqg", 0.1), kappa=1.0, gamma=2.0, n=128, dt=1e-3, t_end=2.0,
        initial={"kind": "preset", "name": "smooth-2d"}, checkpoint_every=100,
    )
    base.update(kw)
    return SolverConfig(**base)


def test_criterion_05_energy_equality(criterion):
    cfg = _sqg_128(forcing={"kind": "preset", "name": "cos-x1"})
    v = energy_equality_check(run(cfg).records, tol=1e-6)
    worst = v.measured["max_relative_residual"]
    assert criterion(5, "energy equality", v.passed, f"max relative residual {worst:.2e} over {len(v.measured['per_checkpoint'])} checkpoints")


def test_criterion_06_inviscid_conservation(criterion):
    cfg = _sqg_128(kappa=0.0, t_end=1.0, initial={"kind": "random", "seed": 1, "slope": 3.0, "kmax": 8})
    res = run(cfg)
    assert res.state.step == 1000
    e0, e1 = res.records[0].l2 ** 2, res.records[-1].l2 ** 2
    drift = abs(e1 - e0) / e0
    assert criterion(6, "inviscid conservation", drift <= 1e-8, f"relative ||theta||^2 drift {drift:.2e}")


def test_criterion_07_vanishing_viscosity(criterion, tmp_path):
    code = main(["sweep", "preset:ipmb-nu-sweep", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "convergence.json").read_text())
    col = sorted(((r["value"], r["diff"]) for r in rep["table"] if r["value"] > 0), reverse=True)
    diffs = [d for _, d in col]
    factors = [a / b for a, b in zip(diffs, diffs[1:])]
    ok = code == 0 and all(a > b for a, b in zip(diffs, diffs[1:])) and min(factors) >= 1.5
    detail = "H^2 diffs " + ", ".join(f"{d:.4g}" for d in diffs) + f"; min factor {min(factors):.3f}"
    assert criterion(7, "vanishing-viscosity convergence", ok, detail)


def test_criterion_08_kappa_convergence(criterion):
    p = expand_preset("sqg-critical-kappa-sweep")
    sw = p.sweep
    rep = convergence_study(p.config, sw.param, sw.values, sw.reference, sw.norms, sw.eval_times)
    diffs = [d for _, d in sorted(rep.column(0.5, 1.0), reverse=True) if _ > 0]
    ok = len(diffs) == 3 and all(a > b for a, b in zip(diffs, diffs[1:]))
    assert criterion(8, "kappa convergence", ok, "H^1 diffs " + ", ".join(f"{d:.4g}" for d in diffs))


def test_criterion_09_absorbing_ball(criterion):
    p = expand_preset("absorbing-ball")
    v, series = absorbing_ball_check(p.config, multipliers=(1.0, 5.0, 10.0), enter_by=20.0)
    R = v.measured["radius"]
    inside_after = all(
        all(r.l2 <= R for r in recs if r.t >= v.measured["entry_times"][repr(m)]) for m, recs in series.items()
    )
    ok = v.passed and inside_after and all(recs[-1].t == pytest.approx(40.0) for recs in series.values())
    detail = f"R = {R:.4g}, entry times " + ", ".join(f"{k}x: {t:g}" for k, t in v.measured["entry_times"].items())
    assert criterion(9, "absorbing ball", ok, detail)


def test_criterion_10_gevrey_radius(criterion):
    cfg = SolverConfig(
        law=ConstitutiveLaw("ipmb", 0.1), kappa=0.0, gamma=2.0, n=128, dt=2e-3, t_end=1.0,
        initial={"kind": "gevrey", "tau": 0.7, "s": 1.0, "amplitude": 0.5, "seed": 0},
        checkpoint_every=50, gevrey_s=1.0,
    )
    recs = run(cfg).records
    taus = [r.gevrey_tau for r in recs]
    positive = all(t is not None and t > 0 for t in taus)
    v = check_radius_lower_bound([r.t for r in recs], taus, tolerance=0.10) if positive else None
    ok = positive and abs(taus[0] - 0.7) <= 0.02 and v.status == "pass"
    detail = f"tau(0) {taus[0]:.4f}, tau(1) {taus[-1]:.4f}"
    if v is not None:
        detail += f", log-linear fit residual {v.measured['relative_residual']:.3f}"
    assert criterion(10, "Gevrey radius", ok, detail)


def test_criterion_11_temporal_order(criterion):
    cfg = SolverConfig(
        law=ConstitutiveLaw("sqg", 0.1), kappa=0.01, gamma=1.0, n=64, dt=0.02, t_end=0.4,
        initial={"kind": "preset", "name": "smooth-2d"}, checkpoint_every=10**6,
    )
    finals = [run(cfg.with_params(dt=h)).state.theta.coeffs for h in (0.02, 0.01, 0.005)]
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    order = math.log2(e1 / e2)
    assert criterion(11, "RK4-IF temporal order", order >= 3.5, f"observed order {order:.3f}")


def test_criterion_12_uniform_in_nu(criterion):
    p = expand_preset("mg-diffusive-nu-sweep")
    series = {nu: run(p.config.with_params(nu=nu)).records for nu in (0.0, 0.01, 0.1, 1.0)}
    v = uniform_bound_check(series, s=1.0, window=(1.0, 2.0), factor=3.0)
    sups = ", ".join(f"nu={k:g}: {s:.4g}" for k, s in v.measured["sups"].items())
    assert criterion(12, "uniform-in-nu bound", v.passed, f"ratio {v.measured['ratio']:.4f}; {sups}")


def test_criterion_13_plumbing(criterion, tmp_path):
    doc = {
        "law": "ipmb", "nu": 0.05, "kappa": 0.2, "gamma": 1.5, "n": 32, "d": 2, "dt": 5e-3, "t_end": 0.5,
        "initial": {"kind": "random", "seed": 7}, "forcing": {"kind": "preset", "name": "cos-x2"},
        "checkpoint_every": 10,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(doc))

    half = run(expand_preset("ipmb-nu-sweep").config.with_params(n=32, t_end=0.1), stop_step=25)
    save_checkpoint(half.state, half.config, tmp_path / "mid.aslb")
    back, cfg_back = load_checkpoint(tmp_path / "mid.aslb")
    round_trip = back.theta.coeffs.tobytes() == half.state.theta.coeffs.tobytes() and cfg_back == half.config

    straight, split = tmp_path / "straight", tmp_path / "split"
    codes = [
        main(["run", str(cfg_path), "--out", str(straight)]),
        main(["run", str(cfg_path), "--out", str(split), "--stop-step", "40"]),
        main(["resume", str(split / "checkpoint.aslb"), "--out", str(split)]),
    ]
    names = ("diagnostics.csv", "summary.json", "checkpoint.aslb")
    resumed = all((split / f).read_bytes() == (straight / f).read_bytes() for f in names)

    again = tmp_path / "again"
    codes.append(main(["run", str(cfg_path), "--out", str(again)]))
    seeded = all((again / f).read_bytes() == (straight / f).read_bytes() for f in names)

    ok = round_trip and resumed and seeded and codes == [0, 0, 0, 0]
    detail = f"round trip {round_trip}, resume byte-identical {resumed}, same seed byte-identical {seeded}"
    assert criterion(13, "plumbing", ok, detail)
