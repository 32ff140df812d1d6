"""Time integration of d_t theta + u.grad theta = -kappa Lambda^gamma theta + S.

The dissipation is integrated exactly per mode through an integrating factor
exp(-kappa |k|^gamma t); advection and forcing are explicit (Lawson RK4 or AB2).
Alongside theta the stepper integrates the two energy-budget integrals
kappa * int ||Lambda^{gamma/2} theta||^2 and int <S, theta> with the same
quadrature the integrator uses, so the energy residual measures the scheme
rather than a post-hoc quadrature of checkpoints.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable

import numpy as np
import scipy.fft as sfft

from .fields import build_field
from .laws import ConstitutiveLaw, compute_velocity
from .records import DiagnosticsRecord, measure
from .spectral import Grid, SpectralField, VectorField, make_grid

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4-if", "ab2-if")
BLOWUP_THRESHOLD = 1e12
CFL_LIMIT = 0.5


class BlowUp(RuntimeError):
    def __init__(self, t: float, step: int, records: list | None = None, reason: str = ""):
        self.t = t
        self.step = step
        self.records = list(records or [])
        self.reason = reason
        super().__init__(f"blow-up at t={t:g} (step {step}){': ' + reason if reason else ''}")

    def __reduce__(self):
        return (BlowUp, (self.t, self.step, self.records, self.reason))


class CFLWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    law: ConstitutiveLaw
    kappa: float
    gamma: float
    n: int
    dt: float
    t_end: float
    integrator: str = "rk4-if"
    initial: dict = field(default_factory=lambda: {"kind": "random", "seed": 0})
    forcing: dict = field(default_factory=lambda: {"kind": "zero"})
    checkpoint_every: int = 10
    hs: tuple[float, ...] = (1.0,)
    gevrey_s: float | None = None
    cfl_autohalve: bool = False
    strict: bool = False

    @property
    def d(self) -> int:
        return self.law.dimension

    @property
    def grid(self) -> Grid:
        return make_grid(self.d, self.n)

    @property
    def nsteps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict[str, Any]:
        return {
            "law": self.law.name,
            "nu": self.law.nu,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "n": self.n,
            "d": self.d,
            "dt": self.dt,
            "t_end": self.t_end,
            "integrator": self.integrator,
            "initial": self.initial,
            "forcing": self.forcing,
            "checkpoint_every": self.checkpoint_every,
            "hs": list(self.hs),
            "gevrey_s": self.gevrey_s,
            "cfl_autohalve": self.cfl_autohalve,
            "strict": self.strict,
        }

    def with_params(self, **kw) -> "SolverConfig":
        """Copy with ``nu`` routed into the law and anything else replaced."""
        if "nu" in kw:
            kw["law"] = ConstitutiveLaw(self.law.name, float(kw.pop("nu")))
        return replace(self, **kw)


@dataclass
class StepState:
    t: float
    step: int
    theta: SpectralField
    velocity: VectorField | None = None
    energy0: float = 0.0
    dissipation_integral: float = 0.0
    forcing_integral: float = 0.0
    prev_rhs: np.ndarray | None = None

    @property
    def energy_residual(self) -> float:
        e = 0.5 * float(np.sum(np.abs(self.theta.coeffs) ** 2 * self.theta.grid.weights))
        return e - self.energy0 + self.dissipation_integral - self.forcing_integral


class Stepper:
    """Precomputed operators for one configuration."""

    def __init__(self, config: SolverConfig, nonlinear: bool = True):
        if config.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {config.integrator!r}")
        self.config = config
        self.nonlinear = nonlinear
        g = self.grid = config.grid
        self.N = g.logical_modes
        self.dt = config.dt
        keep = g.dealias_mask & (g.k2 > 0)
        self.keep = keep.astype(np.float64)
        self.mult = config.law.multipliers(g) * self.keep
        self.ik = np.stack([np.where(g.nyquist, 0.0, 1j * kj) * self.keep for kj in g.k])
        lam = np.zeros(g.spectral_shape)
        if config.kappa > 0:
            lam = config.kappa * g.kmag**config.gamma
        lam = np.where(g.k2 > 0, lam, 0.0)
        self.lam = lam
        self.forcing = build_field(g, config.forcing).coeffs * self.keep
        self._set_dt(config.dt)
        self.w = g.weights

    def _set_dt(self, dt: float) -> None:
        self.dt = dt
        self.E1 = np.exp(-self.lam * dt)
        self.Eh = np.exp(-self.lam * dt / 2)
        self.E2 = np.exp(-self.lam * 2 * dt)

    def nonlinear_coeffs(self, th: np.ndarray) -> np.ndarray:
        """-(u.grad theta)^ for dealiased coefficients ``th``."""
        shape = self.grid.shape
        thN = th * self.N
        prod = None
        for j in range(self.grid.d):
            u = sfft.irfftn(self.mult[j] * thN, s=shape)
            dth = sfft.irfftn(self.ik[j] * thN, s=shape)
            prod = u * dth if prod is None else prod + u * dth
        out = sfft.rfftn(prod)
        out *= -self.keep / self.N
        return out

    def rhs(self, th: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return self.forcing
        return self.nonlinear_coeffs(th) + self.forcing

    def dissipation_rate(self, th: np.ndarray) -> float:
        return float(np.sum(self.lam * np.abs(th) ** 2 * self.w))

    def forcing_rate(self, th: np.ndarray) -> float:
        return float(np.sum((self.forcing.real * th.real + self.forcing.imag * th.imag) * self.w))

    def _budget(self, th: np.ndarray) -> tuple[float, float]:
        return self.dissipation_rate(th), self.forcing_rate(th)

    def advance(self, state: StepState) -> StepState:
        h = self.dt
        th = state.theta.coeffs
        if self.config.integrator == "ab2-if" and state.prev_rhs is not None:
            f0 = self.rhs(th)
            new = self.E1 * th + h * (1.5 * self.E1 * f0 - 0.5 * self.E2 * state.prev_rhs)
            d0, s0 = self._budget(th)
            d1, s1 = self._budget(new)
            dd = 0.5 * h * (d0 + d1)
            ds = 0.5 * h * (s0 + s1)
            prev = f0
        else:
            k1 = self.rhs(th)
            th2 = self.Eh * (th + 0.5 * h * k1)
            k2 = self.rhs(th2)
            th3 = self.Eh * th + 0.5 * h * k2
            k3 = self.rhs(th3)
            th4 = self.E1 * th + h * self.Eh * k3
            k4 = self.rhs(th4)
            new = self.E1 * th + (h / 6.0) * (self.E1 * k1 + 2.0 * self.Eh * (k2 + k3) + k4)
            b = [self._budget(x) for x in (th, th2, th3, th4)]
            dd = (h / 6.0) * (b[0][0] + 2 * b[1][0] + 2 * b[2][0] + b[3][0])
            ds = (h / 6.0) * (b[0][1] + 2 * b[1][1] + 2 * b[2][1] + b[3][1])
            prev = k1 if self.config.integrator == "ab2-if" else None
        new[(0,) * self.grid.d] = 0.0
        step = state.step + 1
        t = step * h
        h1sq = float(np.sum(self.grid.k2 * np.abs(new) ** 2 * self.w))
        if not math.isfinite(h1sq) or h1sq > BLOWUP_THRESHOLD**2:
            raise BlowUp(t, step, reason="non-finite or H^1 norm above 1e12")
        return StepState(
            t=t,
            step=step,
            theta=SpectralField(self.grid, new),
            velocity=None,
            energy0=state.energy0,
            dissipation_integral=state.dissipation_integral + dd,
            forcing_integral=state.forcing_integral + ds,
            prev_rhs=prev,
        )


def nonlinear_term(theta: SpectralField, law: ConstitutiveLaw) -> SpectralField:
    """-(u.grad theta)^, dealiased and mean-free."""
    cfg = SolverConfig(law=law, kappa=0.0, gamma=2.0, n=theta.grid.n, dt=1.0, t_end=1.0)
    if theta.grid.d != law.dimension:
        raise ValueError(f"law {law.name} is {law.dimension}D, field is {theta.grid.d}D")
    out = Stepper(cfg).nonlinear_coeffs(theta.coeffs)
    if not np.all(np.isfinite(out)):
        raise BlowUp(0.0, 0, reason="non-finite nonlinear product")
    return SpectralField(theta.grid, out)


def initial_state(config: SolverConfig) -> StepState:
    theta = build_field(config.grid, config.initial)
    e0 = 0.5 * float(np.sum(np.abs(theta.coeffs) ** 2 * theta.grid.weights))
    return StepState(t=0.0, step=0, theta=theta, energy0=e0)


def step(state: StepState, config: SolverConfig, stepper: Stepper | None = None) -> StepState:
    return (stepper or Stepper(config)).advance(state)


def max_velocity(law: ConstitutiveLaw, theta: SpectralField) -> float:
    from .spectral import inverse

    u = compute_velocity(law, theta)
    return max(float(np.max(np.abs(inverse(c)))) for c in u.components)


def check_cfl(config: SolverConfig, theta: SpectralField) -> tuple[float, SolverConfig]:
    """Return (CFL number, possibly dt-halved config); warns or raises on violation."""
    umax = max_velocity(config.law, theta)
    K = config.grid.dealias_cutoff
    cfl = config.dt * K * umax
    if cfl <= CFL_LIMIT:
        return cfl, config
    msg = f"CFL number {cfl:.3g} exceeds {CFL_LIMIT} at t=0 (dt={config.dt:g})"
    if config.strict:
        raise ValueError(msg)
    if config.cfl_autohalve:
        cfg = config
        while cfg.dt * K * umax > CFL_LIMIT:
            # keep checkpoints at the same physical times
            cfg = replace(cfg, dt=cfg.dt / 2, checkpoint_every=cfg.checkpoint_every * 2)
        warnings.warn(msg + f"; dt halved to {cfg.dt:g}", CFLWarning, stacklevel=2)
        return cfg.dt * K * umax, cfg
    warnings.warn(msg, CFLWarning, stacklevel=2)
    return cfl, config


@dataclass
class RunResult:
    state: StepState
    records: list[DiagnosticsRecord]
    snapshots: dict[int, SpectralField] = field(default_factory=dict)
    config: SolverConfig | None = None

    def __iter__(self):
        yield self.state
        yield self.records


def run(
    config: SolverConfig,
    state: StepState | None = None,
    snapshot_steps: Iterable[int] = (),
    on_checkpoint: Callable[[StepState, DiagnosticsRecord, SolverConfig], None] | None = None,
    stop_step: int | None = None,
    stepper: Stepper | None = None,
) -> RunResult:
    """Advance to ``t_end`` (or ``stop_step``), recording diagnostics every checkpoint.

    A fresh run records t=0 too; a resumed run (``state`` given) does not
    repeat the record at its starting step.
    """
    records: list[DiagnosticsRecord] = []
    if state is None:
        state = initial_state(config)
        _, config = check_cfl(config, state.theta)
        records.append(_record(config, state))
        if on_checkpoint:
            on_checkpoint(state, records[-1], config)
    stepper = stepper or Stepper(config)
    wanted = set(int(s) for s in snapshot_steps)
    snapshots: dict[int, SpectralField] = {}
    if state.step in wanted:
        snapshots[state.step] = state.theta.copy()
    last = config.nsteps if stop_step is None else min(stop_step, config.nsteps)
    try:
        while state.step < last:
            state = stepper.advance(state)
            if state.step in wanted:
                snapshots[state.step] = state.theta.copy()
            if state.step % config.checkpoint_every == 0 or state.step == config.nsteps:
                records.append(_record(config, state))
                if on_checkpoint:
                    on_checkpoint(state, records[-1], config)
    except BlowUp as exc:
        exc.records = records
        raise
    state.velocity = compute_velocity(config.law, state.theta)
    return RunResult(state, records, snapshots, config)


def _record(config: SolverConfig, state: StepState) -> DiagnosticsRecord:
    return measure(
        state.theta,
        state.t,
        state.step,
        config.hs,
        state.energy_residual,
        config.gevrey_s,
    )
