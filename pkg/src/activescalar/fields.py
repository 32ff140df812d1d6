"""Builders for initial data and forcing from small JSON-friendly specs.

Spec forms::

    {"kind": "zero"}
    {"kind": "preset", "name": "cos-x1"}
    {"kind": "modes", "modes": [{"k": [1, 0], "c": [0.5, 0.0]}, ...]}
    {"kind": "random", "seed": 0, "slope": 2.0, "l2": 1.0, "kmax": 8}
    {"kind": "gevrey", "seed": 0, "tau": 0.7, "s": 1.0, "amplitude": 1.0}

Every result is dealiased and projected to zero mean.
"""
from __future__ import annotations

from typing import Any

import numpy as np

from .spectral import (
    Grid,
    SpectralField,
    dealias,
    forward,
    l2_norm,
    project_zero_mean,
    random_phases,
)

FIELD_KINDS = ("zero", "preset", "modes", "random", "gevrey")


def _cos_modes(d: int, axis: int, kval: int = 1, amp: float = 1.0) -> list:
    k = [0] * d
    k[axis] = kval
    return [(k, 0.5 * amp)]


def _smooth_2d(grid: Grid) -> SpectralField:
    x1, x2 = grid.coords()
    theta = np.sin(x1) * np.cos(x2) + 0.5 * np.cos(2 * x1 + x2) + 0.3 * np.sin(x1 - 2 * x2)
    return forward(grid, theta)


def _smooth_3d(grid: Grid) -> SpectralField:
    x1, x2, x3 = grid.coords()
    theta = (
        np.sin(x1 + x3) * np.cos(x2)
        + 0.5 * np.cos(x1 + x2 + 2 * x3)
        + 0.4 * np.sin(2 * x2 - x3)
        + 0.3 * np.cos(x1 - x2)
    )
    return forward(grid, theta)


def _forcing_3d(grid: Grid) -> SpectralField:
    x1, x2, x3 = grid.coords()
    return forward(grid, np.sin(x1 + x2 + x3))


PRESETS = {
    "cos-x1": lambda g: SpectralField.from_modes(g, _cos_modes(g.d, 0)),
    "cos-x2": lambda g: SpectralField.from_modes(g, _cos_modes(g.d, 1)),
    "smooth-2d": _smooth_2d,
    "smooth-3d": _smooth_3d,
    "single-mode-3d": _forcing_3d,
}


def build_field(grid: Grid, spec: dict[str, Any] | None) -> SpectralField:
    if spec is None:
        return SpectralField.zeros(grid)
    kind = spec.get("kind", "zero")
    scale = float(spec.get("scale", 1.0))
    if kind == "zero":
        f = SpectralField.zeros(grid)
    elif kind == "preset":
        name = spec["name"]
        if name not in PRESETS:
            raise ValueError(f"unknown field preset {name!r}")
        f = PRESETS[name](grid)
    elif kind == "modes":
        f = SpectralField.zeros(grid)
        for entry in spec["modes"]:
            re, im = entry["c"]
            f.set_coeff(entry["k"], complex(re, im))
    elif kind == "random":
        f = random_power_law(
            grid,
            seed=int(spec.get("seed", 0)),
            slope=float(spec.get("slope", 2.0)),
            l2=float(spec.get("l2", 1.0)),
            kmax=spec.get("kmax"),
        )
    elif kind == "gevrey":
        f = planted_gevrey(
            grid,
            seed=int(spec.get("seed", 0)),
            tau=float(spec["tau"]),
            s=float(spec.get("s", 1.0)),
            amplitude=float(spec.get("amplitude", 1.0)),
        )
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    f = project_zero_mean(dealias(f))
    if scale != 1.0:
        f = f * scale
    return f


def random_power_law(
    grid: Grid, seed: int = 0, slope: float = 2.0, l2: float = 1.0, kmax: float | None = None
) -> SpectralField:
    """|c_k| = A |k|^-slope with random Hermitian phases, scaled to the given L2 norm."""
    rng = np.random.default_rng(seed)
    phases = random_phases(grid, rng)
    kmag = grid.kmag
    amp = np.zeros(grid.spectral_shape)
    nz = grid.k2 > 0
    amp[nz] = kmag[nz] ** (-slope)
    if kmax is not None:
        amp[kmag > float(kmax)] = 0.0
    f = project_zero_mean(dealias(SpectralField(grid, amp * phases)))
    norm = l2_norm(f)
    if norm == 0:
        return f
    return f * (l2 / norm)


def planted_gevrey(
    grid: Grid, seed: int = 0, tau: float = 0.7, s: float = 1.0, amplitude: float = 1.0
) -> SpectralField:
    """|c_k| = amplitude * exp(-tau |k|^{1/s}) with random Hermitian phases."""
    rng = np.random.default_rng(seed)
    phases = random_phases(grid, rng)
    amp = amplitude * np.exp(-tau * grid.kmag ** (1.0 / s))
    amp[grid.k2 == 0] = 0.0
    return project_zero_mean(dealias(SpectralField(grid, amp * phases)))
