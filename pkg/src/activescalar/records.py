"""Per-checkpoint observables and CSV emission."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .spectral import SpectralField, inverse, shell_index, sobolev_norm


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    l2: float
    hs: dict[float, float]
    linf: float
    grad_ld: float
    energy_residual: float
    energy: float
    gevrey_tau: float | None = None
    dealias_energy_fraction: float = 0.0
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {"t": self.t, "step": self.step, "l2": self.l2}
        for s, v in sorted(self.hs.items()):
            row[_hs_key(s)] = v
        row.update(
            linf=self.linf,
            grad_ld=self.grad_ld,
            energy_residual=self.energy_residual,
            gevrey_tau="" if self.gevrey_tau is None else self.gevrey_tau,
            dealias_energy_fraction=self.dealias_energy_fraction,
        )
        return row


def _hs_key(s: float) -> str:
    return f"h{int(s)}" if float(s).is_integer() else f"h{s:g}"


def grad_ld_norm(theta: SpectralField) -> float:
    """||grad theta||_{L^d} under the normalized measure."""
    g = theta.grid
    N = g.logical_modes
    mag2 = np.zeros(g.shape)
    for kj in g.k:
        sym = np.where(g.nyquist, 0.0, 1j * kj)
        comp = sfft.irfftn(sym * theta.coeffs * N, s=g.shape)
        mag2 += comp * comp
    return float(np.mean(mag2 ** (g.d / 2.0)) ** (1.0 / g.d))


def dealias_energy_fraction(theta: SpectralField) -> float:
    g = theta.grid
    K = g.dealias_cutoff
    e = np.abs(theta.coeffs) ** 2 * g.weights
    e = np.where(g.dealias_mask, e, 0.0)
    total = e.sum()
    if total == 0:
        return 0.0
    top = e[shell_index(g) > (2 * K) / 3].sum()
    return float(top / total)


def measure(
    theta: SpectralField,
    t: float,
    step: int,
    hs: Sequence[float],
    energy_residual: float,
    gevrey_s: float | None = None,
) -> DiagnosticsRecord:
    from .diagnostics import InsufficientDecay, estimate_gevrey_radius

    l2 = sobolev_norm(theta, 0.0)
    tau = None
    if gevrey_s is not None:
        try:
            tau = estimate_gevrey_radius(theta, gevrey_s).tau
        except InsufficientDecay:
            tau = None
    return DiagnosticsRecord(
        t=t,
        step=step,
        l2=l2,
        hs={float(s): sobolev_norm(theta, s) for s in hs},
        linf=float(np.max(np.abs(inverse(theta)))),
        grad_ld=grad_ld_norm(theta),
        energy_residual=energy_residual,
        energy=0.5 * l2 * l2,
        gevrey_tau=tau,
        dealias_energy_fraction=dealias_energy_fraction(theta),
    )


def records_to_csv(records: Sequence[DiagnosticsRecord]) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    rows = [r.as_row() for r in records]
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def check_finite(rec: DiagnosticsRecord) -> bool:
    vals = [rec.l2, rec.linf, rec.grad_ld, rec.energy_residual, *rec.hs.values()]
    return all(math.isfinite(v) for v in vals)


def records_from_csv(text: str) -> list[DiagnosticsRecord]:
    """Inverse of ``records_to_csv`` (floats are written with repr, so this is exact)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        hs = {}
        for key, val in row.items():
            if key.startswith("h") and key[1:2].isdigit():
                hs[float(key[1:])] = float(val)
        l2 = float(row["l2"])
        out.append(
            DiagnosticsRecord(
                t=float(row["t"]),
                step=int(row["step"]),
                l2=l2,
                hs=hs,
                linf=float(row["linf"]),
                grad_ld=float(row["grad_ld"]),
                energy_residual=float(row["energy_residual"]),
                energy=0.5 * l2 * l2,
                gevrey_tau=float(row["gevrey_tau"]) if row["gevrey_tau"] else None,
                dealias_energy_fraction=float(row["dealias_energy_fraction"]),
            )
        )
    return out
