"""Fourier machinery on the periodic box [0, 2*pi]^d.

Fields are stored in the real-transform (rfftn) layout: every axis holds the
full integer range except the last, which keeps only k_d >= 0.  Coefficients
are normalized so that exp(i k.x) has unit coefficient, which makes a Fourier
multiplier literally ``coeffs * m(k)``.

Norms use the normalized measure dx / (2*pi)^d, so the L2 norm squared is the
plain sum of |coeff|^2 over the full lattice (Parseval).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft


class GridError(ValueError):
    pass


class OddResolution(GridError):
    pass


class ShapeMismatch(ValueError):
    pass


class GevreyOverflow(ArithmeticError):
    """A Gevrey norm term exceeds the float64 range."""


_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)


@dataclass(frozen=True, eq=False)
class Grid:
    d: int
    n: int

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    @property
    def logical_modes(self) -> int:
        return self.n**self.d

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumber components, broadcastable to ``spectral_shape``.

        Full axes run over [-n/2+1, n/2]; the Nyquist index is labelled +n/2.
        """
        n = self.n
        full = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        full[n // 2] = n // 2
        half = np.arange(n // 2 + 1, dtype=np.int64)
        out = []
        for axis in range(self.d):
            shape = [1] * self.d
            shape[axis] = -1
            base = half if axis == self.d - 1 else full
            out.append(base.reshape(shape))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 in exact integer arithmetic."""
        total = np.zeros(self.spectral_shape, dtype=np.int64)
        for kj in self.k:
            total = total + kj * kj
        return total

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2.astype(np.float64))

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored mode in the full lattice (1 or 2)."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        w[..., self.n // 2] = 1.0
        return w

    @cached_property
    def nyquist(self) -> np.ndarray:
        mask = np.zeros(self.spectral_shape, dtype=bool)
        for kj in self.k:
            mask = mask | (np.abs(kj) == self.n // 2)
        return mask

    @property
    def dealias_cutoff(self) -> int:
        return self.n // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.spectral_shape, dtype=bool)
        for kj in self.k:
            keep = keep & (3 * np.abs(kj) <= self.n)
        return keep

    def index_of(self, k: Sequence[int]) -> tuple[tuple[int, ...], bool]:
        """Array index holding mode ``k`` and whether it is stored conjugated."""
        k = tuple(int(c) for c in k)
        if len(k) != self.d:
            raise ShapeMismatch(f"wavevector {k} does not have {self.d} components")
        h = self.n // 2
        if any(c < -h or c > h for c in k):
            raise GridError(f"wavevector {k} outside the resolved range")
        # -n/2 aliases onto the Nyquist label +n/2
        k = tuple(h if c == -h else c for c in k)
        conj = k[-1] < 0
        if conj:
            k = tuple(h if c == h else -c for c in k)
        idx = tuple(c % self.n for c in k[:-1]) + (k[-1],)
        return idx, conj

    def coords(self) -> tuple[np.ndarray, ...]:
        x = 2.0 * np.pi * np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))


@lru_cache(maxsize=None)
def make_grid(d: int, n: int) -> Grid:
    if d not in (2, 3):
        raise GridError(f"dimension must be 2 or 3, got {d}")
    if n % 2:
        raise OddResolution(f"resolution must be even, got {n}")
    if n < 8:
        raise GridError(f"resolution must be at least 8, got {n}")
    return Grid(d, n)


@dataclass(eq=False)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.spectral_shape:
            raise ShapeMismatch(
                f"coefficient array {self.coeffs.shape} does not match {self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.spectral_shape, dtype=np.complex128))

    @classmethod
    def from_modes(cls, grid: Grid, modes: Iterable[tuple[Sequence[int], complex]]) -> "SpectralField":
        """Build a real field from (k, c) pairs; the partner -k gets conj(c)."""
        f = cls.zeros(grid)
        for k, c in modes:
            f.set_coeff(k, c)
        return f

    def coeff(self, k: Sequence[int]) -> complex:
        idx, conj = self.grid.index_of(k)
        c = complex(self.coeffs[idx])
        return c.conjugate() if conj else c

    def set_coeff(self, k: Sequence[int], c: complex) -> None:
        """Set coeff(k) = c and coeff(-k) = conj(c) where -k is stored."""
        idx, conj = self.grid.index_of(k)
        self.coeffs[idx] = np.conj(c) if conj else c
        kneg = tuple(-int(v) for v in k)
        if all(v == 0 for v in k):
            return
        if kneg[-1] == 0 or abs(kneg[-1]) == self.grid.n // 2:
            # the partner lives in the same stored plane
            idx2, conj2 = self.grid.index_of(kneg)
            self.coeffs[idx2] = c if conj2 else np.conj(c)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * a)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass(eq=False)
class VectorField:
    grid: Grid
    components: tuple[SpectralField, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.components) != self.grid.d:
            raise ShapeMismatch(f"expected {self.grid.d} components, got {len(self.components)}")

    def __getitem__(self, j: int) -> SpectralField:
        return self.components[j]


def forward(grid: Grid, samples: np.ndarray) -> SpectralField:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != grid.shape:
        raise ShapeMismatch(f"samples {samples.shape} do not match grid {grid.shape}")
    return SpectralField(grid, sfft.rfftn(samples) / grid.logical_modes)


def inverse(f: SpectralField) -> np.ndarray:
    g = f.grid
    return sfft.irfftn(f.coeffs * g.logical_modes, s=g.shape)


def full_spectrum(f: SpectralField) -> np.ndarray:
    """Expand the half layout to the full complex spectrum."""
    g = f.grid
    n = g.n
    out = np.zeros(g.shape, dtype=np.complex128)
    out[..., : n // 2 + 1] = f.coeffs
    # k_d in (n/2, n) is the conjugate of the mode at -k
    for kd in range(n // 2 + 1, n):
        src = f.coeffs[..., n - kd]
        for axis in range(g.d - 1):
            src = np.roll(np.flip(src, axis=axis), 1, axis=axis)
        out[..., kd] = np.conj(src)
    return out


def imag_residual(f: SpectralField) -> float:
    """Max |Im| of the complex inverse transform; zero for an exactly Hermitian field."""
    full = full_spectrum(f)
    return float(np.max(np.abs(np.fft.ifftn(full).imag))) * f.grid.logical_modes


def project_zero_mean(f: SpectralField) -> SpectralField:
    out = f.copy()
    out.coeffs[(0,) * f.grid.d] = 0.0
    return out


def fractional_laplacian(f: SpectralField, gamma: float) -> SpectralField:
    if not (0.0 < gamma <= 2.0):
        raise ValueError(f"gamma must lie in (0,2], got {gamma}")
    g = f.grid
    sym = g.kmag**gamma
    sym[g.nyquist] = 0.0
    return SpectralField(g, f.coeffs * sym)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def _weighted_sum(terms: np.ndarray) -> float:
    return math.fsum(terms.ravel().tolist())


def l2_norm(f: SpectralField) -> float:
    return sobolev_norm(f, 0.0)


def sobolev_norm(f: SpectralField, s: float) -> float:
    g = f.grid
    nz = g.k2 > 0
    a2 = np.abs(f.coeffs[nz]) ** 2
    if s != 0:
        a2 = a2 * g.k2[nz].astype(np.float64) ** s
    return math.sqrt(_weighted_sum(a2 * g.weights[nz]))


def gevrey_norm(f: SpectralField, tau: float, s: float = 1.0, r: float = 0.0) -> float:
    """sqrt(sum_{k != 0} |k|^{2r} e^{2 tau |k|^{1/s}} |c_k|^2).

    Raises GevreyOverflow instead of returning inf.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if s < 1:
        raise ValueError("Gevrey index s must be >= 1")
    if tau == 0:
        return sobolev_norm(f, r)
    g = f.grid
    nz = (g.k2 > 0) & (f.coeffs != 0)
    if not nz.any():
        return 0.0
    kmag = g.kmag[nz]
    logterm = (
        2.0 * tau * kmag ** (1.0 / s)
        + 2.0 * r * np.log(kmag)
        + 2.0 * np.log(np.abs(f.coeffs[nz]))
        + np.log(g.weights[nz])
    )
    top = float(logterm.max())
    if top > _LOG_FLOAT_MAX:
        raise GevreyOverflow(f"Gevrey term e^{top:.1f} exceeds float range")
    total = _weighted_sum(np.exp(logterm - top))
    log_total = top + math.log(total)
    if log_total > _LOG_FLOAT_MAX:
        raise GevreyOverflow(f"Gevrey sum e^{log_total:.1f} exceeds float range")
    return math.exp(0.5 * log_total)


def random_phases(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus Hermitian phases taken from the transform of real white noise."""
    c = sfft.rfftn(rng.standard_normal(grid.shape))
    mag = np.abs(c)
    mag[mag == 0] = 1.0
    return c / mag


def shell_index(grid: Grid) -> np.ndarray:
    """Integer shell number ceil(|k|) of each stored mode (0 for k = 0)."""
    return np.ceil(grid.kmag - 1e-12).astype(np.int64)
