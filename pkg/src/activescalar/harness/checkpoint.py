"""Binary checkpoints: fixed little-endian header, embedded config, raw coefficients.

Layout::

    magic "ASLB1" | version u16 | d u8 | n u32 | step i64 | has_prev u8
    t, nu, kappa, gamma, dt, energy0, dissipation_integral, forcing_integral : f64
    law name 8s | config length u32 | config JSON (utf-8)
    theta coefficients : complex128 LE, rfft layout
    previous AB2 right-hand side (only if has_prev)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..evolution import SolverConfig, StepState
from ..spectral import SpectralField, make_grid

MAGIC = b"ASLB1"
VERSION = 1
_HEADER = struct.Struct("<5sHBIqB8d8sI")


class CheckpointError(ValueError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class TruncatedPayload(CheckpointError):
    pass


def save_checkpoint(state: StepState, config: SolverConfig, path: str | Path) -> None:
    g = state.theta.grid
    cfg = json.dumps(config.to_dict(), sort_keys=True).encode()
    has_prev = state.prev_rhs is not None
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        g.d,
        g.n,
        state.step,
        int(has_prev),
        state.t,
        config.law.nu,
        config.kappa,
        config.gamma,
        config.dt,
        state.energy0,
        state.dissipation_integral,
        state.forcing_integral,
        config.law.name.encode().ljust(8, b"\0"),
        len(cfg),
    )
    parts = [header, cfg, np.ascontiguousarray(state.theta.coeffs, dtype="<c16").tobytes()]
    if has_prev:
        parts.append(np.ascontiguousarray(state.prev_rhs, dtype="<c16").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> tuple[StepState, SolverConfig]:
    from .config import solver_config_from_dict

    raw = Path(path).read_bytes()
    if len(raw) < 5 or raw[:5] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint (bad magic)")
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"{path}: header truncated")
    (_, version, d, n, step, has_prev, t, nu, kappa, gamma, dt, e0, diss, forc, law, clen) = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, expected {VERSION}")
    grid = make_grid(d, n)
    count = int(np.prod(grid.spectral_shape))
    off = _HEADER.size
    need = off + clen + 16 * count * (2 if has_prev else 1)
    if len(raw) < need:
        raise TruncatedPayload(f"{path}: expected {need} bytes, found {len(raw)}")
    doc = json.loads(raw[off : off + clen].decode())
    off += clen
    config = solver_config_from_dict(doc)
    theta = np.frombuffer(raw, dtype="<c16", count=count, offset=off).reshape(grid.spectral_shape).astype(np.complex128)
    off += 16 * count
    prev = None
    if has_prev:
        prev = np.frombuffer(raw, dtype="<c16", count=count, offset=off).reshape(grid.spectral_shape).astype(np.complex128)
    state = StepState(
        t=t,
        step=step,
        theta=SpectralField(grid, theta),
        energy0=e0,
        dissipation_integral=diss,
        forcing_integral=forc,
        prev_rhs=prev,
    )
    return state, config
