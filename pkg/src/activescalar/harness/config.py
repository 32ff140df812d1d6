"""JSON run configuration, validation, and the experiment preset table."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from ..evolution import INTEGRATORS, SolverConfig
from ..laws import LAW_DIMENSION, ConstitutiveLaw


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{path}: {message}")


class SchemaViolation(ConfigError):
    pass


class GammaOutOfRange(ConfigError):
    pass


class NegativeKappa(ConfigError):
    pass


class NegativeNu(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class InvalidResolution(ConfigError):
    pass


class UnknownPreset(ConfigError):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("activescalar.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate_document(doc: dict, schema_name: str) -> None:
    """Raise SchemaViolation if an emitted report does not match its shipped schema."""
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise SchemaViolation(errors[0].message, _json_path(errors[0].absolute_path))


def _json_path(parts) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in parts)


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[float, ...]
    reference: float = 0.0
    norms: tuple[float, ...] = (1.0,)
    eval_times: tuple[float, ...] = (0.5,)
    required_factor: float | None = None


@dataclass(frozen=True)
class ExperimentPreset:
    id: str
    kind: str  # trajectory | sweep | absorbing | audit
    config: SolverConfig | None = None
    sweep: SweepSpec | None = None
    diagnostics: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)


_SMOOTH_2D = {"kind": "preset", "name": "smooth-2d"}
_SMOOTH_3D = {"kind": "preset", "name": "smooth-3d"}

PRESET_TABLE: dict[str, dict[str, Any]] = {
    "ipmb-nu-sweep": {
        "kind": "sweep",
        "config": {
            "law": "ipmb", "nu": 0.1, "kappa": 0.0, "gamma": 2.0, "n": 128, "d": 2,
            "dt": 2e-3, "t_end": 0.5, "initial": _SMOOTH_2D, "checkpoint_every": 50,
            "hs": [1.0, 2.0],
        },
        # H^{s-1} with s = 3
        "sweep": {"param": "nu", "values": [0.1, 0.05, 0.025, 0.0125, 0.0], "reference": 0.0,
                  "norms": [2.0], "eval_times": [0.5], "required_factor": 1.5},
        "diagnostics": ["convergence"],
    },
    "sqg-critical-kappa-sweep": {
        "kind": "sweep",
        "config": {
            "law": "sqg", "nu": 0.1, "kappa": 0.1, "gamma": 1.0, "n": 128, "d": 2,
            "dt": 2e-3, "t_end": 0.5, "initial": _SMOOTH_2D, "checkpoint_every": 50,
            "forcing": {"kind": "preset", "name": "cos-x1"},
        },
        "sweep": {"param": "kappa", "values": [0.1, 0.05, 0.025, 0.0], "reference": 0.0,
                  "norms": [1.0], "eval_times": [0.5], "required_factor": None},
        "diagnostics": ["convergence"],
    },
    "mg-diffusive-nu-sweep": {
        "kind": "sweep",
        "config": {
            "law": "mg", "nu": 1.0, "kappa": 1.0, "gamma": 2.0, "n": 32, "d": 3,
            "dt": 2e-3, "t_end": 2.0, "checkpoint_every": 25,
            # amplitude 5 so the advection term, not diffusion alone, sets the H^1 level
            "initial": {"kind": "preset", "name": "smooth-3d", "scale": 5.0},
            "forcing": {"kind": "preset", "name": "single-mode-3d", "scale": 5.0},
        },
        "sweep": {"param": "nu", "values": [1.0, 0.1, 0.01, 0.0], "reference": 0.0,
                  "norms": [1.0], "eval_times": [1.0, 2.0], "required_factor": None},
        "diagnostics": ["convergence", "uniform_bound"],
    },
    "mg-inviscid-gevrey": {
        "kind": "trajectory",
        "config": {
            "law": "mg", "nu": 0.1, "kappa": 0.0, "gamma": 2.0, "n": 64, "d": 3,
            "dt": 5e-3, "t_end": 1.0, "checkpoint_every": 20, "gevrey_s": 1.0,
            "initial": {"kind": "gevrey", "tau": 0.7, "s": 1.0, "amplitude": 0.1, "seed": 0},
        },
        "diagnostics": ["energy", "gevrey_radius", "grad_growth"],
    },
    "absorbing-ball": {
        "kind": "absorbing",
        "config": {
            "law": "mg", "nu": 0.1, "kappa": 1.0, "gamma": 2.0, "n": 32, "d": 3,
            "dt": 2.5e-3, "t_end": 40.0, "checkpoint_every": 200, "cfl_autohalve": True,
            "initial": {"kind": "random", "seed": 0, "slope": 2.0, "kmax": 4},
            "forcing": {"kind": "preset", "name": "single-mode-3d"},
        },
        "params": {"multipliers": [1.0, 5.0, 10.0], "enter_by": 20.0},
        "diagnostics": ["absorbing_ball"],
    },
    "symbol-audit-all": {
        "kind": "audit",
        "params": {"laws": ["mg", "ipmb", "sqg"], "K": 32, "nu": [0.0, 0.1, 1.0],
                   "conditions": {"mg": ["A1", "A2", "A3", "A5"],
                                  "ipmb": ["A1", "A2", "A2*", "A3", "A5"],
                                  "sqg": ["A1", "A2", "A2*", "A3", "A5"]}},
        "diagnostics": ["audit"],
    },
}

PRESET_IDS = tuple(PRESET_TABLE)


def _check_physics(doc: dict) -> None:
    gamma = doc["gamma"]
    if not (0.0 < gamma <= 2.0):
        raise GammaOutOfRange(f"gamma={gamma} outside (0,2]", "$.gamma")
    if doc["kappa"] < 0:
        raise NegativeKappa(f"kappa={doc['kappa']} must be >= 0", "$.kappa")
    if doc["nu"] < 0:
        raise NegativeNu(f"nu={doc['nu']} must be >= 0", "$.nu")
    law = doc["law"]
    if LAW_DIMENSION[law] != doc["d"]:
        raise DimensionMismatch(f"law {law} is {LAW_DIMENSION[law]}D but d={doc['d']}", "$.d")
    n = doc["n"]
    if n % 2 or n < 8:
        raise InvalidResolution(f"n={n} must be even and >= 8", "$.n")
    for key in ("dt", "t_end"):
        if not (doc[key] > 0 and math.isfinite(doc[key])):
            raise ConfigError(f"{key} must be positive", f"$.{key}")
    ratio = doc["t_end"] / doc["dt"]
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ConfigError("t_end must be an integer multiple of dt", "$.t_end")
    sweep = doc.get("sweep")
    if sweep and any(v < 0 for v in sweep["values"]):
        raise ConfigError("swept values must be >= 0", "$.sweep.values")


def _validate(doc: dict) -> None:
    validate_document(doc, "config")


def _normalize(doc: dict) -> dict:
    doc = copy.deepcopy(doc)
    if isinstance(doc.get("law"), str):
        doc["law"] = doc["law"].lower()
    if isinstance(doc.get("integrator"), str):
        doc["integrator"] = doc["integrator"].lower()
    return doc


def solver_config_from_dict(doc: dict) -> SolverConfig:
    """Validated SolverConfig from a plain config document (no preset/sweep)."""
    doc = _normalize(doc)
    _validate(doc)
    _check_physics(doc)
    initial = copy.deepcopy(doc.get("initial", {"kind": "random", "seed": 0}))
    if "seed" in doc and initial.get("kind") in ("random", "gevrey"):
        initial["seed"] = int(doc["seed"])
    integ = doc.get("integrator", "rk4-if")
    if integ not in INTEGRATORS:
        raise ConfigError(f"unknown integrator {integ!r}", "$.integrator")
    return SolverConfig(
        law=ConstitutiveLaw(doc["law"], float(doc["nu"])),
        kappa=float(doc["kappa"]),
        gamma=float(doc["gamma"]),
        n=int(doc["n"]),
        dt=float(doc["dt"]),
        t_end=float(doc["t_end"]),
        integrator=integ,
        initial=initial,
        forcing=copy.deepcopy(doc.get("forcing", {"kind": "zero"})),
        checkpoint_every=int(doc.get("checkpoint_every", 10)),
        hs=tuple(float(s) for s in doc.get("hs", [1.0])),
        gevrey_s=doc.get("gevrey_s"),
        cfl_autohalve=bool(doc.get("cfl_autohalve", False)),
        strict=bool(doc.get("strict", False)),
    )


def expand_preset(preset_id: str, overrides: dict | None = None) -> ExperimentPreset:
    if preset_id not in PRESET_TABLE:
        raise UnknownPreset(f"unknown preset {preset_id!r}; known: {', '.join(PRESET_IDS)}", "$.preset")
    entry = copy.deepcopy(PRESET_TABLE[preset_id])
    overrides = dict(overrides or {})
    params = entry.get("params", {})
    config = None
    if "config" in entry:
        base = entry["config"]
        sweep_over = overrides.pop("sweep", None)
        base.update(overrides)
        config = solver_config_from_dict(base)
        if sweep_over:
            entry["sweep"].update(sweep_over)
    sweep = None
    if "sweep" in entry:
        s = entry["sweep"]
        sweep = SweepSpec(
            param=s["param"],
            values=tuple(float(v) for v in s["values"]),
            reference=float(s.get("reference", 0.0)),
            norms=tuple(float(v) for v in s.get("norms", [1.0])),
            eval_times=tuple(float(v) for v in s.get("eval_times", [0.5])),
            required_factor=s.get("required_factor"),
        )
    return ExperimentPreset(
        id=preset_id,
        kind=entry["kind"],
        config=config,
        sweep=sweep,
        diagnostics=tuple(entry.get("diagnostics", ())),
        params=params,
    )


def parse_config(source: str | Path | dict) -> SolverConfig | ExperimentPreset:
    """Parse a config file (or already-loaded document).

    ``{"preset": ID, ...}`` expands a preset with the remaining keys as
    overrides; a document carrying a ``sweep`` block becomes a custom sweep.
    """
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("config must be a JSON object")
    doc = _normalize(doc)
    if "preset" in doc:
        rest = {k: v for k, v in doc.items() if k != "preset"}
        entry = PRESET_TABLE.get(doc["preset"], {})
        if "config" in entry:
            _validate({**entry["config"], **rest})
        elif rest:
            raise SchemaViolation(f"preset {doc['preset']!r} takes no overrides", "$")
        return expand_preset(doc["preset"], rest)
    if "sweep" in doc:
        _validate(doc)
        cfg = solver_config_from_dict({k: v for k, v in doc.items() if k != "sweep"})
        _check_physics(doc)
        s = doc["sweep"]
        sweep = SweepSpec(
            param=s["param"],
            values=tuple(float(v) for v in s["values"]),
            reference=float(s.get("reference", 0.0)),
            norms=tuple(float(v) for v in s.get("norms", [1.0])),
            eval_times=tuple(float(v) for v in s.get("eval_times", [cfg.t_end])),
            required_factor=s.get("required_factor"),
        )
        return ExperimentPreset(id="custom-sweep", kind="sweep", config=cfg, sweep=sweep, diagnostics=("convergence",))
    return solver_config_from_dict(doc)
