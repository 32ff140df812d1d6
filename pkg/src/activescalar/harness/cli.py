"""Command-line entry point: run, sweep, audit, report, resume.

Exit codes: 0 success, 1 a verdict failed, 2 usage or configuration error,
3 the solver blew up.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Sequence

from ..diagnostics import (
    NotAbsorbed,
    SweepAborted,
    Verdict,
    absorbing_ball_check,
    check_radius_lower_bound,
    convergence_study,
    energy_equality_check,
    grad_growth_check,
)
from ..evolution import BlowUp, SolverConfig, Stepper, run
from ..fields import build_field
from ..laws import CONDITIONS, LAW_NAMES, audit_condition
from ..records import DiagnosticsRecord, records_to_csv
from ..spectral import l2_norm
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentPreset, expand_preset, parse_config, validate_document

log = logging.getLogger("activescalar")

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2, 3
CSV_NAME = "diagnostics.csv"
CHECKPOINT_NAME = "checkpoint.aslb"


class UsageError(Exception):
    pass


def _dump(path: Path, obj: dict, schema: str) -> None:
    validate_document(obj, schema)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("ASL_OUT_DIR") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_target(args) -> SolverConfig | ExperimentPreset:
    target = getattr(args, "target", None)
    preset = args.preset
    config = args.config
    if target:
        if target.startswith("preset:"):
            preset = preset or target.split(":", 1)[1]
        else:
            config = config or target
    if preset and config:
        raise UsageError("give either a config or a preset, not both")
    if preset:
        parsed = expand_preset(preset)
    elif config:
        parsed = parse_config(config)
    else:
        raise UsageError("a --config PATH or --preset ID is required")
    return parsed


def _apply_flags(cfg: SolverConfig, args) -> SolverConfig:
    kw = {}
    if getattr(args, "seed", None) is not None and cfg.initial.get("kind") in ("random", "gevrey"):
        kw["initial"] = {**cfg.initial, "seed": int(args.seed)}
    if getattr(args, "checkpoint_every", None):
        kw["checkpoint_every"] = int(args.checkpoint_every)
    if getattr(args, "strict", False):
        kw["strict"] = True
    return cfg.with_params(**kw) if kw else cfg


def _summary(config: SolverConfig, records: Sequence[DiagnosticsRecord], verdicts: Sequence[Verdict]) -> dict:
    last = records[-1]
    return {
        "config": config.to_dict(),
        "final": {
            "t": last.t,
            "step": last.step,
            "l2": last.l2,
            "hs": {repr(k): v for k, v in sorted(last.hs.items())},
            "linf": last.linf,
            "energy_residual": last.energy_residual,
        },
        "n_records": len(records),
        "verdicts": [v.to_dict() for v in verdicts],
        "status": "pass" if all(v.status != "fail" for v in verdicts) else "fail",
    }


def _trajectory_verdicts(config: SolverConfig, records, diagnostics: Sequence[str]) -> list[Verdict]:
    verdicts = [energy_equality_check(records)]
    if "gevrey_radius" in diagnostics:
        times = [r.t for r in records if r.gevrey_tau is not None]
        taus = [r.gevrey_tau for r in records if r.gevrey_tau is not None]
        theta0 = build_field(config.grid, config.initial)
        forcing = build_field(config.grid, config.forcing)
        verdicts.append(
            check_radius_lower_bound(times, taus, theta0, forcing if l2_norm(forcing) > 0 else None, config.gevrey_s or 1.0)
        )
    if "grad_growth" in diagnostics:
        forced = l2_norm(build_field(config.grid, config.forcing)) > 0
        verdicts.append(grad_growth_check(records, forced=forced))
    return verdicts


def _run_trajectory(config: SolverConfig, out: Path, diagnostics=(), stop_step=None, state=None, prior=()) -> int:
    def on_ck(st, rec, cfg):
        save_checkpoint(st, cfg, out / CHECKPOINT_NAME)

    result = run(config, state=state, on_checkpoint=on_ck, stop_step=stop_step)
    records = list(prior) + result.records
    (out / CSV_NAME).write_text(records_to_csv(records))
    save_checkpoint(result.state, result.config, out / CHECKPOINT_NAME)
    if result.state.step < result.config.nsteps:
        print(f"stopped at step {result.state.step}; resume from {out / CHECKPOINT_NAME}")
        return EXIT_OK
    verdicts = _trajectory_verdicts(result.config, records, diagnostics)
    summary = _summary(result.config, records, verdicts)
    _dump(out / "summary.json", summary, "run_summary")
    for v in verdicts:
        print(f"{v.check}: {v.status}")
    return EXIT_OK if summary["status"] == "pass" else EXIT_VERDICT


def cmd_run(args) -> int:
    target = _resolve_target(args)
    out = _out_dir(args)
    if isinstance(target, ExperimentPreset):
        if target.kind == "trajectory":
            return _run_trajectory(_apply_flags(target.config, args), out, target.diagnostics, args.stop_step)
        if target.kind == "absorbing":
            cfg = _apply_flags(target.config, args)
            verdict, series = absorbing_ball_check(
                cfg,
                multipliers=target.params.get("multipliers", (1.0, 5.0, 10.0)),
                enter_by=target.params.get("enter_by"),
                workers=min(args.workers or os.cpu_count() or 1, 3),
            )
            for m, recs in series.items():
                (out / f"absorbing_{m:g}x.csv").write_text(records_to_csv(recs))
            _dump(out / "absorbing.json", verdict.to_dict(), "verdict")
            print(f"{verdict.check}: {verdict.status}")
            return EXIT_OK if verdict.status != "fail" else EXIT_VERDICT
        raise UsageError(f"preset {target.id!r} is a {target.kind} preset; use the "
                         f"'{'sweep' if target.kind == 'sweep' else 'audit'}' subcommand")
    return _run_trajectory(_apply_flags(target, args), out, (), args.stop_step)


def cmd_sweep(args) -> int:
    target = _resolve_target(args)
    if not isinstance(target, ExperimentPreset) or target.kind != "sweep":
        raise UsageError("sweep needs a sweep preset or a config with a 'sweep' block")
    out = _out_dir(args)
    cfg = _apply_flags(target.config, args)
    sw = target.sweep
    workers = args.workers or os.cpu_count() or 1
    report = convergence_study(
        cfg,
        sw.param,
        sw.values,
        reference=sw.reference,
        norms=sw.norms,
        eval_times=sw.eval_times,
        required_factor=sw.required_factor,
        workers=min(workers, len(sw.values)),
    )
    report.labels = {"preset": target.id}
    _dump(out / "convergence.json", report.to_dict(), "convergence_report")
    print(f"convergence ({target.id}): {'pass' if report.passed else 'fail'}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def _parse_nu(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --nu list {text!r}") from exc


def cmd_audit(args) -> int:
    out = _out_dir(args)
    if args.preset or (args.target and args.target.startswith("preset:")):
        pid = args.preset or args.target.split(":", 1)[1]
        preset = expand_preset(pid)
        if preset.kind != "audit":
            raise UsageError(f"preset {pid!r} is not an audit preset")
        laws = preset.params["laws"]
        conditions = preset.params["conditions"]
        K = preset.params["K"]
        nus = preset.params["nu"]
    else:
        if not args.law:
            raise UsageError("audit needs --law or --preset")
        laws = [args.law.lower()]
        conditions = args.condition or ["A1"]
        K = args.K
        nus = _parse_nu(args.nu)
    ok = True
    for law in laws:
        if law not in LAW_NAMES:
            raise UsageError(f"unknown law {law!r}")
        for cond in (conditions[law] if isinstance(conditions, dict) else conditions):
            if cond not in CONDITIONS:
                raise UsageError(f"unknown condition {cond!r} (A4 is not audited)")
            rep = audit_condition(law, cond, K, nus)
            fname = f"audit_{law}_{cond.replace('*', 'star')}.json"
            _dump(out / fname, rep.to_dict(), "audit_report")
            print(f"{law} {cond}: {'pass' if rep.passed else 'fail'} (sup={rep.measured_sup:.6g})")
            ok = ok and rep.passed
    return EXIT_OK if ok else EXIT_VERDICT


def _describe(name: str, doc: dict) -> tuple[str, str, str]:
    if "condition" in doc:
        return (name, "pass" if doc["pass"] else "fail", f"{doc['law']} {doc['condition']} sup={doc['measured_sup']:.4g}")
    if "swept" in doc:
        return (name, "pass" if doc["pass"] else "fail", f"{doc['swept']} sweep, min factor {doc.get('min_factor')}")
    if "verdicts" in doc:
        inner = ", ".join(f"{v['check']}={v['status']}" for v in doc["verdicts"])
        return (name, doc["status"], inner)
    if "check" in doc:
        return (name, doc["status"], doc.get("message", ""))
    return (name, "?", "")


def cmd_report(args) -> int:
    src = Path(args.dir or args.out or os.environ.get("ASL_OUT_DIR") or "out")
    if not src.is_dir():
        raise UsageError(f"no output directory {src}")
    rows = []
    for path in sorted(src.glob("*.json")):
        try:
            rows.append(_describe(path.name, json.loads(path.read_text())))
        except (json.JSONDecodeError, KeyError):
            rows.append((path.name, "?", "unreadable"))
    if not rows:
        raise UsageError(f"no reports in {src}")
    w = max(len(r[0]) for r in rows)
    lines = [f"{'file'.ljust(w)}  status        details", "-" * (w + 40)]
    lines += [f"{a.ljust(w)}  {b.ljust(12)}  {c}" for a, b, c in rows]
    text = "\n".join(lines) + "\n"
    (src / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_resume(args) -> int:
    from ..records import records_from_csv

    state, config = load_checkpoint(args.checkpoint)
    out = _out_dir(args)
    prior = []
    csv_path = out / CSV_NAME
    if csv_path.exists():
        prior = [r for r in records_from_csv(csv_path.read_text()) if r.step <= state.step]
    return _run_trajectory(config, out, (), None, state=state, prior=prior)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activescalar", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, target=True):
        if target:
            sp.add_argument("target", nargs="?", help="config path or preset:ID")
            sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--preset", help="experiment preset id")
        sp.add_argument("--out", help="output directory (default $ASL_OUT_DIR or ./out)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
        sp.add_argument("--strict", action="store_true", help="warnings become errors")

    sp = sub.add_parser("run", help="single trajectory (or absorbing-ball preset)")
    common(sp)
    sp.add_argument("--stop-step", type=int, help="stop early after this step (for resume)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="vanishing-parameter convergence study")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("audit", help="structural condition audits of a law")
    common(sp)
    sp.add_argument("--law", choices=list(LAW_NAMES) + [n.upper() for n in LAW_NAMES])
    sp.add_argument("--K", type=int, default=32)
    sp.add_argument("--nu", default="0")
    sp.add_argument("--condition", action="append", choices=list(CONDITIONS))
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("report", help="summarize JSON outputs in a directory")
    sp.add_argument("dir", nargs="?")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("resume", help="continue a run from a checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_resume)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        with warnings.catch_warnings():
            if getattr(args, "strict", False):
                warnings.simplefilter("error")
            return args.func(args)
    except (UsageError, ConfigError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUp as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except SweepAborted as exc:
        print(f"sweep aborted: {exc}", file=sys.stderr)
        return EXIT_BLOWUP if isinstance(exc.cause, BlowUp) else EXIT_VERDICT
    except NotAbsorbed as exc:
        print(f"not absorbed: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except Warning as exc:
        print(f"error (strict): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
