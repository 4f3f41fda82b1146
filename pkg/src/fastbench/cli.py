"""``fastbench`` command line: eval, compare, generate.

Exit codes: 0 success, 1 input error, 2 no duration on the grid passes.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from . import decart, report
from .metric import EvaluationCriteria, FastOptions, SimulationOptions, compare_models, compute_fast
from .model import ModelError, load_model
from .trajectory import PROFILES, compute_geometry
from .tsid import Gains

EXIT_OK, EXIT_INPUT, EXIT_NOT_ACHIEVABLE = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1); exit 2 means "not achievable"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    models: tuple
    kinds: tuple = ()
    hip_frame: Optional[str] = None
    foot_frame: Optional[str] = None
    t_min: float = 0.05
    t_max: float = 1.0
    t_step: float = 0.01
    dt: float = 0.001
    kp: float = 400.0
    kd: float = 40.0
    pos_tol_frac: float = 0.03
    vel_tol: float = 0.1
    velocity_per_axis: bool = False
    leg_length: Optional[float] = None
    criteria_mode: str = "terminal"
    profile: str = "cubic"
    effort_scale: float = 1.0
    velocity_scale: float = 1.0
    out: str = "."
    formats: tuple = report.FORMATS

    def __post_init__(self):
        if not self.formats:
            raise InputError("at least one output format is required")
        unknown = set(self.formats) - set(report.FORMATS)
        if unknown:
            raise InputError(f"unknown output format(s): {', '.join(sorted(unknown))}")
        if not self.dt > 0:
            raise InputError("--dt must be positive")
        if not self.t_step > 0:
            raise InputError("--t-step must be positive")
        if self.t_max < self.t_min:
            raise InputError("--t-max is below --t-min")
        if self.t_min < 2 * self.dt:
            raise InputError("--t-min must cover at least two control periods")
        if self.leg_length is not None and not self.leg_length > 0:
            raise InputError("--leg-length must be positive")
        if self.effort_scale < 0 or self.velocity_scale < 0:
            raise InputError("limit scales must be non-negative")
        try:
            self.criteria()
            self.gains()
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def criteria(self) -> EvaluationCriteria:
        return EvaluationCriteria(self.pos_tol_frac, self.vel_tol, self.criteria_mode, self.velocity_per_axis)

    def gains(self) -> Gains:
        return Gains(kp=self.kp, kd=self.kd)

    def options(self) -> FastOptions:
        sim = SimulationOptions(gains=self.gains(), dt=self.dt, profile=self.profile)
        return FastOptions(self.t_min, self.t_max, self.t_step, sim)

    def record(self) -> dict:
        """Settings stored in result files (model paths as given)."""
        d = asdict(self)
        d["models"] = list(self.models)
        d["kinds"] = list(self.kinds)
        d["formats"] = list(self.formats)
        d.pop("out")
        return d


def _formats(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(dict.fromkeys(parts))


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--hip-frame", help="hip link name (default: model root)")
    p.add_argument("--foot-frame", help="foot link name (default: the unique leaf link)")
    p.add_argument("--t-min", type=float, default=0.05, help="shortest swing duration, s")
    p.add_argument("--t-max", type=float, default=1.0, help="longest swing duration, s")
    p.add_argument("--t-step", type=float, default=0.01, help="duration grid step, s")
    p.add_argument("--dt", type=float, default=0.001, help="control and integration period, s")
    p.add_argument("--kp", type=float, default=400.0, help="foot position gain, 1/s^2")
    p.add_argument("--kd", type=float, default=40.0, help="foot velocity gain, 1/s")
    p.add_argument("--pos-tol-frac", type=float, default=0.03, help="position tolerance as a fraction of swing length")
    p.add_argument("--vel-tol", type=float, default=0.1, help="velocity tolerance, m/s")
    p.add_argument("--velocity-per-axis", action="store_true", help="judge velocity error per axis, not by norm")
    p.add_argument("--leg-length", type=float, help="override the measured leg length, m")
    p.add_argument("--criteria-mode", choices=("terminal", "pointwise"), default="terminal")
    p.add_argument("--profile", choices=PROFILES, default="cubic", help="spline blend")
    p.add_argument("--effort-scale", type=float, default=1.0, help="multiply every effort limit")
    p.add_argument("--velocity-scale", type=float, default=1.0, help="multiply every velocity limit")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", default="json,csv,svg", help="comma-separated subset of json,csv,svg")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fastbench", description="Fastest achievable swing time of a robot leg.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("eval", help="FAST of one model")
    ev.add_argument("--model", required=True, help="robot description file")
    _add_run_flags(ev)

    cmp_ = sub.add_parser("compare", help="FAST of several models, one table row each")
    cmp_.add_argument("--model", action="append", required=True, help="robot description file (repeat)")
    cmp_.add_argument("--kind", action="append", default=[], help="actuation tag per model, in order (repeat)")
    _add_run_flags(cmp_)

    gen = sub.add_parser("generate", help="write a DecARt leg description")
    gen.add_argument("--params", help="key = value parameter file (default: built-in defaults)")
    gen.add_argument("--variant", choices=decart.VARIANTS, default="decoupled")
    gen.add_argument("--out", required=True, help="output file")
    return parser


def config_from_args(args) -> RunConfig:
    models = tuple(args.model) if isinstance(args.model, list) else (args.model,)
    return RunConfig(
        models=models,
        kinds=tuple(getattr(args, "kind", ()) or ()),
        hip_frame=args.hip_frame,
        foot_frame=args.foot_frame,
        t_min=args.t_min,
        t_max=args.t_max,
        t_step=args.t_step,
        dt=args.dt,
        kp=args.kp,
        kd=args.kd,
        pos_tol_frac=args.pos_tol_frac,
        vel_tol=args.vel_tol,
        velocity_per_axis=args.velocity_per_axis,
        leg_length=args.leg_length,
        criteria_mode=args.criteria_mode,
        profile=args.profile,
        effort_scale=args.effort_scale,
        velocity_scale=args.velocity_scale,
        out=args.out,
        formats=_formats(args.format),
    )


def _load(path: str, config: RunConfig):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"cannot read model file {path!r}")
    try:
        model = load_model(p)
        model = model.with_frames(config.hip_frame, config.foot_frame)
    except (ModelError, OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if config.effort_scale != 1.0 or config.velocity_scale != 1.0:
        model = model.with_scaled_limits(config.effort_scale, config.velocity_scale)
    return model


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory: {exc}") from None
    return out


def cmd_eval(config: RunConfig) -> int:
    if len(config.models) != 1:
        raise InputError("eval takes exactly one model")
    model = _load(config.models[0], config)
    try:
        geometry = compute_geometry(model, leg_length=config.leg_length)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = compute_fast(model, geometry, config.criteria(), config.options())
    out = _out_dir(config)
    if "json" in config.formats:
        report.write_result_json(out / "result.json", result, config.record())
    if "csv" in config.formats:
        report.write_trace_csv(out / "trace.csv", result)
    if "svg" in config.formats:
        report.write_velocity_svg(out / "velocity_profile.svg", result)
    if result.achievable:
        print(f"{result.model_name}: FAST = {result.fastest_time:g} s, swing length = {result.swing_length:.4f} m, "
              f"theoretical velocity = {result.theoretical_velocity:.3f} m/s")
        return EXIT_OK
    print(f"{result.model_name}: no swing duration in [{config.t_min:g}, {config.t_max:g}] s passes",
          file=sys.stderr)
    return EXIT_NOT_ACHIEVABLE


def cmd_compare(config: RunConfig) -> int:
    if len(config.models) < 2:
        raise InputError("compare needs at least two --model arguments")
    if config.kinds and len(config.kinds) != len(config.models):
        raise InputError("give one --kind per --model, or none")
    if config.leg_length is not None:
        raise InputError("--leg-length applies to eval only; compare measures each model's own leg")
    kinds = config.kinds or ("unspecified",) * len(config.models)
    entries = []
    for path, kind in zip(config.models, kinds):
        try:
            model = _load(path, config)
        except InputError as exc:
            model = exc
        entries.append((Path(path).stem, model, kind))
    rows = compare_models(entries, config.criteria(), config.options())
    out = _out_dir(config)
    if "csv" in config.formats:
        report.write_comparison_csv(out / "comparison.csv", rows)
    if "json" in config.formats:
        report.write_comparison_json(out / "comparison.json", rows, config.record())
    for rec in report.comparison_records(rows):
        t = rec["fastest_time_s"]
        print(f"{rec['model']:>24}  {rec['actuation_kind']:<12} "
              + (f"{t:6.3f} s  {rec['theoretical_velocity_mps']:6.3f} m/s" if t is not None else rec["status"])
              + (f"  ({rec['error']})" if rec["error"] else ""))
    return EXIT_OK if any(r.result is not None for r in rows) else EXIT_INPUT


def cmd_generate(params_path: Optional[str], variant: str, out: str) -> int:
    try:
        params = decart.load_params(params_path) if params_path else decart.DecartLegParams()
    except (ValueError, OSError) as exc:
        raise InputError(f"invalid parameters: {exc}") from None
    text = decart.generate(params, variant)
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from None
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args.params, args.variant, args.out)
        config = config_from_args(args)
        if args.command == "eval":
            return cmd_eval(config)
        return cmd_compare(config)
    except InputError as exc:
        print(f"fastbench: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
