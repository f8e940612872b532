"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 hypothesis refusal,
64 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Any, Sequence

import jsonschema

from . import __version__
from .eigen import ConvergenceError, StructureError
from .frontsim import StabilityError, WindowError, frames_to_csv, measure_spreading_speed
from .medium import (LineMedium, MediumError, ShearMedium, builtin_media, medium_from_json,
                     medium_geometry, medium_hash, validate)
from .regimes import (HypothesisError, SweepTable, homogenized_speed, sweep_diffusion_factor,
                      sweep_large_diffusion, sweep_period, sweep_reaction, sweep_reaction_factor,
                      sweep_small_diffusion, sweep_small_diffusion_shear)
from .speed import analytic_speed_constant, make_problem, minimal_speed, upper_bound

EXIT_OK, EXIT_NUMERIC, EXIT_REFUSED, EXIT_USAGE = 0, 1, 2, 64

COMMANDS = ("speed", "sweep", "homogenize", "simulate", "validate")
REGIMES = ("epsilon", "diffusion", "reaction", "period", "beta", "reaction-factor")

TAGS = {
    "speed": "minimal speed as min over lambda of k(lambda)/lambda",
    "epsilon": "small-diffusion limit",
    "epsilon-shear": "small-diffusion limit in a shear flow",
    "diffusion": "large-diffusion limit",
    "reaction": "reaction-factor limit",
    "period": "period scaling limits",
    "beta": "monotonicity in the diffusion factor",
    "reaction-factor": "monotonicity in the reaction factor",
    "homogenize": "homogenized speed",
    "simulate": "spreading speed of the time-dependent problem",
    "validate": "medium hypothesis check",
}

SWEEP_HELP = "parameter sweep against an asymptotic limit or monotonicity statement"

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "medium"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "medium": {"type": ["string", "object"]},
        "grid": {"oneOf": [{"type": "integer", "minimum": 4},
                           {"type": "array", "items": {"type": "integer", "minimum": 4},
                            "minItems": 1, "maxItems": 2}]},
        "tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
        "lambda_min": {"type": "number", "exclusiveMinimum": 0},
        "lambda_max": {"type": "number", "exclusiveMinimum": 0},
        "regime": {"enum": list(REGIMES)},
        "mode": {"enum": ["to-infinity", "to-zero"]},
        "gamma": {"type": "number", "minimum": 0},
        "points": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "W": {"type": "integer", "minimum": 8},
        "m": {"type": "integer", "minimum": 4},
        "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "frames": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "out": {"type": "string", "minLength": 1},
        "format": {"enum": ["csv", "json", "both"]},
        "waive_zero_average": {"type": "boolean"},
        "waive_hypotheses": {"type": "boolean"},
    },
}

RESULT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["command", "tag", "version", "medium", "config", "result", "timestamp"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "tag": {"type": "string"},
        "version": {"type": "string"},
        "medium": {"type": "object", "required": ["name", "hash", "geometry"]},
        "config": {"type": "object"},
        "result": {"type": "object"},
        "timestamp": {"type": "string"},
    },
}


class ConfigError(ValueError):
    """Malformed run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    command: str
    medium: dict[str, Any] | str
    grid: int | tuple[int, ...] | None = None
    tol: float = 1e-6
    lambda_min: float | None = None
    lambda_max: float | None = None
    regime: str | None = None
    mode: str = "to-infinity"
    gamma: float | None = None
    points: list[float] = field(default_factory=list)
    T: float = 40.0
    W: int = 60
    m: int = 32
    burn_in: float = 0.5
    frames: list[float] = field(default_factory=list)
    out: str | None = None
    format: str = "both"
    waive_zero_average: bool = False
    waive_hypotheses: bool = False

    @property
    def medium_name(self) -> str:
        if isinstance(self.medium, str):
            return os.path.splitext(os.path.basename(self.medium))[0]
        return str(self.medium.get("name", "inline"))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if isinstance(d["grid"], tuple):
            d["grid"] = list(d["grid"])
        return d


def _path(err: jsonschema.ValidationError) -> str:
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<document>"


def parse_config(doc: Any, base_dir: str | None = None) -> RunConfig:
    """Validate a run document, fill defaults and resolve the medium reference."""
    if not isinstance(doc, dict):
        raise ConfigError("<document>: run configuration must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        if e.validator == "additionalProperties":
            raise ConfigError(f"<document>: {e.message}")
        raise ConfigError(f"{_path(e)}: {e.message}")
    cfg = RunConfig(**doc)
    if isinstance(cfg.grid, list):
        cfg.grid = tuple(cfg.grid) if len(cfg.grid) == 2 else cfg.grid[0]
    if isinstance(cfg.medium, str) and cfg.medium not in builtin_media():
        path = cfg.medium if base_dir is None or os.path.isabs(cfg.medium) else os.path.join(base_dir, cfg.medium)
        stem = os.path.splitext(os.path.basename(cfg.medium))[0]
        if os.path.isfile(path):
            cfg.medium = path
        elif stem in builtin_media() and os.path.basename(cfg.medium) == f"{stem}.json":
            # a bare "constant.json" falls back to the packaged copy
            cfg.medium = stem
        else:
            raise ConfigError(f"medium: file not found: {cfg.medium}")
    if cfg.lambda_min is not None and cfg.lambda_max is not None and not cfg.lambda_min < cfg.lambda_max:
        raise ConfigError("lambda_min: must be smaller than lambda_max")
    if (cfg.lambda_min is None) != (cfg.lambda_max is None):
        raise ConfigError("lambda_min: give both lambda_min and lambda_max, or neither")
    if cfg.command == "sweep" and cfg.regime is None:
        raise ConfigError("regime: required for the sweep command")
    if cfg.command in ("sweep", "homogenize") and not cfg.points:
        raise ConfigError("points: required for sweeps")
    return cfg


def resolve_medium(cfg: RunConfig) -> Any:
    """Load the medium named by the config; errors carry a ``medium.`` path."""
    src = cfg.medium
    try:
        if isinstance(src, str):
            if src in builtin_media() and not os.path.isfile(src):
                doc = json.loads(resources.files("frontspeed").joinpath(f"data/media/{src}.json").read_text())
            else:
                with open(src, encoding="utf-8") as fh:
                    doc = json.load(fh)
        else:
            doc = src
        return medium_from_json(doc, waive_zero_average=cfg.waive_zero_average)
    except MediumError as err:
        raise ConfigError(f"medium.{err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"medium: not valid JSON ({err})") from err


# commands ------------------------------------------------------------------------

def _lambda_range(cfg: RunConfig) -> tuple[float, float] | None:
    return None if cfg.lambda_min is None else (cfg.lambda_min, cfg.lambda_max)


def _fmt(x: Any) -> str:
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _finite(obj: Any) -> Any:
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if hasattr(obj, "item"):
        return _finite(obj.item())
    return obj


def cmd_speed(cfg: RunConfig, medium: Any) -> tuple[str, str, dict[str, Any], list[str]]:
    problem = make_problem(medium, cfg.grid)
    res = minimal_speed(problem, _lambda_range(cfg), tol=cfg.tol)
    ub = upper_bound(problem)
    result = res.to_dict()
    result["upper_bound"] = ub
    lines = [f"c* = {res.c_star:.6f}", f"lambda* = {res.lambda_star:.6f}", f"upper bound = {ub:.6f}"]
    const = _constant_speed(medium)
    if const is not None:
        result["closed_form"] = const
        lines.append(f"closed form = {const:.6f}")
    if res.bracket_failure:
        lines.append("warning: minimum at the end of the lambda range")
    text = _csv(("medium", "grid", "c_star", "lambda_star", "k_at_star", "upper_bound"),
                [(cfg.medium_name, problem.n, res.c_star, res.lambda_star, res.k_at_star, ub)])
    return "speed", text, result, lines


def _constant_speed(medium: Any) -> float | None:
    if isinstance(medium, LineMedium) and medium.a.is_constant and medium.zeta.is_constant:
        return analytic_speed_constant(medium.a.params[0], medium.zeta.params[0])
    if isinstance(medium, ShearMedium) and medium.alpha.is_constant and medium.zeta.is_constant:
        if medium.q1 is None:
            return analytic_speed_constant(medium.alpha.params[0], medium.zeta.params[0])
        if medium.q1.is_constant:
            return analytic_speed_constant(medium.alpha.params[0], medium.zeta.params[0], medium.q1.params[0])
    return None


def _run_sweep(cfg: RunConfig, medium: Any) -> tuple[str, SweepTable]:
    over = cfg.waive_hypotheses
    pts, regime = cfg.points, cfg.regime
    if regime == "epsilon":
        if not isinstance(medium, ShearMedium):
            raise HypothesisError("the small-diffusion sweep needs a shear medium")
        if medium.has_shear:
            return "epsilon-shear", sweep_small_diffusion_shear(medium, pts, cfg.grid, cfg.tol, over)
        return "epsilon", sweep_small_diffusion(medium, pts, cfg.grid, cfg.tol, over)
    if regime == "diffusion":
        if isinstance(medium, LineMedium):
            raise HypothesisError("the large-diffusion sweep needs a shear or cell medium")
        gamma = 0.0 if cfg.gamma is None else cfg.gamma
        return regime, sweep_large_diffusion(medium, pts, gamma, cfg.grid or 64, cfg.tol, over)
    if regime == "reaction":
        gamma = 0.5 if cfg.gamma is None else cfg.gamma
        return regime, sweep_reaction(medium, pts, cfg.mode, gamma, cfg.grid, cfg.tol, over)
    if regime == "period":
        return regime, sweep_period(make_problem(medium, cfg.grid), pts, cfg.tol)
    if regime == "beta":
        return regime, sweep_diffusion_factor(make_problem(medium, cfg.grid), pts, cfg.tol)
    return regime, sweep_reaction_factor(make_problem(medium, cfg.grid), pts, cfg.tol)


def _table_lines(table: SweepTable) -> list[str]:
    lines = [f"{table.parameter:>10} {table.quantity:>16} {'limit':>12} {'rel_error':>10}"]
    for _, v, q, lim, e in table.rows():
        lines.append(f"{v:>10.4g} {q:>16.10f} {lim:>12.6f} {e:>10.3e}")
    lines.append(f"extrapolated: {table.extrapolated:.8f}")
    verdict = table.monotone
    if verdict is not None:
        lines.append(f"monotone ({verdict.expected}): {'yes' if verdict.ok else 'NO'}")
    viol = table.bound_violations()
    lines.append("bounds: all rows satisfied" if not viol else f"bounds: {len(viol)} violation(s)")
    return lines


def cmd_sweep(cfg: RunConfig, medium: Any) -> tuple[str, str, dict[str, Any], list[str]]:
    tag, table = _run_sweep(cfg, medium)
    return tag, table.to_csv(), table.to_json(), _table_lines(table)


def cmd_homogenize(cfg: RunConfig, medium: Any) -> tuple[str, str, dict[str, Any], list[str]]:
    if isinstance(medium, LineMedium):
        raise HypothesisError("homogenization is implemented for shear and cell media")
    table = homogenized_speed(medium, cfg.points, cfg.grid or 64, cfg.tol, cfg.waive_hypotheses)
    return "homogenize", table.to_csv(), table.to_json(), _table_lines(table)


def cmd_simulate(cfg: RunConfig, medium: Any) -> tuple[str, str, dict[str, Any], list[str]]:
    if not isinstance(medium, LineMedium):
        raise HypothesisError("the simulator handles 1D line media only")
    meas, frames = measure_spreading_speed(medium, cfg.T, cfg.burn_in, cfg.W, cfg.m, frame_times=cfg.frames)
    result = meas.to_dict()
    if cfg.frames:
        result["frames_csv"] = frames_to_csv(frames)
    text = _csv(("t", "position"), list(zip(meas.times, meas.positions)))
    lines = [f"measured speed = {meas.speed:.6f}", f"fit residual = {meas.fit_residual:.3e}",
             f"maximum principle: {'held' if meas.max_principle_ok else 'VIOLATED'}"]
    lines += [f"periodicity residual at t={t:.2f}: {r:.3e}" for t, r in meas.pulsating_residuals]
    if meas.grid.get("note"):
        lines.append(f"warning: {meas.grid['note']}")
    return "simulate", text, result, lines


def cmd_validate(cfg: RunConfig, medium: Any) -> tuple[str, str, dict[str, Any], list[str]]:
    diag = validate(medium, cfg.grid if isinstance(cfg.grid, int) else 64)
    rows = [("check", k, v) for k, v in diag.checks.items()] + [("hypothesis", k, v) for k, v in diag.hypotheses.items()]
    text = _csv(("kind", "name", "value"), rows)
    lines = [f"{kind} {name}: {'ok' if ok else 'FAILED'}" for kind, name, ok in rows]
    lines.append("passed" if diag.passed else "failed")
    return "validate", text, diag.to_dict(), lines


HANDLERS = {"speed": cmd_speed, "sweep": cmd_sweep, "homogenize": cmd_homogenize,
            "simulate": cmd_simulate, "validate": cmd_validate}


def execute(cfg: RunConfig, stdout: Any = None) -> int:
    """Run a parsed config, write outputs and print the summary; returns the exit status."""
    stdout = stdout or sys.stdout
    medium = resolve_medium(cfg)
    tag_key, text, result, lines = HANDLERS[cfg.command](cfg, medium)
    doc = {
        "command": cfg.command, "tag": TAGS[tag_key], "version": __version__,
        "medium": {"name": cfg.medium_name, "hash": medium_hash(medium), "geometry": medium_geometry(medium)},
        "config": cfg.to_dict(), "result": _finite(result),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    jsonschema.validate(doc, RESULT_SCHEMA)
    if cfg.out:
        if cfg.format in ("csv", "both"):
            with open(cfg.out + ".csv", "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        if cfg.format in ("json", "both"):
            with open(cfg.out + ".json", "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, allow_nan=False)
                fh.write("\n")
    print(f"[{doc['tag']}] medium {doc['medium']['name']} ({doc['medium']['hash']})", file=stdout)
    for line in lines:
        print(line, file=stdout)
    if cfg.command == "validate" and not result["passed"]:
        return EXIT_REFUSED
    return EXIT_OK


# argument parsing -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> Any:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from err


def _grid(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",")]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"grid must be N or N1,N2: {text!r}") from err


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="frontspeed", description="Minimal speeds of reaction-diffusion fronts in periodic media.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name, help=SWEEP_HELP if name == "sweep" else TAGS[name])
        s.add_argument("--config", help="JSON run configuration; flags override its fields")
        s.add_argument("--medium", help="medium JSON file or built-in name")
        s.add_argument("--grid", type=_grid, help="grid size N or N1,N2")
        s.add_argument("--tol", type=float)
        s.add_argument("--lambda-min", dest="lambda_min", type=float)
        s.add_argument("--lambda-max", dest="lambda_max", type=float)
        s.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
        s.add_argument("--format", choices=("csv", "json", "both"))
        s.add_argument("--waive-zero-average", dest="waive_zero_average", action="store_true", default=None)
        s.add_argument("--waive-hypotheses", dest="waive_hypotheses", action="store_true", default=None)
        if name in ("sweep", "homogenize"):
            s.add_argument("--points", type=_float_list, help="comma-separated parameter values")
        if name == "sweep":
            s.add_argument("--regime", choices=REGIMES)
            s.add_argument("--mode", choices=("to-infinity", "to-zero"))
            s.add_argument("--gamma", type=float)
        if name == "simulate":
            s.add_argument("--T", dest="T", type=float)
            s.add_argument("--W", dest="W", type=int)
            s.add_argument("--m", dest="m", type=int)
            s.add_argument("--burn-in", dest="burn_in", type=float)
            s.add_argument("--frames", type=_float_list, help="times at which to dump u(x)")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    doc: dict[str, Any] = {}
    base_dir = None
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as err:
            raise ConfigError(f"config: cannot read {args.config}: {err.strerror}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: not valid JSON ({err})") from err
        if not isinstance(doc, dict):
            raise ConfigError("<document>: run configuration must be a JSON object")
        base_dir = os.path.dirname(os.path.abspath(args.config))
    doc["command"] = args.command
    for key, val in vars(args).items():
        if key in ("config", "command") or val is None:
            continue
        doc[key] = val
    if "medium" not in doc:
        raise ConfigError("medium: required (--medium PATH or a config field)")
    return parse_config(doc, base_dir)


def run(argv: Sequence[str] | None = None, stdout: Any = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        return execute(cfg, stdout)
    except ConfigError as err:
        print(f"frontspeed: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisError as err:
        print(f"frontspeed: refused: {err}", file=sys.stderr)
        if err.diagnostic:
            print(json.dumps(_finite(err.diagnostic), sort_keys=True), file=sys.stderr)
        return EXIT_REFUSED
    except (ConvergenceError, StructureError, StabilityError, WindowError, FloatingPointError) as err:
        print(f"frontspeed: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"frontspeed: invalid input: {err}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
