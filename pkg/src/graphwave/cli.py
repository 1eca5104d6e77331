"""Command-line front end: one subcommand per library operation.

Single runs take their parameters from flags.  ``--sweep FILE`` reads one
run per line (the same flags, ``#`` starts a comment) and executes the
runs in parallel, capped by the GRAPHWAVE_THREADS environment variable.
JSON documents are printed on one line with floats at 17 significant
digits and carry a ``config`` object that ``parse_config`` turns back into
an equivalent argument vector.

Exit codes: 0 success, 1 unknown subcommand, 2 precondition violation,
3 missing root or unresolved eigenvalue count.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import shlex
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import List, Optional

import numpy as np

from .errors import FixedPointDivergence, NoRoot, PreconditionError, Unresolved
from .graph_core import ModelParams

COMMANDS = ("profile", "actions", "morse", "modes", "kernel", "slope", "thresholds",
            "evolve", "rank")
DEFAULT_M = {"profile": 1024, "actions": 2048, "morse": 1024, "modes": 256, "kernel": 512,
             "evolve": 1024, "rank": 2048, "slope": 1024, "thresholds": 1024}

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_NOROOT = 0, 1, 2, 3


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of calling sys.exit on bad flags."""

    def error(self, message):
        raise _ArgumentError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    p: float
    omega: float
    beta: float
    N: int
    M: int
    kind: str = "symmetric"
    k: Optional[int] = None
    dt: float = 1e-3
    T: float = 1.0
    sample_every: int = 10
    scale: float = 1.0
    bump: float = 0.0
    escape: Optional[float] = None
    out: Optional[str] = None

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.p, self.omega, self.beta, self.N)

    def to_argv(self) -> List[str]:
        argv = [self.command]
        for f in fields(self):
            if f.name == "command":
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            flag = "--" + f.name.replace("_", "-")
            argv += [flag, _fmt_float(value) if isinstance(value, float) else str(value)]
        return argv


def _fmt_float(x: float) -> str:
    return f"{x:.17g}"


def _build_parser() -> _Parser:
    parser = _Parser(prog="graphwave", description="Standing waves on a star graph.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--p", type=float, required=False)
        sp.add_argument("--omega", type=float, required=False)
        sp.add_argument("--beta", type=float, required=False)
        sp.add_argument("--N", type=int, required=False)
        sp.add_argument("--M", type=int, default=None, help="grid points per edge")
        sp.add_argument("--kind", choices=("symmetric", "asymmetric"), default="symmetric")
        sp.add_argument("--k", type=int, default=None)
        sp.add_argument("--dt", type=float, default=1e-3)
        sp.add_argument("--T", type=float, default=1.0)
        sp.add_argument("--sample-every", type=int, default=10)
        sp.add_argument("--scale", type=float, default=1.0,
                        help="initial amplitude factor on the standing wave (evolve)")
        sp.add_argument("--bump", type=float, default=0.0,
                        help="H^1 size of a deterministic perturbation (evolve)")
        sp.add_argument("--escape", type=float, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--sweep", default=None, help="file with one run per line")
    return parser


def _config_from_namespace(ns) -> RunConfig:
    missing = [n for n in ("p", "omega", "beta", "N") if getattr(ns, n) is None]
    if missing:
        raise _ArgumentError("missing required flags: " + ", ".join("--" + m for m in missing))
    M = ns.M if ns.M is not None else DEFAULT_M[ns.command]
    k = ns.k if ns.kind == "asymmetric" else None
    return RunConfig(ns.command, ns.p, ns.omega, ns.beta, ns.N, M, ns.kind, k, ns.dt, ns.T,
                     ns.sample_every, ns.scale, ns.bump, ns.escape, ns.out)


def parse_config(document) -> RunConfig:
    """RunConfig from an emitted JSON document (or its ``config`` member)."""
    cfg = document.get("config", document)
    names = {f.name for f in fields(RunConfig)}
    unknown = set(cfg) - names
    if unknown:
        raise PreconditionError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**cfg)


# ---------------------------------------------------------------- emission

def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj) -> str:
    """Compact JSON with every float written at 17 significant digits."""
    obj = _to_jsonable(obj)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(dumps(k) + ":" + dumps(v) for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _document(cfg: RunConfig, payload: dict) -> str:
    return dumps({"command": cfg.command, "config": asdict(cfg), **payload}) + "\n"


# ---------------------------------------------------------------- commands

def _spec(cfg: RunConfig):
    from .profiles import profile_spec
    return profile_spec(cfg.params, cfg.kind, cfg.k)


def _cmd_profile(cfg: RunConfig) -> str:
    from .profiles import stationarity_check
    spec = _spec(cfg)
    grid = spec.default_grid(cfg.M)
    phi = spec.field(grid)
    rep = stationarity_check(phi, cfg.params)
    buf = io.StringIO()
    buf.write(f"# interior_residual={_fmt_float(rep.interior)}\n")
    buf.write(f"# derivative_mismatch={_fmt_float(rep.derivative_mismatch)}\n")
    buf.write(f"# vertex_condition={_fmt_float(rep.vertex_condition)}\n")
    buf.write(",".join(["x"] + [f"phi_{j + 1}" for j in range(grid.N)]) + "\n")
    vals = np.real(phi.values)
    for i, x in enumerate(grid.x):
        buf.write(",".join(_fmt_float(v) for v in [x, *vals[:, i]]) + "\n")
    return buf.getvalue()


def _cmd_actions(cfg: RunConfig) -> str:
    from .functionals import evaluate, profile_action_closed_form
    spec = _spec(cfg)
    rep = evaluate(spec.field(spec.default_grid(cfg.M)), cfg.params)
    return _document(cfg, {"functionals": rep.as_dict(), "label": spec.label,
                           "S_closed_form": profile_action_closed_form(spec)})


def _cmd_morse(cfg: RunConfig) -> str:
    from .spectra import morse_by_inertia, morse_by_shooting
    spec = _spec(cfg)
    shoot = morse_by_shooting(spec, cfg.M)
    inert = morse_by_inertia(spec, cfg.M)
    agree = (shoot.n1, shoot.n2) == (inert.n1, inert.n2)
    return _document(cfg, {"label": spec.label, "n1": inert.n1, "n2": inert.n2,
                           "agreement": agree, "shooting": shoot.as_dict(),
                           "inertia": inert.as_dict()})


def _cmd_modes(cfg: RunConfig) -> str:
    from .spectra import grillakis_lower_bound, kernel_tolerance, unstable_modes
    spec = _spec(cfg)
    rates = unstable_modes(spec, cfg.M)
    bound = grillakis_lower_bound(spec, max(cfg.M, 512))
    tau = kernel_tolerance(spec.default_grid(cfg.M))
    return _document(cfg, {"label": spec.label, "lambda_unstable": rates,
                           "grillakis_lower_bound": bound, "tolerance": tau})


def _cmd_kernel(cfg: RunConfig) -> str:
    from .spectra import kernel_report
    spec = _spec(cfg)
    return _document(cfg, {"label": spec.label, **kernel_report(spec, cfg.M).as_dict()})


def _cmd_slope(cfg: RunConfig) -> str:
    from .functionals import mass_slope
    rep = mass_slope(cfg.params)
    return _document(cfg, {"J": rep.J, "J1": rep.J1, "omega_star": rep.omega_star,
                           "within_theorem": rep.within_theorem})


def _cmd_thresholds(cfg: RunConfig) -> str:
    from .functionals import omega3
    from .profiles import compute_beta_star
    params = cfg.params
    out = {"omega_floor": params.omega_floor, "omega_star": params.omega_star,
           "beta_star": compute_beta_star(params.p, params.omega, params.N),
           "xi_hat": None, "omega3": None}
    if params.p > 5 and params.beta < 0:
        out["xi_hat"], out["omega3"] = omega3(params.p, params.N, params.beta)
    return _document(cfg, out)


def _cmd_rank(cfg: RunConfig) -> str:
    from .functionals import rank_critical_points
    rows = rank_critical_points(cfg.params, cfg.M)
    table = [{"kind": r.kind, "k": r.k, "S": r.S} for r in rows]
    return _document(cfg, {"rows": table})


def _cmd_evolve(cfg: RunConfig) -> str:
    from .evolution import (Stepper, classify_run, discrete_standing_wave, evolve,
                            structured_bump)
    spec = _spec(cfg)
    grid = spec.default_grid(cfg.M)
    phi = discrete_standing_wave(spec, grid)
    u0 = cfg.scale * phi
    if cfg.bump:
        u0 = u0 + structured_bump(grid, cfg.bump, width=1.0 / cfg.params.sqrt_omega)
    stepper = Stepper(cfg.params, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        log = evolve(u0, cfg.params, cfg.dt, cfg.T, cfg.sample_every, reference=phi,
                     escape=cfg.escape, stepper=stepper)
    escape = cfg.escape if cfg.escape is not None else math.inf
    status = classify_run(log, escape)
    csv_text = log.to_csv()
    if cfg.out is None:
        return csv_text
    with open(cfg.out, "w", newline="") as fh:
        fh.write(csv_text)
    return _document(cfg, {"status": status.kind, "status_time": status.time,
                           "mass_drift": log.relative_drift("mass"),
                           "energy_drift": log.relative_drift("energy"),
                           "wall_time": log.wall_time, "samples": len(log.times)})


_HANDLERS = {"profile": _cmd_profile, "actions": _cmd_actions, "morse": _cmd_morse,
             "modes": _cmd_modes, "kernel": _cmd_kernel, "slope": _cmd_slope,
             "thresholds": _cmd_thresholds, "evolve": _cmd_evolve, "rank": _cmd_rank}


def _execute(cfg: RunConfig):
    """(exit code, stdout text, stderr text) of one run."""
    try:
        text = _HANDLERS[cfg.command](cfg)
        if cfg.command == "profile" and cfg.out is not None:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
            text = ""
        return EXIT_OK, text, ""
    except PreconditionError as exc:
        return EXIT_PRECONDITION, "", f"precondition violated: {exc}\n"
    except (NoRoot, Unresolved, FixedPointDivergence) as exc:
        return EXIT_NOROOT, "", f"{type(exc).__name__}: {exc}\n"


def _sweep_configs(parser, command: str, path: str, base_ns) -> List[RunConfig]:
    configs = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            ns = parser.parse_args([command] + shlex.split(line))
            for name in ("p", "omega", "beta", "N"):
                if getattr(ns, name) is None:
                    setattr(ns, name, getattr(base_ns, name))
            configs.append(_config_from_namespace(ns))
    return configs


def _thread_cap() -> int:
    raw = os.environ.get("GRAPHWAVE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise PreconditionError("GRAPHWAVE_THREADS must be a positive integer")
    return os.cpu_count() or 1


def run(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    """Execute one command line; returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    if not argv or argv[0] not in COMMANDS:
        stderr.write(parser.format_usage())
        stderr.write(f"unknown subcommand; choose one of: {', '.join(COMMANDS)}\n")
        return EXIT_USAGE
    try:
        ns = parser.parse_args(argv)
        if ns.sweep is not None:
            configs = _sweep_configs(parser, ns.command, ns.sweep, ns)
            workers = min(_thread_cap(), max(len(configs), 1))
        else:
            configs = [_config_from_namespace(ns)]
            workers = 1
    except _ArgumentError as exc:
        stderr.write(parser.format_usage())
        stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    except PreconditionError as exc:
        stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, configs))
    else:
        results = [_execute(cfg) for cfg in configs]
    code = EXIT_OK
    for rc, out, err in results:
        stdout.write(out)
        stderr.write(err)
        code = max(code, rc)
    return code


def main() -> None:
    sys.exit(run())
