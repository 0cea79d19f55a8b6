"""Command-line interface: ``parisian-ruin {solve,eval,figure1,simulate,verify,replay}``.

Exit codes: 0 ok, 1 property failure, 2 input error, 3 simulation integrity
failure.  JSON documents embed a manifest without timings so identical flags
give byte-identical output; when ``--out`` is given, ``<out>.manifest.json``
is written alongside with the wall-clock timings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import FIGURE1_RHOS, SUITES, all_passed, run_suite
from .market import ModelParams, ParameterError, derive_constants, validate
from .simulate import Clock, Mode, SimConfig, SimulationError, Strategy, estimate_value
from .value import DomainError, OccupationValue, ValueFunction, pi_zero, psi_restricted

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_SIMULATION = 0, 1, 2, 3
OUT_DIR_ENV = "PARISIAN_OUT_DIR"
TOOL = "parisian-ruin"
PARAM_FLAGS = (("r", "r"), ("mu", "mu"), ("sigma", "sigma"), ("lambda", "lam"),
               ("rho", "rho"), ("c", "c"), ("L", "L"))


class InputError(ValueError):
    """Invalid command-line input."""


def _decimal(text: str) -> float:
    """Locale-independent decimal with optional exponent; rejects nan/inf."""
    try:
        value = float(text.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def _decimal_list(text: str) -> list[float]:
    return [_decimal(part) for part in text.split(",") if part.strip()]


def _fmt(x: float) -> str:
    return repr(float(x))


# -- manifest and output ----------------------------------------------------------
def _manifest(command: str, params: ModelParams, argv: list[str], seeds=()) -> dict:
    consts = derive_constants(params)
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "argv": argv,
        "params": params.as_dict(),
        "constants": consts.as_dict(),
        "seeds": list(seeds),
    }


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False, allow_nan=True) + "\n"


def _resolve_out(out: str | None, default_name: str | None) -> Path | None:
    base = os.environ.get(OUT_DIR_ENV)
    if out is None:
        return Path(base) / default_name if base and default_name else None
    path = Path(out)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _emit(text: str, out: Path | None, manifest: dict, timings: dict) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    side = dict(manifest, timings=timings, output=out.name)
    with open(out.with_name(out.name + ".manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(side))


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# -- commands -------------------------------------------------------------------
def cmd_solve(params: ModelParams, args, manifest: dict) -> tuple[str, int]:
    vf = ValueFunction.build(params)
    doc = {
        "params": params.as_dict(),
        "constants": vf.consts.as_dict(),
        "dual": vf.dual.as_dict(),
        "beta": vf.beta,
        "manifest": manifest,
    }
    return _dumps(doc), EXIT_OK


def eval_table(params: ModelParams, grid: np.ndarray, clamp: bool = False) -> np.ndarray:
    """Rows of ``w,psi,pi_star,pi_zero,psi_restricted,m,rho_times_m,hjb_residual``."""
    p = params
    grid = np.asarray(grid, dtype=float)
    outside = (grid < -p.L) | (grid > p.safe_level)
    if np.any(outside) and not clamp:
        raise DomainError(f"grid leaves [{-p.L}, {p.safe_level}]; pass --clamp to extend")
    vf = ValueFunction.build(p)
    occ = OccupationValue.build(p)
    inside = ~outside
    above = grid >= p.safe_level
    core = grid[inside]

    psi = np.asarray(vf.psi(grid, clamp=True), dtype=float)
    m = np.asarray(occ.m(grid, clamp=True), dtype=float)

    pi_star = np.full(grid.shape, np.nan)
    pi_star[above] = 0.0
    vals = np.full(core.shape, vf.strategy_at_cutoff())
    keep = core > -p.L
    vals[keep] = vf.pi_star(core[keep])
    pi_star[inside] = vals

    pi0 = np.zeros(grid.shape)
    pi0[~above] = pi_zero(p, grid[~above])
    psi0 = np.zeros(grid.shape)
    psi0[~above] = psi_restricted(p, grid[~above])

    hjb = np.full(grid.shape, np.nan)
    rel = np.zeros(core.shape)  # the equation degenerates to 0 = 0 at c/r
    idx = core < p.safe_level
    if np.any(idx):
        res = np.asarray(vf.hjb_residual(core[idx]), dtype=float)
        rel[idx] = np.abs(res) / (p.lam * psi[inside][idx])
    hjb[inside] = rel
    return np.column_stack([grid, psi, pi_star, pi0, psi0, m, p.rho * m, hjb])


EVAL_HEADER = ["w", "psi", "pi_star", "pi_zero", "psi_restricted", "m", "rho_times_m", "hjb_residual"]


def _grid(args, params: ModelParams) -> np.ndarray:
    lo = -params.L if args.grid_min is None else args.grid_min
    hi = params.safe_level if args.grid_max is None else args.grid_max
    if args.points < 1:
        raise InputError("--points must be at least 1")
    if args.points > 1 and not hi > lo:
        raise InputError("--grid-max must exceed --grid-min")
    if args.grid is not None:
        return np.asarray(args.grid, dtype=float)
    return np.linspace(lo, hi, args.points)


def cmd_eval(params: ModelParams, args, manifest: dict) -> tuple[str, int]:
    rows = eval_table(params, _grid(args, params), clamp=args.clamp)
    return _csv_text(EVAL_HEADER, rows), EXIT_OK


def figure1_table(params: ModelParams, grid: np.ndarray, rhos) -> tuple[list[str], np.ndarray]:
    """Columns ``w,pi_0,pi_L,pi_rho_<each>``; at w = −L strategies are one-sided limits."""
    p = params
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < -p.L) or np.any(grid > p.safe_level):
        raise DomainError(f"grid leaves [{-p.L}, {p.safe_level}]")
    edge = grid == -p.L

    def column(model):
        out = np.empty(grid.shape)
        out[edge] = model.strategy_at_cutoff()
        out[~edge] = model.strategy(grid[~edge])
        return out

    cols = [grid, pi_zero(p, grid), column(OccupationValue.build(p))]
    header = ["w", "pi_0", "pi_L"]
    for rho in rhos:
        if not rho > 0:
            raise InputError(f"--rhos entries must be positive, got {rho}")
        cols.append(column(ValueFunction.build(p.replace(rho=rho))))
        header.append(f"pi_rho_{rho!r}")
    return header, np.column_stack(cols)


def cmd_figure1(params: ModelParams, args, manifest: dict) -> tuple[str, int]:
    header, rows = figure1_table(params, _grid(args, params), args.rhos)
    return _csv_text(header, rows), EXIT_OK


def reference_value(params: ModelParams, config: SimConfig) -> float | None:
    """Analytic value the simulated functional should approach, when one exists."""
    w0 = config.w0
    if config.mode is Mode.OCCUPATION_VALUE:
        if config.strategy is Strategy.OCCUPATION and not config.restricted:
            return float(OccupationValue.build(params).m(w0, clamp=True))
        return None
    if config.restricted and config.strategy is Strategy.ZERO:
        return float(psi_restricted(params, min(w0, params.safe_level)))
    if config.strategy is Strategy.OPTIMAL and not config.restricted:
        return float(ValueFunction.build(params).psi(w0, clamp=True))
    return None


def cmd_simulate(params: ModelParams, args, manifest: dict) -> tuple[str, int]:
    try:
        config = SimConfig(
            w0=args.w0, paths=args.paths, dt=args.dt, seed=args.seed,
            strategy=args.strategy, mode=args.mode, clock=args.clock,
            restricted=args.restricted, workers=args.workers, antithetic=args.antithetic,
            max_time=args.max_time, bridge=not args.no_bridge,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    est = estimate_value(params, config)
    doc = {"config": config.as_dict(), **est.as_dict(),
           "reference": reference_value(params, config), "manifest": manifest}
    return _dumps(doc), EXIT_OK


def cmd_verify(params: ModelParams, args, manifest: dict) -> tuple[str, int]:
    rho_pair = tuple(args.rho_pair) if args.rho_pair is not None else None
    if rho_pair is not None and len(rho_pair) != 2:
        raise InputError("--rho-pair takes exactly two values")
    try:
        results = run_suite(args.suite, params, rho_pair=rho_pair, rhos=args.rhos)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    ok = all_passed(results)
    for r in results:
        print(r.line(), file=sys.stderr if args.out is None and args.json else sys.stdout)
    doc = {"suite": args.suite, "passed": ok, "checks": [r.as_dict() for r in results],
           "manifest": manifest}
    text = _dumps(doc) if (args.json or args.out) else ""
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
    return text, EXIT_OK if ok else EXIT_PROPERTY


COMMANDS = {
    "solve": (cmd_solve, None),
    "eval": (cmd_eval, "eval.csv"),
    "figure1": (cmd_figure1, "figure1.csv"),
    "simulate": (cmd_simulate, None),
    "verify": (cmd_verify, None),
}


# -- parser -----------------------------------------------------------------------
def _add_params(sub: argparse.ArgumentParser) -> None:
    g = sub.add_argument_group("model parameters")
    for flag, dest in PARAM_FLAGS:
        g.add_argument(f"--{flag}", dest=dest, type=_decimal, required=True, metavar="X")


def _add_grid(sub: argparse.ArgumentParser, points: int) -> None:
    sub.add_argument("--grid-min", type=_decimal, default=None, help="default −L")
    sub.add_argument("--grid-max", type=_decimal, default=None, help="default c/r")
    sub.add_argument("--points", type=int, default=points)
    sub.add_argument("--grid", type=_decimal_list, default=None,
                     help="explicit comma-separated wealth values (overrides the range)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=TOOL, description=(
        "Minimum probability of lifetime exponential Parisian ruin: closed-form solver, "
        "property checks and Monte Carlo verification."))
    ap.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    subs = ap.add_subparsers(dest="command", required=True)

    def common(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subs.add_parser(name, help=help_text)
        _add_params(sub)
        sub.add_argument("--out", default=None, help=f"output path (relative to ${OUT_DIR_ENV} if set)")
        sub.add_argument("--manifest-only", action="store_true",
                         help="validate inputs and print the manifest without computing")
        return sub

    common("solve", "free boundaries, dual coefficients and derived constants (JSON)")

    ev = common("eval", "ψ, strategies, m and HJB residual on a wealth grid (CSV)")
    _add_grid(ev, 257)
    ev.add_argument("--clamp", action="store_true", help="extend by boundary constants outside [−L, c/r]")

    fig = common("figure1", "optimal strategies for several ρ next to π₀ and π_L (CSV)")
    _add_grid(fig, 501)
    fig.add_argument("--rhos", type=_decimal_list, default=list(FIGURE1_RHOS))

    sim = common("simulate", "Monte Carlo estimate under a feedback strategy (JSON)")
    sim.add_argument("--w0", type=_decimal, required=True)
    sim.add_argument("--paths", type=int, default=200_000)
    sim.add_argument("--dt", type=_decimal, default=0.01)
    sim.add_argument("--seed", type=int, default=20240101)
    sim.add_argument("--strategy", choices=[s.value for s in Strategy], default="optimal")
    sim.add_argument("--mode", choices=[m.value for m in Mode], default="parisian_value")
    sim.add_argument("--clock", choices=[c.value for c in Clock], default="exponential")
    sim.add_argument("--restricted", action="store_true", help="no cutoff at −L (use with --strategy zero)")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--antithetic", action="store_true")
    sim.add_argument("--max-time", type=_decimal, default=None, help="default 20/λ")
    sim.add_argument("--no-bridge", action="store_true",
                     help="detect the lower cutoff at grid times only")

    ver = common("verify", "run the property suite; exit 1 on any failure")
    ver.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    ver.add_argument("--rho-pair", type=_decimal_list, default=None, metavar="R1,R2")
    ver.add_argument("--rhos", type=_decimal_list, default=list(FIGURE1_RHOS))
    ver.add_argument("--json", action="store_true", help="also print the JSON report to stdout")

    rep = subs.add_parser("replay", help="re-run the command recorded in a manifest")
    rep.add_argument("manifest")
    rep.add_argument("--out", default=None)
    return ap


def _params_from(args) -> ModelParams:
    return ModelParams(r=args.r, mu=args.mu, sigma=args.sigma, lam=args.lam,
                       rho=args.rho, c=args.c, L=args.L)


def _replay_argv(path: str, out: str | None) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        argv = list(doc["manifest"]["argv"] if "manifest" in doc else doc["argv"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None
    return argv + (["--out", out] if out else [])


def _canonical_argv(argv: list[str]) -> list[str]:
    """Recorded argv: everything except output-location flags."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--out", "--manifest-only"):
            skip = tok == "--out"
            continue
        if tok.startswith("--out="):
            continue
        out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            return main(_replay_argv(args.manifest, args.out))
        params = validate(_params_from(args))
        seeds = [args.seed] if args.command == "simulate" else []
        manifest = _manifest(args.command, params, _canonical_argv(argv), seeds)
        if args.manifest_only:
            sys.stdout.write(_dumps(manifest))
            return EXIT_OK
        handler, default_name = COMMANDS[args.command]
        start = time.perf_counter()
        text, code = handler(params, args, manifest)
        elapsed = time.perf_counter() - start
        out = _resolve_out(args.out, default_name)
        if text:
            _emit(text, out, manifest, {"wall_seconds": elapsed})
        return code
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except (ParameterError, DomainError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
