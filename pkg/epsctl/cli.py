"""CLI entry point for epsctl.

Usage:
    epsctl analyze --system sys.json                  # Norm report with estimate chains
    epsctl synthesize --plant plant.json --kind of    # Optimal K and/or L
    epsctl scan --plant plant.json --kind sf          # alpha curve as CSV
    epsctl scan --system sys.json                     # eps(alpha) of a stable system
    epsctl sets --system sys.json --dirs 360          # Planar set and ellipse polygons
    epsctl simulate --system sys.json --policy worst  # Trajectory CSV + invariance summary
    epsctl compare --betas=-1,1                       # Benchmark table over beta
    epsctl --preflight                                # Health checks

Any input flag can be replaced by --preset NAME from plants.yaml.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from . import export
from .alphasearch import AlphaSearchConfig
from .benchmarks import benchmark_plant
from .config import Config
from .ellipsoids import (
    Ellipsoid,
    SetPolygon,
    ellipse_boundary,
    obs_inclusion,
    p_alpha,
    q_alpha,
    reach_inclusion,
    set_polygon,
)
from .errors import EpsctlError, InvalidConfig, InvalidModel
from .linmat import spectral_abscissa
from .lmi import BarrierConfig, min_trace_p, min_trace_q
from .models import (
    AlphaCurve,
    ComparisonRow,
    ComparisonTable,
    EllipsoidForm,
    InclusionCheck,
    InclusionReport,
    OutputFormat,
    PlantKind,
    PolicyKind,
    SetKind,
    SignalNorm,
    StructureReport,
)
from .norms import build_report, eps_norm
from .registry import load_preset
from .simulate import SimulationConfig, simulate
from .synth import SynthesisConfig, closed_loop, filter_error_system, state_feedback_loop, synthesize
from .sysmodel import FilterPlant, LtiSystem, OfPlant, Plant, SfPlant, ensure_valid, load_json
from .timegrid import QuadratureConfig

logger = logging.getLogger("epsctl")

INCLUSION_SLACK = 1e-3
DEFAULT_BETAS = "-1,1"


# --- Input -------------------------------------------------------------------


def _load(args, config: Config, kind: Optional[PlantKind]) -> Plant:
    """Read --system, --plant or --preset; kind None accepts whatever the preset holds."""
    if args.system:
        return load_json(args.system, PlantKind.SYSTEM)
    if args.plant:
        if kind is None or kind == PlantKind.SYSTEM:
            raise InvalidConfig("--plant needs --kind sf|filter|of")
        return load_json(args.plant, kind)
    if args.preset:
        return load_preset(config.plants_file, args.preset, kind)
    raise InvalidConfig("an input is required: --system, --plant or --preset")


def _plant_kind(args) -> Optional[PlantKind]:
    if args.system:
        return PlantKind.SYSTEM
    if args.kind:
        return PlantKind(args.kind)
    return None


def _load_system(args, config: Config) -> tuple[LtiSystem, StructureReport]:
    sys = _load(args, config, PlantKind.SYSTEM)
    if not isinstance(sys, LtiSystem):
        raise InvalidConfig("this command needs a system (A, B, C)")
    return sys, ensure_valid(sys)


def _require_stable(sys: LtiSystem) -> None:
    r = spectral_abscissa(sys.a)
    if r >= 0.0:
        raise InvalidModel(f"system is unstable (spectral abscissa {r:.6g})")


def _parse_floats(raw: str, name: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as e:
        raise InvalidConfig(f"{name} must be a comma-separated list of numbers, got {raw!r}") from e


# --- Configuration -----------------------------------------------------------


def _analysis_search(args, config: Config) -> AlphaSearchConfig:
    alpha_max = config.alpha_max
    if args.alpha_max is not None:
        alpha_max = args.alpha_max
    if alpha_max <= 0.0:
        # capped at 0.999 * (-2r) by the analysis range
        alpha_max = math.inf
    return AlphaSearchConfig(
        grid_min=_pick(args.alpha_min, config.alpha_min),
        grid_max=alpha_max,
        grid_points=_pick(args.alpha_points, config.alpha_points),
        refine_tol=config.refine_tol,
    )


def _synthesis_config(args, config: Config) -> SynthesisConfig:
    search = AlphaSearchConfig(
        grid_min=_pick(args.alpha_min, config.synth_alpha_min),
        grid_max=_pick(args.alpha_max, config.synth_alpha_max),
        grid_points=_pick(args.alpha_points, config.alpha_points),
        refine_tol=config.refine_tol,
    )
    return SynthesisConfig(search=search)


def _quadrature(config: Config) -> QuadratureConfig:
    return QuadratureConfig(intervals=config.grid_intervals, decay_tol=config.decay_tol)


def _pick(value, default):
    if value is None:
        return default
    return value


def _emit(args, json_text: str, csv_text: Optional[str] = None) -> None:
    if args.format == OutputFormat.CSV:
        if csv_text is None:
            raise InvalidConfig(f"{args.command} has no CSV output; use --format json")
        export.write_output(csv_text, args.out)
        return
    export.write_output(json_text, args.out)


def _sidecar(out: Optional[str], suffix: str) -> Optional[Path]:
    if not out:
        return None
    path = Path(out)
    return path.with_name(path.stem + suffix)


# --- Commands ----------------------------------------------------------------


def cmd_analyze(args, config: Config, console: Console) -> int:
    sys, structure = _load_system(args, config)
    _require_stable(sys)

    with_lmi = not args.no_lmi
    if with_lmi and not (structure.get("controllability").holds and structure.get("observability").holds):
        logger.warning("LMI norms need a controllable and observable system; skipping omega, circ and circ'")
        with_lmi = False

    report = build_report(
        sys,
        _analysis_search(args, config),
        _quadrature(config),
        with_lmi=with_lmi,
        with_gains=not args.no_gains,
        barrier=BarrierConfig(),
        seed=args.seed,
    )
    _emit(args, export.to_json(report, config.precision), export.curve_csv(report.eps_alpha_curve))

    table = Table(title=f"norms of {sys.name or 'system'}")
    table.add_column("norm")
    table.add_column("value", justify="right")
    for name in ("h2", "energy_to_peak", "impulse_to_energy", "eps", "alpha_hat", "star", "star_prime", "omega", "circ", "circ_prime"):
        value = getattr(report, name)
        if value is not None:
            table.add_row(name, f"{value:.6g}")
    console.print(table)
    failed = [c.name for c in report.chain_checks if not c.holds]
    if failed:
        console.print(f"estimate chains failing: {', '.join(failed)}", markup=False)
    return 0


def cmd_synthesize(args, config: Config, console: Console) -> int:
    plant = _load(args, config, _plant_kind(args))
    if isinstance(plant, LtiSystem):
        raise InvalidConfig("synthesize needs a plant (--kind sf|filter|of)")
    result = synthesize(plant, _synthesis_config(args, config))
    _emit(args, export.to_json(result, config.precision), export.curve_csv(result.curve))

    console.print(f"alpha_hat = {result.alpha_hat:.6g}   eps-norm = {result.eps_norm:.6g}", markup=False)
    if result.k is not None:
        console.print(f"K = {np.array2string(np.asarray(result.k), precision=4)}", markup=False)
    if result.l is not None:
        console.print(f"L = {np.array2string(np.asarray(result.l), precision=4)}", markup=False)
    if result.boundary_flag:
        console.print("minimum sits at the upper end of the alpha grid", markup=False)
    return 0


def cmd_scan(args, config: Config, console: Console) -> int:
    plant = _load(args, config, _plant_kind(args))
    if isinstance(plant, LtiSystem):
        _require_stable(plant)
        ensure_valid(plant)
        found = eps_norm(plant, _analysis_search(args, config))
        curve = AlphaCurve(
            kind=PlantKind.SYSTEM,
            alpha_hat=found.alpha,
            value=found.value,
            boundary_flag=found.at_upper,
            local_minima=found.local_minima,
            curve=found.curve,
        )
    else:
        result = synthesize(plant, _synthesis_config(args, config))
        curve = AlphaCurve(
            kind=result.kind,
            alpha_hat=result.alpha_hat,
            value=result.eps_norm,
            boundary_flag=result.boundary_flag,
            local_minima=result.local_minima,
            curve=result.curve,
        )

    if args.format is None:
        args.format = OutputFormat.CSV
    _emit(args, export.to_json(curve, config.precision), export.curve_csv(curve.curve))
    minima = ", ".join(f"{a:.4g}" for a in curve.local_minima) or "none"
    console.print(f"{len(curve.curve)} points, minimum {curve.value:.6g} at alpha {curve.alpha_hat:.6g}, local minima: {minima}", markup=False)
    return 0


def _inclusions(sys: LtiSystem, polygons: dict[SetKind, SetPolygon], alpha: float, n_dirs: int, quad: QuadratureConfig) -> tuple[list[SetPolygon], InclusionReport]:
    """Ellipses matching each set, and the sampled inclusion verdicts between them."""
    circle = ellipse_boundary(Ellipsoid(np.eye(2), EllipsoidForm.P), n_dirs)
    ellipses: list[tuple[str, Ellipsoid]] = [("p_alpha", p_alpha(sys, alpha)), ("q_alpha", q_alpha(sys, alpha))]
    barrier = BarrierConfig()
    p_tilde = min_trace_p(sys, barrier)
    q_tilde = min_trace_q(sys, barrier)
    ellipses.append(("p_tilde", Ellipsoid(p_tilde.witness, EllipsoidForm.P)))
    ellipses.append(("q_tilde", Ellipsoid(q_tilde.witness, EllipsoidForm.Q)))
    named = dict(ellipses)

    checks = []
    bound = 1.0 + INCLUSION_SLACK
    pairs = [
        (SetKind.REACH_INF, "p_alpha"),
        (SetKind.REACH_ONE, "p_tilde"),
        (SetKind.OBS_ONE, "q_alpha"),
        (SetKind.OBS_INF, "q_tilde"),
    ]
    for kind, ellipse in pairs:
        if kind not in polygons:
            continue
        e = named[ellipse]
        if kind in (SetKind.REACH_INF, SetKind.REACH_ONE):
            worst = reach_inclusion(polygons[kind], e)
            name = f"{kind} in {ellipse}"
        else:
            signal = SignalNorm.ONE
            if kind == SetKind.OBS_INF:
                signal = SignalNorm.INF
            worst = obs_inclusion(sys, signal, e, circle, quad)
            name = f"{ellipse} in {kind}"
        checks.append(InclusionCheck(name=name, worst=worst, bound=bound, holds=worst <= bound))

    boundaries = [SetPolygon(SetKind.ELLIPSE, ellipse_boundary(e, n_dirs), 0.0, label=label) for label, e in ellipses]
    return boundaries, InclusionReport(alpha=alpha, checks=checks)


def cmd_sets(args, config: Config, console: Console) -> int:
    sys, _ = _load_system(args, config)
    if sys.n != 2:
        raise InvalidModel(f"set polygons need a 2-state system, got n={sys.n}")
    _require_stable(sys)
    quad = _quadrature(config)
    n_dirs = _pick(args.dirs, config.polygon_dirs)

    try:
        kinds = [SetKind(k.strip()) for k in args.kinds.split(",") if k.strip()]
    except ValueError as e:
        raise InvalidConfig(f"unknown set kind in {args.kinds!r}; choose from {', '.join(SetKind)}") from e
    polygons = {}
    for kind in kinds:
        if kind == SetKind.ELLIPSE:
            continue
        polygons[kind] = set_polygon(sys, kind, args.horizon, n_dirs, cfg=quad)

    alpha = args.alpha
    if alpha is None:
        alpha = eps_norm(sys, _analysis_search(args, config)).alpha
    ellipses, inclusion = _inclusions(sys, polygons, alpha, n_dirs, quad)

    export.write_output(export.polygons_csv([*polygons.values(), *ellipses]), args.out)
    sidecar = _sidecar(args.out, ".inclusions.json")
    if sidecar is not None:
        export.write_output(export.to_json(inclusion, config.precision), str(sidecar))

    for c in inclusion.checks:
        status = "ok"
        if not c.holds:
            status = "FAILS"
        console.print(f"{c.name}: worst {c.worst:.6g} (bound {c.bound:.6g}) {status}", markup=False)
    return 0


def _closed_loop_from(plant: Plant, config: Config, args) -> LtiSystem:
    if isinstance(plant, LtiSystem):
        ensure_valid(plant)
        return plant
    result = synthesize(plant, _synthesis_config(args, config))
    if isinstance(plant, OfPlant):
        return closed_loop(plant, result.k, result.l)
    if isinstance(plant, SfPlant):
        return state_feedback_loop(plant, result.k)
    if isinstance(plant, FilterPlant):
        return filter_error_system(plant, result.l)
    raise InvalidConfig(f"cannot simulate {type(plant).__name__}")


def cmd_simulate(args, config: Config, console: Console) -> int:
    sys = _closed_loop_from(_load(args, config, _plant_kind(args)), config, args)
    _require_stable(sys)

    alpha = args.alpha
    if alpha is None:
        alpha = eps_norm(sys, _analysis_search(args, config)).alpha
    reference = p_alpha(sys, alpha)

    if args.x0:
        x0 = np.array(_parse_floats(args.x0, "--x0"))
        if x0.size != sys.n:
            raise InvalidConfig(f"--x0 needs {sys.n} values, got {x0.size}")
    else:
        # start on the reference boundary along the first axis
        x0 = reference.boundary_points(np.eye(sys.n)[:1])[0]

    cfg = SimulationConfig(t_end=args.t_end, dt=args.dt, seed=args.seed)
    run = simulate(sys, PolicyKind(args.policy), x0, cfg, reference)

    export.write_output(export.trajectory_csv(run.trajectory), args.out)
    sidecar = _sidecar(args.out, ".meta.json")
    if sidecar is not None:
        export.write_output(export.to_json(run.trajectory.meta, config.precision), str(sidecar))

    r = run.report
    console.print(
        f"max v = {r.max_v:.6g}, first entry t = {r.first_entry_time:.4g}, entered = {r.entered}, monotone = {r.monotone}",
        markup=False,
    )
    return 0


def cmd_compare(args, config: Config, console: Console) -> int:
    if args.beta_points is not None:
        betas = list(np.linspace(args.beta_min, args.beta_max, args.beta_points))
    else:
        betas = _parse_floats(args.betas, "--betas")
    if not betas:
        raise InvalidConfig("no beta values given")

    cfg = _synthesis_config(args, config)
    rows = []
    for beta in betas:
        result = synthesize(benchmark_plant(float(beta)), cfg)
        logger.info("beta=%g alpha_hat=%.4g eps=%.6g", beta, result.alpha_hat, result.eps_norm)
        rows.append(
            ComparisonRow(
                beta=float(beta),
                alpha_hat=result.alpha_hat,
                k=result.k,
                l=result.l,
                eps_norm=result.eps_norm,
                boundary_flag=result.boundary_flag,
                identity_gap=result.identity_gap,
            )
        )
    table_model = ComparisonTable(rows=rows)
    _emit(args, export.to_json(table_model, config.precision), export.comparison_csv(rows))

    table = Table(title="benchmark comparison")
    for col in ("beta", "alpha_hat", "K", "L", "eps-norm"):
        table.add_column(col, justify="right")
    for row in rows:
        k = ", ".join(f"{v:.3g}" for v in row.k[0])
        l = ", ".join(f"{r[0]:.3g}" for r in row.l)
        table.add_row(f"{row.beta:g}", f"{row.alpha_hat:.3g}", f"[{k}]", f"[{l}]", f"{row.eps_norm:.4g}")
    console.print(table)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "scan": cmd_scan,
    "sets": cmd_sets,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


# --- Parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    inputs = argparse.ArgumentParser(add_help=False)
    source = inputs.add_mutually_exclusive_group()
    source.add_argument("--system", help="System JSON with A, B, C")
    source.add_argument("--plant", help="Plant JSON for --kind")
    source.add_argument("--preset", help="Named plant from plants.yaml")
    inputs.add_argument("--kind", choices=["sf", "filter", "of"], help="Plant kind for --plant")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--alpha-min", type=float, help="Smallest alpha on the scan grid")
    grid.add_argument("--alpha-max", type=float, help="Largest alpha on the scan grid")
    grid.add_argument("--alpha-points", type=int, help="Number of log-spaced grid points")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out", "-o", help="Output file (default: stdout)")
    output.add_argument("--format", type=OutputFormat, choices=list(OutputFormat), help="json or csv")

    parser = argparse.ArgumentParser(prog="epsctl", description="eps-norm analysis and synthesis for LTI systems")
    parser.add_argument("--preflight", action="store_true", help="Run health checks")
    subparsers = parser.add_subparsers(dest="command")

    analyze = subparsers.add_parser("analyze", parents=[inputs, grid, output], help="Norm report of a stable system")
    analyze.add_argument("--seed", type=int, default=0, help="Seed for sampled gain oracles")
    analyze.add_argument("--no-lmi", action="store_true", help="Skip the LMI norms omega, circ, circ'")
    analyze.add_argument("--no-gains", action="store_true", help="Skip the time-domain gain oracles")

    subparsers.add_parser("synthesize", parents=[inputs, grid, output], help="Optimal gains for a plant")
    subparsers.add_parser("scan", parents=[inputs, grid, output], help="Objective curve over alpha")

    sets = subparsers.add_parser("sets", parents=[inputs, grid], help="Planar set and ellipse polygons (CSV)")
    sets.add_argument("--kinds", default="reach_inf,reach_one,obs_one,obs_inf", help="Comma-separated set kinds")
    sets.add_argument("--dirs", type=int, help="Number of directions per polygon")
    sets.add_argument("--horizon", type=float, help="Finite horizon T (default: decay horizon)")
    sets.add_argument("--alpha", type=float, help="Ellipsoid parameter (default: the eps-optimal alpha)")
    sets.add_argument("--out", "-o", help="Output CSV (default: stdout)")

    sim = subparsers.add_parser("simulate", parents=[inputs, grid], help="Trajectory under a disturbance policy (CSV)")
    sim.add_argument("--policy", choices=[str(p) for p in PolicyKind], default=str(PolicyKind.WORST))
    sim.add_argument("--seed", type=int, default=0, help="Seed for the random policy")
    sim.add_argument("--alpha", type=float, help="Reference ellipsoid parameter (default: the eps-optimal alpha)")
    sim.add_argument("--x0", help="Comma-separated initial state, e.g. --x0=-1,0 (default: on the reference ellipsoid)")
    sim.add_argument("--t-end", type=float, default=30.0, help="Horizon")
    sim.add_argument("--dt", type=float, help="Step size (default: 1e-3 / -r)")
    sim.add_argument("--out", "-o", help="Output CSV (default: stdout)")

    compare = subparsers.add_parser("compare", parents=[grid, output], help="Benchmark plant over beta")
    compare.add_argument("--betas", default=DEFAULT_BETAS, help="Comma-separated beta values in [-1, 1], e.g. --betas=-1,1")
    compare.add_argument("--beta-min", type=float, default=-1.0)
    compare.add_argument("--beta-max", type=float, default=1.0)
    compare.add_argument("--beta-points", type=int, help="Evenly spaced betas between --beta-min and --beta-max")

    return parser


LIST_FLAGS = ("--betas", "--x0", "--kinds")


def join_list_values(argv: list[str]) -> list[str]:
    """Rewrite "--betas -1,1" as "--betas=-1,1" so argparse does not read "-1,1" as a flag."""
    joined = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token in LIST_FLAGS and i + 1 < len(argv):
            joined.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        joined.append(token)
        i += 1
    return joined


def main(argv: Optional[list[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(join_list_values(list(argv)))
    console = Console(stderr=True, highlight=False)

    try:
        config = Config.from_env()
    except EpsctlError as e:
        console.print(f"error: {e}", markup=False)
        return e.exit_code

    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.WARNING),
        format="%(asctime)s %(name)-20s %(levelname)-5s %(message)s",
        datefmt="%H:%M:%S",
    )

    if args.preflight:
        from .preflight import print_preflight, run_preflight

        ok = print_preflight(run_preflight(config), console)
        if ok:
            return 0
        return 1

    handler = COMMANDS.get(args.command)
    if handler is None:
        parser.print_help()
        return 2

    if getattr(args, "format", None) is None and args.command != "scan":
        args.format = OutputFormat.JSON

    try:
        return handler(args, config, console)
    except EpsctlError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        console.print(f"error: {e}", markup=False)
        return e.exit_code
