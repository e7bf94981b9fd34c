"""pencilbench command line

Subcommands: gen, decompose, condition, ccdf, errccdf, sweep, properties.
Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
"""

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import configure_logging, get_settings
from .core.als_engine import als_refine
from .core.conditioning import condition_number, limiting_ccdf
from .core.metrics import MatchMethod, forward_error
from .core.pba_engine import PbaConfig, ProjectionStrategy, pba_decompose, pba_decompose_projected
from .core.tensor_core import reconstruct
from .errors import InputError, NumericalError, PencilBenchError
from .experiments.adversarial import OdecoSpec, adversarial_sweep, fit_sweep, make_bad_odeco
from .experiments.monte_carlo import (
    McConfig, SamplingModel, Solver, fit_ccdf_tail, run_forward_error_ccdf, run_kappa_ccdf, sample_cpd
)
from .experiments.property_suite import IdentifiabilityConfig, NodecreaseConfig, run_property_suite
from .storage.formats import read_cpd_json, read_tns3, write_cpd_json, write_tns3
from .storage.results import (
    RunManifest,
    condition_script,
    decompose_script,
    error_ccdf_script,
    format_value,
    kappa_ccdf_script,
    properties_script,
    sweep_script,
    write_csv,
    write_manifest,
    write_script,
)

logger = logging.getLogger("pencilbench.cli")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

CONDITION_HEADER = (
    "kappa", "sigma_min", "pair_lower_bound",
    "kruskal_rank_a", "kruskal_rank_b", "kruskal_rank_c",
    "kruskal_identifiable", "sglp_ok", "entry_nonzero_ok",
)
DECOMPOSE_HEADER = (
    "retries_used", "backward_residual", "pencil_separation",
    "refined_residual", "pba_forward_error", "refined_forward_error",
)
SWEEP_HEADER = ("k", "epsilon", "pba_forward_error", "refined_forward_error", "omega")
PROPERTIES_HEADER = ("name", "trials", "failures", "errors", "worst_margin")


def parse_dims(text: str) -> Tuple[int, int, int]:
    """'89x29x11' -> (89, 29, 11)"""
    parts = text.lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like N1xN2xN3, got '{text}'")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dims must be three positive integers, got '{text}'")
    return dims  # type: ignore[return-value]


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    settings_seed = get_settings().seed
    return settings_seed if settings_seed is not None else 0


def _print_row(header: Sequence[str], row: Sequence[Any]) -> None:
    print(",".join(header))
    print(",".join(format_value(v) for v in row))


# ============================================
# SUBCOMMANDS
# ============================================

def cmd_gen(args: argparse.Namespace) -> List[Path]:
    seed = _resolve_seed(args)
    if args.model == "odeco-bad":
        cpd = make_bad_odeco(OdecoSpec(dims=args.dims, rank=args.rank, seed=seed))
    else:
        cpd = sample_cpd(args.dims, args.rank, SamplingModel(args.model), np.random.default_rng(seed))
    cpd_path = Path(f"{args.out}.cpd.json")
    write_cpd_json(cpd_path, cpd)
    write_tns3(Path(f"{args.out}.tns3"), reconstruct(cpd))
    logger.info(f"Generated {args.model} rank-{args.rank} CPD with dims {args.dims}")
    return [cpd_path]


def cmd_decompose(args: argparse.Namespace) -> List[Path]:
    t = read_tns3(args.tensor)
    reference = read_cpd_json(args.reference) if args.reference else None
    strategy = ProjectionStrategy(args.projection)
    cfg = PbaConfig(
        rank=args.rank,
        projection_strategy=strategy,
        fixed_projection=np.eye(t.dims[2])[:, :2] if strategy is ProjectionStrategy.FIXED else None,
        max_projection_retries=args.retries,
        seed=_resolve_seed(args),
    )
    report = pba_decompose_projected(t, cfg) if args.projected else pba_decompose(t, cfg)
    result = report.cpd
    refined_residual = math.nan
    if args.refine:
        refined = als_refine(t, report.cpd)
        result = refined.cpd
        refined_residual = refined.residual / t.norm()

    pba_error = refined_error = math.nan
    if reference is not None:
        pba_error = forward_error(reference, report.cpd, MatchMethod(args.match)).forward_error
        if args.refine:
            refined_error = forward_error(reference, result, MatchMethod(args.match)).forward_error

    row = (report.retries_used, report.backward_residual, report.pencil_separation,
           refined_residual, pba_error, refined_error)
    _print_row(DECOMPOSE_HEADER, row)
    write_cpd_json(Path(f"{args.out}.cpd.json"), result)
    csv_path = Path(f"{args.out}.csv")
    write_csv(csv_path, DECOMPOSE_HEADER, [row])
    write_script(Path(f"{args.out}.gp"), decompose_script(csv_path.name))
    return [csv_path]


def cmd_condition(args: argparse.Namespace) -> List[Path]:
    cpd = read_cpd_json(args.cpd)
    report = condition_number(cpd, diagnostics=not args.no_diagnostics)
    ranks = report.kruskal_ranks or (None, None, None)
    row = (
        report.kappa, report.sigma_min, report.pair_lower_bound, *ranks,
        report.kruskal_identifiable, report.sglp_ok, report.entry_nonzero_ok,
    )
    row = tuple("" if v is None else v for v in row)
    _print_row(CONDITION_HEADER, row)
    if not args.out:
        return []
    csv_path = Path(f"{args.out}.csv")
    write_csv(csv_path, CONDITION_HEADER, [row])
    write_script(Path(f"{args.out}.gp"), condition_script(csv_path.name))
    return [csv_path]


def cmd_ccdf(args: argparse.Namespace) -> List[Path]:
    cfg = McConfig(
        dims=args.dims,
        rank=args.rank,
        trials=args.trials,
        sampling=SamplingModel(args.model),
        master_seed=_resolve_seed(args),
        alpha_grid=tuple(args.alpha),
        threads=args.threads,
    )
    series = run_kappa_ccdf(cfg)
    m3 = cfg.dims[2]
    out = Path(args.out)

    xs, ccdf = series.curve()
    rows = []
    for x, p in zip(xs, ccdf):
        alpha = x / series.scale if series.scale else math.nan
        bound = limiting_ccdf(m3, alpha) if series.scale else math.nan
        rows.append((x, alpha, p, bound))
    curve_path = out.with_name(out.name + ".csv")
    write_csv(curve_path, ("x", "alpha", "empirical_ccdf", "bound_ccdf"), rows)

    raw_path = out.with_name(out.name + ".raw.csv")
    write_csv(raw_path, ("trial", "kappa"), list(enumerate(series.raw.tolist())))

    bounds_path = out.with_name(out.name + ".bounds.csv")
    write_csv(
        bounds_path,
        ("alpha", "x", "empirical_ccdf_at_least", "bound_ccdf"),
        [(b.alpha, b.x, b.empirical, b.bound) for b in series.bounds],
    )
    write_script(out.with_name(out.name + ".gp"), kappa_ccdf_script(curve_path.name, m3))
    for b in series.bounds:
        print(f"alpha={b.alpha:g} x={b.x:.6g} empirical={b.empirical:.6g} bound={b.bound:.6g}")
    return [curve_path, raw_path, bounds_path]


def cmd_errccdf(args: argparse.Namespace) -> List[Path]:
    cfg = McConfig(
        dims=args.dims,
        rank=args.rank,
        trials=args.trials,
        sampling=SamplingModel(args.model),
        master_seed=_resolve_seed(args),
        threads=args.threads,
        match_method=MatchMethod(args.match),
    )
    result = run_forward_error_ccdf(cfg, Solver(args.solver))
    out = Path(args.out)

    raw_path = out.with_name(out.name + ".raw.csv")
    write_csv(
        raw_path,
        ("trial", "forward_error", "omega", "kappa"),
        [(i, f, w, k) for i, (f, w, k) in
         enumerate(zip(result.forward.raw.tolist(), result.omega.raw.tolist(), result.kappas.tolist()))],
    )
    paths = [raw_path]
    for name, series, label in (("forward", result.forward, "forward error"), ("omega", result.omega, "omega")):
        csv_path = out.with_name(f"{out.name}.{name}.csv")
        xs, ccdf = series.curve()
        write_csv(csv_path, ("x", "empirical_ccdf"), list(zip(xs.tolist(), ccdf.tolist())))
        write_script(out.with_name(f"{out.name}.{name}.gp"), error_ccdf_script(csv_path.name, label))
        paths.append(csv_path)
    print(f"solver={result.solver.value} trials={cfg.trials} censored={result.forward.censored} "
          f"omega_censored={result.omega.censored}")
    try:
        tail = fit_ccdf_tail(result.omega)
        print(f"omega_tail_exponent={tail.exponent:.6g} omega_tail_coefficient={tail.coefficient:.6g}")
    except InputError as e:
        logger.info(f"No omega tail fit: {e}")
    return paths


def cmd_sweep(args: argparse.Namespace) -> List[Path]:
    if args.kmin < 1 or args.kmax < args.kmin:
        raise InputError(f"need 1 <= kmin <= kmax, got {args.kmin}..{args.kmax}")
    spec = OdecoSpec(dims=args.dims, rank=args.rank, seed=_resolve_seed(args))
    rows = adversarial_sweep(
        spec,
        range(args.kmin, args.kmax + 1),
        refine=not args.no_refine,
        method=MatchMethod(args.match),
        threads=args.threads,
    )
    out = Path(args.out)
    csv_path = out.with_name(out.name + ".csv")
    write_csv(csv_path, SWEEP_HEADER, [(r.k, r.epsilon, r.pba_forward_error, r.refined_forward_error, r.omega)
                                       for r in rows])
    coefficient = exponent = None
    try:
        fit = fit_sweep(rows)
        coefficient, exponent = fit.coefficient, fit.exponent
        print(f"exponent={exponent:.6g} coefficient={coefficient:.6g}")
    except InputError as e:
        logger.warning(f"No power-law fit: {e}")
    write_script(out.with_name(out.name + ".gp"), sweep_script(csv_path.name, coefficient, exponent))
    return [csv_path]


def cmd_properties(args: argparse.Namespace) -> List[Path]:
    seed = _resolve_seed(args)
    report = run_property_suite(
        NodecreaseConfig(nu=args.nu, trials=args.trials, seed=seed, threads=args.threads),
        IdentifiabilityConfig(trials=args.ident_trials, seed=seed, threads=args.threads),
    )
    out = Path(args.out)
    json_path = out.with_name(out.name + ".json")
    json_path.write_text(json.dumps(report, indent=2) + "\n")
    csv_path = out.with_name(out.name + ".csv")
    rows = [tuple(check[key] for key in PROPERTIES_HEADER) for check in report['checks']]
    write_csv(csv_path, PROPERTIES_HEADER, rows)
    write_script(out.with_name(out.name + ".gp"), properties_script(csv_path.name))
    print(json.dumps(report))
    for check in report['checks']:
        if check['failures']:
            logger.error(f"{check['name']}: {check['failures']} violations in {check['trials']} trials")
    return [json_path, csv_path]


# ============================================
# PARSER
# ============================================

def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="Master seed (fallback: PENCILBENCH_SEED, then 0)")


def _add_match(p: argparse.ArgumentParser) -> None:
    p.add_argument("--match", choices=[m.value for m in MatchMethod], default=MatchMethod.HEURISTIC_LSQ.value,
                   help="Term matching for forward errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pencilbench", description="Pencil-based CPD stability experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes (default: machine parallelism)")
    parser.add_argument("--log-level", default=None, help="Logging level (default: PENCILBENCH_LOG_LEVEL or INFO)")
    parser.add_argument("--log-json", action="store_true", help="JSON log records on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Generate a random or adversarial CPD and its tensor")
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--model", choices=["gaussian", "orthoab", "odeco-bad"], default="gaussian")
    _add_seed(p)
    p.add_argument("--out", required=True, help="Output prefix")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decompose", help="Run the pencil-based algorithm on a .tns3 tensor")
    p.add_argument("--tensor", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--projection", choices=[s.value for s in ProjectionStrategy], default="random",
                   help="fixed uses the first two coordinate directions of mode 3")
    p.add_argument("--retries", type=int, default=5)
    p.add_argument("--projected", action="store_true", help="Decompose the projection first, then solve for C")
    p.add_argument("--refine", action="store_true", help="Refine the PBA output with ALS")
    p.add_argument("--reference", default=None, help="Known .cpd.json for forward errors")
    _add_match(p)
    _add_seed(p)
    p.add_argument("--out", required=True, help="Output prefix")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("condition", help="Condition number and identifiability diagnostics of a CPD")
    p.add_argument("--cpd", required=True)
    p.add_argument("--no-diagnostics", action="store_true", help="Skip Kruskal and SGLP checks")
    p.add_argument("--out", default=None, help="Also write PREFIX.csv")
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("ccdf", help="Monte Carlo ccdf of the condition number")
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--model", choices=[m.value for m in SamplingModel], default=SamplingModel.GAUSSIAN_ALL.value)
    p.add_argument("--alpha", type=float, nargs="+", default=[2.0, 4.0, 8.0])
    _add_seed(p)
    p.add_argument("--out", required=True, help="Output prefix")
    p.set_defaults(func=cmd_ccdf)

    p = sub.add_parser("errccdf", help="Monte Carlo ccdfs of forward error and excess factor")
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--model", choices=[m.value for m in SamplingModel], default=SamplingModel.GAUSSIAN_ALL.value)
    p.add_argument("--solver", choices=[s.value for s in Solver], default=Solver.PBA_RANDOM.value)
    _add_match(p)
    _add_seed(p)
    p.add_argument("--out", required=True, help="Output prefix")
    p.set_defaults(func=cmd_errccdf)

    p = sub.add_parser("sweep", help="Adversarial sweep around a bad odeco tensor")
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=int, default=50)
    p.add_argument("--no-refine", action="store_true", help="Skip ALS refinement")
    _add_match(p)
    _add_seed(p)
    p.add_argument("--out", required=True, help="Output prefix")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("properties", help="Randomized property checks")
    p.add_argument("--trials", type=int, default=1000, help="No-decrease trials")
    p.add_argument("--ident-trials", type=int, default=100, help="Identifiability trials")
    p.add_argument("--nu", type=float, default=0.01)
    _add_seed(p)
    p.add_argument("--out", required=True, help="Output prefix")
    p.set_defaults(func=cmd_properties)
    return parser


def _config_echo(args: argparse.Namespace) -> Dict[str, Any]:
    echo = {}
    for key, value in sorted(vars(args).items()):
        if callable(value):
            continue
        echo[key] = list(value) if isinstance(value, tuple) else value
    return echo


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, args.log_json or settings.log_json)
    if args.threads is None:
        args.threads = settings.threads

    command: Callable[[argparse.Namespace], List[Path]] = args.func
    started = time.perf_counter()
    try:
        outputs = command(args)
    except InputError as e:
        logger.error(f"{args.command}: {e}")
        print(f"pencilbench {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        logger.error(f"{args.command}: {e}")
        print(f"pencilbench {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PencilBenchError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error(f"{args.command}: {e}")
        print(f"pencilbench {args.command}: I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE

    wall_time = time.perf_counter() - started
    manifest = RunManifest(
        command=args.command,
        config=_config_echo(args),
        master_seed=_resolve_seed(args) if hasattr(args, "seed") else None,
        version=__version__,
        wall_time=wall_time,
        outputs=[p.name for p in outputs],
    )
    try:
        for path in outputs:
            write_manifest(path, manifest)
    except OSError as e:
        print(f"pencilbench {args.command}: cannot write manifest: {e}", file=sys.stderr)
        return EXIT_USAGE
    logger.info(f"{args.command} finished in {wall_time:.2f}s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
