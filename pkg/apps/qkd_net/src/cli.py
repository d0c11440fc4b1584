import argparse
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from src.config.settings import SimConfig, load_config
from src.domain.postprocess import LambdaMode, base_rate, rate_table, segmented_rate
from src.domain.topology import PlacementPreset, build_topology
from src.exceptions import ConfigError, DistillationInputError, PlacementError, QkdNetworkError
from src.infrastructure.writers import FORMATS, OutputRecord, write_results
from src.services.simulator import DEFAULT_DECOHERENCE_GRID, SimResult, run, summarize, sweep

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DEFAULT_Q_GRID = [0.0, 0.01, 0.02, 0.05, 0.08, 0.10, 0.11, 0.12, 0.15, 0.17, 0.18, 0.19, 0.20, 0.25]
SEGMENT_DEMO = [(0.75, 0.04), (0.25, 0.10)]

# flag destination -> SimConfig field
CONFIG_FLAGS = {
    "lattice_size": "lattice_size",
    "preset": "preset",
    "link_length": "link_length_km",
    "alpha": "alpha",
    "success_prob": "success_prob",
    "bsm_success": "bsm_success",
    "rounds": "rounds",
    "balancer": "balancer",
    "sigma": "sigma",
    "delta": "delta",
    "theta": "theta",
    "priority_cadence": "priority_cadence",
    "segmenting": "segmenting",
    "segment_width": "segment_width",
    "cad": "cad",
    "cad_max": "cad_max",
    "cad_lambda": "cad_lambda",
    "bit_sampling": "bit_sampling",
    "check_paths": "check_paths",
}


def setup_logging(verbosity: int = 0, log_file: Optional[str] = None) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="YAML config file")
    parser.add_argument("--lattice-size", type=int, help="Inner lattice size S")
    parser.add_argument("--preset", type=str, help="Trusted-node placement preset")
    parser.add_argument("--link-length", type=float, help="Uniform link length in km")
    parser.add_argument("--alpha", type=float, help="Fiber loss in dB/km")
    parser.add_argument("--success-prob", type=float, help="Link success probability, bypasses alpha/L")
    parser.add_argument("--bsm-success", type=float, help="Swapping success probability R")
    parser.add_argument("--rounds", type=int, help="Number of network rounds N")
    parser.add_argument("--balancer", type=str, help="Dynamic priority rule: surplus or bottleneck")
    parser.add_argument("--sigma", type=float, help="Surplus tolerance")
    parser.add_argument("--delta", type=float, help="Near-minimum tolerance")
    parser.add_argument("--theta", type=float, help="Distance filter fraction")
    parser.add_argument("--priority-cadence", type=int, help="Rounds between priority updates")
    parser.add_argument("--segmenting", action=argparse.BooleanOptionalAction, default=None,
                        help="Distill noise classes separately")
    parser.add_argument("--segment-width", type=int, help="Repeater counts per noise class")
    parser.add_argument("--cad", action=argparse.BooleanOptionalAction, default=None,
                        help="Apply advantage distillation")
    parser.add_argument("--cad-max", type=int, help="Largest CAD block size searched")
    parser.add_argument("--cad-lambda", type=str, help="worst-case or werner")
    parser.add_argument("--bit-sampling", action=argparse.BooleanOptionalAction, default=None,
                        help="Sample bit errors to validate the noise model")
    parser.add_argument("--check-paths", action=argparse.BooleanOptionalAction, default=None,
                        help="Assert path invariants every round")


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=str, help="Write result records to this file")
    parser.add_argument("--format", type=str, choices=FORMATS, default="csv", help="Output file format")
    parser.add_argument("--omit-runtime", action="store_true",
                        help="Leave out wall time so repeated runs write identical files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Trusted-node / repeater QKD network simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    parser.add_argument("--log-file", type=str, help="Also write log lines to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="Run a single simulation")
    _add_config_flags(run_parser)
    run_parser.add_argument("--policy", type=str, help="static or dynamic")
    run_parser.add_argument("--decoherence", type=float, help="Per-link decoherence probability D")
    run_parser.add_argument("--seed", type=int, help="RNG seed")
    _add_output_flags(run_parser)

    sweep_parser = sub.add_parser("sweep", help="Run a grid of decoherence x policy x seed")
    _add_config_flags(sweep_parser)
    sweep_parser.add_argument("--policy", "--policies", dest="policies", type=str, nargs="+",
                              default=["static", "dynamic"], help="Policies to compare")
    sweep_parser.add_argument("--decoherence", type=float, nargs="+", default=list(DEFAULT_DECOHERENCE_GRID),
                              help="Decoherence values")
    sweep_parser.add_argument("--seeds", "--seed", dest="seeds", type=int, nargs="+", default=[0],
                              help="RNG seeds")
    sweep_parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="Parallel workers")
    _add_output_flags(sweep_parser)

    rates_parser = sub.add_parser("rates", help="Print post-processing rate tables")
    rates_parser.add_argument("--cad-max", type=int, default=8, help="Largest CAD block size")
    rates_parser.add_argument("--cad-lambda", type=str, default="worst-case", help="worst-case or werner")
    rates_parser.add_argument("--q", dest="q_values", type=float, nargs="+", default=DEFAULT_Q_GRID,
                              help="QBER values")

    presets_parser = sub.add_parser("presets", help="List placement presets")
    presets_parser.add_argument("--lattice-size", type=int, default=7, help="Inner lattice size S")
    return parser


def config_from_args(args: argparse.Namespace, **extra: Any) -> SimConfig:
    overrides: Dict[str, Any] = {field: getattr(args, flag, None) for flag, field in CONFIG_FLAGS.items()}
    overrides.update(extra)
    return load_config(args.config, overrides)


def _pair_table(result: SimResult) -> Table:
    table = Table(title=f"{result.preset} / {result.policy}, D={result.decoherence}, seed {result.seed}")
    table.add_column("Pair")
    table.add_column("Sifted", justify="right")
    table.add_column("Secret bits", justify="right")
    table.add_column("Flow", justify="right")
    table.add_column("Waste", justify="right")
    for pair, bits in result.secret_bits.items():
        table.add_row(
            pair,
            str(sum(result.pools.get(pair, {}).values())),
            f"{bits:.1f}",
            f"{result.flows.get(pair, 0.0):.1f}",
            f"{result.waste.get(pair, 0.0):.1f}",
        )
    return table


def _emit(results: List[SimResult], args: argparse.Namespace) -> None:
    if args.out:
        records = [OutputRecord.from_result(r, omit_runtime=args.omit_runtime) for r in results]
        write_results(records, args.out, args.format)
        console.print(f"[green]Wrote {len(records)} records to {args.out}[/green]")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args, policy=args.policy, decoherence=args.decoherence, seed=args.seed)
    result = run(cfg)
    console.print(_pair_table(result))
    console.print(f"key_rate = {result.key_rate:.6f}")
    _emit([result], args)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    base = config_from_args(args)
    base.topology()
    results = sweep(base, args.decoherence, args.policies, args.seeds, jobs=args.jobs)
    summary = summarize(results)
    table = Table(title=f"Key rate over {len(args.seeds)} seed(s)")
    for column in ("Preset", "Policy", "D", "Runs", "Mean", "Std"):
        table.add_column(column, justify="left" if column in ("Preset", "Policy") else "right")
    for row in summary.itertuples(index=False):
        table.add_row(row.preset, row.policy, f"{row.decoherence:g}", str(row.runs),
                      f"{row.mean_key_rate:.4f}", f"{row.std_key_rate:.4f}")
    console.print(table)
    _emit(results, args)
    return 0


def _check_rate_flags(args: argparse.Namespace) -> LambdaMode:
    if args.cad_max < 1:
        raise ConfigError("cad_max", f"must be >= 1, got {args.cad_max}")
    bad_q = [q for q in args.q_values if not 0.0 <= q <= 0.5]
    if bad_q:
        raise ConfigError("q", f"QBER values must be in [0, 0.5], got {bad_q}")
    try:
        return LambdaMode.parse(args.cad_lambda)
    except DistillationInputError as e:
        raise ConfigError("cad_lambda", str(e)) from None


def cmd_rates(args: argparse.Namespace) -> int:
    mode = _check_rate_flags(args)
    rows = rate_table(args.q_values, args.cad_max, lambda_mode=mode)
    table = Table(title=f"Secret bits per sifted bit ({mode.value})")
    table.add_column("Q", justify="right")
    table.add_column("1-2h(Q)", justify="right")
    for C in range(1, args.cad_max + 1):
        table.add_column(f"r(C={C})", justify="right")
    table.add_column("C*", justify="right")
    table.add_column("Throughput", justify="right")
    for row in rows:
        table.add_row(
            f"{row['Q']:.3f}",
            f"{row['base']:.4f}",
            *[f"{row[f'r{C}']:.4f}" for C in range(1, args.cad_max + 1)],
            str(row["C*"]),
            f"{row['best']:.4f}",
        )
    console.print(table)

    pooled_q = sum(p * q for p, q in SEGMENT_DEMO)
    console.print(
        f"Segmenting {SEGMENT_DEMO}: pooled 1-2h({pooled_q:.3f}) = {base_rate(pooled_q):.3f}, "
        f"segmented = {segmented_rate(SEGMENT_DEMO):.3f}"
    )
    return 0


def cmd_presets(args: argparse.Namespace) -> int:
    S = args.lattice_size
    table = Table(title=f"Placement presets, S={S}")
    table.add_column("Preset")
    table.add_column("Trusted nodes")
    table.add_column("Distances")
    for preset in PlacementPreset:
        if preset is PlacementPreset.CUSTOM:
            continue
        try:
            t = build_topology(S, preset)
        except PlacementError as e:
            table.add_row(preset.value, "[yellow]n/a[/yellow]", str(e))
            continue
        chain = [t.terminal_distance(i, i + 1) for i in range(len(t.terminals) - 1)]
        table.add_row(
            preset.value,
            ", ".join(str(pos) for pos in t.trusted_nodes) or "-",
            "-".join(map(str, chain)),
        )
    console.print(table)
    return 0


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "presets": cmd_presets,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, PlacementError) as e:
        err_console.print(f"[red]Configuration error: {e}[/red]")
        return 1
    except QkdNetworkError as e:
        err_console.print(f"[red]Error: {e}[/red]")
        return 2
