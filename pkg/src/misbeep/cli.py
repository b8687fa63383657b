"""Command line front end: run, sweep, lowerbound, verify."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .experiments import (
    ExperimentConfig,
    lowerbound_report,
    records_json,
    run_experiment,
    sweep,
    verify_file,
    write_csv,
)

_CONFIG_KEYS = ("algorithm", "graph", "n_upper", "big_n", "mode", "wakeup",
                "trials", "seed", "round_cap", "m_const", "c_const", "engine")


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"config file {path}: {exc}")
    if not isinstance(data, dict):
        raise SystemExit(f"config file {path} must hold a JSON object")
    unknown = set(data) - set(_CONFIG_KEYS)
    if unknown:
        raise SystemExit(f"config file {path}: unknown keys {sorted(unknown)}")
    return data


def _merged_config(args: argparse.Namespace) -> ExperimentConfig:
    """File values fill in whatever flags did not set (flags win)."""
    base = _load_config_file(getattr(args, "config", None))
    kwargs = {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            kwargs[key] = flag
        elif key in base:
            kwargs[key] = base[key]
    return ExperimentConfig(**kwargs)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--algorithm", choices=("algo1", "algo1-nocd", "algo2"))
    p.add_argument("--n-upper", dest="n_upper", type=int,
                   help="upper bound handed to the protocol (default: actual n)")
    p.add_argument("--N", dest="big_n", type=int,
                   help="identifier-space size for algo2")
    p.add_argument("--mode", choices=("ListenWhileBeeping", "BeepOnly"))
    p.add_argument("--wakeup", help="sync | random:fraction:maxround | file path")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--round-cap", dest="round_cap", type=int)
    p.add_argument("--M", dest="m_const", type=int,
                   help="steps-per-phase multiplier")
    p.add_argument("--c", dest="c_const", type=int,
                   help="window-length multiplier for algo1-nocd")
    p.add_argument("--engine", choices=("auto", "pure", "kernel"))


def _emit_records(records, args) -> None:
    if args.json:
        text = records_json(records) + "\n"
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return
    stamp = None if args.no_timestamp else time.strftime("%Y-%m-%dT%H:%M:%S")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(records, fh, timestamp=stamp)
    else:
        write_csv(records, sys.stdout, timestamp=stamp)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    try:
        records = run_experiment(config)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"invalid config: {exc}")
    _emit_records(records, args)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    ns = [int(v) for v in args.n.split(",")] if args.n else None
    big_ns = [int(v) for v in args.big_ns.split(",")] if args.big_ns else None
    try:
        result = sweep(config, ns=ns, big_ns=big_ns,
                       n_upper_power=args.n_upper_power)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"invalid sweep: {exc}")
    print(result.table())
    if args.output:
        stamp = None if args.no_timestamp else time.strftime("%Y-%m-%dT%H:%M:%S")
        records = [r for p in result.points for r in p.records]
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(records, fh, timestamp=stamp)
    return 0


def _cmd_lowerbound(args: argparse.Namespace) -> int:
    log_ns = [float(v) for v in args.logn.split(",")]
    entries = lowerbound_report(log_ns, grid=args.grid, trials=args.trials,
                                seed=args.seed)
    for entry in entries:
        for line in entry.lines():
            print(line)
    return 0 if all(e.certificate for e in entries) else 1


def _cmd_verify(args: argparse.Namespace) -> int:
    try:
        ok, text = verify_file(args.graph, args.status)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"verify: {exc}")
    print(text)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misbeep",
        description="Seeded simulator for beep-channel MIS protocols")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment, emit per-trial rows")
    _add_config_flags(p_run)
    p_run.add_argument("--graph", help="clique:N | ring:N | gnp:N:P | bipartite:N")
    p_run.add_argument("--output", help="write CSV/JSON here instead of stdout")
    p_run.add_argument("--json", action="store_true",
                       help="emit one JSON object per trial instead of CSV")
    p_run.add_argument("--no-timestamp", action="store_true",
                       help="suppress the timestamp header line")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="scaling sweep with least-squares fit")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--graph-template", dest="graph",
                         help="graph spec with {n}, e.g. gnp:{n}:8overN")
    p_sweep.add_argument("--n", help="comma-separated node counts")
    p_sweep.add_argument("--N-list", dest="big_ns",
                         help="comma-separated identifier-space sizes (algo2)")
    p_sweep.add_argument("--n-upper-power", dest="n_upper_power", type=int,
                         default=1, help="hand the protocol n^power as its upper bound")
    p_sweep.add_argument("--output", help="also write every trial row as CSV")
    p_sweep.add_argument("--no-timestamp", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_lb = sub.add_parser("lowerbound",
                          help="failure-product certificates and hard-family runs")
    p_lb.add_argument("--logn", default="12,20,40",
                      help="comma-separated log2(n) values")
    p_lb.add_argument("--grid", type=float, default=1e-4,
                      help="probability grid resolution")
    p_lb.add_argument("--trials", type=int, default=100,
                      help="Monte-Carlo trials per log_n (0 disables)")
    p_lb.add_argument("--seed", type=int, default=0)
    p_lb.set_defaults(func=_cmd_lowerbound)

    p_ver = sub.add_parser("verify", help="check a status file against a graph file")
    p_ver.add_argument("--graph", required=True, help="edge-list file")
    p_ver.add_argument("--status", required=True, help="per-node status file")
    p_ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
