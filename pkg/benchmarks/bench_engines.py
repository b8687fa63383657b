"""Timing comparison: pure-Python engine vs the compiled kernel.

Runs matched workloads on both engines, checks they agree on the
outcome, and prints per-run wall time and the speedup.  Sizes are kept
modest because the pure engine is the slow side by two orders of
magnitude; pass --scale to grow them.

Usage: python3 benchmarks/bench_engines.py [--seeds K] [--scale F]
"""

import argparse
import sys
import time

from misbeep.engine import HAS_KERNEL, WakeupSchedule, run_simulation
from misbeep.experiments import parse_graph_spec
from misbeep.protocols import Algo1NoCdProtocol, Algo1Protocol, Algo2Protocol


def workloads(scale):
    def sz(n):
        return max(8, int(n * scale))

    return [
        (f"algo1      ring:{sz(256)}", f"ring:{sz(256)}",
         lambda n: Algo1Protocol(n_upper=n)),
        (f"algo1      gnp:{sz(256)}:8overN", f"gnp:{sz(256)}:8overN",
         lambda n: Algo1Protocol(n_upper=n)),
        (f"algo1      bipartite:{sz(256)}", f"bipartite:{sz(256)}",
         lambda n: Algo1Protocol(n_upper=n)),
        (f"algo1-nocd gnp:{sz(64)}:8overN", f"gnp:{sz(64)}:8overN",
         lambda n: Algo1NoCdProtocol(n_upper=n)),
        (f"algo2      clique:{sz(256)}", f"clique:{sz(256)}",
         lambda n: Algo2Protocol(big_n=sz(256))),
    ]


def time_engine(g, protocol, engine, seeds):
    best = None
    mis = None
    start = time.perf_counter()
    for seed in seeds:
        res = run_simulation(g, protocol, WakeupSchedule.sync(), seed=seed,
                             engine=engine)
        mis = res.mis_size if mis is None else mis
    elapsed = (time.perf_counter() - start) / len(seeds)
    return elapsed, mis


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3,
                    help="runs per workload per engine (default 3)")
    ap.add_argument("--scale", type=float, default=1.0,
                    help="multiply workload sizes by this factor")
    args = ap.parse_args(argv)
    seeds = range(args.seeds)

    if not HAS_KERNEL:
        print("compiled kernel not available; timing the pure engine only")
    rows = []
    for label, spec, make in workloads(args.scale):
        g = parse_graph_spec(spec, seed=0)
        protocol = make(g.node_count)
        pure_t, pure_mis = time_engine(g, protocol, "pure", seeds)
        if HAS_KERNEL:
            kern_t, kern_mis = time_engine(g, protocol, "kernel", seeds)
            assert pure_mis == kern_mis, f"engines disagree on {label}"
            rows.append((label, pure_t, kern_t))
        else:
            rows.append((label, pure_t, None))

    print(f"{'workload':34s} {'pure':>12s} {'kernel':>12s} {'speedup':>9s}")
    for label, pure_t, kern_t in rows:
        if kern_t is None:
            print(f"{label:34s} {pure_t * 1e3:10.1f} ms {'-':>12s} {'-':>9s}")
        else:
            print(f"{label:34s} {pure_t * 1e3:10.1f} ms {kern_t * 1e3:10.1f} ms"
                  f" {pure_t / kern_t:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
