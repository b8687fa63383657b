"""Batched seeded experiments and their CSV/JSON/report plumbing.

A config describes one experiment: protocol, graph spec, wake-up spec,
trial count, base seed.  Trials run at seeds seed, seed+1, ... and each
yields one flat record; rows are sorted by seed before emission so the
degree of parallelism can never change the output.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .engine import ChannelMode, SimResult, WakeupSchedule, run_simulation
from .graphs import (
    Graph,
    gen_bipartite_family,
    gen_clique,
    gen_gnp,
    gen_ring,
    read_edge_list,
    read_status_file,
    verify_mis,
)
from .lowerbound import UniformSchedule, min_product_over_p, simulate_uniform_process
from .protocols import (
    Algo1NoCdProtocol,
    Algo1Protocol,
    Algo2Protocol,
    C_DEFAULT,
    M_DEFAULT,
    Protocol,
)

ALGORITHMS = ("algo1", "algo1-nocd", "algo2")

CSV_COLUMNS = ("algorithm", "graph", "n", "n_upper", "big_n", "mode", "wakeup",
               "seed", "total_rounds", "max_active_time", "mis_size",
               "algorithm_beeps", "wakeup_beeps", "beeps_per_mis_node",
               "valid", "failed_nodes")

# seedless generated graphs are cached per spec string; fork-based worker
# pools inherit the cache for free
_GRAPH_CACHE: dict[str, Graph] = {}


def parse_graph_spec(spec: str, seed: int = 0) -> Graph:
    """Build the graph named by a spec like clique:64, ring:512,
    gnp:1024:0.01 (or gnp:1024:8overN), bipartite:4096.  gnp draws its
    edges from the given seed; the other kinds are deterministic in n."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "clique" and len(parts) == 2:
            n = int(parts[1])
            key = f"clique:{n}"
            if key not in _GRAPH_CACHE:
                _GRAPH_CACHE[key] = gen_clique(n)
            return _GRAPH_CACHE[key]
        if kind == "ring" and len(parts) == 2:
            n = int(parts[1])
            key = f"ring:{n}"
            if key not in _GRAPH_CACHE:
                _GRAPH_CACHE[key] = gen_ring(n)
            return _GRAPH_CACHE[key]
        if kind == "bipartite" and len(parts) == 2:
            n = int(parts[1])
            key = f"bipartite:{n}"
            if key not in _GRAPH_CACHE:
                _GRAPH_CACHE[key] = gen_bipartite_family(n)
            return _GRAPH_CACHE[key]
        if kind == "gnp" and len(parts) == 3:
            n = int(parts[1])
            p = 8.0 / n if parts[2] == "8overN" else float(parts[2])
            return gen_gnp(n, p, seed=seed)
    except ValueError as exc:
        raise ValueError(f"graph: bad spec {spec!r}: {exc}") from None
    raise ValueError(f"graph: unknown spec {spec!r} "
                     "(expected clique:N, ring:N, gnp:N:P, or bipartite:N)")


def parse_wakeup_spec(spec: str, trial_seed: int, n: int) -> WakeupSchedule:
    """sync | random:fraction:maxround | path to a per-node round file
    (one integer per line, -1 for never).  Random schedules redraw per
    trial seed so repeated trials exercise different wake patterns."""
    if spec == "sync":
        return WakeupSchedule.sync()
    if spec.startswith("random:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"wakeup: bad spec {spec!r} (want random:fraction:maxround)")
        try:
            return WakeupSchedule.random_subset(float(parts[1]), int(parts[2]),
                                                seed=trial_seed)
        except ValueError as exc:
            raise ValueError(f"wakeup: {exc}") from None
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            rounds = [int(line.strip()) for line in fh if line.strip()]
    except OSError as exc:
        raise ValueError(f"wakeup: cannot read {spec!r}: {exc}") from None
    if len(rounds) != n:
        raise ValueError(f"wakeup: file lists {len(rounds)} rounds, graph has {n} nodes")
    return WakeupSchedule.explicit(rounds)


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str = "algo1"
    graph: str = "clique:64"
    n_upper: int | None = None  # default: actual node count
    big_n: int | None = None  # algo2 only
    mode: str | None = None  # default: forced by the algorithm
    wakeup: str = "sync"
    trials: int = 1
    seed: int = 0
    round_cap: int | None = None
    m_const: int = M_DEFAULT
    c_const: int = C_DEFAULT
    engine: str = "auto"

    def validate(self) -> None:
        """Raise ValueError naming the offending field."""
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm: unknown selector {self.algorithm!r}")
        n = parse_graph_spec(self.graph, seed=self.seed).node_count
        if self.n_upper is not None and self.n_upper < n:
            raise ValueError(f"n_upper: {self.n_upper} is below the actual node count {n}")
        if self.algorithm == "algo2":
            if self.big_n is None or self.big_n < 1:
                raise ValueError("big_n: algo2 needs a positive identifier-space size")
        if self.mode is not None:
            forced = ("BeepOnly" if self.algorithm == "algo1-nocd"
                      else "ListenWhileBeeping")
            if self.mode != forced:
                raise ValueError(f"mode: {self.algorithm} forces {forced}, got {self.mode!r}")
        if self.trials < 1:
            raise ValueError(f"trials: must be >= 1, got {self.trials}")
        if self.round_cap is not None and self.round_cap < 1:
            raise ValueError(f"round_cap: must be >= 1, got {self.round_cap}")
        if self.m_const < 1:
            raise ValueError(f"m_const: must be >= 1, got {self.m_const}")
        if self.c_const < 1:
            raise ValueError(f"c_const: must be >= 1, got {self.c_const}")
        if self.engine not in ("auto", "pure", "kernel"):
            raise ValueError(f"engine: unknown selector {self.engine!r}")
        parse_wakeup_spec(self.wakeup, self.seed, n)

    def protocol_for(self, n: int) -> Protocol:
        n_upper = self.n_upper if self.n_upper is not None else n
        if self.algorithm == "algo1":
            return Algo1Protocol(n_upper=n_upper, m_const=self.m_const)
        if self.algorithm == "algo1-nocd":
            return Algo1NoCdProtocol(n_upper=n_upper, m_const=self.m_const,
                                     c_const=self.c_const)
        return Algo2Protocol(big_n=self.big_n, n_upper=n_upper)


@dataclass(frozen=True)
class RunRecord:
    algorithm: str
    graph: str
    n: int
    n_upper: int
    big_n: int | None
    mode: str
    wakeup: str
    seed: int
    total_rounds: int
    max_active_time: int
    mis_size: int
    algorithm_beeps: int
    wakeup_beeps: int
    beeps_per_mis_node: float
    valid: bool
    failed_nodes: int

    def to_row(self) -> list[str]:
        vals = [getattr(self, c) for c in CSV_COLUMNS]
        out = []
        for v in vals:
            if isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, float):
                out.append(repr(v))
            elif v is None:
                out.append("")
            else:
                out.append(str(v))
        return out

    def to_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def _record_from_result(config: ExperimentConfig, trial_seed: int,
                        result: SimResult, n: int, n_upper: int) -> RunRecord:
    mis = result.mis_size
    beeps = result.total_algorithm_beeps
    return RunRecord(
        algorithm=config.algorithm, graph=config.graph, n=n, n_upper=n_upper,
        big_n=config.big_n, mode=result.mode.label, wakeup=config.wakeup,
        seed=trial_seed, total_rounds=result.total_rounds,
        max_active_time=result.max_active_time, mis_size=mis,
        algorithm_beeps=beeps, wakeup_beeps=result.total_wakeup_beeps,
        beeps_per_mis_node=(beeps / mis if mis else 0.0),
        valid=result.valid and result.failed_count == 0,
        failed_nodes=result.failed_count,
    )


def run_trial(config: ExperimentConfig, trial_seed: int) -> RunRecord:
    """One simulation at one seed, reduced to a flat record."""
    g = parse_graph_spec(config.graph, seed=trial_seed)
    schedule = parse_wakeup_spec(config.wakeup, trial_seed, g.node_count)
    protocol = config.protocol_for(g.node_count)
    result = run_simulation(g, protocol, schedule, seed=trial_seed,
                            round_cap=config.round_cap, engine=config.engine)
    n_upper = config.n_upper if config.n_upper is not None else g.node_count
    return _record_from_result(config, trial_seed, result, g.node_count, n_upper)


def _worker(args: tuple) -> RunRecord:
    config, trial_seed = args
    return run_trial(config, trial_seed)


def thread_budget() -> int:
    """Worker-count cap from MISBEEP_THREADS (hardware default if unset)."""
    raw = os.environ.get("MISBEEP_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"MISBEEP_THREADS: not an integer: {raw!r}") from None
        if cap < 1:
            raise ValueError(f"MISBEEP_THREADS: must be >= 1, got {cap}")
        return cap
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """All trials of one config, rows ordered by seed."""
    config.validate()
    seeds = list(range(config.seed, config.seed + config.trials))
    workers = min(thread_budget(), len(seeds))
    if workers <= 1 or len(seeds) == 1:
        records = [run_trial(config, s) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_worker, [(config, s) for s in seeds]))
    records.sort(key=lambda r: r.seed)
    return records


# ---------------------------------------------------------------------------
# CSV / JSON emission
# ---------------------------------------------------------------------------

def write_csv(records: Iterable[RunRecord], out: TextIO,
              timestamp: str | None = None) -> None:
    if timestamp is not None:
        out.write(f"# generated {timestamp}\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        out.write(",".join(r.to_row()) + "\n")


def records_json(records: Iterable[RunRecord]) -> str:
    return json.dumps([r.to_dict() for r in records], indent=2)


# ---------------------------------------------------------------------------
# Scaling sweeps
# ---------------------------------------------------------------------------

def ols_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line fit: (slope, intercept, R^2)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("fit needs at least two distinct x values")
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    sst = float(((y - ym) ** 2).sum())
    r2 = 1.0 if sst == 0.0 else 1.0 - float((resid ** 2).sum()) / sst
    return slope, intercept, r2


@dataclass(frozen=True)
class SweepPoint:
    n: int
    big_n: int | None
    x: float  # regressor: log2(n)^2, or log2(n)*log2(N) for the wrap-around protocol
    mean_active: float
    max_active: int
    mean_rounds: float
    mean_beeps_per_mis: float
    all_valid: bool
    records: tuple[RunRecord, ...]


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    slope: float
    intercept: float
    r_squared: float
    x_label: str

    def table(self) -> str:
        lines = ["      n        x  mean_active   max  mean_beeps/mis  valid"]
        for p in self.points:
            lines.append(f"{p.n:7d} {p.x:8.1f} {p.mean_active:12.1f} {p.max_active:5d}"
                         f" {p.mean_beeps_per_mis:15.2f}  {'yes' if p.all_valid else 'NO'}")
        lines.append(f"fit: mean_active = {self.slope:.3f} * {self.x_label}"
                     f" + {self.intercept:.1f}   R^2 = {self.r_squared:.4f}")
        return "\n".join(lines)


def sweep(template: ExperimentConfig, ns: Sequence[int] | None = None,
          big_ns: Sequence[int] | None = None,
          n_upper_power: int = 1) -> SweepResult:
    """Run the template across a size axis and fit the scaling law.

    For the bounded protocols vary n through a graph template containing
    '{n}' and regress on log2(n)^2; for the wrap-around protocol vary N
    on a fixed graph and regress on log2(n)*log2(N).  n_upper_power sets
    the polynomial upper bound n^power handed to the protocol (unless
    the template pins n_upper); powers above 1 keep small n out of the
    degenerate regime where a whole phase outlasts the coin odds."""
    if bool(ns) == bool(big_ns):
        raise ValueError("sweep needs exactly one of ns or big_ns")
    if n_upper_power < 1:
        raise ValueError("n_upper_power must be >= 1")
    axis = ns if ns else big_ns
    if len(axis) < 3:
        raise ValueError("sweep needs at least 3 points")
    points = []
    for val in axis:
        if ns:
            config = replace(template, graph=template.graph.format(n=val))
            if template.n_upper is None and n_upper_power > 1:
                config = replace(config, n_upper=int(val) ** n_upper_power)
        else:
            config = replace(template, big_n=val)
        records = run_experiment(config)
        n = records[0].n
        big_n = config.big_n
        if template.algorithm == "algo2":
            x = math.log2(n) * math.log2(big_n)
        else:
            x = math.log2(n) ** 2
        actives = [r.max_active_time for r in records]
        points.append(SweepPoint(
            n=n, big_n=big_n, x=x,
            mean_active=sum(actives) / len(actives),
            max_active=max(actives),
            mean_rounds=sum(r.total_rounds for r in records) / len(records),
            mean_beeps_per_mis=sum(r.beeps_per_mis_node for r in records) / len(records),
            all_valid=all(r.valid for r in records),
            records=tuple(records),
        ))
    slope, intercept, r2 = ols_fit([p.x for p in points],
                                   [p.mean_active for p in points])
    label = "log2(n)*log2(N)" if template.algorithm == "algo2" else "log2(n)^2"
    return SweepResult(points=tuple(points), slope=slope, intercept=intercept,
                       r_squared=r2, x_label=label)


# ---------------------------------------------------------------------------
# Lower-bound report
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class LowerboundEntry:
    log_n: float
    p_star: float
    min_product: float
    certificate: bool  # min product >= 0.001
    trials: int
    never_succeeded: int | None  # trials with some never-succeeding component
    ci_low: float | None
    ci_high: float | None

    def lines(self) -> list[str]:
        verdict = "PASS" if self.certificate else "FAIL"
        out = [f"log_n={self.log_n:g}: adversarial p*={self.p_star:.6f}, "
               f"min product {self.min_product:.6f} >= 0.001: {verdict}"]
        if self.never_succeeded is None:
            out.append(f"log_n={self.log_n:g}: empirical run skipped "
                       "(hard family too large at this size)")
        else:
            frac = self.never_succeeded / self.trials
            out.append(f"log_n={self.log_n:g}: never-succeeding component in "
                       f"{self.never_succeeded}/{self.trials} trials "
                       f"(frequency {frac:.3f}, 95% CI [{self.ci_low:.3f}, {self.ci_high:.3f}])")
        return out


_EMPIRICAL_LOG_N_CAP = 16  # family size 2^16 keeps the Monte-Carlo affordable


def lowerbound_report(log_ns: Sequence[float], grid: float = 1e-4,
                      trials: int = 100, seed: int = 0) -> list[LowerboundEntry]:
    """Analytic certificate plus hard-family Monte-Carlo per log_n."""
    entries = []
    for log_n in log_ns:
        p_star, min_prod = min_product_over_p(log_n, grid)
        never = ci_lo = ci_hi = None
        if log_n == int(log_n) and 4 <= log_n <= _EMPIRICAL_LOG_N_CAP and trials > 0:
            n = 1 << int(log_n)
            g = parse_graph_spec(f"bipartite:{n}")
            t_rounds = math.ceil(0.01 * log_n * log_n)
            schedule = UniformSchedule.constant(p_star, t_rounds)
            never = 0
            for k in range(trials):
                first = simulate_uniform_process(g, schedule, seed=seed + k)
                if (first < 0).any():
                    never += 1
            ci_lo, ci_hi = wilson_interval(never, trials)
        entries.append(LowerboundEntry(
            log_n=float(log_n), p_star=p_star, min_product=min_prod,
            certificate=min_prod >= 0.001, trials=trials,
            never_succeeded=never, ci_low=ci_lo, ci_high=ci_hi))
    return entries


# ---------------------------------------------------------------------------
# File verification
# ---------------------------------------------------------------------------

def verify_file(graph_path: str, status_path: str) -> tuple[bool, str]:
    """Check a status assignment against a graph file; returns
    (valid, human-readable verdict)."""
    g = read_edge_list(graph_path)
    status = read_status_file(status_path, g.node_count)
    res = verify_mis(g, status)
    lines = []
    if not res.is_independent:
        pairs = " ".join(f"({u},{v})" for u, v in res.adjacent_mis_pairs)
        lines.append(f"INDEPENDENCE VIOLATION {pairs}")
    if not res.is_maximal:
        nodes = " ".join(str(v) for v in res.uncovered_nodes)
        lines.append(f"MAXIMALITY VIOLATION: uncovered {nodes}")
    if res.valid:
        lines.append("VALID")
    return res.valid, "\n".join(lines)
