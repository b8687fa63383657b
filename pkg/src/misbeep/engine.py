"""Synchronous round engine: emit, deliver, consume, repeat.

Every round runs in global lockstep.  Awake automata emit a beep or a
listen, the channel turns the beep set into per-node heard flags under
the active hearing semantics, then every automaton (asleep ones
included, so a first beep can wake them) consumes its flag.  The loop
fast-forwards over stretches where nothing can happen: no awake
non-terminal node and no spontaneous wake pending.

Two interchangeable engines produce bit-identical results: a pure
Python one iterating automaton objects (reference; also the only one
that can record beep traces or check exchange alignment) and a compiled
array kernel.  run_simulation picks between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .graphs import Graph, Status, VerificationResult, verify_mis
from .protocols import Lifecycle, Protocol, RoundAction, ceil_log2
from .rng import GOLDEN, MASK64, SplitMix64, mix64, mix64_array

try:
    from . import _kernel
except ImportError:  # pure-Python install; the fallback engine covers everything
    _kernel = None

HAS_KERNEL = _kernel is not None

_SCHEDULE_TAG = 0x7363686564  # keeps schedule draws off the node coin streams


class ChannelMode(Enum):
    """Hearing semantics.  A node never hears its own beep; the modes
    differ in whether beeping and listening can coincide."""

    LISTEN_WHILE_BEEPING = "ListenWhileBeeping"
    BEEP_ONLY = "BeepOnly"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "ChannelMode":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown channel mode {label!r}")


class AlignmentError(AssertionError):
    """A beep crossed exchange coordinates between loop-running neighbors."""


@dataclass(frozen=True)
class WakeupSchedule:
    """When nodes wake on their own.

    kind "sync": everyone spontaneous at round 0.
    kind "list": explicit per-node rounds, -1 meaning never.
    kind "random": each node independently spontaneous with the given
    fraction, at a uniform round in [0, max_round]; if the draw leaves
    nobody spontaneous, the schedule promotes one derived node to round
    0 so the run cannot be empty.
    """

    kind: str
    rounds: tuple[int, ...] | None = None
    fraction: float = 0.0
    max_round: int = 0
    seed: int = 0

    @classmethod
    def sync(cls) -> "WakeupSchedule":
        return cls(kind="sync")

    @classmethod
    def explicit(cls, rounds: Sequence[int]) -> "WakeupSchedule":
        rounds = tuple(int(r) for r in rounds)
        if not any(r >= 0 for r in rounds):
            raise ValueError("explicit schedule wakes nobody")
        if any(r < -1 for r in rounds):
            raise ValueError("spontaneous rounds must be >= 0 (or -1 for never)")
        return cls(kind="list", rounds=rounds)

    @classmethod
    def random_subset(cls, fraction: float, max_round: int, seed: int) -> "WakeupSchedule":
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if max_round < 0:
            raise ValueError("max_round must be >= 0")
        return cls(kind="random", fraction=float(fraction),
                   max_round=int(max_round), seed=int(seed))

    def spontaneous_rounds(self, n: int) -> np.ndarray:
        """Per-node spontaneous wake round, -1 for never; >= 1 node wakes."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "sync":
            return np.zeros(n, dtype=np.int64)
        if self.kind == "list":
            if self.rounds is None or len(self.rounds) != n:
                raise ValueError(f"schedule lists {0 if self.rounds is None else len(self.rounds)} nodes, graph has {n}")
            return np.asarray(self.rounds, dtype=np.int64)
        if self.kind != "random":
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        state = mix64(((self.seed + _SCHEDULE_TAG) * GOLDEN) & MASK64)
        ks = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            pick = mix64_array(state + ks * np.uint64(GOLDEN))
            when = mix64_array(state + (ks + np.uint64(n)) * np.uint64(GOLDEN))
        chosen = (pick >> np.uint64(11)) * 2.0 ** -53 < self.fraction
        spont = np.where(chosen, (when % np.uint64(self.max_round + 1)).astype(np.int64),
                         np.int64(-1))
        if not chosen.any():
            fallback = mix64((state + (2 * n + 1) * GOLDEN) & MASK64) % n
            spont[fallback] = 0
        return spont

    def describe(self) -> str:
        if self.kind == "sync":
            return "sync"
        if self.kind == "random":
            return f"random:{self.fraction:g}:{self.max_round}"
        return "list"


def deliver_round(g: Graph, beepers: Iterable[int], mode: ChannelMode) -> np.ndarray:
    """Per-node heard flags for one round, given who beeped."""
    heard = np.zeros(g.node_count, dtype=bool)
    beeper_list = list(beepers)
    for u in beeper_list:
        heard[g.neighbors(u)] = True
    if mode is ChannelMode.BEEP_ONLY:
        heard[beeper_list] = False
    return heard


@dataclass
class SimResult:
    """Everything a finished run knows about itself.

    Per-node arrays are indexed by node id; wake_round and exit_round
    use -1 for "never" (nodes Failed by the round cap keep exit -1 and
    are charged total_rounds when active times are computed).
    """

    protocol_kind: str
    mode: ChannelMode
    seed: int
    status: np.ndarray
    wake_round: np.ndarray
    exit_round: np.ndarray
    algorithm_beeps: np.ndarray
    wakeup_beeps: np.ndarray
    total_rounds: int
    round_cap: int
    cap_hit: bool
    active_time: np.ndarray
    max_active_time: int
    verification: VerificationResult
    engine: str
    beep_trace: list[np.ndarray] | None = None

    @property
    def node_count(self) -> int:
        return len(self.status)

    @property
    def mis_size(self) -> int:
        return int(np.count_nonzero(self.status == Status.IN_MIS))

    @property
    def failed_count(self) -> int:
        return int(np.count_nonzero(self.status == Status.FAILED))

    @property
    def total_algorithm_beeps(self) -> int:
        return int(self.algorithm_beeps.sum())

    @property
    def total_wakeup_beeps(self) -> int:
        return int(self.wakeup_beeps.sum())

    @property
    def valid(self) -> bool:
        return self.verification.valid

    def status_labels(self) -> list[str]:
        return [Status(s).label for s in self.status]


def compute_active_times(result: SimResult, g: Graph) -> np.ndarray:
    """Rounds each node spent with unfinished business in its closed
    neighborhood: from its wake round until the last exit among itself
    and its woken neighbors.  Nodes without an exit round (cap-Failed)
    count as exiting at total_rounds; never-woken nodes get 0."""
    wake = result.wake_round
    woken = wake >= 0
    exit_eff = np.where(result.exit_round >= 0, result.exit_round,
                        result.total_rounds)
    val = np.where(woken, exit_eff, -1)
    best = val.copy()
    tails, heads = g.directed_edges()
    np.maximum.at(best, tails, val[heads])
    return np.where(woken, best - wake, 0).astype(np.int64)


def survivors_at(result: SimResult, round_index: int) -> int:
    """How many woken nodes were still undecided entering the given round."""
    woken = result.wake_round >= 0
    exit_eff = np.where(result.exit_round >= 0, result.exit_round,
                        result.total_rounds)
    return int(np.count_nonzero(woken & (exit_eff >= round_index)))


def default_round_cap(protocol: Protocol, g: Graph, spont: np.ndarray) -> int:
    """Generous cap: hitting it means a bug, not an unlucky seed.

    Bounded protocols get their exhaustion bound (last wake + wave +
    prologue + full phase budget); the unbounded one gets a
    100-log-factors allowance on top of the wake window.
    """
    max_spont = int(spont.max())
    bound = protocol.natural_round_bound()
    if bound is not None:
        return max_spont + g.node_count + 4 + bound
    big_l = ceil_log2(getattr(protocol, "n_upper", None) or g.node_count or 1)
    l_n = protocol.L_N
    return max_spont + g.node_count + 100 * max(1, big_l) * max(1, l_n)


def _resolve_mode(protocol: Protocol, mode: ChannelMode | None) -> ChannelMode:
    wanted = ChannelMode.BEEP_ONLY if protocol.beep_only else ChannelMode.LISTEN_WHILE_BEEPING
    if mode is None:
        return wanted
    if mode is not wanted:
        raise ValueError(f"{protocol.kind} runs in {wanted.label}, not {mode.label}")
    return mode


def _check_wake_wave(g: Graph, wake_round: np.ndarray) -> None:
    """Natural termination implies the wake wave finished: along every
    edge both endpoints woke together or neither did, at most one round
    apart."""
    tails, heads = g.directed_edges()
    wu, wv = wake_round[tails], wake_round[heads]
    both = (wu >= 0) & (wv >= 0)
    if np.any((wu >= 0) != (wv >= 0)):
        raise AssertionError("wake wave stalled across an edge")
    if both.any() and int(np.abs(wu[both] - wv[both]).max()) > 1:
        raise AssertionError("neighbor wake rounds differ by more than one")


def _pure_run(g: Graph, protocol: Protocol, spont: np.ndarray,
              mode: ChannelMode, seed: int, round_cap: int,
              check_alignment: bool, record_trace: bool) -> dict:
    n = g.node_count
    beep_only = mode is ChannelMode.BEEP_ONLY
    auts = [protocol.make(SplitMix64.for_node(seed, v)) for v in range(n)]

    wake_round = np.full(n, -1, dtype=np.int64)
    exit_round = np.full(n, -1, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    asleep = np.ones(n, dtype=bool)

    spont_nodes = np.flatnonzero(spont >= 0)
    order = spont_nodes[np.argsort(spont[spont_nodes], kind="stable")]
    order_rounds = spont[order]
    sp = 0

    active: list[int] = []
    trace: list[np.ndarray] | None = [] if record_trace else None
    beeped = np.zeros(n, dtype=bool)
    total_rounds = 0
    cap_hit = False

    t = 0
    while True:
        # drop pending wakes for nodes no longer asleep, then fast-forward
        while sp < len(order) and not asleep[order[sp]]:
            sp += 1
        if not active:
            if sp == len(order):
                break
            t = max(t, int(order_rounds[sp]))
        if t >= round_cap:
            cap_hit = True
            for v in active:
                status[v] = Status.FAILED
            total_rounds = round_cap
            break

        spont_now: list[int] = []
        while sp < len(order) and order_rounds[sp] == t:
            v = int(order[sp])
            sp += 1
            if asleep[v]:
                spont_now.append(v)

        beepers: list[int] = []
        for v in active:
            if auts[v].emit() is RoundAction.BEEP:
                beepers.append(v)
        for v in spont_now:
            if auts[v].emit(spontaneous=True) is RoundAction.BEEP:
                beepers.append(v)
            wake_round[v] = t
            asleep[v] = False
            active.append(v)

        heard = np.zeros(n, dtype=bool)
        for u in beepers:
            heard[g.neighbors(u)] = True
            beeped[u] = True
        if beep_only:
            heard[beepers] = False

        if record_trace:
            trace.append(np.array(sorted(beepers), dtype=np.int32))
        if check_alignment and beepers:
            _assert_alignment(g, auts, beeped, heard)

        still: list[int] = []
        for v in active:
            a = auts[v]
            a.consume(bool(heard[v]))
            if a.status is None:
                still.append(v)
            else:
                exit_round[v] = t
                status[v] = a.status
        for v in np.flatnonzero(heard & asleep):
            v = int(v)
            auts[v].consume(True)
            wake_round[v] = t
            asleep[v] = False
            still.append(v)
        active = still

        beeped[beepers] = False
        total_rounds = t + 1
        t += 1

    algorithm_beeps = np.fromiter((a.algorithm_beeps for a in auts),
                                  dtype=np.int64, count=n)
    wakeup_beeps = np.fromiter((a.wakeup_beeps for a in auts),
                               dtype=np.int64, count=n)
    if not cap_hit:
        _check_wake_wave(g, wake_round)
    return dict(status=status, wake_round=wake_round, exit_round=exit_round,
                algorithm_beeps=algorithm_beeps, wakeup_beeps=wakeup_beeps,
                total_rounds=total_rounds, cap_hit=cap_hit, trace=trace)


def _assert_alignment(g: Graph, auts: list, beeped: np.ndarray,
                      heard: np.ndarray) -> None:
    """Any beep a loop-running node hears must come from a loop-running
    neighbor at the same (phase, step, exchange) coordinates."""
    for v in np.flatnonzero(heard):
        av = auts[int(v)]
        if av.lifecycle is not Lifecycle.RUNNING:
            continue
        cv = av.coords()
        for u in g.neighbors(int(v)):
            if not beeped[u]:
                continue
            au = auts[int(u)]
            if au.lifecycle is not Lifecycle.RUNNING:
                raise AlignmentError(
                    f"non-loop beep from {u} landed in an exchange of {v}")
            if au.coords() != cv:
                raise AlignmentError(
                    f"beep {u}->{v} crossed coordinates {au.coords()} vs {cv}")


def _kernel_run(g: Graph, protocol: Protocol, spont: np.ndarray,
                mode: ChannelMode, seed: int, round_cap: int) -> dict:
    if protocol.kind == "algo1":
        kind, L, S, W, l_n = 0, protocol.L, protocol.steps_per_phase, 0, 0
    elif protocol.kind == "algo1-nocd":
        kind, L, S = 1, protocol.L, protocol.steps_per_phase
        W, l_n = protocol.c_const * protocol.L, 0
    elif protocol.kind == "algo2":
        kind, L, S, W, l_n = 2, 0, 0, 0, protocol.L_N
    else:
        raise ValueError(f"unknown protocol kind {protocol.kind!r}")
    out = _kernel.run(kind, g.indptr, g.indices,
                      np.ascontiguousarray(spont, dtype=np.int64),
                      seed & MASK64, L, S, W, l_n,
                      1 if mode is ChannelMode.BEEP_ONLY else 0,
                      round_cap)
    status, wake, exit_r, abeeps, wbeeps, total, cap_hit = out
    if not cap_hit:
        _check_wake_wave(g, wake)
    return dict(status=status, wake_round=wake, exit_round=exit_r,
                algorithm_beeps=abeeps, wakeup_beeps=wbeeps,
                total_rounds=int(total), cap_hit=bool(cap_hit), trace=None)


def run_simulation(g: Graph, protocol: Protocol, schedule: WakeupSchedule,
                   mode: ChannelMode | None = None, seed: int = 0,
                   round_cap: int | None = None, *, engine: str = "auto",
                   check_alignment: bool = False,
                   record_trace: bool = False) -> SimResult:
    """Run one protocol instance on g until every woken node is terminal
    or the round cap trips.  Identical arguments give identical results,
    whichever engine executes them."""
    mode = _resolve_mode(protocol, mode)
    spont = schedule.spontaneous_rounds(g.node_count)
    if round_cap is None:
        round_cap = default_round_cap(protocol, g, spont)
    if round_cap < 1:
        raise ValueError("round_cap must be >= 1")

    needs_pure = check_alignment or record_trace
    if engine == "auto":
        engine = "pure" if needs_pure or not HAS_KERNEL else "kernel"
    if engine == "kernel":
        if needs_pure:
            raise ValueError("tracing and alignment checks run on the pure engine")
        if not HAS_KERNEL:
            raise RuntimeError("compiled kernel unavailable; build the extension or use engine='pure'")
        raw = _kernel_run(g, protocol, spont, mode, seed, round_cap)
    elif engine == "pure":
        raw = _pure_run(g, protocol, spont, mode, seed, round_cap,
                        check_alignment, record_trace)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    result = SimResult(
        protocol_kind=protocol.kind, mode=mode, seed=seed,
        status=raw["status"], wake_round=raw["wake_round"],
        exit_round=raw["exit_round"],
        algorithm_beeps=raw["algorithm_beeps"],
        wakeup_beeps=raw["wakeup_beeps"],
        total_rounds=raw["total_rounds"], round_cap=round_cap,
        cap_hit=raw["cap_hit"],
        active_time=np.zeros(g.node_count, dtype=np.int64),
        max_active_time=0,
        verification=verify_mis(g, raw["status"]),
        engine=engine, beep_trace=raw["trace"],
    )
    result.active_time = compute_active_times(result, g)
    result.max_active_time = int(result.active_time.max()) if g.node_count else 0
    return result
