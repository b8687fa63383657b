"""Per-node state machines for the three randomized MIS protocols.

Each automaton advances one communication round at a time through two
methods: emit() picks this round's action (and flips any coins due this
round), consume(heard) folds in what the channel delivered and performs
the state transition.  An automaton is a deterministic function of its
coin stream and heard flags, so replaying a recorded trace reproduces
the trajectory exactly.

Lifecycle before the main loop: a node wakes either spontaneously or on
the first beep it hears while asleep.  Spontaneous wakers beep in their
wake round, wait one round, and enter the loop; beep-woken nodes beep
one round after hearing, wait one, then enter.  Neighbors therefore
stay within one round of each other inside the loop, which is what
makes the 3-round exchanges collision-safe in CD mode.

Exchange discipline, per step:
  exchange 1: listen / beep-with-probability-2^(i-L) setting v / listen;
              hearing anything in the exchange revokes v.
  exchange 2: listen / beep-and-join iff v / listen;
              hearing anything in the exchange deactivates the node.
A joining node exits in its broadcast round; the join takes precedence
over same-round hearing (the conflicting case is unreachable between
neighbors whose loop entries differ by at most one round).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .graphs import Status
from .rng import SplitMix64

M_DEFAULT = 34
C_DEFAULT = 8


class RoundAction(IntEnum):
    LISTEN = 0
    BEEP = 1


class Lifecycle(IntEnum):
    ASLEEP = 0
    WAKE_BEEP = 1  # heard a beep while asleep; beeps next round
    WAKE_SENT = 2  # wake beep went out this round
    WAITING = 3  # the one quiet round between wake beep and loop entry
    RUNNING = 4
    DONE = 5


def ceil_log2(n: int) -> int:
    """Smallest L with 2^L >= n; 0 for n = 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n - 1).bit_length()


def phase_probability(i: int, L: int) -> float:
    """Broadcast probability 2^(i-L) used in phase/step i."""
    if not 0 <= i <= L:
        raise ValueError("need 0 <= i <= L")
    return 2.0 ** (i - L)


class _CoinMixin:
    """64-bit-exact heads test: heads iff next draw < 2^(i-L).

    Comparing the raw u64 against 2^(64+i-L) keeps probabilities exact
    down to 2^-64, where a double-precision unit draw would quantize.
    Exactly one draw per step, whatever the outcome.
    """

    def _heads(self, i: int, L: int) -> bool:
        draw = self.rng.next_u64()
        if i >= L:
            return True
        shift = 64 + i - L
        if shift < 0:
            return False
        return draw < (1 << shift)


class Algo1Automaton(_CoinMixin):
    """Bounded-phase MIS automaton with collision detection.

    Phases i = 0..L inclusive (L = ceil(log2 n_upper)), S = max(1, M*L)
    steps per phase, six rounds per step.  Exhausting every phase ends
    in Failed.
    """

    kind = "algo1"

    __slots__ = ("rng", "L", "S", "phase", "step", "pos", "v", "heard_ex",
                 "lifecycle", "status", "algorithm_beeps", "wakeup_beeps")

    def __init__(self, rng: SplitMix64, n_upper: int, m_const: int = M_DEFAULT):
        self.rng = rng
        self.L = ceil_log2(n_upper)
        self.S = max(1, m_const * self.L)
        self.phase = 0
        self.step = 0
        self.pos = 0
        self.v = False
        self.heard_ex = False
        self.lifecycle = Lifecycle.ASLEEP
        self.status: Status | None = None
        self.algorithm_beeps = 0
        self.wakeup_beeps = 0

    # -- prologue shared by all three automata ---------------------------

    def emit(self, spontaneous: bool = False) -> RoundAction:
        lc = self.lifecycle
        if lc == Lifecycle.ASLEEP:
            if spontaneous:
                self.lifecycle = Lifecycle.WAKE_SENT
                self.wakeup_beeps += 1
                return RoundAction.BEEP
            return RoundAction.LISTEN
        if lc == Lifecycle.WAKE_BEEP:
            self.lifecycle = Lifecycle.WAKE_SENT
            self.wakeup_beeps += 1
            return RoundAction.BEEP
        if lc in (Lifecycle.WAKE_SENT, Lifecycle.WAITING):
            return RoundAction.LISTEN
        return self._emit_running()

    def consume(self, heard: bool) -> None:
        lc = self.lifecycle
        if lc == Lifecycle.ASLEEP:
            if heard:
                self.lifecycle = Lifecycle.WAKE_BEEP
            return
        if lc == Lifecycle.WAKE_BEEP:
            return  # already woken; neighbors' beeps carry no further news
        if lc == Lifecycle.WAKE_SENT:
            self.lifecycle = Lifecycle.WAITING  # own-beep round, ears shut
            return
        if lc == Lifecycle.WAITING:
            self.lifecycle = Lifecycle.RUNNING
            self.pos = 0
            return
        self._consume_running(heard)

    def _exit(self, status: Status) -> None:
        self.status = status
        self.lifecycle = Lifecycle.DONE

    # -- the six-round step ----------------------------------------------

    def _emit_running(self) -> RoundAction:
        pos = self.pos
        if pos == 0:
            self.v = False
            self.heard_ex = False
            return RoundAction.LISTEN
        if pos == 1:
            if self._heads(self.phase, self.L):
                self.v = True
                self.algorithm_beeps += 1
                return RoundAction.BEEP
            return RoundAction.LISTEN
        if pos == 3:
            self.heard_ex = False
            return RoundAction.LISTEN
        if pos == 4 and self.v:
            self.algorithm_beeps += 1
            return RoundAction.BEEP
        return RoundAction.LISTEN

    def _consume_running(self, heard: bool) -> None:
        pos = self.pos
        if pos <= 2:
            if heard:
                self.heard_ex = True
            if pos == 2 and self.heard_ex:
                self.v = False
            self.pos = pos + 1
            return
        if pos == 4 and self.v:
            self._exit(Status.IN_MIS)
            return
        if heard:
            self._exit(Status.INACTIVE)
            return
        if pos == 5:
            self._advance_step()
        else:
            self.pos = pos + 1

    def _advance_step(self) -> None:
        self.step += 1
        if self.step >= self.S:
            self.step = 0
            self.phase += 1
            if self.phase > self.L:
                self._exit(Status.FAILED)
                return
        self.pos = 0

    # -- instrumentation hooks --------------------------------------------

    @property
    def exchange(self) -> int | None:
        """1 or 2 while running, else None."""
        if self.lifecycle != Lifecycle.RUNNING:
            return None
        return 1 if self.pos <= 2 else 2

    def coords(self) -> tuple[int, int, int] | None:
        """(phase, step, exchange) while inside the loop."""
        ex = self.exchange
        if ex is None:
            return None
        return (self.phase, self.step, ex)


class Algo2Automaton(Algo1Automaton):
    """Unbounded variant scaled by an identifier-space size N.

    Steps i = 0..L_N wrap around forever (L_N = ceil(log2 N)); the
    broadcast probability is 2^(i - L_N).  Only the engine's round cap
    can mark it Failed.  `phase` counts completed wraps.
    """

    kind = "algo2"

    __slots__ = ("L_N",)

    def __init__(self, rng: SplitMix64, big_n: int):
        super().__init__(rng, n_upper=2, m_const=1)  # placeholders, unused
        self.L_N = ceil_log2(big_n)
        self.phase = 0
        self.step = 0

    def _emit_running(self) -> RoundAction:
        pos = self.pos
        if pos == 0:
            self.v = False
            self.heard_ex = False
            return RoundAction.LISTEN
        if pos == 1:
            if self._heads(self.step, self.L_N):
                self.v = True
                self.algorithm_beeps += 1
                return RoundAction.BEEP
            return RoundAction.LISTEN
        if pos == 3:
            self.heard_ex = False
            return RoundAction.LISTEN
        if pos == 4 and self.v:
            self.algorithm_beeps += 1
            return RoundAction.BEEP
        return RoundAction.LISTEN

    def _advance_step(self) -> None:
        self.step += 1
        if self.step > self.L_N:
            self.step = 0
            self.phase += 1
        self.pos = 0


class Algo1NoCdAutomaton(Algo1Automaton):
    """Algorithm 1 adapted to channels without collision detection.

    The single probabilistic round of exchange 1 becomes 1 + c*L rounds:
    a silent coin round, then a window of W = c*L slots.  On heads the
    node picks exactly floor(W/2) slots uniformly and beeps in each,
    stopping for the rest of the window the moment it hears anything
    (hearing anywhere in exchange 1, the coin round and flanking listen
    rounds included, also revokes v).  Step length is W + 6 rounds.
    Runs on a beep-only channel: a beeping node hears nothing that round.
    """

    kind = "algo1-nocd"

    __slots__ = ("c", "W", "half", "coin_heads", "suppressed", "beep_slots")

    def __init__(self, rng: SplitMix64, n_upper: int,
                 m_const: int = M_DEFAULT, c_const: int = C_DEFAULT):
        super().__init__(rng, n_upper, m_const)
        self.c = c_const
        self.W = c_const * self.L
        self.half = self.W // 2
        self.coin_heads = False
        self.suppressed = False
        self.beep_slots: list[bool] = [False] * self.W

    def _sample_slots(self) -> None:
        """Uniform floor(W/2)-subset via partial Fisher-Yates."""
        W = self.W
        perm = list(range(W))
        slots = [False] * W
        for t in range(self.half):
            j = t + self.rng.next_below(W - t)
            perm[t], perm[j] = perm[j], perm[t]
            slots[perm[t]] = True
        self.beep_slots = slots

    def _emit_running(self) -> RoundAction:
        pos = self.pos
        W = self.W
        if pos == 0:
            self.v = False
            self.heard_ex = False
            self.suppressed = False
            self.coin_heads = False
            return RoundAction.LISTEN
        if pos == 1:
            self.coin_heads = self._heads(self.phase, self.L)
            if self.coin_heads:
                self.v = True
                self._sample_slots()
            return RoundAction.LISTEN  # coin round is silent
        if 2 <= pos <= W + 1:
            if self.coin_heads and not self.suppressed and self.beep_slots[pos - 2]:
                self.algorithm_beeps += 1
                return RoundAction.BEEP
            return RoundAction.LISTEN
        if pos == W + 3:
            self.heard_ex = False
            return RoundAction.LISTEN
        if pos == W + 4 and self.v:
            self.algorithm_beeps += 1
            return RoundAction.BEEP
        return RoundAction.LISTEN

    def _consume_running(self, heard: bool) -> None:
        pos = self.pos
        W = self.W
        if pos <= W + 2:  # exchange-1 block
            if heard:
                self.v = False
                self.suppressed = True
            self.pos = pos + 1
            return
        if pos == W + 4 and self.v:
            self._exit(Status.IN_MIS)
            return
        if heard:
            self._exit(Status.INACTIVE)
            return
        if pos == W + 5:
            self._advance_step()
        else:
            self.pos = pos + 1

    @property
    def exchange(self) -> int | None:
        if self.lifecycle != Lifecycle.RUNNING:
            return None
        return 1 if self.pos <= self.W + 2 else 2


# ---------------------------------------------------------------------------
# Protocol descriptors (the automaton factories handed to run_simulation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Algo1Protocol:
    n_upper: int
    m_const: int = M_DEFAULT
    kind: str = "algo1"
    beep_only: bool = False

    @property
    def L(self) -> int:
        return ceil_log2(self.n_upper)

    @property
    def steps_per_phase(self) -> int:
        return max(1, self.m_const * self.L)

    @property
    def step_rounds(self) -> int:
        return 6

    def make(self, rng: SplitMix64) -> Algo1Automaton:
        return Algo1Automaton(rng, self.n_upper, self.m_const)

    def natural_round_bound(self) -> int:
        return (self.L + 1) * self.steps_per_phase * self.step_rounds


@dataclass(frozen=True)
class Algo1NoCdProtocol:
    n_upper: int
    m_const: int = M_DEFAULT
    c_const: int = C_DEFAULT
    kind: str = "algo1-nocd"
    beep_only: bool = True

    @property
    def L(self) -> int:
        return ceil_log2(self.n_upper)

    @property
    def steps_per_phase(self) -> int:
        return max(1, self.m_const * self.L)

    @property
    def step_rounds(self) -> int:
        return self.c_const * self.L + 6

    def make(self, rng: SplitMix64) -> Algo1NoCdAutomaton:
        return Algo1NoCdAutomaton(rng, self.n_upper, self.m_const, self.c_const)

    def natural_round_bound(self) -> int:
        return (self.L + 1) * self.steps_per_phase * self.step_rounds


@dataclass(frozen=True)
class Algo2Protocol:
    big_n: int
    n_upper: int | None = None  # only informs the default round cap
    kind: str = "algo2"
    beep_only: bool = False

    @property
    def L_N(self) -> int:
        return ceil_log2(self.big_n)

    @property
    def step_rounds(self) -> int:
        return 6

    def make(self, rng: SplitMix64) -> Algo2Automaton:
        return Algo2Automaton(rng, self.big_n)

    def natural_round_bound(self) -> int | None:
        return None  # never self-terminates


Protocol = Algo1Protocol | Algo1NoCdProtocol | Algo2Protocol
