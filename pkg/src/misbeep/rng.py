"""SplitMix64 streams used everywhere randomness is needed.

Every node in a simulation owns an independent stream derived from
(root seed, node index) by a fixed splitting function, so results never
depend on scheduling, engine choice, or trial parallelism.  The same
arithmetic is implemented three times on purpose: here in pure Python,
in the compiled kernel (uint64), and in a vectorized counter form for
Monte-Carlo code; all three must agree bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

# 2^-53, for mapping the top 53 bits of a draw onto [0, 1)
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """The SplitMix64 finalizer: a bijective avalanche on 64-bit words."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def node_stream_state(seed: int, node: int) -> int:
    """Initial stream state for `node` under root `seed`.

    Double mixing decorrelates adjacent node indices; +1 keeps node 0
    from collapsing onto the raw seed.
    """
    return mix64(mix64((seed + GOLDEN * (node + 1)) & MASK64))


class SplitMix64:
    """Sequential draw interface over one stream."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    @classmethod
    def for_node(cls, seed: int, node: int) -> "SplitMix64":
        return cls(node_stream_state(seed, node))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_unit(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV53

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound) via modulo.

        Bias is ~bound/2^64; all uses here have bound < 2^8.
        """
        return self.next_u64() % bound


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MUL1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MUL2)
        z ^= z >> np.uint64(31)
    return z


def node_stream_states(seed: int, nodes: np.ndarray | int) -> np.ndarray:
    """Vectorized node_stream_state for an index array (or arange(n))."""
    if isinstance(nodes, int):
        nodes = np.arange(nodes, dtype=np.uint64)
    else:
        nodes = nodes.astype(np.uint64)
    with np.errstate(over="ignore"):
        base = np.uint64(seed & MASK64) + np.uint64(GOLDEN) * (nodes + np.uint64(1))
    return mix64_array(mix64_array(base))


def stream_u64_at(states: np.ndarray, k: int) -> np.ndarray:
    """k-th draw (1-based) of each stream, without advancing anything.

    Equivalent to calling next_u64() k times sequentially, because the
    stream state is just state0 + k*GOLDEN.
    """
    with np.errstate(over="ignore"):
        return mix64_array(states + np.uint64((k * GOLDEN) & MASK64))


def units_from_u64(x: np.ndarray) -> np.ndarray:
    return (x >> np.uint64(11)).astype(np.float64) * _INV53
