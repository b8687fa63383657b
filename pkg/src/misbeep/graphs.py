"""Graph construction, generators, and static MIS analyses.

Graphs are immutable CSR structures (sorted neighbor arrays), safe to
share across concurrent trials.  Generators cover the experiment
topologies: cliques, rings, G(n, p), and the disjoint union of complete
bipartite blocks used by the hard-instance experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .rng import GOLDEN, mix64_array, node_stream_state, units_from_u64


class Status(IntEnum):
    """Terminal per-node outcome of a simulation."""

    NEVER_WOKE = 0
    IN_MIS = 1
    INACTIVE = 2
    FAILED = 3

    @property
    def label(self) -> str:
        return _STATUS_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Status":
        try:
            return _LABEL_STATUS[text]
        except KeyError:
            raise ValueError(f"unknown status {text!r}") from None


_STATUS_LABELS = {
    Status.IN_MIS: "InMIS",
    Status.INACTIVE: "Inactive",
    Status.FAILED: "Failed",
    Status.NEVER_WOKE: "NeverWoke",
}
_LABEL_STATUS = {v: k for k, v in _STATUS_LABELS.items()}


@dataclass(frozen=True)
class BipartiteFamily:
    """Component metadata attached to gen_bipartite_family graphs."""

    n_param: int
    copies: int
    type_count: int  # types run 1..type_count
    node_component: np.ndarray  # int32, per node
    node_side: np.ndarray  # int8, 0 = left, 1 = right
    node_type: np.ndarray  # int8, per node
    component_type: np.ndarray  # int8, per component

    @property
    def component_count(self) -> int:
        return len(self.component_type)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form.

    indptr has length node_count+1; indices[indptr[v]:indptr[v+1]] is the
    sorted neighbor array of v.  Sortedness doubles as the membership
    structure (has_edge is a binary search).
    """

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    family: BipartiteFamily | None = field(default=None, compare=False)

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return k < len(row) and row[k] == v

    def adjacency_lists(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.node_count)]

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(tail, head) arrays covering every adjacency entry once."""
        tails = np.repeat(np.arange(self.node_count, dtype=self.indices.dtype),
                          np.diff(self.indptr))
        return tails, self.indices

    def check_invariants(self) -> None:
        """Raise AssertionError on any structural violation."""
        n = self.node_count
        assert self.indptr[0] == 0 and self.indptr[-1] == len(self.indices)
        assert np.all(np.diff(self.indptr) >= 0)
        if len(self.indices):
            assert self.indices.min() >= 0 and self.indices.max() < n
        for v in range(n):
            row = self.neighbors(v)
            assert np.all(np.diff(row) > 0), f"row {v} not strictly sorted"
            assert not np.any(row == v), f"self-loop at {v}"
        tails, heads = self.directed_edges()
        fwd = set(zip(tails.tolist(), heads.tolist()))
        assert all((h, t) in fwd for t, h in fwd), "adjacency not symmetric"


def _csr_from_half_edges(n: int, us: np.ndarray, vs: np.ndarray,
                         family: BipartiteFamily | None = None) -> Graph:
    """Build a Graph from one (u, v) row per undirected edge."""
    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    tails = np.concatenate([us, vs])
    heads = np.concatenate([vs, us])
    order = np.lexsort((heads, tails))
    tails = tails[order]
    heads = heads[order]
    counts = np.bincount(tails, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return Graph(n, indptr, heads.astype(np.int32), family)


def gen_clique(n: int) -> Graph:
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = np.arange(n, dtype=np.int32)
    grid = np.broadcast_to(idx, (n, n))
    mask = grid != idx[:, None]
    indices = grid[mask]
    indptr = np.arange(n + 1, dtype=np.int64) * (n - 1)
    return Graph(n, indptr, indices)


def gen_ring(n: int) -> Graph:
    if n < 3:
        raise ValueError("ring needs n >= 3")
    us = np.arange(n, dtype=np.int64)
    vs = (us + 1) % n
    # store each cycle edge once with the smaller endpoint first
    lo = np.minimum(us, vs)
    hi = np.maximum(us, vs)
    return _csr_from_half_edges(n, lo, hi)


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p), reproducible bit-exactly from the seed.

    Pair (u, v), u < v, at lexicographic position k gets the (k+1)-th
    draw of a dedicated stream; the edge exists iff the unit draw < p.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    state = node_stream_state(seed, 0x676E70)  # stream tag for this generator
    us_parts: list[np.ndarray] = []
    vs_parts: list[np.ndarray] = []
    k0 = 0
    for u in range(n - 1):
        row_len = n - 1 - u
        # draws for pair positions k0..k0+row_len-1 (1-based draw index)
        ks = np.arange(k0 + 1, k0 + row_len + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            draws = mix64_array(np.uint64(state) + ks * np.uint64(GOLDEN))
        hit = units_from_u64(draws) < p
        if hit.any():
            vs_row = np.arange(u + 1, n, dtype=np.int64)[hit]
            us_parts.append(np.full(len(vs_row), u, dtype=np.int64))
            vs_parts.append(vs_row)
        k0 += row_len
    if us_parts:
        us = np.concatenate(us_parts)
        vs = np.concatenate(vs_parts)
    else:
        us = np.empty(0, dtype=np.int64)
        vs = np.empty(0, dtype=np.int64)
    return _csr_from_half_edges(n, us, vs)


def bipartite_family_shape(n: int) -> tuple[int, int]:
    """(copies per type, number of types) for the hard family at parameter n."""
    if n < 16:
        raise ValueError("bipartite family needs n >= 16")
    types = int(math.floor(math.log2(n) / 4))
    copies = math.ceil(n ** 0.7)
    return copies, types


def gen_bipartite_family(n: int) -> Graph:
    """Disjoint union of copies of K(2^i, 2^i) for each type i.

    For every i in 1..floor(log2(n)/4) the graph contains exactly
    ceil(n^0.7) disjoint copies of the complete bipartite graph with 2^i
    vertices per side.  Component membership, side, and type of every
    node are attached as metadata.
    """
    copies, types = bipartite_family_shape(n)
    us_parts: list[np.ndarray] = []
    vs_parts: list[np.ndarray] = []
    node_comp: list[np.ndarray] = []
    node_side: list[np.ndarray] = []
    node_type: list[np.ndarray] = []
    comp_type: list[np.ndarray] = []
    offset = 0
    comp0 = 0
    for i in range(1, types + 1):
        half = 1 << i
        block = 2 * half
        base = offset + np.arange(copies, dtype=np.int64) * block
        left = base[:, None] + np.arange(half, dtype=np.int64)[None, :]
        right = left + half
        us = np.broadcast_to(left[:, :, None], (copies, half, half)).ravel()
        vs = np.broadcast_to(right[:, None, :], (copies, half, half)).ravel()
        us_parts.append(us.copy())
        vs_parts.append(vs.copy())
        comps = comp0 + np.repeat(np.arange(copies, dtype=np.int32), block)
        node_comp.append(comps)
        side = np.tile(np.repeat(np.array([0, 1], dtype=np.int8), half), copies)
        node_side.append(side)
        node_type.append(np.full(copies * block, i, dtype=np.int8))
        comp_type.append(np.full(copies, i, dtype=np.int8))
        offset += copies * block
        comp0 += copies
    family = BipartiteFamily(
        n_param=n,
        copies=copies,
        type_count=types,
        node_component=np.concatenate(node_comp),
        node_side=np.concatenate(node_side),
        node_type=np.concatenate(node_type),
        component_type=np.concatenate(comp_type),
    )
    return _csr_from_half_edges(offset, np.concatenate(us_parts),
                                np.concatenate(vs_parts), family)


# ---------------------------------------------------------------------------
# Static analyses
# ---------------------------------------------------------------------------

@dataclass
class VerificationResult:
    is_independent: bool
    is_maximal: bool
    uncovered_nodes: list[int]
    adjacent_mis_pairs: list[tuple[int, int]]

    @property
    def valid(self) -> bool:
        return self.is_independent and self.is_maximal


def verify_mis(g: Graph, status) -> VerificationResult:
    """Check independence and maximality of the InMIS set.

    A node is covered if it is InMIS or has an InMIS neighbor.  Nodes
    with status NeverWoke never took part in the run and are exempt
    from the coverage requirement; Inactive and Failed nodes are not.
    """
    st = np.asarray(status, dtype=np.int8)
    if len(st) != g.node_count:
        raise ValueError("status must cover every node")
    mis = st == int(Status.IN_MIS)
    tails, heads = g.directed_edges()
    both = mis[tails] & mis[heads]
    pair_sel = both & (tails < heads)
    pairs = [(int(u), int(v)) for u, v in zip(tails[pair_sel], heads[pair_sel])]
    covered_by_nb = np.zeros(g.node_count, dtype=bool)
    sel = mis[heads]
    covered_by_nb[tails[sel]] = True
    uncovered_mask = (~mis) & (~covered_by_nb) & (st != int(Status.NEVER_WOKE))
    uncovered = np.flatnonzero(uncovered_mask).tolist()
    return VerificationResult(
        is_independent=not pairs,
        is_maximal=not uncovered,
        uncovered_nodes=uncovered,
        adjacent_mis_pairs=pairs,
    )


def good_vertices(g: Graph, active) -> set[int]:
    """Active vertices with >= d_v/3 active neighbors of no larger degree.

    Degrees are measured in the subgraph induced by the active set.
    """
    if isinstance(active, np.ndarray) and active.dtype == bool:
        mask = active.copy()
    else:
        mask = np.zeros(g.node_count, dtype=bool)
        for v in active:
            mask[int(v)] = True
    contrib = mask[g.indices].astype(np.int64)
    cum = np.concatenate([[0], np.cumsum(contrib)])
    d = cum[g.indptr[1:]] - cum[g.indptr[:-1]]  # active-induced degree
    tails, heads = g.directed_edges()
    ok = mask[tails] & mask[heads] & (d[heads] <= d[tails])
    counts = np.bincount(tails[ok], minlength=g.node_count)
    good = mask & (3 * counts >= d)
    return set(np.flatnonzero(good).tolist())


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_edge_list(g: Graph, path) -> None:
    tails, heads = g.directed_edges()
    sel = tails < heads
    lines = [f"n {g.node_count}"]
    lines.extend(f"{u} {v}" for u, v in zip(tails[sel], heads[sel]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    """Parse the `n <count>` / `u v` text format; errors name line numbers."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ValueError("line 1: empty graph file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise ValueError("line 1: expected header 'n <node_count>'")
    try:
        n = int(head[1])
    except ValueError:
        raise ValueError("line 1: node count is not an integer") from None
    if n < 0:
        raise ValueError("line 1: node count must be non-negative")
    us: list[int] = []
    vs: list[int] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: endpoints must be integers") from None
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"line {lineno}: endpoint out of range 0..{n - 1}")
        if u >= v:
            raise ValueError(f"line {lineno}: edges must satisfy u < v")
        if (u, v) in seen:
            raise ValueError(f"line {lineno}: duplicate edge {u} {v}")
        seen.add((u, v))
        us.append(u)
        vs.append(v)
    return _csr_from_half_edges(n, np.array(us, dtype=np.int64),
                                np.array(vs, dtype=np.int64))


def read_status_file(path, node_count: int) -> np.ndarray:
    """Parse `node_index STATUS` lines into a Status array."""
    lines = Path(path).read_text().splitlines()
    st = np.full(node_count, -1, dtype=np.int8)
    for lineno, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'node STATUS'")
        try:
            v = int(parts[0])
        except ValueError:
            raise ValueError(f"line {lineno}: node index must be an integer") from None
        if not 0 <= v < node_count:
            raise ValueError(f"line {lineno}: node index out of range")
        try:
            status = Status.from_label(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: unknown status {parts[1]!r}") from None
        if st[v] != -1:
            raise ValueError(f"line {lineno}: duplicate entry for node {v}")
        st[v] = int(status)
    missing = np.flatnonzero(st == -1)
    if len(missing):
        raise ValueError(f"missing status for node {int(missing[0])}")
    return st
