"""Broadcast-failure analytics on complete bipartite components.

A component K_{2^i,2^i} whose nodes all beep independently with the
same probability p fails a round when nobody beeps or both sides beep:

    fail(p, i) = (1 - p)^(2^(i+1)) + (1 - (1 - p)^(2^i))^2

The product of these factors across the type range measures how well a
single per-round probability can avoid failing *every* type at once;
its minimum over p stays bounded away from zero, which is the engine of
the log^2 round lower bound.  Everything here accumulates in log space
so the 2^i exponents cannot underflow silently, and a small Monte-Carlo
oracle cross-checks the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import Graph
from .rng import GOLDEN, MASK64, mix64, mix64_array

_PROCESS_TAG = 0x756E6966  # stream tag for the uniform-probability process


def failure_prob(p: float, i: int) -> float:
    """Probability that one K_{2^i,2^i} fails a round at beep prob p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if i < 0:
        raise ValueError("type index must be >= 0")
    if p == 1.0:
        return 1.0  # both sides surely beep
    lq = math.log1p(-p)
    silent = math.exp((1 << (i + 1)) * lq)  # (1-p)^(2^(i+1))
    one_side_quiet = -math.expm1((1 << i) * lq)  # 1 - (1-p)^(2^i)
    return silent + one_side_quiet * one_side_quiet


def _factor_grid(ps: np.ndarray, j: int) -> np.ndarray:
    """failure_prob over an array of probabilities, identical arithmetic."""
    with np.errstate(divide="ignore"):
        lq = np.log1p(-ps)
    silent = np.exp(float(1 << (j + 1)) * lq)
    one_side_quiet = -np.expm1(float(1 << j) * lq)
    return silent + one_side_quiet * one_side_quiet


@dataclass(frozen=True)
class FailureProduct:
    """Per-type failure factors at one probability, and their product."""

    log_n: float
    p: float
    per_type: dict[int, float]
    product: float
    log_product: float


def type_range(log_n: float) -> range:
    """Type indices 0..floor(log_n/4) covered by the product."""
    if log_n <= 0:
        raise ValueError("log_n must be positive")
    return range(int(math.floor(log_n / 4)) + 1)


def round_failure_product(p: float, log_n: float) -> FailureProduct:
    """Product of failure factors over all types for one round."""
    per = {j: failure_prob(p, j) for j in type_range(log_n)}
    # each factor is x^2 + (1-x)^2 >= 1/2, so the logs are always finite
    log_product = sum(math.log(v) for v in per.values())
    return FailureProduct(log_n=float(log_n), p=float(p), per_type=per,
                          product=math.exp(log_product),
                          log_product=log_product)


def _log_product_grid(ps: np.ndarray, log_n: float) -> np.ndarray:
    total = np.zeros_like(ps)
    for j in type_range(log_n):
        total += np.log(_factor_grid(ps, j))
    return total


def min_product_over_p(log_n: float, resolution: float = 1e-4) -> tuple[float, float]:
    """Adversary's best single probability: grid search over [0, 1] at
    the given resolution, then a 100x finer pass around the coarse
    minimizer.  Returns (p*, product at p*)."""
    if not 0 < resolution <= 0.5:
        raise ValueError("resolution must lie in (0, 0.5]")
    coarse = np.arange(0.0, 1.0 + resolution / 2, resolution)
    coarse[-1] = 1.0
    logs = _log_product_grid(coarse, log_n)
    k = int(np.argmin(logs))
    lo = max(0.0, float(coarse[k]) - resolution)
    hi = min(1.0, float(coarse[k]) + resolution)
    fine = np.linspace(lo, hi, 201)
    fine_logs = _log_product_grid(fine, log_n)
    m = int(np.argmin(fine_logs))
    return float(fine[m]), float(math.exp(fine_logs[m]))


def bin_index(p: float) -> int:
    """k with 1/2^(k+1) < p <= 1/2^k (the dyadic bin of p); p > 0."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    k = int(math.floor(-math.log2(p)))
    # float log2 can land on either side of an exact power boundary
    while p <= 2.0 ** -(k + 1):
        k += 1
    while p > 2.0 ** -k:
        k -= 1
    return k


def factor_bound_margins(resolution: float = 1e-4, j_max: int = 15,
                         halved_exponent: bool = False) -> tuple[float, float]:
    """Worst margins (factor minus claimed lower bound) over the p-grid.

    Diagonal claim: for p in bin k, failure_prob(p, k) > 0.1.
    Off-diagonal claim: for j > k, failure_prob(p, j) >= 1 - 2e^(-2^(j-k)),
    or with the exponent halved to 2^(j-k-1) when halved_exponent is set.
    Returns (min diagonal margin, min off-diagonal margin); a negative
    entry is a counterexample to the corresponding claim.
    """
    ps = np.arange(resolution, 1.0 + resolution / 2, resolution)
    ps[-1] = 1.0
    ks = np.floor(-np.log2(ps)).astype(np.int64)
    ks += ps <= 2.0 ** -(ks + 1)
    ks -= ps > 2.0 ** -ks
    diag = math.inf
    off = math.inf
    for j in range(j_max + 1):
        factors = _factor_grid(ps, j)
        on_diag = ks == j
        if on_diag.any():
            diag = min(diag, float(factors[on_diag].min()) - 0.1)
        below = ks < j
        if below.any():
            gap = (j - ks[below]).astype(np.float64)
            if halved_exponent:
                gap -= 1.0
            bound = 1.0 - 2.0 * np.exp(-(2.0 ** gap))
            off = min(off, float((factors[below] - bound).min()))
    return diag, off


@dataclass(frozen=True)
class UniformSchedule:
    """One shared beep probability per round."""

    probabilities: tuple[float, ...]

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for p in self.probabilities):
            raise ValueError("every probability must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.probabilities)

    @classmethod
    def constant(cls, p: float, rounds: int) -> "UniformSchedule":
        return cls(tuple([float(p)] * rounds))

    @classmethod
    def adversarial(cls, log_n: float, rounds: int,
                    resolution: float = 1e-4) -> "UniformSchedule":
        """The minimizing p from min_product_over_p, every round."""
        p_star, _ = min_product_over_p(log_n, resolution)
        return cls.constant(p_star, rounds)


def simulate_uniform_process(g: Graph, schedule: UniformSchedule,
                             seed: int = 0) -> np.ndarray:
    """Run the uniform-probability beeping process on a bipartite family.

    Every node beeps independently with probability p_t in round t.
    Returns, per component, the first round index where exactly one side
    had a beeper (-1 if every scheduled round failed)."""
    fam = g.family
    if fam is None:
        raise ValueError("graph carries no bipartite-family metadata")
    n = g.node_count
    comp = fam.node_component
    side = fam.node_side
    n_comp = fam.component_count
    first = np.full(n_comp, -1, dtype=np.int64)
    state = mix64(((seed + _PROCESS_TAG) * GOLDEN) & MASK64)
    base = np.arange(1, n + 1, dtype=np.uint64)
    for t, p in enumerate(schedule.probabilities):
        with np.errstate(over="ignore"):
            draws = mix64_array(state + (base + np.uint64(t * n)) * np.uint64(GOLDEN))
        beep = (draws >> np.uint64(11)) * 2.0 ** -53 < p
        has = np.zeros((n_comp, 2), dtype=bool)
        has[comp[beep], side[beep]] = True
        success = has[:, 0] ^ has[:, 1]
        first = np.where((first < 0) & success, t, first)
        if (first >= 0).all():
            break
    return first


def empirical_failure_rate(i: int, p: float, trials: int, seed: int = 0) -> float:
    """Monte-Carlo estimate of failure_prob(p, i): how often a single
    K_{2^i,2^i} run fails one round.  Samples the per-side beeper counts
    directly (the failure event only depends on them)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    side = 1 << i
    a = rng.binomial(side, p, size=trials)
    b = rng.binomial(side, p, size=trials)
    failures = ((a == 0) & (b == 0)) | ((a > 0) & (b > 0))
    return float(np.count_nonzero(failures)) / trials
