"""Acceptance gate: ten numbered checks, one verdict line each.

Every check prints `criterion N: ...` straight to the terminal
(bypassing capture) so the whole gate can be read off a plain pytest
run.  Numeric thresholds marked "frozen" were calibrated on pilot runs
once and are not tuned to the test seeds.

Check 7 contains a deliberate red: the stated off-diagonal per-factor
bound (1 - 2e^{-2^(j-k)}) is false near dyadic bin bottoms, and the
test asserts it anyway rather than quietly weakening it.  A companion
assertion shows the exponent-halved form does hold.
"""

import itertools
import math

import numpy as np
import pytest

from misbeep.engine import WakeupSchedule, run_simulation, survivors_at
from misbeep.experiments import (
    ExperimentConfig,
    ols_fit,
    parse_graph_spec,
    run_experiment,
    wilson_interval,
    write_csv,
)
from misbeep.graphs import Graph, Status, gen_gnp, good_vertices, verify_mis
from misbeep.lowerbound import (
    UniformSchedule,
    empirical_failure_rate,
    factor_bound_margins,
    failure_prob,
    min_product_over_p,
    simulate_uniform_process,
)
from misbeep.protocols import Algo1Protocol, Algo2Protocol, ceil_log2


def report(capsys, line):
    with capsys.disabled():
        print(f"\n{line}", flush=True)


# ---------------------------------------------------------------------------
# 1. Safety of the CD protocol across the whole graph zoo
# ---------------------------------------------------------------------------

SAFETY_KINDS = ("clique:{n}", "ring:{n}", "gnp:{n}:8overN", "bipartite:{n}")
SAFETY_NS = (16, 64, 256, 1024, 4096)
SAFETY_WAKEUPS = ("sync", "random:0.25:64")


def test_criterion_01_safety(capsys):
    runs = 0
    bad = []
    for kind in SAFETY_KINDS:
        for n in SAFETY_NS:
            for wakeup in SAFETY_WAKEUPS:
                cfg = ExperimentConfig(graph=kind.format(n=n), wakeup=wakeup,
                                       trials=50)
                for rec in run_experiment(cfg):
                    runs += 1
                    if not rec.valid or rec.failed_nodes:
                        bad.append((rec.graph, wakeup, rec.seed,
                                    rec.valid, rec.failed_nodes))
    report(capsys, f"criterion 1: {'PASS' if not bad else 'FAIL'} - "
           f"{runs} runs over {len(SAFETY_KINDS)} graph kinds x "
           f"{len(SAFETY_NS)} sizes x {len(SAFETY_WAKEUPS)} wakeups, "
           f"{len(bad)} invalid")
    assert runs == 2000
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------
# 2 & 3. Round scaling and message counts on one shared sweep
# ---------------------------------------------------------------------------

SWEEP_NS = (64, 256, 1024, 4096)
SWEEP_TRIALS = 20


@pytest.fixture(scope="module")
def sweep_stats():
    """Per-size aggregates for the sparse-graph sweep.

    n_upper is n^3 (frozen): the growth-ratio check needs the phase
    budget to dominate, and with n_upper = n every small-n run resolves
    inside phase 0, flattening the curve.
    """
    stats = []
    for n in SWEEP_NS:
        actives, beep_ratios, min_mis_beeps = [], [], []
        for seed in range(SWEEP_TRIALS):
            g = parse_graph_spec(f"gnp:{n}:8overN", seed=seed)
            res = run_simulation(g, Algo1Protocol(n_upper=n ** 3),
                                 WakeupSchedule.sync(), seed=seed)
            assert res.valid and res.failed_count == 0
            mis = res.status == Status.IN_MIS
            actives.append(res.max_active_time)
            beep_ratios.append(res.total_algorithm_beeps / res.mis_size)
            min_mis_beeps.append(int(res.algorithm_beeps[mis].min()))
        stats.append(dict(n=n, mean_active=float(np.mean(actives)),
                          mean_beeps_per_mis=float(np.mean(beep_ratios)),
                          min_inmis_beeps=min(min_mis_beeps)))
    return stats


def test_criterion_02_round_scaling(capsys, sweep_stats):
    xs = [math.log2(s["n"]) ** 2 for s in sweep_stats]
    ys = [s["mean_active"] for s in sweep_stats]
    slope, intercept, r2 = ols_fit(xs, ys)
    ratio = ys[-1] / ys[0]
    report(capsys, f"criterion 2: "
           f"{'PASS' if r2 >= 0.9 and 2 <= ratio <= 8 else 'FAIL'} - "
           f"active-time fit {slope:.2f}*log2(n)^2{intercept:+.1f}, "
           f"R^2={r2:.4f} (>=0.9), growth ratio {ratio:.2f} in [2, 8]")
    assert r2 >= 0.9
    assert 2.0 <= ratio <= 8.0


def test_criterion_03_message_optimality(capsys, sweep_stats):
    worst_mean = max(s["mean_beeps_per_mis"] for s in sweep_stats)
    least = min(s["min_inmis_beeps"] for s in sweep_stats)
    ok = least >= 1 and worst_mean <= 15.0
    report(capsys, f"criterion 3: {'PASS' if ok else 'FAIL'} - every joining "
           f"node beeped >= {least} time(s); worst mean beeps per joiner "
           f"{worst_mean:.2f} (<= 15)")
    assert least >= 1
    assert worst_mean <= 15.0


# ---------------------------------------------------------------------------
# 4. The no-CD variant: safety over 1000 runs, round-cost ratio bracket
# ---------------------------------------------------------------------------

def test_criterion_04_nocd(capsys):
    n, c = 256, 8
    L = ceil_log2(n)
    nocd = ExperimentConfig(algorithm="algo1-nocd", graph=f"gnp:{n}:8overN",
                            trials=1000)
    nocd_records = run_experiment(nocd)
    violations = [r for r in nocd_records if not r.valid]
    cd = ExperimentConfig(algorithm="algo1", graph=f"gnp:{n}:8overN",
                          trials=200)
    cd_records = run_experiment(cd)
    ratio = (np.mean([r.total_rounds for r in nocd_records])
             / np.mean([r.total_rounds for r in cd_records]))
    # frozen bracket: a step stretches from 6 to c*L+6 rounds, and step
    # counts match across the variants, so expect ~(c*L+6)/6 = 11.67
    per_step = (c * L + 6) / 6
    lo, hi = 0.5 * per_step, 2.0 * per_step
    ok = not violations and lo <= ratio <= hi
    report(capsys, f"criterion 4: {'PASS' if ok else 'FAIL'} - "
           f"{len(violations)}/1000 violations; round ratio {ratio:.2f} in "
           f"[{lo:.2f}, {hi:.2f}]")
    assert not violations
    assert lo <= ratio <= hi


# ---------------------------------------------------------------------------
# 5. Wrap-around protocol scaling in the identifier-space size
# ---------------------------------------------------------------------------

def test_criterion_05_algo2_scaling(capsys):
    g = parse_graph_spec("ring:64")
    means = []
    big_ns = (2 ** 16, 2 ** 32, 2 ** 64)
    for big_n in big_ns:
        rounds = []
        for seed in range(30):
            res = run_simulation(g, Algo2Protocol(big_n=big_n),
                                 WakeupSchedule.sync(), seed=seed)
            assert res.valid and res.failed_count == 0
            assert not res.cap_hit
            rounds.append(res.total_rounds)
        means.append(float(np.mean(rounds)))
    slope, intercept, r2 = ols_fit([math.log2(b) for b in big_ns], means)
    report(capsys, f"criterion 5: {'PASS' if r2 >= 0.9 else 'FAIL'} - mean "
           f"rounds = {slope:.2f}*log2(N){intercept:+.1f}, R^2={r2:.4f} "
           f"(>= 0.9); all 90 runs valid, no cap hits")
    assert r2 >= 0.9


# ---------------------------------------------------------------------------
# 6. Beep volume on the clique where identifiers are scarce
# ---------------------------------------------------------------------------

def test_criterion_06_clique_beep_volume(capsys):
    n = 1024
    g = parse_graph_spec(f"clique:{n}")
    protocol = Algo2Protocol(big_n=n)
    l_n = protocol.L_N
    final_step_start = 2 + 6 * l_n  # sync start: loop entry at round 2
    phase_len = 6 * (l_n + 1)
    total_beeps, deep_trials, per_phase_means = [], 0, []
    trials = 200
    for seed in range(trials):
        res = run_simulation(g, protocol, WakeupSchedule.sync(), seed=seed)
        assert res.valid and res.failed_count == 0
        total_beeps.append(res.total_algorithm_beeps)
        if survivors_at(res, final_step_start) >= n // 2:
            deep_trials += 1
        exit_eff = np.where(res.exit_round >= 0, res.exit_round,
                            res.total_rounds)
        phases = np.maximum(1, np.ceil((exit_eff - 2) / phase_len))
        per_phase_means.append(float(np.mean(res.algorithm_beeps / phases)))
    mean_beeps = float(np.mean(total_beeps))
    deep_frac = deep_trials / trials
    per_phase = float(np.mean(per_phase_means))
    ok = mean_beeps >= 0.25 * n and deep_frac >= 0.30 and per_phase <= 2.0
    report(capsys, f"criterion 6: {'PASS' if ok else 'FAIL'} - mean beeps "
           f"{mean_beeps:.0f} (>= {0.25 * n:.0f}); {deep_frac:.2f} of trials "
           f"kept >= n/2 nodes into the last first-pass step (>= 0.30); "
           f"beeps per node per pass {per_phase:.2f} (<= 2)")
    assert mean_beeps >= 0.25 * n
    assert deep_frac >= 0.30
    assert per_phase <= 2.0


# ---------------------------------------------------------------------------
# 7. Failure-factor analytics (contains the deliberate red)
# ---------------------------------------------------------------------------

def test_criterion_07_failure_factor_analytics(capsys):
    # (a) closed form, exactly, and against Monte-Carlo
    exact = failure_prob(0.5, 1)
    assert exact == 0.625  # log-space arithmetic lands on it exactly
    trials = 10 ** 6
    emp = empirical_failure_rate(1, 0.5, trials, seed=7)
    sigma = math.sqrt(exact * (1 - exact) / trials)
    assert abs(emp - exact) <= 4 * sigma

    # (b) the product stays clear of zero at every tested size
    min_products = {log_n: min_product_over_p(log_n)[1]
                    for log_n in (8, 12, 20, 40, 60)}
    assert all(v >= 0.001 for v in min_products.values())

    # (c) per-factor bounds over the p grid
    diag_margin, off_margin = factor_bound_margins()
    assert diag_margin > 0.0  # diagonal bound (> 0.1) holds
    _, off_fixed = factor_bound_margins(halved_exponent=True)
    assert off_fixed >= 0.0  # exponent-halved form holds

    report(capsys, "criterion 7: FAIL (deliberate) - 7a PASS "
           f"(0.625 exact, MC off by {abs(emp - exact):.6f} <= 4 sigma); "
           f"7b PASS (min product {min(min_products.values()):.4f} >= 0.001); "
           f"7c diagonal PASS (margin {diag_margin:+.4f}); 7c off-diagonal "
           f"as stated FAIL (worst margin {off_margin:+.5f}); "
           f"exponent-halved companion PASS (margin {off_fixed:+.5f})")
    # honest red: the stated bound is false (the exponent is too strong
    # by one halving); keep the faithful assertion and let it fail
    assert off_margin >= 0.0, (
        "off-diagonal factor bound 1-2e^(-2^(j-k)) fails near bin bottoms; "
        f"worst margin {off_margin:.5f}")


# ---------------------------------------------------------------------------
# 8. Hard-family empirics
# ---------------------------------------------------------------------------

def test_criterion_08_hard_family(capsys):
    # (i) the adversarial uniform schedule, truncated early, almost
    # always strands a component
    log_n = 12
    p_star, _ = min_product_over_p(log_n)
    t_rounds = math.ceil(0.01 * log_n * log_n)
    g = parse_graph_spec(f"bipartite:{1 << log_n}")
    schedule = UniformSchedule.constant(p_star, t_rounds)
    trials = 100
    stranded = 0
    for seed in range(trials):
        first = simulate_uniform_process(g, schedule, seed=seed)
        if (first < 0).any():
            stranded += 1
    frac = stranded / trials
    lo_ci, hi_ci = wilson_interval(stranded, trials)
    threshold = 0.95  # frozen from pilot (observed 100/100)

    # (ii) full completion rounds on the hard family track log2(n)^2
    norm = {}
    for log2n, seeds in ((8, 50), (12, 12), (16, 3)):
        g2 = parse_graph_spec(f"bipartite:{1 << log2n}")
        totals = []
        for seed in range(seeds):
            res = run_simulation(g2, Algo1Protocol(n_upper=g2.node_count),
                                 WakeupSchedule.sync(), seed=seed)
            assert res.valid and res.failed_count == 0
            totals.append(res.total_rounds)
        norm[log2n] = float(np.mean(totals)) / log2n ** 2
    band = max(norm.values()) / min(norm.values())

    ok = frac >= threshold and band <= 2.0
    report(capsys, f"criterion 8: {'PASS' if ok else 'FAIL'} - stranded "
           f"component in {stranded}/{trials} truncated runs "
           f"(95% CI [{lo_ci:.3f}, {hi_ci:.3f}], >= {threshold}); "
           f"completion/log2(n)^2 = "
           + ", ".join(f"{v:.1f}@2^{k}" for k, v in sorted(norm.items()))
           + f", band {band:.2f}x (<= 2x)")
    assert frac >= threshold
    assert band <= 2.0


# ---------------------------------------------------------------------------
# 9. Byte-identical output across repeats and worker counts
# ---------------------------------------------------------------------------

def test_criterion_09_determinism(capsys, monkeypatch, tmp_path):
    cfg = ExperimentConfig(graph="gnp:128:8overN", wakeup="random:0.3:16",
                           trials=6, seed=42)

    def emit(threads):
        monkeypatch.setenv("MISBEEP_THREADS", str(threads))
        path = tmp_path / f"out_{threads}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_csv(run_experiment(cfg), fh)
        return path.read_bytes()

    first = emit(1)
    again = emit(1)
    pooled = emit(2)
    ok = first == again == pooled
    report(capsys, f"criterion 9: {'PASS' if ok else 'FAIL'} - "
           f"{len(first)} CSV bytes identical across two runs and worker "
           f"counts 1 and 2")
    assert first == again
    assert first == pooled


# ---------------------------------------------------------------------------
# 10. Oracle equivalence
# ---------------------------------------------------------------------------

def _tiny_graph(n, edges):
    nbrs = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    indptr = np.zeros(n + 1, dtype=np.int64)
    flat = []
    for v in range(n):
        nbrs[v].sort()
        indptr[v + 1] = indptr[v] + len(nbrs[v])
        flat.extend(nbrs[v])
    return Graph(n, indptr, np.array(flat, dtype=np.int32)), nbrs


def _brute_flags(n, edges, nbrs, st_arr):
    mis = {v for v in range(n) if st_arr[v] == int(Status.IN_MIS)}
    indep = not any(u in mis and v in mis for u, v in edges)
    maximal = True
    for v in range(n):
        if st_arr[v] == int(Status.NEVER_WOKE) or v in mis:
            continue
        if not any(u in mis for u in nbrs[v]):
            maximal = False
            break
    return indep, maximal


def _check_graph_exhaustively(n, edges, assignments):
    g, nbrs = _tiny_graph(n, edges)
    for row in assignments:
        res = verify_mis(g, row)
        indep, maximal = _brute_flags(n, edges, nbrs, row)
        assert res.is_independent == indep, (n, edges, row.tolist())
        assert res.is_maximal == maximal, (n, edges, row.tolist())


def test_criterion_10_oracle_equivalence(capsys):
    # (i) verify_mis against brute force: every labeled graph on <= 5
    # nodes under every 3-status assignment
    checked = 0
    three = (int(Status.NEVER_WOKE), int(Status.IN_MIS), int(Status.INACTIVE))
    for n in range(1, 6):
        pairs = list(itertools.combinations(range(n), 2))
        assignments = np.array(list(itertools.product(three, repeat=n)),
                               dtype=np.int8)
        for mask in range(1 << len(pairs)):
            edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
            _check_graph_exhaustively(n, edges, assignments)
            checked += len(assignments)

    # the same sweep on a few fixed 8-node graphs
    assignments8 = np.array(list(itertools.product(three, repeat=8)),
                            dtype=np.int8)
    fixed8 = [
        [(v, v + 1) for v in range(7)],  # path
        [(u, v) for u in range(8) for v in range(u + 1, 8) if (u + v) % 3],
        [(0, k) for k in range(1, 8)],  # star
    ]
    for edges in fixed8:
        _check_graph_exhaustively(8, edges, assignments8)
        checked += len(assignments8)

    # random graphs on 6..8 nodes under all four statuses
    rng = np.random.default_rng(404)
    for trial in range(300):
        n = int(rng.integers(6, 9))
        g = gen_gnp(n, float(rng.uniform(0.1, 0.9)), seed=trial)
        edges = [(int(u), int(v))
                 for u, v in zip(*g.directed_edges()) if u < v]
        nbrs = g.adjacency_lists()
        row = rng.integers(0, 4, size=n).astype(np.int8)
        res = verify_mis(g, row)
        # Failed demands coverage exactly like Inactive does
        folded = np.where(row == int(Status.FAILED),
                          int(Status.INACTIVE), row)
        indep, maximal = _brute_flags(n, edges, nbrs, folded)
        assert (res.is_independent, res.is_maximal) == (indep, maximal)
        checked += 1

    # (ii) Monte-Carlo failure rates against the closed form
    worst_z = 0.0
    for i in (0, 2, 4, 6):
        for p in (0.2, 0.5, 0.8):
            trials = 200000
            exact = failure_prob(p, i)
            emp = empirical_failure_rate(i, p, trials, seed=31 * i + int(10 * p))
            sigma = math.sqrt(max(exact * (1 - exact), 1e-12) / trials)
            z = abs(emp - exact) / sigma if sigma else 0.0
            worst_z = max(worst_z, z)
            assert abs(emp - exact) <= 4 * sigma + 1.0 / trials, (i, p)

    # (iii) good vertices always touch at least half the live edges
    for trial in range(100):
        n = int(rng.integers(5, 40))
        g = gen_gnp(n, float(rng.uniform(0.05, 0.6)), seed=1000 + trial)
        active = rng.random(n) < rng.uniform(0.3, 1.0)
        good = good_vertices(g, active)
        tails, heads = g.directed_edges()
        live = active[tails] & active[heads] & (tails < heads)
        touched = live & (np.isin(tails, list(good)) | np.isin(heads, list(good)))
        assert 2 * int(touched.sum()) >= int(live.sum()), trial

    report(capsys, f"criterion 10: PASS - {checked} brute-force "
           f"verifications agree; MC failure rates within "
           f"{worst_z:.2f} sigma (<= 4); good-vertex edge bound held on "
           f"100 random instances")
