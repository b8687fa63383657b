"""Round engine behavior: delivery, wake waves, caps, and bookkeeping."""

import os
import tempfile

import numpy as np
import pytest

from misbeep.engine import (
    ChannelMode,
    SimResult,
    WakeupSchedule,
    compute_active_times,
    default_round_cap,
    deliver_round,
    run_simulation,
    survivors_at,
)
from misbeep.graphs import Status, gen_clique, gen_ring, read_edge_list
from misbeep.protocols import Algo1NoCdProtocol, Algo1Protocol, Algo2Protocol

LWB = ChannelMode.LISTEN_WHILE_BEEPING
BO = ChannelMode.BEEP_ONLY


def graph_from_edges(n, edges):
    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as f:
        f.write(f"n {n}\n")
        for u, v in edges:
            f.write(f"{u} {v}\n")
        path = f.name
    try:
        return read_edge_list(path)
    finally:
        os.unlink(path)


# ---------------------------------------------------------------------------
# Channel semantics
# ---------------------------------------------------------------------------

def test_deliver_single_beeper_k2():
    g = gen_clique(2)
    assert deliver_round(g, [0], LWB).tolist() == [False, True]
    assert deliver_round(g, [0], BO).tolist() == [False, True]


def test_deliver_both_beep_k2_modes_differ():
    g = gen_clique(2)
    assert deliver_round(g, [0, 1], LWB).tolist() == [True, True]
    assert deliver_round(g, [0, 1], BO).tolist() == [False, False]


def test_deliver_on_path():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    assert deliver_round(g, [1], LWB).tolist() == [True, False, True]
    # the ends beep: the middle hears, the ends hear nothing in any mode
    assert deliver_round(g, [0, 2], LWB).tolist() == [False, True, False]
    assert deliver_round(g, [0, 2], BO).tolist() == [False, True, False]


def test_deliver_nobody_beeps():
    g = gen_ring(5)
    assert not deliver_round(g, [], LWB).any()


def test_channel_mode_labels():
    assert LWB.label == "ListenWhileBeeping"
    assert BO.label == "BeepOnly"
    assert ChannelMode.from_label("BeepOnly") is BO
    with pytest.raises(ValueError):
        ChannelMode.from_label("FullDuplex")


def test_mode_forced_by_protocol():
    g = gen_clique(2)
    sched = WakeupSchedule.sync()
    with pytest.raises(ValueError, match="algo1 runs in ListenWhileBeeping"):
        run_simulation(g, Algo1Protocol(n_upper=2), sched, mode=BO)
    with pytest.raises(ValueError, match="BeepOnly"):
        run_simulation(g, Algo1NoCdProtocol(n_upper=2), sched, mode=LWB)
    assert run_simulation(g, Algo1Protocol(n_upper=2), sched).mode is LWB
    assert run_simulation(g, Algo1NoCdProtocol(n_upper=2), sched).mode is BO
    assert run_simulation(g, Algo2Protocol(big_n=4), sched, mode=LWB).mode is LWB


# ---------------------------------------------------------------------------
# Wakeup schedules
# ---------------------------------------------------------------------------

def test_sync_schedule():
    assert WakeupSchedule.sync().spontaneous_rounds(4).tolist() == [0, 0, 0, 0]
    assert WakeupSchedule.sync().describe() == "sync"


def test_explicit_schedule_roundtrip_and_validation():
    s = WakeupSchedule.explicit([3, -1, 0])
    assert s.spontaneous_rounds(3).tolist() == [3, -1, 0]
    assert s.describe() == "list"
    with pytest.raises(ValueError, match="wakes nobody"):
        WakeupSchedule.explicit([-1, -1])
    with pytest.raises(ValueError):
        WakeupSchedule.explicit([0, -2])
    with pytest.raises(ValueError, match="graph has 5"):
        s.spontaneous_rounds(5)


def test_random_schedule_is_deterministic_and_bounded():
    s = WakeupSchedule.random_subset(0.5, max_round=9, seed=11)
    a = s.spontaneous_rounds(200)
    b = s.spontaneous_rounds(200)
    assert np.array_equal(a, b)
    chosen = a[a >= 0]
    assert len(chosen) > 0
    assert chosen.max() <= 9
    c = WakeupSchedule.random_subset(0.5, max_round=9, seed=12).spontaneous_rounds(200)
    assert not np.array_equal(a, c)
    assert s.describe() == "random:0.5:9"


def test_random_schedule_full_fraction_covers_everyone():
    s = WakeupSchedule.random_subset(1.0, max_round=4, seed=3)
    r = s.spontaneous_rounds(50)
    assert (r >= 0).all() and r.max() <= 4


def test_random_schedule_promotes_someone_when_draw_is_empty():
    s = WakeupSchedule.random_subset(1e-12, max_round=5, seed=0)
    r = s.spontaneous_rounds(20)
    assert np.count_nonzero(r >= 0) == 1
    assert r[r >= 0][0] == 0


def test_random_schedule_validation():
    with pytest.raises(ValueError):
        WakeupSchedule.random_subset(0.0, 5, 0)
    with pytest.raises(ValueError):
        WakeupSchedule.random_subset(0.5, -1, 0)
    with pytest.raises(ValueError):
        WakeupSchedule.sync().spontaneous_rounds(0)


# ---------------------------------------------------------------------------
# Whole runs
# ---------------------------------------------------------------------------

def test_single_node_run_exact_trajectory():
    g = gen_clique(1)
    res = run_simulation(g, Algo1Protocol(n_upper=1), WakeupSchedule.sync(),
                         engine="pure")
    assert res.status_labels() == ["InMIS"]
    assert res.wake_round.tolist() == [0]
    assert res.exit_round.tolist() == [6]  # beep, wait, then one 6-round step
    assert res.total_rounds == 7
    assert res.total_algorithm_beeps == 2 and res.total_wakeup_beeps == 1
    assert res.active_time.tolist() == [6]
    assert res.max_active_time == 6
    assert res.valid and not res.cap_hit


def test_k2_yields_one_winner_every_seed():
    g = gen_clique(2)
    for seed in range(30):
        res = run_simulation(g, Algo1Protocol(n_upper=2),
                             WakeupSchedule.sync(), seed=seed, engine="pure")
        assert res.valid, seed
        assert sorted(res.status_labels()) == ["InMIS", "Inactive"], seed
        assert res.wakeup_beeps.tolist() == [1, 1]


def test_small_rings_resolve_cleanly():
    for n in (3, 5, 8, 16):
        for seed in (0, 1, 2):
            res = run_simulation(gen_ring(n), Algo1Protocol(n_upper=n),
                                 WakeupSchedule.sync(), seed=seed, engine="pure")
            assert res.valid and res.failed_count == 0, (n, seed)
            assert res.mis_size >= 1


def test_nocd_and_algo2_also_resolve():
    g = gen_ring(8)
    for seed in range(3):
        r1 = run_simulation(g, Algo1NoCdProtocol(n_upper=8),
                            WakeupSchedule.sync(), seed=seed, engine="pure")
        r2 = run_simulation(g, Algo2Protocol(big_n=64),
                            WakeupSchedule.sync(), seed=seed, engine="pure")
        assert r1.valid and r1.failed_count == 0
        assert r2.valid and r2.failed_count == 0


def test_identical_arguments_identical_results():
    g = gen_ring(10)
    runs = [run_simulation(g, Algo1Protocol(n_upper=10), WakeupSchedule.sync(),
                           seed=5, engine="pure") for _ in range(2)]
    for attr in ("status", "wake_round", "exit_round", "algorithm_beeps",
                 "wakeup_beeps", "active_time"):
        assert np.array_equal(getattr(runs[0], attr), getattr(runs[1], attr))
    assert runs[0].total_rounds == runs[1].total_rounds


def test_wake_wave_spreads_from_single_source():
    g = gen_ring(12)
    sched = WakeupSchedule.explicit([0] + [-1] * 11)
    res = run_simulation(g, Algo1Protocol(n_upper=12), sched, engine="pure")
    assert (res.wake_round >= 0).all()
    # hop h hears the wave in round h-1 and counts as woken right then
    dist = np.minimum(np.arange(12), 12 - np.arange(12))
    assert np.array_equal(res.wake_round, np.maximum(dist - 1, 0))
    assert res.valid


def test_pending_wake_skipped_once_beep_woken():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    sched = WakeupSchedule.explicit([0, 2, -1])
    res = run_simulation(g, Algo1Protocol(n_upper=4), sched, engine="pure")
    assert res.wake_round.tolist() == [0, 0, 1]
    assert res.wakeup_beeps.tolist() == [1, 1, 1]  # no double wake beep


def test_disconnected_component_never_wakes():
    g = graph_from_edges(4, [(0, 1), (2, 3)])
    sched = WakeupSchedule.explicit([0, -1, -1, -1])
    res = run_simulation(g, Algo1Protocol(n_upper=4), sched, engine="pure")
    assert res.status_labels()[2:] == ["NeverWoke", "NeverWoke"]
    assert res.wake_round.tolist()[2:] == [-1, -1]
    assert res.active_time.tolist()[2:] == [0, 0]
    assert res.valid  # sleeping nodes are exempt from coverage


def test_fast_forward_across_idle_gap():
    g = graph_from_edges(2, [])
    sched = WakeupSchedule.explicit([5, 100000])
    res = run_simulation(g, Algo1Protocol(n_upper=1), sched, engine="pure")
    assert res.wake_round.tolist() == [5, 100000]
    assert res.exit_round.tolist() == [11, 100006]
    assert res.total_rounds == 100007


def test_round_cap_marks_survivors_failed():
    g = gen_ring(6)
    res = run_simulation(g, Algo1Protocol(n_upper=6), WakeupSchedule.sync(),
                         round_cap=3, engine="pure")
    assert res.cap_hit
    assert res.total_rounds == 3
    assert res.failed_count == 6
    assert res.exit_round.tolist() == [-1] * 6
    assert not res.valid
    # capped nodes are charged the whole run when timing activity
    assert res.active_time.tolist() == [3] * 6
    assert survivors_at(res, 3) == 6
    assert survivors_at(res, 4) == 0


def test_round_cap_validation():
    g = gen_clique(2)
    with pytest.raises(ValueError):
        run_simulation(g, Algo1Protocol(n_upper=2), WakeupSchedule.sync(),
                       round_cap=0)


def test_default_round_cap_covers_natural_bound():
    g = gen_ring(16)
    spont = WakeupSchedule.sync().spontaneous_rounds(16)
    p = Algo1Protocol(n_upper=16)
    cap = default_round_cap(p, g, spont)
    assert cap >= p.natural_round_bound()
    p2 = Algo2Protocol(big_n=2 ** 20)
    cap2 = default_round_cap(p2, g, spont)
    assert cap2 >= 100 * p2.L_N  # generous allowance for the unbounded loop


def test_survivors_at_single_node():
    res = run_simulation(gen_clique(1), Algo1Protocol(n_upper=1),
                         WakeupSchedule.sync(), engine="pure")
    assert survivors_at(res, 0) == 1
    assert survivors_at(res, 6) == 1
    assert survivors_at(res, 7) == 0


def test_active_time_matches_brute_force():
    g = gen_ring(14)
    sched = WakeupSchedule.random_subset(0.4, max_round=6, seed=2)
    res = run_simulation(g, Algo1Protocol(n_upper=14), sched, seed=9,
                         engine="pure")
    exit_eff = np.where(res.exit_round >= 0, res.exit_round, res.total_rounds)
    expected = []
    for v in range(14):
        if res.wake_round[v] < 0:
            expected.append(0)
            continue
        hood = [v] + g.neighbors(v).tolist()
        last = max(int(exit_eff[u]) for u in hood if res.wake_round[u] >= 0)
        expected.append(last - int(res.wake_round[v]))
    assert res.active_time.tolist() == expected
    assert res.max_active_time == max(expected)
    recomputed = compute_active_times(res, g)
    assert np.array_equal(recomputed, res.active_time)


# ---------------------------------------------------------------------------
# Instrumentation
# ---------------------------------------------------------------------------

def test_beep_trace_records_rounds():
    g = gen_clique(2)
    res = run_simulation(g, Algo1Protocol(n_upper=2), WakeupSchedule.sync(),
                         seed=1, record_trace=True)
    assert res.engine == "pure"
    assert len(res.beep_trace) == res.total_rounds
    assert res.beep_trace[0].tolist() == [0, 1]  # synchronized wake beeps
    assert res.beep_trace[1].tolist() == []
    total_beeps = sum(len(b) for b in res.beep_trace)
    assert total_beeps == res.total_algorithm_beeps + res.total_wakeup_beeps


def test_alignment_check_passes_on_staggered_wakeups():
    g = gen_ring(16)
    for seed in range(5):
        sched = WakeupSchedule.random_subset(0.3, max_round=11, seed=seed)
        res = run_simulation(g, Algo1Protocol(n_upper=16), sched, seed=seed,
                             check_alignment=True)
        assert res.engine == "pure"
        assert res.valid


def test_instrumentation_is_pure_engine_only():
    g = gen_clique(2)
    with pytest.raises(ValueError, match="pure engine"):
        run_simulation(g, Algo1Protocol(n_upper=2), WakeupSchedule.sync(),
                       engine="kernel", record_trace=True)
    with pytest.raises(ValueError, match="unknown engine"):
        run_simulation(g, Algo1Protocol(n_upper=2), WakeupSchedule.sync(),
                       engine="gpu")


def test_result_surface():
    res = run_simulation(gen_clique(3), Algo1Protocol(n_upper=4),
                         WakeupSchedule.sync(), seed=4, engine="pure")
    assert isinstance(res, SimResult)
    assert res.node_count == 3
    assert res.protocol_kind == "algo1"
    assert res.mis_size == 1
    assert set(res.status_labels()) <= {"InMIS", "Inactive"}
    assert res.round_cap > 0 and res.seed == 4
