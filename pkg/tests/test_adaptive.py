import io
from dataclasses import replace

import numpy as np
import pytest

from sensopt import adaptive, kc, link_model as lm, mff
from sensopt.adaptive import AdaptiveConfig
from sensopt.optimizer import InfeasibleError, optimize_tau
from sensopt.simenv import EstimatorConfig

CFG = AdaptiveConfig(estimator=EstimatorConfig(t_ep_slots=10_000))


@pytest.fixture(scope="module")
def np3_runs():
    scn = lm.reference_scenario(3)
    return scn, [adaptive.run_adaptive(scn, replace(CFG, seed=s)) for s in (0, 1)]


def test_learned_optimum_near_analytic(np3_runs):
    scn, runs = np3_runs
    best = optimize_tau(scn)
    for r in runs:
        assert abs(r.tau_learned - best.tau_opt) <= max(0.10 * best.tau_opt, r.warmup_step)
        assert lm.throughput(scn, r.tau_learned).rate >= 0.98 * best.rate_max


def test_kc_output_settles(np3_runs):
    _, runs = np3_runs
    for r in runs:
        assert adaptive.last_quartile_std(r.records) < 0.02


def test_kc_finds_argmin_of_learned_surface(np3_runs):
    scn, runs = np3_runs
    net = runs[0].network
    lo = scn.tau_min / scn.slot_t
    grid = np.linspace(lo, 1.0, 1001)
    g = grid[int(np.argmin(mff.forward_batch(net, grid)))]
    s = kc.run_to_convergence(0.5, net, (lo, 1.0), CFG.kc)
    assert abs(min(max(s.x, lo), 1.0) - g) <= 1e-3


def test_records_and_writer(np3_runs):
    _, runs = np3_runs
    r = runs[0]
    assert len(r.records) == CFG.cycles
    assert [c.cycle for c in r.records] == list(range(CFG.cycles))
    fh = io.StringIO()
    adaptive.write_records(r.records, fh)
    lines = fh.getvalue().splitlines()
    assert lines[0] == ",".join(adaptive.RECORD_HEADER) and len(lines) == CFG.cycles + 1
    assert adaptive.convergence_trace(r.records)[0] == (0, r.records[0].kc_x)


def test_seeded_run_is_reproducible():
    scn = lm.reference_scenario(2)
    cfg = replace(CFG, cycles=20, estimator=EstimatorConfig(500))
    a = adaptive.run_adaptive(scn, cfg)
    b = adaptive.run_adaptive(scn, cfg)
    assert a.records == b.records and a.tau_learned == b.tau_learned


def test_infeasible_scenario():
    from sensopt.detector import DetectorConfig
    with pytest.raises(InfeasibleError):
        adaptive.run_adaptive(lm.Scenario(detector=DetectorConfig(gamma=1e-4)), CFG)


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(cycles=0)
    with pytest.raises(ValueError):
        AdaptiveConfig(warmup_probes=1)
    with pytest.raises(ValueError):
        adaptive.convergence_trace([])


def test_progress_over_warmup(np3_runs):
    _, runs = np3_runs
    for r in runs:
        tail = r.records[-len(r.records) // 4:]
        best_tail = max(1.0 / c.phi_measured for c in tail)
        assert best_tail >= max(r.warmup_rates)


def test_applied_tau_feasible(np3_runs):
    scn, runs = np3_runs
    for r in runs:
        assert all(scn.tau_min < c.tau_applied < scn.slot_t for c in r.records)


def test_one_cycle_run():
    r = adaptive.run_adaptive(lm.reference_scenario(3), replace(CFG, cycles=1, estimator=EstimatorConfig(100)))
    assert len(r.records) == 1
