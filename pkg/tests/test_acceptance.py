"""Acceptance suite. Each test prints one PASS/FAIL line per criterion."""
import filecmp
import json
import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from sensopt import detector as det
from sensopt import kc, link_model as lm, mff
from sensopt.adaptive import AdaptiveConfig, last_quartile_std, run_adaptive
from sensopt.detector import DetectorConfig
from sensopt.link_model import Scenario
from sensopt.optimizer import optimize_tau, optimize_tau_tf
from sensopt.simenv import EstimatorConfig, simulate
from sensopt.validation import Quadratic, backprop_rel_error, sensitivity_rel_error

pytestmark = pytest.mark.acceptance


def binom_ok(hits, n, p):
    sd = math.sqrt(p * (1 - p) / n)
    return abs(hits / n - p) <= 3 * sd, abs(hits / n - p) / sd


def test_1_detector_closed_form_vs_samples(report):
    t0 = time.perf_counter()
    cfg = DetectorConfig(gamma=0.01, fs=6e6)
    tau = 10e-3
    lam = det.lambda_for_pd_min(cfg, tau)
    rng = np.random.default_rng(101)
    n = 100_000
    # 10^5 trials through the exact Gamma law of the energy statistic
    fa = det.ed_decide_batch(cfg, tau, lam, det.IDLE, rng, size=n).sum()
    dd = det.ed_decide_batch(cfg, tau, lam, det.BUSY, rng, size=n).sum()
    ok_fa, z_fa = binom_ok(fa, n, det.pfa(cfg, tau, lam))
    ok_d, z_d = binom_ok(dd, n, det.pd(cfg, tau, lam))
    # literal complex-sample trials (60000 samples each) as a cross-check of that law
    m = 1000
    lit_fa = sum(det.ed_decide(cfg, tau, lam, det.IDLE, rng) for _ in range(m))
    lit_d = sum(det.ed_decide(cfg, tau, lam, det.BUSY, rng) for _ in range(m))
    ok_lfa, z_lfa = binom_ok(lit_fa, m, det.pfa(cfg, tau, lam))
    ok_ld, z_ld = binom_ok(lit_d, m, det.pd(cfg, tau, lam))
    elapsed = time.perf_counter() - t0
    ok = ok_fa and ok_d and ok_lfa and ok_ld and elapsed < 30
    report(1, ok, f"detector: |dev|/sd P_fa={z_fa:.2f} P_d={z_d:.2f} (10^5 trials), "
                  f"literal samples P_fa={z_lfa:.2f} P_d={z_ld:.2f} (10^3 trials), {elapsed:.1f}s")
    assert ok


def test_2_constraint_boundary(report):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        cfg = DetectorConfig(gamma=rng.uniform(1e-3, 0.2), fs=rng.uniform(1e5, 2e7),
                             pd_min=rng.uniform(0.6, 0.99), pfa_max=rng.uniform(0.01, 0.4))
        worst = max(worst, abs(det.pfa_constrained(cfg, det.tau_min(cfg)) - cfg.pfa_max))
    ok = worst <= 1e-9
    report(2, ok, f"P_fa(tau_min) = pfa_max over 20 draws: worst deviation {worst:.2e} (tol 1e-9)")
    assert ok


def test_3_throughput_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    fails, worst = 0, 0.0
    for _ in range(20):
        n_p = int(rng.integers(1, 6))
        scn = Scenario(n_p=n_p, p_free=rng.uniform(0, 1, n_p), gamma_s=rng.uniform(1, 200),
                       gamma_p=rng.uniform(0, 200))
        tau = rng.uniform(scn.tau_min, scn.slot_t * 0.99)
        b = simulate(scn, tau, 200_000, rng)
        pt = lm.throughput(scn, tau)
        se_r = b.rate.std(ddof=1) / math.sqrt(len(b))
        se_n = b.channels_sensed.std(ddof=1) / math.sqrt(len(b))
        z_r = abs(b.rate.mean() - pt.rate) / se_r
        dn = abs(b.channels_sensed.mean() - pt.nce)
        z_n = dn / se_n if se_n > 0 else (0.0 if dn == 0 else math.inf)
        worst = max(worst, z_r, z_n)
        fails += (z_r > 3) + (z_n > 3)
    elapsed = time.perf_counter() - t0
    ok = fails == 0 and elapsed < 120
    report(3, ok, f"simulator vs closed-form rate and sensed channels, 20 scenarios x 2x10^5 slots: "
                  f"worst |dev|/SE {worst:.2f} (tol 3), {fails} misses, {elapsed:.1f}s")
    assert ok


def _interior_max(taus, rates, kinks):
    """Interior maximum, and first differences change sign once away from the kinks."""
    i = int(np.argmax(rates))
    if i == 0 or i == len(rates) - 1:
        return False
    d = np.sign(np.diff(rates))
    keep = np.ones(len(d), dtype=bool)
    for k in kinks:
        keep &= ~((taus[:-1] <= k) & (k <= taus[1:]))
    s = d[keep & (d != 0)]
    return int(np.sum(s[1:] != s[:-1])) == 1 and s[0] > 0 and s[-1] < 0


def test_4_fig4_shape(report):
    T = 0.1
    base = lm.uniform_scenario(15, 0.65)
    taus = np.linspace(0.001 * T, 0.999 * T, 5000)
    curves = {}
    a_ok = True
    for n in (1, 3, 10):
        scn = base.with_channels(n)
        pts = [lm.throughput(scn, t) for t in taus]
        rates = np.array([p.rate for p in pts])
        alphas = np.array([p.alpha for p in pts])
        kinks = [(T - a * scn.tau_ho) / (a + 1) for a in range(1, n)]
        curves[n] = (rates, alphas)
        a_ok &= _interior_max(taus, rates, kinks)

    # alpha(10) = alpha(3) once floor((T - tau) / (tau + tau_ho)) <= 2
    cut = (T - 3 * base.tau_ho) / 4
    above = taus > cut
    gap_above = float(np.max(np.abs(curves[10][0][above] - curves[3][0][above])))
    gap_below = float(np.max(np.abs(curves[10][0][~above] - curves[3][0][~above])))
    b_ok = gap_above <= 1e-12 and gap_below > 0

    best = [optimize_tau(base.with_channels(n)).rate_max for n in range(1, 16)]
    n_star = lm.np_saturation_threshold(base)
    nondecr = all(b >= a - 1e-12 for a, b in zip(best, best[1:]))
    flat = max(best[n_star - 1:]) - min(best[n_star - 1:])
    c_ok = nondecr and flat <= 1e-12 and best[n_star - 1] > best[0]
    ok = a_ok and b_ok and c_ok
    report(4, ok, f"presence 0.65: (a) interior maxima N_p=1,3,10 {a_ok}; (b) N_p=10 vs 3 gap above "
                  f"tau/T={cut / T:.5f}: {gap_above:.1e}; (c) max rate nondecreasing {nondecr}, "
                  f"spread for N_p>={n_star}: {flat:.1e}")
    assert ok


def _tradeoff_pair(scn):
    full = optimize_tau_tf(scn, 1.0)
    tf = optimize_tau_tf(scn, 0.98)
    nce_cut = (full.nce_tf - tf.nce_tf) / full.nce_tf
    rate_loss = (full.rate_tf - tf.rate_tf) / full.rate_tf
    return full, tf, nce_cut, rate_loss


def test_5_energy_tradeoff(report):
    t0 = time.perf_counter()
    scn = lm.reference_scenario(12)
    full, tf, nce_cut, rate_loss = _tradeoff_pair(scn)
    ratio = nce_cut / rate_loss if rate_loss > 0 else math.inf
    # second saturated setting for context: presence 0.65 on every channel
    _, _, nce_u, loss_u = _tradeoff_pair(lm.uniform_scenario(12, 0.65))
    elapsed = time.perf_counter() - t0
    by_construction = tf.rate_tf >= 0.98 * tf.L
    decreases = tf.nce_tf < full.nce_tf
    ok = by_construction and decreases and ratio >= 5 and elapsed < 60
    report(5, ok, f"reference 12-channel list, TF=0.98: rate_tf/L={tf.rate_tf / tf.L:.4f} (>=0.98), NCE "
                  f"{full.nce_tf:.4f}->{tf.nce_tf:.4f} (alpha {full.alpha_bar}->{tf.alpha_bar}), "
                  f"NCE cut {nce_cut:.2%} / rate loss {rate_loss:.2%} = {ratio:.2f} (need >=5); "
                  f"presence-0.65 ratio {nce_u / loss_u:.2f}; {elapsed:.1f}s")
    assert ok


def test_6_mff_derivatives(report):
    rng = np.random.default_rng(606)
    ws = wg = 0.0
    for _ in range(100):
        net = mff.MffNetwork.init(9, rng, 2.0)
        x = rng.uniform(-1, 2)
        ws = max(ws, sensitivity_rel_error(net, x))
        wg = max(wg, backprop_rel_error(net, x, rng.uniform(-0.9, 0.9)))
    ok = ws < 1e-5 and wg < 1e-4
    report(6, ok, f"MFF vs finite differences over 100 pairs: sensitivity {ws:.1e} (<1e-5), "
                  f"backprop {wg:.1e} (<1e-4)")
    assert ok


def test_7_kc(report):
    cfg = kc.KcConfig()
    s = kc.run_to_convergence(0.9, Quadratic(0.3), (0.0, 1.0), cfg)
    d1 = abs(s.x - 0.3)
    cfg0 = kc.KcConfig(g=0.0)
    s2 = kc.run_to_convergence(0.5, Quadratic(1.5), (0.0, 1.0), cfg0)
    # 2 (1.5 - x) + k (1 - x) = 0 on the violated upper bound
    k = cfg0.penalty_slope
    d2 = abs(s2.x - (3.0 + k) / (2.0 + k))
    ok = s.converged and s2.converged and d1 < 1e-3 and d2 < 1e-3
    report(7, ok, f"KC: bowl minimiser error {d1:.1e}, penalty-layer equilibrium error {d2:.1e} (tol 1e-3)")
    assert ok


def test_8_end_to_end_learning(report):
    t0 = time.perf_counter()
    cfg = AdaptiveConfig(cycles=200, estimator=EstimatorConfig(t_ep_slots=10_000))
    worst_ratio, worst_tau, worst_std, misses = math.inf, 0.0, 0.0, []
    for n in (1, 3, 5, 10, 15):
        scn = lm.reference_scenario(n)
        best = optimize_tau(scn)
        for seed in range(5):
            r = run_adaptive(scn, replace(cfg, seed=seed))
            ratio = min(lm.throughput(scn, r.tau_learned).rate, r.rate_learned) / best.rate_max
            tol = max(0.10 * best.tau_opt, r.warmup_step)
            err = abs(r.tau_learned - best.tau_opt)
            sd = last_quartile_std(r.records)
            worst_ratio = min(worst_ratio, ratio)
            worst_tau = max(worst_tau, err / tol)
            worst_std = max(worst_std, sd)
            if ratio < 0.95 or err > tol or sd >= 0.02:
                misses.append((n, seed))
    elapsed = time.perf_counter() - t0
    ok = not misses and elapsed < 600
    report(8, ok, f"learning loop, 25 runs: worst rate ratio {worst_ratio:.4f} (>=0.95), worst "
                  f"|tau err|/tol {worst_tau:.3f} (<=1), worst last-quartile std {worst_std:.4f} "
                  f"(<0.02), misses {misses}, {elapsed:.0f}s")
    assert ok


def _run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "sensopt.cli", *args], cwd=cwd,
                          capture_output=True, text=True, check=False)


def test_9_determinism(report, tmp_path):
    (tmp_path / "np3.json").write_text(json.dumps({"scenario": {"n_p": 3}, "estimator": {"t_ep_slots": 2000}}))
    (tmp_path / "ray.json").write_text(json.dumps({"scenario": {"n_p": 4, "fading": {"mode": "rayleigh"}}}))
    commands = {
        "sweep": ["sweep", "--config", "ray.json", "--points", "200", "--seed", "4", "--out", "{d}/sweep.csv"],
        "sweep_np": ["sweep", "--np-list", "1,3,10", "--points", "200", "--out", "{d}/sweep_np.csv"],
        "optimize": ["optimize", "--config", "ray.json", "--seed", "4"],
        "tradeoff": ["tradeoff", "--tf", "0.98", "--seed", "4"],
        "learn": ["learn", "--config", "np3.json", "--cycles", "40", "--seed", "7", "--out", "{d}/learn.csv"],
        "simulate": ["simulate", "--config", "ray.json", "--slots", "5000", "--seed", "9", "--out", "{d}/sim.csv"],
        "simulate_sl": ["simulate", "--slots", "300", "--seed", "9", "--decision-mode", "sample_level",
                        "--out", "{d}/sim_sl.csv"],
        "validate": ["validate", "--seed", "3", "--slots", "20000"],
    }
    same, differ = 0, []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        for name, args in commands.items():
            res = _run_cli([a.format(d=d) for a in args], tmp_path)
            (d / f"{name}.stdout").write_text(res.stdout)
            (d / f"{name}.code").write_text(str(res.returncode))
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    for f in files:
        if filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False):
            same += 1
        else:
            differ.append(f)
    codes_ok = all((tmp_path / "a" / f"{n}.code").read_text() == "0" for n in commands)
    ok = not differ and codes_ok
    report(9, ok, f"{len(commands)} seeded commands run twice: {same}/{len(files)} output files "
                  f"bit-identical, all exit 0: {codes_ok}")
    assert ok
