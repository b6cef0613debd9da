"""Self-checks: Monte Carlo against the closed forms, and analytic
derivatives against finite differences. Used by ``sensopt validate``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from . import detector as det
from . import kc, mff
from .link_model import Scenario, faded_throughput, mean_capacities, throughput
from .optimizer import feasible_interval, grid_best, optimize_tau
from .simenv import simulate


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: deviation={self.measured:.3e} tol={self.tolerance:.3e}"


def _binomial_check(name, hits, trials, p):
    sd = math.sqrt(p * (1 - p) / trials)
    dev = abs(hits / trials - p)
    return Check(name, dev, 3 * sd, dev <= 3 * sd)


def detector_checks(cfg: det.DetectorConfig, tau: float, trials: int, rng) -> List[Check]:
    lam = det.lambda_for_pd_min(cfg, tau)
    fa = det.ed_decide_batch(cfg, tau, lam, False, rng, size=trials).sum()
    dd = det.ed_decide_batch(cfg, tau, lam, True, rng, size=trials).sum()
    out = [
        _binomial_check("detector P_fa sample-level vs closed form", fa, trials, det.pfa(cfg, tau, lam)),
        _binomial_check("detector P_d sample-level vs closed form", dd, trials, det.pd(cfg, tau, lam)),
    ]
    dev = abs(det.pfa_constrained(cfg, det.tau_min(cfg)) - cfg.pfa_max)
    out.append(Check("detector P_fa at tau_min equals pfa_max", dev, 1e-9, dev <= 1e-9))
    return out


def link_checks(scn: Scenario, taus, slots: int, rng, mc_samples: int = 1_000_000) -> List[Check]:
    out = []
    caps = mean_capacities(scn, mc_samples, rng) if scn.fading.mode != "none" else None
    for tau in taus:
        b = simulate(scn, tau, slots, rng)
        p = throughput(scn, tau, caps=caps)
        se_rate = b.rate.std(ddof=1) / math.sqrt(slots)
        se_n = b.channels_sensed.std(ddof=1) / math.sqrt(slots)
        dr = abs(b.rate.mean() - p.rate)
        dn = abs(b.channels_sensed.mean() - p.nce)
        out.append(Check(f"throughput MC vs analytic at tau={tau * 1e3:.3f} ms", dr, 3 * se_rate, dr <= 3 * se_rate))
        # se_n is 0 when alpha = 0; the analytic value is then exactly 1
        tol_n = max(3 * se_n, 1e-12)
        out.append(Check(f"sensed channels MC vs analytic at tau={tau * 1e3:.3f} ms", dn, tol_n, dn <= tol_n))
    return out


def optimizer_checks(scn: Scenario) -> List[Check]:
    res = optimize_tau(scn)
    _, g = grid_best(scn, 10_000)
    short = max(g - res.rate_max, 0.0)
    return [Check("optimizer not worse than 10^4-point grid", short, 1e-9, short <= 1e-9)]


def _derivative(f, h=1e-3):
    """Central difference at 0 with one Richardson step (error O(h^4))."""
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(h / 2) - f(-h / 2)) / h
    return (4 * d2 - d1) / 3


def backprop_rel_error(net: mff.MffNetwork, x: float, t: float, h: float = 1e-3) -> float:
    """Worst relative error of analytic weight gradients against central differences."""
    analytic = np.concatenate([np.ravel(g) for g in mff.gradients(net, x, t)])
    params = [net.w1, net.b1, net.w2]
    numeric = []

    def loss():
        return 0.5 * (mff.forward(net, x)[0] - t) ** 2

    def nudged(arr, i):
        def f(e):
            old = arr[i]
            arr[i] = old + e
            try:
                return loss()
            finally:
                arr[i] = old
        return f

    for arr in params:
        for i in range(arr.size):
            numeric.append(_derivative(nudged(arr, i), h))
    b2 = net.b2

    def f_b2(e):
        net.b2 = b2 + e
        try:
            return loss()
        finally:
            net.b2 = b2
    numeric.append(_derivative(f_b2, h))
    numeric = np.array(numeric)
    scale = np.maximum(np.abs(numeric), np.abs(analytic))
    # entries that are zero to within roundoff carry no relative information
    mask = scale > 1e-7
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(analytic - numeric)[mask] / scale[mask]))


def sensitivity_rel_error(net: mff.MffNetwork, x: float, h: float = 1e-3) -> float:
    num = _derivative(lambda e: mff.forward(net, x + e)[0], h)
    ana = mff.sensitivity(net, x)
    scale = max(abs(num), abs(ana))
    return 0.0 if scale < 1e-7 else abs(num - ana) / scale


def mff_checks(rng, cases: int = 100) -> List[Check]:
    worst_s = worst_g = 0.0
    for _ in range(cases):
        net = mff.MffNetwork.init(9, rng, init_scale=2.0)
        x = rng.uniform(-1.0, 2.0)
        worst_s = max(worst_s, sensitivity_rel_error(net, x))
        worst_g = max(worst_g, backprop_rel_error(net, x, rng.uniform(-0.9, 0.9)))
    return [
        Check("MFF input sensitivity vs finite differences", worst_s, 1e-5, worst_s < 1e-5),
        Check("MFF backprop gradients vs finite differences", worst_g, 1e-4, worst_g < 1e-4),
    ]


class Quadratic:
    def __init__(self, centre, curvature=1.0):
        self.centre = centre
        self.curvature = curvature

    def eval(self, x):
        return self.curvature * (x - self.centre) ** 2

    def grad(self, x):
        return 2.0 * self.curvature * (x - self.centre)


def kc_checks(cfg: kc.KcConfig) -> List[Check]:
    s = kc.run_to_convergence(0.9, Quadratic(0.3), (0.0, 1.0), cfg)
    d1 = abs(s.x - 0.3)
    c = replace_g(cfg, 0.0)
    s2 = kc.run_to_convergence(0.5, Quadratic(1.5), (0.0, 1.0), c)
    # stationarity: 2(1.5 - x) + k(1 - x) = 0
    k = c.penalty_slope
    d2 = abs(s2.x - (3.0 + k) / (2.0 + k))
    return [
        Check("KC quadratic bowl minimiser", d1, 1e-3, d1 < 1e-3 and s.converged),
        Check("KC penalty-layer equilibrium", d2, 1e-3, d2 < 1e-3 and s2.converged),
    ]


def replace_g(cfg: kc.KcConfig, g: float) -> kc.KcConfig:
    from dataclasses import replace
    return replace(cfg, g=g)


def run_all(scn: Scenario, kc_cfg: kc.KcConfig, seed: int = 0, slots: int = 200_000) -> List[Check]:
    rng = np.random.default_rng(seed)
    lo, hi = feasible_interval(scn)
    taus = [lo + 0.1 * (hi - lo), lo + 0.5 * (hi - lo)]
    checks = []
    checks += detector_checks(scn.detector, 0.01, 100_000, rng)
    checks += link_checks(scn, taus, slots, rng)
    checks += optimizer_checks(scn)
    checks += mff_checks(rng)
    checks += kc_checks(kc_cfg)
    return checks
