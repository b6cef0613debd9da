"""Sensing-time maximisation of the analytic throughput.

R(tau) is continuous but only piecewise smooth: the handover cap
floor((T - tau) / (tau + tau_ho)) drops by one at each breakpoint
tau_a = (T - a*tau_ho) / (a + 1), where the vanishing summand has zero
time left. Each smooth piece is searched separately.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .link_model import Scenario, max_handover, np_saturation_threshold, rate_terms, _sensed, busy_probs

EDGE = 1e-9
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleError(ValueError):
    """No sensing time satisfies tau_min < tau < T."""


@dataclass(frozen=True)
class OptimizationResult:
    tau_opt: float
    rate_max: float
    alpha_at_opt: int
    nce_at_opt: float
    segments_evaluated: int


@dataclass(frozen=True)
class MaxThroughput:
    L: float
    tau_opt: float
    alpha_opt: int
    nce: float
    np_star: int


@dataclass(frozen=True)
class TradeoffResult:
    tf: float
    alpha_bar: int
    tau_opt_tf: float
    rate_tf: float
    nce_tf: float
    L: float


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-7):
    """Maximise a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def feasible_interval(scn: Scenario):
    lo, hi = scn.tau_min, scn.slot_t
    if lo >= hi:
        raise InfeasibleError(f"tau_min={lo:.6g}s is not below the slot length {hi:.6g}s")
    return lo + EDGE, hi - EDGE


def rate_at(scn: Scenario, tau: float, cap: Optional[int] = None, caps=None) -> float:
    """Throughput with the handover cap clipped to what the slot allows."""
    alpha = max_handover(scn, tau)
    if cap is not None:
        alpha = min(alpha, cap)
    return float(np.sum(rate_terms(scn, tau, alpha, caps)))


def breakpoints(scn: Scenario, lo: float, hi: float):
    """Sensing times in (lo, hi) where the slot-limited handover count changes."""
    out = []
    a = 1
    while True:
        t = (scn.slot_t - a * scn.tau_ho) / (a + 1)
        if t <= lo:
            break
        if t < hi:
            out.append(t)
        a += 1
    return sorted(out)


def optimize_tau(scn: Scenario, cap_override: Optional[int] = None, caps=None,
                 scan_points: int = 16, tol: float = 1e-7) -> OptimizationResult:
    """Global maximiser of the throughput over (tau_min, T)."""
    lo, hi = feasible_interval(scn)
    edges = [lo] + breakpoints(scn, lo, hi) + [hi]

    def f(t):
        return rate_at(scn, t, cap_override, caps)

    best_t, best_r = lo, f(lo)
    for a, b in zip(edges[:-1], edges[1:]):
        xs = np.linspace(a, b, scan_points)
        ys = [f(x) for x in xs]
        i = int(np.argmax(ys))
        if ys[i] > best_r:
            best_t, best_r = float(xs[i]), ys[i]
        t, r = golden_section_max(f, xs[max(i - 1, 0)], xs[min(i + 1, scan_points - 1)], tol)
        if r > best_r:
            best_t, best_r = t, r

    alpha = max_handover(scn, best_t)
    if cap_override is not None:
        alpha = min(alpha, cap_override)
    nce = _sensed(busy_probs(scn, best_t, max(alpha, 1)), alpha)
    return OptimizationResult(best_t, best_r, alpha, nce, len(edges) - 1)


def grid_best(scn: Scenario, points: int = 10_000, cap_override: Optional[int] = None, caps=None):
    """Best (tau, rate) on a uniform grid over the feasible interval."""
    lo, hi = feasible_interval(scn)
    taus = np.linspace(lo, hi, points)
    rates = np.array([rate_at(scn, t, cap_override, caps) for t in taus])
    i = int(np.argmax(rates))
    return float(taus[i]), float(rates[i])


def saturated_scenario(scn: Scenario, extension: str = "cyclic") -> Scenario:
    n_star = np_saturation_threshold(scn)
    return scn if scn.n_p >= n_star else scn.with_channels(n_star, extension)


def max_throughput_L(scn: Scenario, caps=None, extension: str = "cyclic") -> MaxThroughput:
    """Maximum achievable throughput once the channel count no longer binds."""
    sat = saturated_scenario(scn, extension)
    res = optimize_tau(sat, caps=caps)
    return MaxThroughput(res.rate_max, res.tau_opt, res.alpha_at_opt, res.nce_at_opt,
                         np_saturation_threshold(scn))


def _alpha_bar(scn, tf, caps, extension):
    if not 0.0 <= tf <= 1.0:
        raise ValueError(f"tradeoff factor {tf!r} outside [0, 1]")
    best = max_throughput_L(scn, caps, extension)
    sat = saturated_scenario(scn, extension)
    if tf >= 1.0:
        return best, best.alpha_opt, optimize_tau(sat, caps=caps)
    for a in range(best.alpha_opt + 1):
        res = optimize_tau(sat, cap_override=a, caps=caps)
        if res.rate_max >= tf * best.L:
            return best, a, res
    return best, best.alpha_opt, optimize_tau(sat, caps=caps)


def tf_to_alpha_bar(scn: Scenario, tf: float, caps=None, extension: str = "cyclic") -> int:
    """Smallest handover cap whose re-optimised rate reaches ``tf * L``."""
    return _alpha_bar(scn, tf, caps, extension)[1]


def optimize_tau_tf(scn: Scenario, tf: float, caps=None, extension: str = "cyclic") -> TradeoffResult:
    best, a, res = _alpha_bar(scn, tf, caps, extension)
    return TradeoffResult(tf, a, res.tau_opt, res.rate_max, res.nce_at_opt, best.L)
