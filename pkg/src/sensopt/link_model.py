"""Analytic model of the secondary link under sequential handover.

The SU senses channels 1, 2, ... in order every slot. A busy declaration
costs a handover of ``tau_ho`` and moves to the next channel, at most
``alpha`` times per slot. All rates are normalised by the slot length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import detector as det
from .detector import DetectorConfig

# Free probabilities P_{k,0} of the 15 reference primary channels.
REFERENCE_P_FREE = (0.71, 0.46, 0.34, 0.72, 0.66, 0.72, 0.76, 0.35, 0.25, 0.70, 0.37, 0.23, 0.72, 0.24, 0.43)


@dataclass(frozen=True)
class Fading:
    mode: str = "none"
    mean_gamma_s: float = 100.0
    mean_gamma_p: float = 99.0

    def __post_init__(self):
        if self.mode not in ("none", "rayleigh"):
            raise ValueError(f"unknown fading mode {self.mode!r}")


@dataclass(frozen=True)
class Scenario:
    n_p: int = 15
    slot_t: float = 0.1
    tau_ho: float = 1e-4
    p_free: Sequence[float] = REFERENCE_P_FREE
    gamma_s: float = 100.0
    gamma_p: float = 99.0
    fading: Fading = field(default_factory=Fading)
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self):
        object.__setattr__(self, "p_free", tuple(float(p) for p in self.p_free))
        if self.n_p < 1:
            raise ValueError("need at least one primary channel")
        if len(self.p_free) != self.n_p:
            raise ValueError(f"p_free has {len(self.p_free)} entries for n_p={self.n_p}")
        if not 0 < self.tau_ho < self.slot_t:
            raise ValueError("handover time must lie in (0, slot_t)")
        if any(not 0.0 <= p <= 1.0 for p in self.p_free):
            raise ValueError("free probabilities must lie in [0, 1]")
        if self.gamma_s <= 0 or self.gamma_p < 0:
            raise ValueError("gamma_s must be positive and gamma_p non-negative")

    @property
    def tau_min(self) -> float:
        return det.tau_min(self.detector)

    def with_channels(self, n: int, extension: str = "cyclic") -> "Scenario":
        """Copy with ``n`` channels; extra channels repeat the list cyclically."""
        if n <= self.n_p:
            p = self.p_free[:n]
        elif extension == "cyclic":
            p = tuple(self.p_free[i % self.n_p] for i in range(n))
        elif extension == "last":
            p = self.p_free + (self.p_free[-1],) * (n - self.n_p)
        else:
            raise ValueError(f"unknown extension rule {extension!r}")
        return replace(self, n_p=n, p_free=p)


def uniform_scenario(np_: int, presence: float, **kw) -> Scenario:
    """Scenario where every PU is present with the same probability."""
    return Scenario(n_p=np_, p_free=(1.0 - presence,) * np_, **kw)


def reference_scenario(np_: int, **kw) -> Scenario:
    return Scenario(n_p=np_, p_free=REFERENCE_P_FREE[:np_], **kw) if np_ <= 15 else \
        Scenario(n_p=15, **kw).with_channels(np_)


@dataclass(frozen=True)
class ThroughputPoint:
    tau: float
    rate: float
    alpha: int
    nce: float


def busy_prob(scn: Scenario, k: int, pfa: float, pd: float) -> float:
    """Probability that channel ``k`` (1-based) is declared busy."""
    if not 1 <= k <= scn.n_p:
        raise IndexError(f"channel {k} outside 1..{scn.n_p}")
    p0 = scn.p_free[k - 1]
    return pfa * p0 + pd * (1.0 - p0)


def max_handover(scn: Scenario, tau: float) -> int:
    if not 0 < tau < scn.slot_t:
        raise ValueError(f"tau={tau!r} outside (0, {scn.slot_t})")
    return min(int(math.floor((scn.slot_t - tau) / (tau + scn.tau_ho))), scn.n_p - 1)


def capacities(scn: Scenario, gamma_s: Optional[float] = None, gamma_p: Optional[float] = None):
    """(C0, C1): SU capacity on an idle channel and under PU interference."""
    gs = scn.gamma_s if gamma_s is None else gamma_s
    gp = scn.gamma_p if gamma_p is None else gamma_p
    if gs <= 0 or gp < 0:
        raise ValueError("gamma_s must be positive and gamma_p non-negative")
    return math.log2(1.0 + gs), math.log2(1.0 + gs / (1.0 + gp))


def _resolve_cap(scn, tau, cap_override):
    alpha = max_handover(scn, tau)
    if cap_override is None:
        return alpha
    if not 0 <= cap_override <= alpha:
        raise ValueError(f"cap_override={cap_override} outside [0, {alpha}]")
    return int(cap_override)


def busy_probs(scn: Scenario, tau: float, count: int) -> np.ndarray:
    """Declared-busy probabilities q_1..q_count at the constrained operating point."""
    p0 = np.asarray(scn.p_free[:count])
    pfa = det.pfa_constrained(scn.detector, tau)
    return pfa * p0 + scn.detector.pd_min * (1.0 - p0)


def rate_terms(scn: Scenario, tau: float, cap: int, caps=None) -> np.ndarray:
    """Per-handover summands of the average throughput, m = 0..cap.

    Term m is P(first m channels declared busy) * expected capacity on
    channel m+1 * fraction of the slot left after m handovers.
    """
    c0, c1 = capacities(scn) if caps is None else caps
    pfa = det.pfa_constrained(scn.detector, tau)
    pd = scn.detector.pd_min
    p0 = np.asarray(scn.p_free[: cap + 1])
    q = pfa * p0 + pd * (1.0 - p0)
    reach = np.concatenate(([1.0], np.cumprod(q[:-1])))
    a = c1 * (1.0 - p0) * (1.0 - pd) + c0 * p0 * (1.0 - pfa)
    m = np.arange(cap + 1)
    time_left = np.maximum(1.0 - (tau + m * (tau + scn.tau_ho)) / scn.slot_t, 0.0)
    return reach * a * time_left


def _sensed(q: np.ndarray, cap: int) -> float:
    if cap == 0:
        return 1.0
    q = q[:cap]
    reach = np.concatenate(([1.0], np.cumprod(q)))
    m = np.arange(cap)
    return 1.0 + float(np.sum(m * (1.0 - q) * reach[:cap]) + cap * reach[cap])


def avg_sensed_channels(scn: Scenario, tau: float, cap_override: Optional[int] = None) -> float:
    """Expected number of channels sensed per slot (handovers + 1)."""
    cap = _resolve_cap(scn, tau, cap_override)
    return _sensed(busy_probs(scn, tau, max(cap, 1)), cap)


def _point(scn, tau, cap, caps):
    rate = float(np.sum(rate_terms(scn, tau, cap, caps)))
    nce = _sensed(busy_probs(scn, tau, max(cap, 1)), cap)
    return ThroughputPoint(tau=tau, rate=rate, alpha=cap, nce=nce)


def throughput(scn: Scenario, tau: float, cap_override: Optional[int] = None, caps=None) -> ThroughputPoint:
    """Average normalised SU throughput at sensing time ``tau``.

    ``caps`` optionally replaces the nominal (C0, C1), e.g. with
    fading-averaged capacities.
    """
    return _point(scn, tau, _resolve_cap(scn, tau, cap_override), caps)


def mean_capacities(scn: Scenario, mc_samples: int, rng: np.random.Generator):
    """Monte Carlo mean of (C0, C1) under the scenario's fading model."""
    f = scn.fading
    if f.mode == "none":
        return capacities(scn)
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if f.mean_gamma_s <= 0 or f.mean_gamma_p < 0:
        raise ValueError("rayleigh fading needs mean_gamma_s > 0 and mean_gamma_p >= 0")
    gs = rng.exponential(f.mean_gamma_s, mc_samples)
    gp = rng.exponential(f.mean_gamma_p, mc_samples) if f.mean_gamma_p > 0 else np.zeros(mc_samples)
    return float(np.mean(np.log2(1.0 + gs))), float(np.mean(np.log2(1.0 + gs / (1.0 + gp))))


def faded_throughput(scn: Scenario, tau: float, cap_override: Optional[int] = None,
                     mc_samples: int = 100_000, rng: Optional[np.random.Generator] = None) -> ThroughputPoint:
    """Throughput averaged over the fading law of (gamma_s, gamma_p).

    The rate is linear in (C0, C1), so averaging the rate over the fading
    draws equals evaluating it at the averaged capacities.
    """
    if scn.fading.mode == "none":
        return throughput(scn, tau, cap_override)
    if rng is None:
        raise ValueError("rayleigh fading needs a random stream")
    return throughput(scn, tau, cap_override, caps=mean_capacities(scn, mc_samples, rng))


def consumed_energy(scn: Scenario, tau: float, p_sense: float, p_ho: float,
                    cap_override: Optional[int] = None) -> float:
    """Mean energy (J) spent finding a transmission opportunity."""
    if p_sense <= 0 or p_ho < 0:
        raise ValueError("p_sense must be positive and p_ho non-negative")
    sensed = avg_sensed_channels(scn, tau, cap_override)
    return sensed * p_sense * tau + (sensed - 1.0) * p_ho * scn.tau_ho


def np_saturation_threshold(scn: Scenario) -> int:
    """Channel count beyond which the slot budget, not N_p, limits handovers."""
    t_min = scn.tau_min
    return max(int(math.floor((scn.slot_t - t_min) / (t_min + scn.tau_ho))) + 1, 1)
