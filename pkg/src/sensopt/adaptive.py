"""Closed learning loop: KC sets the sensing time, the estimator measures the
resulting throughput, and the MFF network is retrained on what was seen.

Nothing in the loop reads the scenario's probabilities; it only observes
windowed rate estimates from the simulator.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import kc as kcmod
from .kc import KcConfig
from .link_model import Scenario
from .mff import TARGET_CEIL, MffNetwork, TrainingBuffer, cost_from_rate, train_step
from .optimizer import InfeasibleError
from .simenv import EstimatorConfig, estimate_throughput

EDGE = 1e-6


@dataclass(frozen=True)
class MffConfig:
    k: int = 9
    learning_rate: float = 0.2
    epochs: int = 20
    warmup_epochs: int = 3000
    buffer_size: int = 64
    init_scale: float = 0.5


@dataclass(frozen=True)
class AdaptiveConfig:
    cycles: int = 200
    warmup_probes: int = 8
    jitter: float = 0.01
    jitter_halving: int = 50
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    mff: MffConfig = field(default_factory=MffConfig)
    kc: KcConfig = field(default_factory=KcConfig)
    seed: int = 0

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.warmup_probes < 2:
            raise ValueError("warmup_probes must be >= 2")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    tau_applied: float
    phi_measured: float
    mse_after_training: float
    kc_x: float


@dataclass
class AdaptiveResult:
    records: List[CycleRecord]
    tau_learned: float
    rate_learned: float
    warmup_taus: np.ndarray
    warmup_rates: np.ndarray
    network: MffNetwork

    @property
    def warmup_step(self) -> float:
        return float(self.warmup_taus[1] - self.warmup_taus[0])


class _Learner:
    """Network, buffer and running target scale, kept consistent."""

    def __init__(self, net: MffNetwork, capacity: int):
        self.net = net
        self.buffer = TrainingBuffer(capacity)
        self.phi_ref = 0.0

    def add(self, x: float, phi: float) -> None:
        if phi > self.phi_ref:
            if self.phi_ref > 0:
                self.buffer.rescale_targets(self.phi_ref / phi)
            self.phi_ref = phi
            self.net.target_scale = TARGET_CEIL / phi
        self.buffer.push(x, phi * self.net.target_scale)


def run_adaptive(scn: Scenario, cfg: AdaptiveConfig) -> AdaptiveResult:
    T = scn.slot_t
    lo, hi = scn.tau_min / T, 1.0
    if lo >= hi:
        raise InfeasibleError("tau_min is not below the slot length")
    env_ss, net_ss, jit_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    env_rng = np.random.default_rng(env_ss)
    net_rng = np.random.default_rng(net_ss)
    jit_rng = np.random.default_rng(jit_ss)
    m = cfg.mff

    def measure(x):
        return estimate_throughput(scn, x * T, cfg.estimator, env_rng)

    learner = _Learner(MffNetwork.init(m.k, net_rng, m.init_scale, in_scale=T), m.buffer_size)

    xs = lo + (hi - lo) * np.arange(1, cfg.warmup_probes + 1) / (cfg.warmup_probes + 1)
    rates = np.array([measure(x) for x in xs])
    for x, r in zip(xs, rates):
        learner.add(x, cost_from_rate(r))
    train_step(learner.net, learner.buffer, m.learning_rate, m.warmup_epochs, net_rng)

    x_kc = float(xs[int(np.argmax(rates))])
    records = []
    for c in range(cfg.cycles):
        state = kcmod.run_to_convergence(x_kc, learner.net, (lo, hi), cfg.kc)
        x_kc = min(max(state.x, lo + EDGE), hi - EDGE)
        amp = cfg.jitter * 0.5 ** (c // cfg.jitter_halving) if cfg.jitter_halving > 0 else cfg.jitter
        x = x_kc + (jit_rng.uniform(-amp, amp) if amp > 0 else 0.0)
        x = min(max(x, lo + EDGE), hi - EDGE)
        phi = cost_from_rate(measure(x))
        learner.add(x, phi)
        d = train_step(learner.net, learner.buffer, m.learning_rate, m.epochs, net_rng)
        records.append(CycleRecord(c, x * T, phi, d, x_kc))

    final = kcmod.run_to_convergence(x_kc, learner.net, (lo, hi), cfg.kc)
    x_final = min(max(final.x, lo + EDGE), hi - EDGE)
    return AdaptiveResult(records, x_final * T, measure(x_final), xs * T, rates, learner.net)


def convergence_trace(records: List[CycleRecord]):
    if not records:
        raise ValueError("no cycle records")
    return [(r.cycle, r.kc_x) for r in records]


def last_quartile_std(records: List[CycleRecord]) -> float:
    xs = np.array([r.kc_x for r in records])
    tail = xs[len(xs) - max(len(xs) // 4, 1):]
    return float(np.std(tail))


RECORD_HEADER = ("cycle", "tau_applied", "phi_measured", "mse_after_training", "kc_x")


def write_records(records: List[CycleRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        w.writerow((r.cycle, repr(r.tau_applied), repr(r.phi_measured), repr(r.mse_after_training), repr(r.kc_x)))
