"""Slot-level Monte Carlo simulation of the secondary link.

Channel states are redrawn independently every slot. Slots are simulated
in vectorised batches; ``run_slot`` is the single-slot view of the same
procedure.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import detector as det
from .link_model import Scenario, capacities, max_handover

CHUNK = 200_000


@dataclass(frozen=True)
class EstimatorConfig:
    t_ep_slots: int = 100
    decision_mode: str = "closed_form"

    def __post_init__(self):
        if self.t_ep_slots < 1:
            raise ValueError("t_ep_slots must be >= 1")
        if self.decision_mode not in ("closed_form", "sample_level"):
            raise ValueError(f"unknown decision_mode {self.decision_mode!r}")


@dataclass(frozen=True)
class SlotTrace:
    handovers: int
    transmitted: bool
    channel_used: Optional[int]
    true_state_of_used: Optional[str]
    rate_achieved: float
    channels_sensed: int


@dataclass
class SlotBatch:
    """Column arrays for a run of consecutive slots.

    ``channel`` is 1-based and 0 when nothing was transmitted;
    ``used_busy`` is only meaningful where ``transmitted`` is set.
    """
    handovers: np.ndarray
    transmitted: np.ndarray
    channel: np.ndarray
    used_busy: np.ndarray
    rate: np.ndarray

    @property
    def channels_sensed(self):
        return self.handovers + 1

    def __len__(self):
        return len(self.rate)

    def trace(self, i: int) -> SlotTrace:
        tx = bool(self.transmitted[i])
        return SlotTrace(
            handovers=int(self.handovers[i]),
            transmitted=tx,
            channel_used=int(self.channel[i]) if tx else None,
            true_state_of_used=("busy" if self.used_busy[i] else "free") if tx else None,
            rate_achieved=float(self.rate[i]),
            channels_sensed=int(self.handovers[i]) + 1,
        )


def _declared_busy(scn, tau, busy, u, mode, rng):
    cfg = scn.detector
    if mode == "closed_form":
        p_fa = det.pfa_constrained(cfg, tau)
        return u < np.where(busy, cfg.pd_min, p_fa)
    lam = det.lambda_for_pd_min(cfg, tau)
    return det.ed_decide_batch(cfg, tau, lam, busy, rng)


def _simulate_chunk(scn, tau, n, rng, mode):
    alpha = max_handover(scn, tau)
    width = alpha + 1
    p_busy = 1.0 - np.asarray(scn.p_free[:width])
    busy = rng.random((n, width)) < p_busy
    u = rng.random((n, width))
    says_busy = _declared_busy(scn, tau, busy, u, mode, rng)

    free_decl = ~says_busy
    transmitted = free_decl.any(axis=1)
    m = np.where(transmitted, free_decl.argmax(axis=1), alpha)
    rows = np.arange(n)
    used_busy = busy[rows, np.minimum(m, alpha)] & transmitted

    if scn.fading.mode == "rayleigh":
        f = scn.fading
        gs = rng.exponential(f.mean_gamma_s, n)
        gp = rng.exponential(f.mean_gamma_p, n) if f.mean_gamma_p > 0 else np.zeros(n)
        c0, c1 = np.log2(1.0 + gs), np.log2(1.0 + gs / (1.0 + gp))
    else:
        c0, c1 = capacities(scn)
    cap = np.where(used_busy, c1, c0)
    time_left = 1.0 - (tau + m * (tau + scn.tau_ho)) / scn.slot_t
    rate = np.where(transmitted, cap * time_left, 0.0)
    channel = np.where(transmitted, m + 1, 0)
    return SlotBatch(m, transmitted, channel, used_busy, rate)


def simulate(scn: Scenario, tau: float, slots: int, rng: np.random.Generator,
             decision_mode: str = "closed_form") -> SlotBatch:
    """Simulate ``slots`` consecutive slots at sensing time ``tau``."""
    if slots < 1:
        raise ValueError("slots must be >= 1")
    EstimatorConfig(decision_mode=decision_mode)
    parts = []
    done = 0
    while done < slots:
        n = min(CHUNK, slots - done)
        parts.append(_simulate_chunk(scn, tau, n, rng, decision_mode))
        done += n
    if len(parts) == 1:
        return parts[0]
    return SlotBatch(*(np.concatenate([getattr(p, f) for p in parts])
                       for f in ("handovers", "transmitted", "channel", "used_busy", "rate")))


def run_slot(scn: Scenario, tau: float, rng: np.random.Generator,
             decision_mode: str = "closed_form") -> SlotTrace:
    return simulate(scn, tau, 1, rng, decision_mode).trace(0)


def estimate_throughput(scn: Scenario, tau: float, est: EstimatorConfig, rng: np.random.Generator) -> float:
    """Windowed mean of the achieved normalised rate (the throughput estimator)."""
    return float(simulate(scn, tau, est.t_ep_slots, rng, est.decision_mode).rate.mean())


def empirical_sensed_channels(scn: Scenario, tau: float, slots: int, rng: np.random.Generator,
                              decision_mode: str = "closed_form") -> float:
    return float(simulate(scn, tau, slots, rng, decision_mode).channels_sensed.mean())


def summarize(batch: SlotBatch) -> dict:
    n = len(batch)
    return {
        "slots": n,
        "mean_rate": float(batch.rate.mean()),
        "rate_stderr": float(batch.rate.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"),
        "mean_sensed": float(batch.channels_sensed.mean()),
        "tx_fraction": float(batch.transmitted.mean()),
        "collision_fraction": float((batch.transmitted & batch.used_busy).mean()),
    }


TRACE_HEADER = ("slot", "m", "transmitted", "channel", "true_state", "rate")


def write_trace(batch: SlotBatch, fh) -> None:
    """Write one CSV row per slot; channel/true_state are empty when idle."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for i in range(len(batch)):
        tx = bool(batch.transmitted[i])
        w.writerow((
            i,
            int(batch.handovers[i]),
            int(tx),
            int(batch.channel[i]) if tx else "",
            ("busy" if batch.used_busy[i] else "free") if tx else "",
            repr(float(batch.rate[i])),
        ))
