"""Energy-detector statistics under the Gaussian (large-N) approximation.

Thresholds are expressed per sample in noise-power units: the detector
declares "busy" when the mean sample energy ``X / N`` reaches ``lambda``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

BUSY = True
IDLE = False


def gaussian_tail(x):
    """Standard normal complementary CDF, Q(x)."""
    out = special.ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_tail_inverse(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValueError("gaussian_tail_inverse needs 0 < p < 1")
    out = -special.ndtri(p)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DetectorConfig:
    fs: float = 6e6
    pd_min: float = 0.9
    pfa_max: float = 0.1
    gamma: float = 0.01
    sigma_z2: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.pd_min < 1.0 and 0.0 < self.pfa_max < 1.0):
            raise ValueError("pd_min and pfa_max must lie in (0, 1)")
        if self.pd_min <= self.pfa_max:
            raise ValueError("pd_min must exceed pfa_max")
        if self.fs <= 0 or self.gamma <= 0 or self.sigma_z2 <= 0:
            raise ValueError("fs, gamma and sigma_z2 must be positive")

    @property
    def beta(self) -> float:
        return gaussian_tail_inverse(self.pd_min) * math.sqrt(1.0 + 2.0 * self.gamma)


@dataclass(frozen=True)
class OperatingPoint:
    tau: float
    lam: float
    pfa: float
    pd: float


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"sensing time must be positive, got {tau!r}")


def pfa(cfg: DetectorConfig, tau: float, lam: float) -> float:
    _check_tau(tau)
    if not lam > 0:
        raise ValueError("threshold must be positive")
    return gaussian_tail((lam / cfg.sigma_z2 - 1.0) * math.sqrt(tau * cfg.fs))


def pd(cfg: DetectorConfig, tau: float, lam: float) -> float:
    _check_tau(tau)
    if not lam > 0:
        raise ValueError("threshold must be positive")
    g = cfg.gamma
    return gaussian_tail((lam / cfg.sigma_z2 - 1.0 - g) * math.sqrt(tau * cfg.fs / (1.0 + 2.0 * g)))


def lambda_for_pd_min(cfg: DetectorConfig, tau: float) -> float:
    """Threshold that pins the detection probability at ``pd_min``."""
    _check_tau(tau)
    g = cfg.gamma
    q_inv = gaussian_tail_inverse(cfg.pd_min)
    return cfg.sigma_z2 * (1.0 + g + q_inv * math.sqrt((1.0 + 2.0 * g) / (tau * cfg.fs)))


def pfa_constrained(cfg: DetectorConfig, tau: float) -> float:
    _check_tau(tau)
    return gaussian_tail(cfg.beta + cfg.gamma * math.sqrt(tau * cfg.fs))


def tau_min(cfg: DetectorConfig) -> float:
    """Shortest sensing time meeting both pd_min and pfa_max."""
    root = (gaussian_tail_inverse(cfg.pfa_max) - cfg.beta) / cfg.gamma
    return root * root / cfg.fs


def operating_point(cfg: DetectorConfig, tau: float) -> OperatingPoint:
    lam = lambda_for_pd_min(cfg, tau)
    return OperatingPoint(tau=tau, lam=lam, pfa=pfa(cfg, tau, lam), pd=pd(cfg, tau, lam))


def n_samples(cfg: DetectorConfig, tau: float) -> int:
    return int(round(tau * cfg.fs))


def ed_decide(cfg: DetectorConfig, tau: float, lam: float, truth: bool, rng: np.random.Generator) -> bool:
    """Run one energy-detection test on freshly drawn complex samples.

    Noise is circularly symmetric with variance ``sigma_z2``; a busy channel
    adds an independent Gaussian signal of power ``gamma * sigma_z2``.
    Returns True for a busy declaration.
    """
    n = n_samples(cfg, tau)
    if n < 1:
        raise ValueError("sensing window holds no samples")
    power = cfg.sigma_z2 * (1.0 + cfg.gamma if truth else 1.0)
    s = math.sqrt(power / 2.0)
    y_re = rng.normal(0.0, s, n)
    y_im = rng.normal(0.0, s, n)
    x = float(np.dot(y_re, y_re) + np.dot(y_im, y_im))
    return x >= n * lam


def ed_statistic(cfg: DetectorConfig, tau: float, truth, rng: np.random.Generator, size=None):
    """Draw the energy statistic X directly.

    For complex Gaussian samples each |y(n)|^2 is exponential, so X is
    Gamma(N, power) exactly; this is the same law ``ed_decide`` samples
    from, without materialising N samples per trial.
    ``truth`` may be a boolean array, in which case ``size`` is ignored.
    """
    n = n_samples(cfg, tau)
    if n < 1:
        raise ValueError("sensing window holds no samples")
    truth = np.asarray(truth, dtype=bool)
    power = cfg.sigma_z2 * np.where(truth, 1.0 + cfg.gamma, 1.0)
    if truth.ndim == 0 and size is not None:
        power = np.full(size, float(power))
    return rng.gamma(n, power)


def ed_decide_batch(cfg: DetectorConfig, tau: float, lam: float, truth, rng: np.random.Generator, size=None):
    n = n_samples(cfg, tau)
    return ed_statistic(cfg, tau, truth, rng, size) >= n * lam
