"""1-K-1 feed-forward network that learns the cost surface phi(x) = 1/R(x).

Hidden units are logistic, the output unit is tanh. The network works in
scaled units: inputs are tau / in_scale and targets are phi * target_scale,
which keeps targets inside the tanh range without moving the minimiser.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

PHI_CLAMP_RATE = 1e-6
TARGET_CEIL = 0.9


def cost_from_rate(rate: float) -> float:
    return 1.0 / max(rate, PHI_CLAMP_RATE)


def _logistic(u):
    return 1.0 / (1.0 + np.exp(-u))


@dataclass
class MffNetwork:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float = 0.0
    in_scale: float = 1.0
    target_scale: float = 1.0

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float).copy()
        self.b1 = np.asarray(self.b1, dtype=float).copy()
        self.w2 = np.asarray(self.w2, dtype=float).copy()
        self.b2 = float(self.b2)
        if not (self.w1.shape == self.b1.shape == self.w2.shape and self.w1.ndim == 1):
            raise ValueError("w1, b1 and w2 must be 1-D arrays of equal length")
        if self.target_scale <= 0:
            raise ValueError("target_scale must be positive")

    @property
    def k(self) -> int:
        return self.w1.size

    @property
    def n_params(self) -> int:
        return 3 * self.k + 1

    @classmethod
    def init(cls, k: int, rng: np.random.Generator, init_scale: float = 0.5, in_scale: float = 1.0):
        """Uniform weights in [-init_scale, init_scale]."""
        w = rng.uniform(-init_scale, init_scale, size=3 * k + 1)
        return cls(w[:k], w[k:2 * k], w[2 * k:3 * k], w[-1], in_scale=in_scale)

    def copy(self) -> "MffNetwork":
        return MffNetwork(self.w1, self.b1, self.w2, self.b2, self.in_scale, self.target_scale)

    # CostSurface interface (scaled units), consumed by the KC flow
    def eval(self, x: float) -> float:
        return forward(self, x)[0]

    def grad(self, x: float) -> float:
        return sensitivity(self, x)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2,
            "in_scale": self.in_scale,
            "target_scale": self.target_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MffNetwork":
        return cls(d["w1"], d["b1"], d["w2"], d["b2"], d["in_scale"], d["target_scale"])

    def to_text(self) -> str:
        """One-line JSON snapshot (floats round-trip exactly)."""
        return json.dumps(self.to_dict())

    @classmethod
    def from_text(cls, s: str) -> "MffNetwork":
        return cls.from_dict(json.loads(s))


def forward(net: MffNetwork, x: float):
    """Returns (output, hidden activations)."""
    hidden = _logistic(net.w1 * x + net.b1)
    return math.tanh(float(net.w2 @ hidden) + net.b2), hidden


def forward_batch(net: MffNetwork, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    hidden = _logistic(np.multiply.outer(xs, net.w1) + net.b1)
    return np.tanh(hidden @ net.w2 + net.b2)


def sensitivity(net: MffNetwork, x: float) -> float:
    """d(output)/d(input) by backward chaining through both layers."""
    out, h = forward(net, x)
    return (1.0 - out * out) * float(np.sum(net.w2 * h * (1.0 - h) * net.w1))


def gradients(net: MffNetwork, x: float, target: float):
    """Gradients of 0.5 * (output - target)^2 w.r.t. (w1, b1, w2, b2)."""
    out, h = forward(net, x)
    delta = (out - target) * (1.0 - out * out)
    dh = delta * net.w2 * h * (1.0 - h)
    return dh * x, dh, delta * h, delta


def scale_in(net: MffNetwork, tau):
    return np.asarray(tau) / net.in_scale if np.ndim(tau) else tau / net.in_scale


def scale_out(net: MffNetwork, phi):
    return phi * net.target_scale


def scale_out_inverse(net: MffNetwork, y):
    return y / net.target_scale


@dataclass
class TrainingBuffer:
    """Most recent (input, scaled target) pairs, up to ``capacity``."""
    capacity: int = 64
    pairs: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.pairs = deque(self.pairs, maxlen=self.capacity)

    def push(self, x: float, target: float) -> None:
        self.pairs.append((float(x), float(target)))

    def rescale_targets(self, factor: float) -> None:
        self.pairs = deque(((x, t * factor) for x, t in self.pairs), maxlen=self.capacity)

    def arrays(self):
        if not self.pairs:
            return np.empty(0), np.empty(0)
        xs, ts = zip(*self.pairs)
        return np.array(xs), np.array(ts)

    def __len__(self):
        return len(self.pairs)


def mse(net: MffNetwork, buffer: TrainingBuffer) -> float:
    """d = 0.5 * sum of squared output errors over the buffer."""
    xs, ts = buffer.arrays()
    return 0.5 * float(np.sum((forward_batch(net, xs) - ts) ** 2))


def train_step(net: MffNetwork, buffer: TrainingBuffer, learning_rate: float, epochs: int,
               rng: np.random.Generator) -> float:
    """Per-pattern backpropagation (SGD), reshuffled each epoch. Mutates ``net``."""
    if len(buffer) == 0:
        raise ValueError("cannot train on an empty buffer")
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    xs, ts = buffer.arrays()
    w1, b1, w2 = net.w1, net.b1, net.w2
    b2 = net.b2
    lr = learning_rate
    for _ in range(epochs):
        for i in rng.permutation(len(xs)):
            x = xs[i]
            h = 1.0 / (1.0 + np.exp(-(w1 * x + b1)))
            out = math.tanh(float(w2 @ h) + b2)
            delta = (out - ts[i]) * (1.0 - out * out)
            dh = (delta * lr) * w2 * h * (1.0 - h)
            w2 -= (delta * lr) * h
            b2 -= delta * lr
            w1 -= dh * x
            b1 -= dh
    net.b2 = b2
    return mse(net, buffer)
