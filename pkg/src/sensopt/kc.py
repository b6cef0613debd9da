"""Kennedy-Chua gradient-flow circuit for a scalar box-constrained minimum.

The circuit obeys

    C dx/dt = -dphi/dx - sum_j i_j * df_j/dx - G x,   i_j = g(f_j(x))

with f_1 = hi - x, f_2 = x - lo and the one-sided penalty current g.
The ideal R -> 0 penalty resistor is realised as a finite slope, so at
equilibrium the state sits O(grad / penalty_slope) outside a violated bound.

The two linear currents (penalty and leak) are integrated implicitly and
the cost gradient explicitly. Fixed points are those of the explicit Euler
map; only the stiff penalty no longer limits the step size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Protocol, Tuple


class CostSurface(Protocol):
    def eval(self, x: float) -> float: ...
    def grad(self, x: float) -> float: ...


class KcDivergenceError(ArithmeticError):
    """The cost surface returned a non-finite derivative."""


@dataclass(frozen=True)
class KcConfig:
    c: float = 10e-9
    g: float = 1e-3
    penalty_slope: float = 1e3
    dt: float = 1e-9
    max_steps: int = 50_000
    tol: float = 1e3

    def __post_init__(self):
        if self.c <= 0 or self.g < 0 or self.penalty_slope <= 0 or self.dt <= 0:
            raise ValueError("need c > 0, g >= 0, penalty_slope > 0, dt > 0")
        if self.max_steps < 1 or self.tol <= 0:
            raise ValueError("need max_steps >= 1 and tol > 0")


@dataclass(frozen=True)
class KcState:
    x: float
    step_count: int = 0
    converged: bool = False


def penalty(v: float, cfg: KcConfig) -> float:
    return cfg.penalty_slope * v if v < 0 else 0.0


def rhs(x: float, dphi: float, bounds: Tuple[float, float], cfg: KcConfig) -> float:
    """C dx/dt for cost slope ``dphi`` at ``x``."""
    lo, hi = bounds
    # df1/dx = -1, df2/dx = +1
    return -dphi + penalty(hi - x, cfg) - penalty(x - lo, cfg) - cfg.g * x


def _advance(x, dphi, bounds, cfg):
    lo, hi = bounds
    h = cfg.dt / cfg.c
    b = x - h * dphi
    y = b / (1.0 + h * cfg.g)
    if y > hi:
        y = (b + h * cfg.penalty_slope * hi) / (1.0 + h * (cfg.g + cfg.penalty_slope))
    elif y < lo:
        y = (b + h * cfg.penalty_slope * lo) / (1.0 + h * (cfg.g + cfg.penalty_slope))
    return y


def _slope(cost, x):
    d = cost.grad(x)
    if not math.isfinite(d):
        raise KcDivergenceError(f"cost gradient is {d!r} at x={x!r}")
    return d


def step(state: KcState, cost: CostSurface, bounds: Tuple[float, float], cfg: KcConfig) -> KcState:
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("bounds must satisfy lo < hi")
    x = _advance(state.x, _slope(cost, state.x), bounds, cfg)
    return KcState(x, state.step_count + 1, False)


def run_to_convergence(x0: float, cost: CostSurface, bounds: Tuple[float, float], cfg: KcConfig,
                       trajectory: Optional[List[Tuple[int, float, float]]] = None) -> KcState:
    """Integrate until |dx/dt| < tol or the step budget runs out.

    If ``trajectory`` is a list, (step, x, rhs) rows are appended to it.
    """
    if not math.isfinite(x0):
        raise ValueError("x0 must be finite")
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("bounds must satisfy lo < hi")
    x = float(x0)
    for n in range(cfg.max_steps + 1):
        d = _slope(cost, x)
        r = rhs(x, d, bounds, cfg)
        if trajectory is not None:
            trajectory.append((n, x, r))
        if abs(r) / cfg.c < cfg.tol:
            return KcState(x, n, True)
        if n == cfg.max_steps:
            break
        x = _advance(x, d, bounds, cfg)
    return KcState(x, cfg.max_steps, False)


TRAJECTORY_HEADER = ("step", "x", "rhs")


def write_trajectory(rows: List[Tuple[int, float, float]], fh) -> None:
    """Columnar dump of (step, x, rhs) rows from ``run_to_convergence``."""
    fh.write(",".join(TRAJECTORY_HEADER) + "\n")
    for n, x, r in rows:
        fh.write(f"{n},{x!r},{r!r}\n")
