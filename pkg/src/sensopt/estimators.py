"""scikit-learn style front ends.

``CostSurfaceRegressor`` is a regular regressor over a single feature.
``SensingTimeOptimizer`` and ``AdaptiveSensingTime`` are fit on a
``Scenario`` instead of an (X, y) pair, but follow the same conventions:
constructor arguments are hyperparameters, results are trailing-underscore
attributes, and ``get_params``/``set_params``/``clone`` work as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state, check_X_y

from . import mff
from .adaptive import AdaptiveConfig, MffConfig, run_adaptive
from .kc import KcConfig
from .link_model import Scenario
from .optimizer import max_throughput_L, optimize_tau, optimize_tau_tf, rate_at
from .simenv import EstimatorConfig


def _column(X):
    X = check_array(X, ensure_2d=False)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]}")
        X = X[:, 0]
    return X


class CostSurfaceRegressor(RegressorMixin, BaseEstimator):
    """1-K-1 network regressor (logistic hidden layer, tanh output).

    Targets are rescaled by ``0.9 / max|y|`` before training so they fit the
    tanh range; predictions are mapped back.
    """

    def __init__(self, hidden=9, learning_rate=0.2, epochs=500, init_scale=0.5, random_state=None):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.init_scale = init_scale
        self.random_state = random_state

    def _buffer(self, X, y):
        buf = mff.TrainingBuffer(capacity=len(X))
        for x, t in zip(X, y * self.network_.target_scale):
            buf.push(x, t)
        return buf

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_2d=False, y_numeric=True)
        X = _column(X)
        self._rng = check_random_state(self.random_state)
        self.network_ = mff.MffNetwork.init(self.hidden, self._rng, self.init_scale)
        peak = float(np.max(np.abs(y)))
        self.network_.target_scale = mff.TARGET_CEIL / peak if peak > 0 else 1.0
        self.n_features_in_ = 1
        self.loss_ = mff.train_step(self.network_, self._buffer(X, y), self.learning_rate, self.epochs, self._rng)
        return self

    def partial_fit(self, X, y, epochs=1):
        if not hasattr(self, "network_"):
            return self.set_params(epochs=epochs).fit(X, y)
        X, y = check_X_y(X, y, ensure_2d=False, y_numeric=True)
        self.loss_ = mff.train_step(self.network_, self._buffer(_column(X), y), self.learning_rate, epochs, self._rng)
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        return mff.scale_out_inverse(self.network_, mff.forward_batch(self.network_, _column(X)))

    def predict_gradient(self, X):
        check_is_fitted(self, "network_")
        xs = _column(X)
        g = np.array([mff.sensitivity(self.network_, x) for x in xs])
        return mff.scale_out_inverse(self.network_, g)


class SensingTimeOptimizer(BaseEstimator):
    """Analytic sensing-time optimiser.

    ``tradeoff`` below 1 caps the handover count to save sensing energy
    while keeping at least ``tradeoff * L`` of the saturated maximum rate.
    """

    def __init__(self, tradeoff=1.0, cap_override=None, extension="cyclic"):
        self.tradeoff = tradeoff
        self.cap_override = cap_override
        self.extension = extension

    def fit(self, scenario: Scenario, y=None):
        self.scenario_ = scenario
        best = max_throughput_L(scenario, extension=self.extension)
        self.L_ = best.L
        self.np_star_ = best.np_star
        if self.tradeoff < 1.0:
            res = optimize_tau_tf(scenario, self.tradeoff, extension=self.extension)
            self.tau_, self.rate_, self.alpha_, self.nce_ = res.tau_opt_tf, res.rate_tf, res.alpha_bar, res.nce_tf
        else:
            res = optimize_tau(scenario, self.cap_override)
            self.tau_, self.rate_, self.alpha_, self.nce_ = res.tau_opt, res.rate_max, res.alpha_at_opt, res.nce_at_opt
        self.result_ = res
        return self

    def predict(self, X):
        """Analytic throughput at the sensing times in ``X`` (seconds)."""
        check_is_fitted(self, "result_")
        return np.array([rate_at(self.scenario_, t, self.cap_override) for t in _column(X)])


class AdaptiveSensingTime(BaseEstimator):
    """Model-free sensing-time learner driven by simulated rate estimates."""

    def __init__(self, cycles=200, warmup_probes=8, jitter=0.01, jitter_halving=50,
                 t_ep_slots=100, decision_mode="closed_form",
                 hidden=9, learning_rate=0.2, epochs=20, warmup_epochs=3000, buffer_size=64, init_scale=0.5,
                 kc_c=10e-9, kc_g=1e-3, penalty_slope=1e3, dt=1e-9, kc_max_steps=50_000, kc_tol=1e3,
                 random_state=0):
        self.cycles = cycles
        self.warmup_probes = warmup_probes
        self.jitter = jitter
        self.jitter_halving = jitter_halving
        self.t_ep_slots = t_ep_slots
        self.decision_mode = decision_mode
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.buffer_size = buffer_size
        self.init_scale = init_scale
        self.kc_c = kc_c
        self.kc_g = kc_g
        self.penalty_slope = penalty_slope
        self.dt = dt
        self.kc_max_steps = kc_max_steps
        self.kc_tol = kc_tol
        self.random_state = random_state

    def to_config(self) -> AdaptiveConfig:
        return AdaptiveConfig(
            cycles=self.cycles, warmup_probes=self.warmup_probes, jitter=self.jitter,
            jitter_halving=self.jitter_halving,
            estimator=EstimatorConfig(self.t_ep_slots, self.decision_mode),
            mff=MffConfig(self.hidden, self.learning_rate, self.epochs, self.warmup_epochs,
                          self.buffer_size, self.init_scale),
            kc=KcConfig(self.kc_c, self.kc_g, self.penalty_slope, self.dt, self.kc_max_steps, self.kc_tol),
            seed=self.random_state,
        )

    def fit(self, scenario: Scenario, y=None):
        res = run_adaptive(scenario, self.to_config())
        self.result_ = res
        self.tau_ = res.tau_learned
        self.rate_ = res.rate_learned
        self.records_ = res.records
        self.network_ = res.network
        self.slot_t_ = scenario.slot_t
        return self

    def predict(self, X):
        """Learned cost 1/R at the sensing times in ``X`` (seconds)."""
        check_is_fitted(self, "network_")
        xs = mff.scale_in(self.network_, _column(X))
        return mff.scale_out_inverse(self.network_, mff.forward_batch(self.network_, xs))
