"""JSON run configuration.

Every key is optional; missing keys take the reference defaults
(Pd_min 0.9, Pfa_max 0.1, fs 6 MHz, T 100 ms, tau_ho 0.1 ms, 15 channels,
9 hidden neurons, C 10 nF, G 1e-3 S). Unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .adaptive import AdaptiveConfig, MffConfig
from .detector import DetectorConfig
from .kc import KcConfig
from .link_model import REFERENCE_P_FREE, Fading, Scenario
from .simenv import EstimatorConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PowerModel:
    p_sense: float = 1.0
    p_ho: float = 0.0

    def __post_init__(self):
        if self.p_sense <= 0 or self.p_ho < 0:
            raise ValueError("p_sense must be positive and p_ho non-negative")


@dataclass(frozen=True)
class Config:
    scenario: Scenario = field(default_factory=Scenario)
    extension: str = "cyclic"
    mc_samples: int = 100_000
    power: PowerModel = field(default_factory=PowerModel)
    adaptive: AdaptiveConfig = field(default_factory=AdaptiveConfig)


_SCENARIO_KEYS = {"n_p", "slot_t", "tau_ho", "p_free", "presence", "gamma_s", "gamma_p",
                  "fading", "extension", "mc_samples"}
_ADAPTIVE_KEYS = {"cycles", "warmup_probes", "jitter", "jitter_halving", "seed"}
_TOP_KEYS = {"scenario", "detector", "power", "estimator", "mff", "kc", "adaptive"}


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def _make(cls, d, where):
    _check_keys(d, {f.name for f in fields(cls)}, where)
    try:
        return cls(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def default_p_free(n_p: int):
    return tuple(REFERENCE_P_FREE[i % len(REFERENCE_P_FREE)] for i in range(n_p))


def from_dict(d: dict) -> Config:
    _check_keys(d, _TOP_KEYS, "config")
    det = _make(DetectorConfig, d.get("detector", {}), "detector")

    s = dict(d.get("scenario", {}))
    _check_keys(s, _SCENARIO_KEYS, "scenario")
    n_p = s.pop("n_p", None)
    presence = s.pop("presence", None)
    p_free = s.pop("p_free", None)
    if presence is not None and p_free is not None:
        raise ConfigError("scenario: give either presence or p_free, not both")
    if n_p is None:
        n_p = len(p_free) if p_free is not None else 15
    if presence is not None:
        p_free = (1.0 - presence,) * n_p
    elif p_free is None:
        p_free = default_p_free(n_p)
    fading = _make(Fading, s.pop("fading", {}), "scenario.fading")
    extension = s.pop("extension", "cyclic")
    mc_samples = s.pop("mc_samples", 100_000)
    try:
        scn = Scenario(n_p=n_p, p_free=p_free, fading=fading, detector=det, **s)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"scenario: {e}") from e
    if extension not in ("cyclic", "last"):
        raise ConfigError(f"scenario: unknown extension rule {extension!r}")

    a = d.get("adaptive", {})
    _check_keys(a, _ADAPTIVE_KEYS, "adaptive")
    try:
        adaptive = AdaptiveConfig(
            estimator=_make(EstimatorConfig, d.get("estimator", {}), "estimator"),
            mff=_make(MffConfig, d.get("mff", {}), "mff"),
            kc=_make(KcConfig, d.get("kc", {}), "kc"),
            **a,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"adaptive: {e}") from e
    power = _make(PowerModel, d.get("power", {}), "power")
    return Config(scn, extension, mc_samples, power, adaptive)


def load(path) -> Config:
    if path is None:
        return from_dict({})
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    return from_dict(data)


def to_dict(cfg: Config) -> dict:
    scn = cfg.scenario
    a = cfg.adaptive
    return {
        "scenario": {
            "n_p": scn.n_p,
            "slot_t": scn.slot_t,
            "tau_ho": scn.tau_ho,
            "p_free": list(scn.p_free),
            "gamma_s": scn.gamma_s,
            "gamma_p": scn.gamma_p,
            "fading": asdict(scn.fading),
            "extension": cfg.extension,
            "mc_samples": cfg.mc_samples,
        },
        "detector": asdict(scn.detector),
        "power": asdict(cfg.power),
        "estimator": asdict(a.estimator),
        "mff": asdict(a.mff),
        "kc": asdict(a.kc),
        "adaptive": {k: getattr(a, k) for k in sorted(_ADAPTIVE_KEYS)},
    }


def with_seed(cfg: Config, seed) -> Config:
    if seed is None:
        return cfg
    return replace(cfg, adaptive=replace(cfg.adaptive, seed=seed))
