"""Engine configuration: a flat JSON object with a fixed key set."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .circumferential import CircWeights
from .dtw import LongWeights
from .errors import InvalidConfig

CONFIG_KEYS = (
    "long_weights",
    "circ_weights",
    "sigma",
    "lambda",
    "delta_max_deg_per_mm",
    "calcium_anchor_threshold",
    "strict_sidebranch_zeroing",
    "bootstrap_seed",
    "bootstrap_resamples",
)


@dataclass(frozen=True)
class EngineConfig:
    long_weights: tuple = (0.3, 1.5, 0.1, 2.5)
    circ_weights: tuple = (1.0, 1.0, 0.1)
    sigma: float = 2.0
    lam: float = 0.005
    delta_max_deg_per_mm: float = 30.0
    calcium_anchor_threshold: float = 0.05
    strict_sidebranch_zeroing: bool = False
    bootstrap_seed: int = 0
    bootstrap_resamples: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "long_weights", tuple(float(w) for w in self.long_weights))
        object.__setattr__(self, "circ_weights", tuple(float(w) for w in self.circ_weights))
        self.check()

    def check(self) -> None:
        if len(self.long_weights) != 4:
            raise InvalidConfig("long_weights needs 4 values (lumen, side branch, calcium, position)")
        if len(self.circ_weights) != 3:
            raise InvalidConfig("circ_weights needs 3 values (side branch, calcium, eccentricity)")
        try:
            LongWeights(*self.long_weights)
            CircWeights(*self.circ_weights)
        except ValueError as e:
            raise InvalidConfig(str(e)) from None
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidConfig(f"sigma must be finite and >= 0, got {self.sigma}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidConfig(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.delta_max_deg_per_mm > 0:
            raise InvalidConfig(f"delta_max_deg_per_mm must be > 0, got {self.delta_max_deg_per_mm}")
        if not 0 <= self.calcium_anchor_threshold <= 1:
            raise InvalidConfig("calcium_anchor_threshold must be in [0, 1]")
        if not isinstance(self.strict_sidebranch_zeroing, bool):
            raise InvalidConfig("strict_sidebranch_zeroing must be a boolean")
        if not isinstance(self.bootstrap_seed, int) or isinstance(self.bootstrap_seed, bool):
            raise InvalidConfig("bootstrap_seed must be an integer")
        if not isinstance(self.bootstrap_resamples, int) or self.bootstrap_resamples < 1:
            raise InvalidConfig("bootstrap_resamples must be an integer >= 1")

    @property
    def long(self) -> LongWeights:
        return LongWeights(*self.long_weights)

    @property
    def circ(self) -> CircWeights:
        return CircWeights(*self.circ_weights)

    def to_dict(self) -> dict:
        return {
            "long_weights": list(self.long_weights),
            "circ_weights": list(self.circ_weights),
            "sigma": self.sigma,
            "lambda": self.lam,
            "delta_max_deg_per_mm": self.delta_max_deg_per_mm,
            "calcium_anchor_threshold": self.calcium_anchor_threshold,
            "strict_sidebranch_zeroing": self.strict_sidebranch_zeroing,
            "bootstrap_seed": self.bootstrap_seed,
            "bootstrap_resamples": self.bootstrap_resamples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        if not isinstance(d, dict):
            raise InvalidConfig("config must be a JSON object")
        unknown = sorted(set(d) - set(CONFIG_KEYS))
        if unknown:
            raise InvalidConfig(f"unknown config keys {unknown}")
        kw = dict(d)
        if "lambda" in kw:
            kw["lam"] = kw.pop("lambda")
        for key in ("sigma", "lam", "delta_max_deg_per_mm", "calcium_anchor_threshold"):
            if key in kw:
                v = kw[key]
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise InvalidConfig(f"{key} must be a number, got {v!r}")
                kw[key] = float(v)
        for key in ("long_weights", "circ_weights"):
            if key in kw and not (isinstance(kw[key], list)
                                  and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in kw[key])):
                raise InvalidConfig(f"{key} must be a list of numbers")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "EngineConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfig(f"{path}: {e}") from None
        return cls.from_dict(d)
