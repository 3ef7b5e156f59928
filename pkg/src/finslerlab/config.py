"""Scenario configuration: one JSON document per run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass
class ScenarioConfig:
    metric: str = "hyperbolic:k=1"
    surface: str = "sphere:r=0.5"
    outward: bool = True
    # bounds; None means "measure and report" where a command supports it
    k: float | None = None
    delta: float | None = None
    T: float = 3.0
    samples: int = 200
    surface_samples: int = 16
    n_times: int = 31
    seed: int = 0
    # geodesic / Jacobi / comparison scenarios
    x0: list | None = None
    y0: list | None = None
    metric_bar: str = "euclidean"
    spectrum: list = field(default_factory=lambda: [1.0])
    spectrum_bar: list = field(default_factory=lambda: [1.0])
    # lemma2 sweep
    lambdas: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    trials: int = 50
    tolerances: dict = field(default_factory=dict)
    out: str = "out"

    TOLERANCES = {"slack": 1e-6, "tol": 1e-4, "riccati": 1e-3, "geodesic": 1e-10, "margin": 1e-9}

    def tolerance(self, name):
        return float(self.tolerances.get(name, self.TOLERANCES[name]))

    def validate(self) -> "ScenarioConfig":
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        for name in ("samples", "surface_samples", "n_times", "trials"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.k is not None and self.k < 0:
            raise ConfigError("k must be nonnegative")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if any(lam < 0 for lam in self.lambdas):
            raise ConfigError("lambda values must be nonnegative")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        unknown = set(self.tolerances) - set(self.TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
        try:
            return cls(**data).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_json(text)
