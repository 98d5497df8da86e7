"""Flat JSON run configuration shared by the CLI subcommands."""

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .forest import Hyperparams
from .transform import TargetTransform


@dataclass(frozen=True)
class PipelineConfig:
    n_trees: int = 300
    max_features: int = 8
    min_samples_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0
    offset: float = 1.0
    alpha: float = 0.2
    train_frac: float = 0.8
    cal_frac: float = 0.1
    test_frac: float = 0.1
    log_target: bool = True
    n_jobs: int = 1
    column_map: str | None = None
    hist_bin_width: float = 1.0
    width_bin_edges: tuple = (1.0, 5.0, 15.0)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.hist_bin_width <= 0:
            raise ConfigError("hist_bin_width must be positive")
        edges = tuple(float(e) for e in self.width_bin_edges)
        if any(b <= a for a, b in zip(edges, edges[1:])) or any(e <= 0 for e in edges):
            raise ConfigError("width_bin_edges must be positive and strictly increasing")
        object.__setattr__(self, "width_bin_edges", edges)
        # validate eagerly so bad configs fail before any work is done
        self.hyperparams
        self.transform

    @property
    def hyperparams(self):
        return Hyperparams(self.n_trees, self.max_features, self.min_samples_leaf, self.max_depth)

    @property
    def transform(self):
        try:
            return TargetTransform(float(self.offset))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def fractions(self):
        return (self.train_frac, self.cal_frac, self.test_frac)

    def as_dict(self):
        d = asdict(self)
        d["width_bin_edges"] = list(self.width_bin_edges)
        return d

    def updated(self, **overrides):
        """Copy with the non-None overrides applied (CLI flags win over the file)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)
