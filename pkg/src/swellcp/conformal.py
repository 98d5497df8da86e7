"""Split conformal calibration on the log scale.

Calibration residuals ``|y_log - yhat_log|`` are sorted and the
``ceil((n + 1)(1 - alpha))``-th smallest becomes the half-width ``q`` of a
symmetric log-scale interval. That rank is what makes the marginal coverage
at least ``1 - alpha`` for exchangeable data. When the rank exceeds ``n``
the interval is the whole line and ``q`` is ``inf``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import StateError
from .forest import predict_mean
from .transform import TargetTransform, inverse

_RANK_SLACK = 1e-9


def score(y_log_true, y_log_pred):
    """Nonconformity: absolute log-scale residual."""
    out = np.abs(np.asarray(y_log_true, dtype=float) - np.asarray(y_log_pred, dtype=float))
    return float(out) if out.ndim == 0 else out


def conformal_rank(n_cal, alpha):
    """1-based order-statistic rank ``ceil((n_cal + 1)(1 - alpha))``.

    A slack of 1e-9 absorbs binary rounding, e.g. ``10 * (1 - 0.2)``.
    """
    return math.ceil((n_cal + 1) * (1.0 - alpha) - _RANK_SLACK)


@dataclass(frozen=True)
class ConformalCalibrator:
    scores: tuple
    alpha: float
    q_alpha: float
    n_cal: int

    @property
    def rank(self):
        return conformal_rank(self.n_cal, self.alpha)

    @property
    def bounded(self):
        return math.isfinite(self.q_alpha)

    def as_dict(self):
        return {
            "scores": list(self.scores),
            "alpha": self.alpha,
            "q_alpha": self.q_alpha if self.bounded else None,
            "unbounded": not self.bounded,
            "n_cal": self.n_cal,
        }

    @classmethod
    def from_dict(cls, d):
        q = math.inf if d.get("unbounded") else float(d["q_alpha"])
        return cls(tuple(float(s) for s in d["scores"]), float(d["alpha"]), q, int(d["n_cal"]))


class UnboundedIntervalWarning(UserWarning):
    pass


def calibrate(scores, alpha):
    """Build a calibrator from calibration scores at miscoverage ``alpha``.

    Duplicated scores are kept. Warns with :class:`UnboundedIntervalWarning`
    when the calibration set is too small for the requested level.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    s = np.sort(np.asarray(scores, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("cannot calibrate on an empty score list")
    if np.any(~np.isfinite(s)) or np.any(s < 0):
        raise ValueError("scores must be finite and non-negative")
    n = int(s.size)
    k = conformal_rank(n, alpha)
    if k > n:
        warnings.warn(
            f"rank {k} exceeds n_cal={n} at alpha={alpha}: interval is unbounded",
            UnboundedIntervalWarning,
            stacklevel=2,
        )
        q = math.inf
    else:
        q = float(s[max(k, 1) - 1])
    return ConformalCalibrator(tuple(float(v) for v in s), float(alpha), q, n)


@dataclass(frozen=True)
class PredictionInterval:
    """Point and interval, on the log or the physical scale (arrays allowed)."""

    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    space: str

    @property
    def unbounded(self):
        return np.isinf(self.upper) | np.isinf(self.lower)

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        return (self.lower <= y) & (y <= self.upper)


def interval_log(y_log_pred, cal):
    """Symmetric log-scale interval of half-width ``cal.q_alpha``."""
    point = np.asarray(y_log_pred, dtype=float)
    return PredictionInterval(point, point - cal.q_alpha, point + cal.q_alpha, cal.alpha, "log")


def interval_physical(iv_log, t=TargetTransform()):
    """Map a log-scale interval back to percent swelling, endpoint by endpoint.

    Lower bounds are not clipped at zero; a log lower bound below 0 gives a
    slightly negative swelling bound.
    """
    if iv_log.space != "log":
        raise ValueError("interval_physical expects a log-space interval")
    return PredictionInterval(
        np.asarray(inverse(iv_log.point, t)),
        np.asarray(inverse(iv_log.lower, t)),
        np.asarray(inverse(iv_log.upper, t)),
        iv_log.alpha,
        "physical",
    )


def calibrate_model(model, X_cal, y_cal, alpha, t=TargetTransform()):
    """Score a log-target forest on held-out rows and calibrate."""
    if model.target_space != "log":
        raise StateError("conformal calibration needs a forest fitted on log targets")
    y_log = t.forward(np.asarray(y_cal, dtype=float))
    return calibrate(score(y_log, predict_mean(model, np.atleast_2d(X_cal))), alpha)


def predict_interval(model, cal, t, X):
    """Physical-scale conformal interval(s) for feature row(s) ``X``."""
    if model.target_space != "log":
        raise StateError("conformal intervals need a forest fitted on log targets")
    if cal is None:
        raise StateError("model has not been calibrated")
    return interval_physical(interval_log(predict_mean(model, X), cal), t)
