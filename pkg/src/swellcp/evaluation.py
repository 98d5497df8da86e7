"""Accuracy, coverage and width metrics, EDA summaries and the
three-way comparison of interval methods.

The three variants compared on one split are

* ``standard_rf``: forest on raw swelling, band ``mean +/- k * std``;
* ``log_rf``: forest on ``ln(y + offset)``, the same band built on the log
  scale and mapped back;
* ``log_cp``: the log forest with split-conformal calibration.

``k`` is the two-sided standard-normal quantile for the target level,
i.e. what the tree spread would need if it were a calibrated Gaussian.
"""

import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from .conformal import calibrate_model, interval_log, interval_physical
from .data import encode
from .forest import fit_forest, heuristic_interval, predict_mean_std

VARIANTS = ("standard_rf", "log_rf", "log_cp")


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class PredictionRecord:
    index: int
    y_true: float
    y_point: float
    lower: float
    upper: float

    @property
    def covered(self):
        return bool(self.lower <= self.y_true <= self.upper)

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def unbounded(self):
        return math.isinf(self.lower) or math.isinf(self.upper)

    def as_row(self):
        return {
            "index": self.index,
            "y_true": self.y_true,
            "y_point": self.y_point,
            "lower": _finite_or_none(self.lower),
            "upper": _finite_or_none(self.upper),
            "covered": self.covered,
            "width": _finite_or_none(self.width),
            "unbounded": self.unbounded,
        }


def make_records(indices, y_true, point, lower, upper):
    return [
        PredictionRecord(int(i), float(t), float(p), float(lo), float(hi))
        for i, t, p, lo, hi in zip(indices, y_true, point, lower, upper)
    ]


def r_squared(y_true, y_pred):
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size < 2:
        raise ValueError("r_squared needs two equal-length vectors of at least 2 values")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("r_squared is undefined when y_true has zero variance")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot


def mae(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size < 1:
        raise ValueError("mae needs two equal-length, non-empty vectors")
    return float(np.mean(np.abs(y_true - y_pred)))


@dataclass(frozen=True)
class CoverageWidth:
    coverage: float
    avg_width: float
    width_below_1: float | None
    n: int
    n_covered: int

    @property
    def unbounded(self):
        return math.isinf(self.avg_width)


def coverage_and_width(records, low_threshold=1.0):
    """Empirical coverage, mean width, and mean width over ``y_true < low_threshold``.

    The last value is None when no record falls below the threshold.
    """
    records = list(records)
    if not records:
        raise ValueError("coverage_and_width needs at least one record")
    n_cov = sum(r.covered for r in records)
    widths = np.array([r.width for r in records])
    low = [r.width for r in records if r.y_true < low_threshold]
    return CoverageWidth(
        coverage=n_cov / len(records),
        avg_width=float(np.mean(widths)),
        width_below_1=float(np.mean(low)) if low else None,
        n=len(records),
        n_covered=n_cov,
    )


def bin_labels(edges):
    bounds = [0.0, *edges, math.inf]
    fmt = lambda v: "inf" if math.isinf(v) else f"{v:g}"
    return [f"[{fmt(a)},{fmt(b)})" for a, b in zip(bounds, bounds[1:])]


def width_boxplot_bins(records, bin_edges=(1.0, 5.0, 15.0)):
    """Five-number summary and mean of widths, grouped by true swelling.

    Bins are ``[0, e1), [e1, e2), ..., [e_last, inf)``; values below 0 fall in
    the first bin. Quartiles interpolate linearly between closest ranks.
    Empty bins map to ``{"n": 0}``.
    """
    edges = [float(e) for e in bin_edges]
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing")
    labels = bin_labels(edges)
    groups = {label: [] for label in labels}
    for r in records:
        groups[labels[int(np.searchsorted(edges, r.y_true, side="right"))]].append(r.width)
    out = {}
    for label, widths in groups.items():
        if not widths:
            out[label] = {"n": 0}
            continue
        w = np.array(widths, dtype=float)
        q1, med, q3 = np.quantile(w, [0.25, 0.5, 0.75], method="linear")
        out[label] = {
            "n": len(widths),
            "min": float(w.min()),
            "q1": float(q1),
            "median": float(med),
            "q3": float(q3),
            "max": float(w.max()),
            "mean": float(w.mean()),
        }
    return out


def pearson_matrix(columns):
    """Pearson correlations between the rows of ``columns``.

    Entries involving a constant column are None.
    """
    data = np.asarray(columns, dtype=float)
    k, n = data.shape
    if n < 2:
        raise ValueError("correlations need at least 2 samples")
    centred = data - data.mean(axis=1, keepdims=True)
    cov = centred @ centred.T / n
    sd = np.sqrt(np.diag(cov))
    out = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if sd[i] > 0 and sd[j] > 0:
                out[i][j] = 1.0 if i == j else float(np.clip(cov[i, j] / (sd[i] * sd[j]), -1.0, 1.0))
    return out


def histogram(values, bin_width=1.0):
    """Counts in half-open bins ``[a, a + w)`` anchored at multiples of ``w``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return []
    lo = math.floor(v.min() / bin_width)
    hi = math.floor(v.max() / bin_width)
    idx = np.floor(v / bin_width).astype(np.int64) - lo
    counts = np.bincount(idx, minlength=hi - lo + 1)
    return [
        {"lower": (lo + i) * bin_width, "upper": (lo + i + 1) * bin_width, "count": int(c)}
        for i, c in enumerate(counts)
    ]


def eda_summary(ds, hist_bin_width=1.0):
    schema = ds.schema
    names = list(schema.continuous_names)
    cols = [ds.continuous[:, j] for j in range(len(names))]
    if ds.target is not None:
        names.append(schema.target_name)
        cols.append(ds.target)
    n = len(ds)
    stats = {
        name: {"min": float(c.min()), "mean": float(c.mean()), "max": float(c.max())} if n else {}
        for name, c in zip(names, cols)
    }
    counts = {c: 0 for c in schema.classes}
    for label in ds.irradiation_type:
        counts[label] += 1
    return {
        "n_samples": n,
        "feature_summary": stats,
        "class_counts": counts,
        "correlation": {"names": names, "matrix": pearson_matrix(np.vstack(cols))} if n >= 2 else None,
        "target_histogram": histogram(ds.target, hist_bin_width) if ds.target is not None else None,
        "hist_bin_width": hist_bin_width,
    }


@dataclass
class EvalReport:
    model_variant: str
    r2: float | None
    mae: float
    coverage: float
    n_covered: int
    avg_width: float
    width_below_1: float | None
    width_by_bin: dict
    n_test: int
    alpha: float
    interval_params: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        d["avg_width"] = _finite_or_none(self.avg_width)
        d["width_below_1"] = _finite_or_none(self.width_below_1)
        d["unbounded"] = math.isinf(self.avg_width)
        return d


def build_report(variant, records, alpha, bin_edges, interval_params=None):
    cw = coverage_and_width(records)
    y = [r.y_true for r in records]
    p = [r.y_point for r in records]
    try:
        r2 = r_squared(y, p)
    except ValueError:
        r2 = None
    return EvalReport(
        model_variant=variant,
        r2=r2,
        mae=mae(y, p),
        coverage=cw.coverage,
        n_covered=cw.n_covered,
        avg_width=cw.avg_width,
        width_below_1=cw.width_below_1,
        width_by_bin=width_boxplot_bins(records, bin_edges),
        n_test=cw.n,
        alpha=alpha,
        interval_params=dict(interval_params or {}),
    )


def normal_k(alpha):
    """Two-sided standard-normal quantile ``z_{1 - alpha/2}``."""
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


@dataclass
class VariantResult:
    report: EvalReport
    records: list
    extra: dict = field(default_factory=dict)


def compare_variants(
    X_train, y_train, X_cal, y_cal, X_test, y_test, config, test_index=None,
    raw_model=None, log_model=None,
):
    """Fit (unless given) and evaluate all three variants on one split.

    Both forests use ``config.seed``, so they see identical bootstrap rows
    and candidate columns and differ only in the target scale.
    """
    t = config.transform
    alpha = config.alpha
    hp = config.hyperparams
    k = normal_k(alpha)
    test_index = np.arange(len(y_test)) if test_index is None else np.asarray(test_index)
    y_test = np.asarray(y_test, dtype=float)

    if raw_model is None:
        raw_model = fit_forest(X_train, y_train, hp, config.seed, "raw", config.n_jobs)
    if log_model is None:
        log_model = fit_forest(X_train, t.forward(y_train), hp, config.seed, "log", config.n_jobs)

    results = {}
    mean, std = predict_mean_std(raw_model, X_test)
    lo, hi = heuristic_interval(mean, std, k)
    recs = make_records(test_index, y_test, mean, lo, hi)
    results["standard_rf"] = VariantResult(
        build_report("standard_rf", recs, alpha, config.width_bin_edges, {"k": k}), recs
    )

    log_mean, log_std = predict_mean_std(log_model, X_test)
    lo, hi = heuristic_interval(log_mean, log_std, k)
    recs = make_records(test_index, y_test, t.inverse(log_mean), t.inverse(lo), t.inverse(hi))
    results["log_rf"] = VariantResult(
        build_report("log_rf", recs, alpha, config.width_bin_edges, {"k": k, "offset": t.offset}), recs
    )

    cal = calibrate_model(log_model, X_cal, y_cal, alpha, t)
    iv = interval_physical(interval_log(log_mean, cal), t)
    recs = make_records(test_index, y_test, iv.point, iv.lower, iv.upper)
    params = {
        "q_alpha": _finite_or_none(cal.q_alpha),
        "rank": cal.rank,
        "n_cal": cal.n_cal,
        "offset": t.offset,
    }
    results["log_cp"] = VariantResult(
        build_report("log_cp", recs, alpha, config.width_bin_edges, params),
        recs,
        {"calibrator": cal, "y_log_point": log_mean},
    )
    return results


def compare_variants_on_split(ds, split, config, **prefit):
    """:func:`compare_variants` with the subsets taken from ``ds`` by ``split``."""
    X, y = encode(ds)
    tr, ca, te = (np.asarray(ix, dtype=np.int64) for ix in (split.train, split.calibration, split.test))
    return compare_variants(X[tr], y[tr], X[ca], y[ca], X[te], y[te], config, test_index=te, **prefit)
