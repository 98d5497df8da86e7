import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swellcp.config import PipelineConfig
from swellcp.data import IRRADIATION_CLASSES, Dataset, Sample
from swellcp.evaluation import (
    VARIANTS,
    PredictionRecord,
    compare_variants,
    coverage_and_width,
    eda_summary,
    histogram,
    mae,
    normal_k,
    pearson_matrix,
    r_squared,
    width_boxplot_bins,
)


def rec(y, lo, hi, i=0, point=None):
    return PredictionRecord(i, y, y if point is None else point, lo, hi)


def test_r_squared_examples():
    y = [0.0, 1.0, 2.0]
    assert r_squared(y, y) == 1.0
    assert r_squared(y, [1.0, 1.0, 1.0]) == 0.0
    assert r_squared(y, [0.0, 1.0, 1.0]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        r_squared([2.0, 2.0], [1.0, 3.0])


def test_mae_examples():
    assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mae([0.0, 2.0], [1.0, 1.0]) == 1.0
    assert mae([38.2], [22.6]) == pytest.approx(15.6, abs=1e-12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30))
def test_perfect_prediction_metrics(y):
    assert mae(y, y) == 0
    if np.var(y) > 0:
        assert r_squared(y, y) == 1.0


@pytest.mark.parametrize("n_cov,expected", [(27, 84.375), (22, 68.75), (20, 62.5)])
def test_coverage_fractions(n_cov, expected):
    records = [rec(1.0, 0.0, 2.0)] * n_cov + [rec(5.0, 0.0, 2.0)] * (32 - n_cov)
    cw = coverage_and_width(records)
    assert 100 * cw.coverage == expected
    assert cw.avg_width == 2.0
    assert cw.width_below_1 is None


def test_unbounded_records():
    records = [rec(3.0, -1.0, math.inf), rec(0.2, -1.0, math.inf)]
    cw = coverage_and_width(records)
    assert cw.coverage == 1.0 and cw.unbounded


def test_width_below_threshold():
    records = [rec(0.5, 0, 1.0), rec(0.9, 0, 3.0), rec(4.0, 0, 10.0)]
    assert coverage_and_width(records).width_below_1 == 2.0


def test_boundary_covered():
    assert rec(1.0, 1.0, 2.0).covered and rec(2.0, 1.0, 2.0).covered
    assert not rec(2.0000001, 1.0, 2.0).covered


def test_boxplot_bins():
    recs = [rec(20.0, 0, w) for w in (1.0, 2.0, 3.0, 4.0, 5.0)]
    bins = width_boxplot_bins(recs)
    assert list(bins) == ["[0,1)", "[1,5)", "[5,15)", "[15,inf)"]
    b = bins["[15,inf)"]
    assert (b["min"], b["q1"], b["median"], b["q3"], b["max"], b["mean"]) == (1, 2, 3, 4, 5, 3)
    assert bins["[0,1)"] == {"n": 0}
    same = width_boxplot_bins([rec(2.0, 0, 7.0)] * 4)["[1,5)"]
    assert all(same[k] == 7.0 for k in ("min", "q1", "median", "q3", "max", "mean"))
    assert width_boxplot_bins([], (1.0,)) == {"[0,1)": {"n": 0}, "[1,inf)": {"n": 0}}


def test_bin_edges_membership():
    bins = width_boxplot_bins([rec(1.0, 0, 1), rec(0.999, 0, 1), rec(15.0, 0, 1)])
    assert bins["[0,1)"]["n"] == 1 and bins["[1,5)"]["n"] == 1 and bins["[15,inf)"]["n"] == 1


@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 20)), min_size=1, max_size=60))
def test_weighted_bin_means_equal_global(pairs):
    recs = [rec(y, 0.0, w) for y, w in pairs]
    bins = width_boxplot_bins(recs)
    total = sum(b["mean"] * b["n"] for b in bins.values() if b["n"])
    assert total / len(recs) == pytest.approx(coverage_and_width(recs).avg_width, rel=1e-9, abs=1e-9)
    assert sum(b["n"] for b in bins.values()) == len(recs)


def test_pearson():
    m = pearson_matrix([[0.0, 1.0], [1.0, 0.0]])
    assert m[0][1] == -1.0
    y = [1.0, 4.0, 2.0, 8.0]
    m = pearson_matrix([y, y, [3.0] * 4])
    assert m[0][1] == pytest.approx(1.0)
    assert m[0][2] is None and m[2][2] is None


def test_pearson_matches_numpy():
    data = np.random.default_rng(0).normal(size=(4, 50))
    m = np.array(pearson_matrix(data), dtype=float)
    assert np.allclose(m, np.corrcoef(data), atol=1e-12)


def test_histogram():
    h = histogram([0.0, 0.5, 1.0, 2.99, 3.0])
    assert [b["count"] for b in h] == [2, 1, 1, 1]
    assert h[0]["lower"] == 0.0 and h[-1]["upper"] == 4.0


def _ds(n=40, seed=0):
    g = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        cont = tuple(g.random(17))
        samples.append(Sample(cont, IRRADIATION_CLASSES[i % 5], float(10 * cont[0] + g.random())))
    return Dataset.from_samples(samples)


def test_eda_summary_shapes():
    ds = _ds()
    eda = eda_summary(ds)
    assert len(eda["feature_summary"]) == 18
    assert sum(eda["class_counts"].values()) == len(ds)
    m = np.array(eda["correlation"]["matrix"], dtype=float)
    assert m.shape == (18, 18)
    assert np.allclose(m, m.T) and np.allclose(np.diag(m), 1.0)
    assert sum(b["count"] for b in eda["target_histogram"]) == len(ds)
    dose = eda["feature_summary"]["dose"]
    assert dose["min"] == ds.continuous[:, 0].min() and dose["mean"] == pytest.approx(ds.continuous[:, 0].mean())


def test_normal_k():
    assert normal_k(0.2) == pytest.approx(1.2815515655446004, abs=1e-12)
    assert normal_k(0.05) == pytest.approx(1.959963984540054, abs=1e-12)


def test_compare_variants_contract():
    g = np.random.default_rng(4)
    X = g.random((200, 22))
    y = np.maximum(0, 30 * X[:, 0] - 5) * np.exp(0.3 * g.normal(size=200))
    cfg = PipelineConfig(n_trees=20)
    res = compare_variants(X[:150], y[:150], X[150:175], y[150:175], X[175:], y[175:], cfg)
    assert set(res) == set(VARIANTS)
    for v in VARIANTS:
        r = res[v].report
        assert r.n_test == 25
        assert r.coverage * 25 == pytest.approx(round(r.coverage * 25))
        assert all(rec.width >= 0 for rec in res[v].records)
    # log_rf and log_cp share the point estimate
    assert [r.y_point for r in res["log_rf"].records] == [r.y_point for r in res["log_cp"].records]


def test_degenerate_forest_heuristic_zero_width():
    # one tree: spread is zero, so heuristic bands collapse; conformal still widens
    g = np.random.default_rng(5)
    X = g.random((600, 22))
    y = np.exp(g.normal(size=600))
    cfg = PipelineConfig(n_trees=1)
    res = compare_variants(X[:200], y[:200], X[200:400], y[200:400], X[400:], y[400:], cfg)
    assert res["standard_rf"].report.avg_width == 0.0
    assert res["standard_rf"].report.coverage <= 0.05
    assert res["log_cp"].report.avg_width > 0 and res["log_cp"].report.coverage > 0.7
