import math
import random

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from sitaware import meta
from sitaware.errors import DomainError, ShapeError, SizeError

A35_COUNTS = [80000, 31000, 33000, 45000, 60000, 50000, 41000, 40000, 37000, 51000]


def ests(theta, v):
    return [meta.EffectEstimate(f"s{i}", float(t), float(w)) for i, (t, w) in enumerate(zip(theta, v))]


# --- effect sizes -------------------------------------------------------------


def test_two_arm_wsj_row():
    e = meta.effect_from_two_arm(480000, 80000)
    assert e.effect == pytest.approx(float(mpmath.log(6)), abs=1e-15)
    assert e.effect == pytest.approx(1.791759, abs=5e-7)
    assert e.variance == pytest.approx(1 / 480000 + 1 / 80000, rel=1e-15)
    assert e.variance == pytest.approx(1.45833e-5, rel=1e-5)


def test_two_arm_ukrainian_officials_row():
    e = meta.effect_from_two_arm(320000, 31000)
    mp = mpmath.log(mpmath.mpf(320000) / 31000)
    assert e.effect == pytest.approx(float(mp), abs=1e-14)
    # ln(320/31) = 2.3343338; see decisions ledger for the 2.334084 typo
    assert e.effect == pytest.approx(2.334334, abs=5e-7)
    assert e.variance == pytest.approx(3.5383e-5, rel=1e-4)


@given(st.integers(1, 10**9))
def test_two_arm_equal_arms(n):
    e = meta.effect_from_two_arm(n, n)
    assert e.effect == 0.0
    assert e.variance == pytest.approx(2 / n, rel=1e-15)


@pytest.mark.parametrize("a, b", [(0, 5), (5, 0), (-1, 3)])
def test_two_arm_domain(a, b):
    with pytest.raises(DomainError):
        meta.effect_from_two_arm(a, b)


def test_single_source_examples():
    e = meta.effect_from_single_source(80000, 0.10, 4)
    assert e.effect == 80000
    assert math.sqrt(e.variance) == pytest.approx(4000, rel=1e-14)
    assert e.variance == pytest.approx(1.6e7, rel=1e-14)

    e = meta.effect_from_single_source(50000, 0.05, 25)
    assert math.sqrt(e.variance) == pytest.approx(500, rel=1e-14)
    assert e.variance == pytest.approx(250000, rel=1e-14)

    e = meta.effect_from_single_source(1234, 0.3, 1)
    assert math.sqrt(e.variance) == pytest.approx(0.3 * 1234, rel=1e-14)


@pytest.mark.parametrize("args", [(0, 0.1, 1), (10, 0, 1), (10, 0.1, 0), (-3, 0.1, 2)])
def test_single_source_domain(args):
    with pytest.raises(DomainError):
        meta.effect_from_single_source(*args)


# --- pooling ------------------------------------------------------------------


def test_pool_three_unit_studies():
    r = meta.pool(ests([1, 2, 3], [1, 1, 1]))
    assert r.pooled_common == pytest.approx(2, abs=1e-12)
    assert r.se_common == pytest.approx(3**-0.5, abs=1e-12)
    assert r.Q == pytest.approx(2, abs=1e-12)
    assert r.df == 2
    assert r.I2 == 0 and r.tau2 == 0
    assert r.pooled_random == pytest.approx(2, abs=1e-12)


def test_pool_two_study_dl():
    r = meta.pool(ests([0, 2], [1, 1]))
    assert r.pooled_common == pytest.approx(1, abs=1e-12)
    assert r.Q == pytest.approx(2, abs=1e-12)
    assert r.df == 1
    assert r.I2 == pytest.approx(0.5, abs=1e-12)
    assert r.tau2 == pytest.approx(1, abs=1e-12)
    assert_allclose(r.weights_random, [0.5, 0.5], atol=1e-12)
    assert r.pooled_random == pytest.approx(1, abs=1e-12)
    assert r.se_random == pytest.approx(1, abs=1e-12)


@given(st.floats(-1e3, 1e3), st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=8))
def test_pool_homogeneous(c, v):
    r = meta.pool(ests([c] * len(v), v))
    assert r.pooled_common == pytest.approx(c, abs=1e-9 * max(1, abs(c)))
    assert r.pooled_random == r.pooled_common
    assert r.Q == pytest.approx(0, abs=1e-12 * max(1, c * c))
    assert r.I2 == 0 and r.tau2 == 0


def test_pool_p_values():
    r = meta.pool(ests([1, 2, 3], [1, 1, 1]))
    assert r.z_common == pytest.approx(2 * math.sqrt(3))
    # two-sided normal tail via scipy-free oracle
    assert r.p_common == pytest.approx(float(mpmath.erfc(2 * mpmath.sqrt(3) / mpmath.sqrt(2))), rel=1e-12)
    r = meta.pool(ests([-1, 1], [1, 1]))
    assert r.p_common == pytest.approx(1.0)


def test_pool_errors():
    with pytest.raises(SizeError):
        meta.pool(ests([1], [1]))
    with pytest.raises(DomainError):
        meta.EffectEstimate("x", 1.0, 0.0)
    with pytest.raises(DomainError):
        meta.EffectEstimate("x", float("nan"), 1.0)


def test_pool_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.stats.meta_analysis")
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = int(rng.integers(2, 12))
        theta = rng.normal(0, 1, k)
        v = rng.uniform(0.01, 0.5, k)
        ref = sm.combine_effects(theta, v, method_re="dl")
        r = meta.pool(ests(theta, v))
        assert r.pooled_common == pytest.approx(ref.mean_effect_fe, rel=1e-12, abs=1e-14)
        assert r.se_common == pytest.approx(ref.sd_eff_w_fe, rel=1e-12)
        assert r.Q == pytest.approx(ref.q, rel=1e-10)
        if ref.tau2 < 0:
            # statsmodels does not truncate the DL moment estimate at zero
            assert r.tau2 == 0 and r.I2 == 0
            assert r.pooled_random == r.pooled_common
            continue
        assert r.pooled_random == pytest.approx(ref.mean_effect_re, rel=1e-10, abs=1e-12)
        assert r.se_random == pytest.approx(ref.sd_eff_w_re, rel=1e-10)
        assert r.tau2 == pytest.approx(ref.tau2, rel=1e-10, abs=1e-14)
        assert r.I2 == pytest.approx(ref.i2, rel=1e-10, abs=1e-14)


def grid_argmin(theta, w):
    lo, hi = min(theta), max(theta)
    if hi == lo:
        return lo
    mu = np.arange(lo, hi + (hi - lo) * 1e-4, (hi - lo) * 1e-4)
    obj = (np.asarray(w)[:, None] * (np.asarray(theta)[:, None] - mu[None, :]) ** 2).sum(axis=0)
    return float(mu[np.argmin(obj)])


def test_grid_oracle_agrees():
    rng = random.Random(11)
    for _ in range(50):
        k = rng.randint(2, 4)
        theta = [rng.uniform(-1, 1) for _ in range(k)]
        v = [rng.uniform(0.05, 2.0) for _ in range(k)]
        r = meta.pool(ests(theta, v))
        assert abs(grid_argmin(theta, [1 / x for x in v]) - r.pooled_common) <= 1e-4


# --- invariants ---------------------------------------------------------------

study_sets = st.integers(2, 10).flatmap(
    lambda k: st.tuples(
        st.lists(st.floats(-50, 50), min_size=k, max_size=k),
        st.lists(st.floats(1e-3, 1e2), min_size=k, max_size=k),
    )
)


@given(study_sets)
@settings(max_examples=200)
def test_heterogeneity_ranges(data):
    theta, v = data
    r = meta.pool(ests(theta, v))
    assert r.Q >= 0
    assert 0 <= r.I2 < 1
    assert r.tau2 >= 0
    for w in (r.weights_common, r.weights_random):
        assert abs(sum(w) - 1) <= 1e-12
        assert all(x > 0 for x in w)
    assert min(theta) - 1e-9 <= r.pooled_common <= max(theta) + 1e-9
    if r.tau2 == 0:
        assert r.pooled_random == r.pooled_common
        assert r.weights_random == r.weights_common


@given(study_sets, st.floats(1e-3, 1e3))
@settings(max_examples=200)
def test_variance_scaling(data, c):
    theta, v = data
    a = meta.pool(ests(theta, v))
    b = meta.pool(ests(theta, [c * x for x in v]))
    scale = max(abs(t) for t in theta) or 1.0
    assert b.pooled_common == pytest.approx(a.pooled_common, rel=1e-12, abs=1e-12 * scale)
    assert b.se_common == pytest.approx(a.se_common * math.sqrt(c), rel=1e-12)


@given(study_sets, st.randoms(use_true_random=False))
@settings(max_examples=100)
def test_permutation_invariance(data, rnd):
    theta, v = data
    idx = list(range(len(theta)))
    rnd.shuffle(idx)
    a = meta.pool(ests(theta, v))
    b = meta.pool(ests([theta[i] for i in idx], [v[i] for i in idx]))
    scale = max(abs(t) for t in theta) or 1.0
    for f in ("pooled_common", "pooled_random"):
        assert getattr(b, f) == pytest.approx(getattr(a, f), rel=1e-10, abs=1e-10 * scale)
    for f in ("se_common", "se_random", "I2", "z_random"):
        assert getattr(b, f) == pytest.approx(getattr(a, f), rel=1e-9, abs=1e-12)
    assert b.Q == pytest.approx(a.Q, rel=1e-9, abs=1e-9)
    assert b.tau2 == pytest.approx(a.tau2, rel=1e-8, abs=1e-12)
    assert_allclose(b.weights_common, [a.weights_common[i] for i in idx], rtol=1e-12)


# --- residuals and plot data --------------------------------------------------


def test_residuals():
    for theta, v, expected in [([5, 5, 5], [1, 2, 3], [0, 0, 0]), ([0, 2], [1, 1], [-1, 1]), ([1, 2, 3], [1, 1, 1], [-1, 0, 1])]:
        e = ests(theta, v)
        assert_allclose(meta.standardized_residuals(e, meta.pool(e)), expected, atol=1e-12)


def test_residuals_length_mismatch():
    e = ests([1, 2, 3], [1, 1, 1])
    with pytest.raises(ShapeError):
        meta.standardized_residuals(e[:2], meta.pool(e))


def test_plot_ci_quantile():
    e = ests([0, 0], [1, 1])
    pd = meta.plot_data(e, meta.pool(e), 0.95)
    assert pd.forest_rows[0].ci_low == pytest.approx(-1.959964, abs=5e-7)
    assert pd.forest_rows[0].ci_high == pytest.approx(1.959964, abs=5e-7)


def test_plot_homogeneous():
    e = ests([3, 3, 3], [1, 2, 4])
    pd = meta.plot_data(e, meta.pool(e))
    assert {r.effect for r in pd.forest_rows} == {3.0}
    assert {x for x, _ in pd.funnel_points} == {3.0}


def test_plot_reports_a35(reports_table):
    e = meta.single_source_estimates(reports_table, "a35", {r.source_id: (0.1, 1) for r in reports_table.rows})
    pd = meta.plot_data(e, meta.pool(e))
    assert len(pd.forest_rows) == 12
    assert [r.study_id for r in pd.forest_rows[-2:]] == ["Common effect", "Random effects"]
    assert len(pd.funnel_points) == 10 and len(pd.residuals) == 10
    assert all(r.ci_low <= r.effect <= r.ci_high for r in pd.forest_rows)
    assert meta.PlotData.from_dict(pd.to_dict()) == pd


@pytest.mark.parametrize("ci", [0, 1, -0.5, 1.5])
def test_plot_ci_domain(ci):
    e = ests([0, 1], [1, 1])
    with pytest.raises(DomainError):
        meta.plot_data(e, meta.pool(e), ci)


def test_two_arm_estimates_reports(reports_table):
    e = meta.two_arm_estimates(reports_table, "a34", "a35")
    assert len(e) == 10
    assert e[0].study_id == "Wall Street Journal, 2024"
    r = meta.pool(e)
    assert len(r.weights_common) == len(r.weights_random) == 10


# --- fusion -------------------------------------------------------------------


def test_fuse_examples():
    fused, w = meta.fuse_predictions([10, 20], [1, 1])
    assert fused == pytest.approx(15) and w == pytest.approx([0.5, 0.5])
    fused, w = meta.fuse_predictions([10, 20], [1, 4])
    assert fused == pytest.approx(12) and w == pytest.approx([0.8, 0.2])
    fused, _ = meta.fuse_predictions(A35_COUNTS, [1.0] * 10)
    assert fused == pytest.approx(46800, rel=1e-14)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.floats(1e-3, 1e3))
def test_fuse_equal_variances_is_mean(preds, v):
    fused, _ = meta.fuse_predictions(preds, [v] * len(preds))
    assert fused == pytest.approx(np.mean(preds), rel=1e-9, abs=1e-6)


def test_fuse_errors():
    with pytest.raises(SizeError):
        meta.fuse_predictions([], [])
    with pytest.raises(DomainError):
        meta.fuse_predictions([1, 2], [1, 0])


def test_bias_rate_file(data_dir):
    rates = meta.parse_bias_rates((data_dir / "bias_rates_example.csv").read_text())
    assert rates["Wall Street Journal"] == (0.10, 4)
    assert len(rates) == 10
