from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from numpy.testing import assert_allclose, assert_array_equal

from sitaware import preprocess as pp
from sitaware.errors import DomainError, SchemaError, ShapeError, SizeError


def ds(X, names=None, y=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"c{i}" for i in range(X.shape[1])]
    return pp.Dataset(names, X, y)


def test_dataset_invariants():
    with pytest.raises(ShapeError):
        pp.Dataset(["a"], [[1, 2]])
    with pytest.raises(SchemaError):
        pp.Dataset(["a", "a"], [[1, 2]])
    with pytest.raises(ShapeError):
        pp.Dataset(["a"], [[1], [2]], [1, 2, 3])
    d = pp.Dataset(["a"], [[1], [2]], [0, 1])
    assert d.target_name == "Y" and (d.n, d.p) == (2, 1)


def test_fit_reports_a35(reports_table):
    s = pp.minmax_fit(pp.from_report_table(reports_table, ["a35"]))
    assert (s.mins[0], s.maxs[0]) == (31000, 80000)


def test_fit_examples():
    s = pp.minmax_fit(ds([[0, -1], [10, 1], [5, 0]]))
    assert_array_equal(s.mins, [0, -1])
    assert_array_equal(s.maxs, [10, 1])
    assert pp.minmax_fit(ds([[5], [5], [5]])).constant_columns == {0}


def test_fit_tracks_target():
    s = pp.minmax_fit(ds([[0], [2]], y=[3, 7]))
    assert s.names == ("c0", "Y")
    assert_array_equal(s.maxs, [2, 7])


def test_fit_errors():
    with pytest.raises(SizeError):
        pp.minmax_fit(ds(np.zeros((0, 2))))
    with pytest.raises(DomainError):
        pp.minmax_fit(ds([[1.0], [np.inf]]))


def test_apply_reports(reports_table, reports_scaled):
    col = reports_table.column("a35")
    i = col.index(45000)
    assert reports_scaled.X[i, 1] == pytest.approx(14 / 49, abs=1e-12)
    assert reports_scaled.X[i, 1] == pytest.approx(0.285714, abs=5e-7)
    assert_array_equal(reports_scaled.X.min(axis=0), 0.0)
    assert_array_equal(reports_scaled.X.max(axis=0), 1.0)


def test_apply_constant_and_invert():
    d = ds([[5, 1], [5, 3]])
    s = pp.minmax_fit(d)
    out = pp.minmax_apply(s, d)
    assert_array_equal(out.X[:, 0], 0.0)
    assert_array_equal(pp.minmax_invert(s, out).X, d.X)


def test_invert_examples():
    s = pp.Scaler(("a35",), np.array([31000.0]), np.array([80000.0]))
    out = pp.minmax_invert(s, ds([[14 / 49], [0.0], [1.0]], ["a35"]))
    assert_allclose(out.X[:, 0], [45000, 31000, 80000], rtol=1e-12)


def test_column_mismatch():
    s = pp.minmax_fit(ds([[0, 1], [1, 2]]))
    with pytest.raises(ShapeError):
        pp.minmax_apply(s, ds([[0], [1]]))
    with pytest.raises(ShapeError):
        pp.minmax_invert(s, ds([[0], [1]]))


def test_out_of_range_not_clipped():
    s = pp.minmax_fit(ds([[0], [10]]))
    assert_allclose(pp.minmax_apply(s, ds([[-5], [20]])).X[:, 0], [-0.5, 2.0])


def test_synthesize_examples(reports_scaled):
    y = pp.synthesize_target(reports_scaled, (1, 0, 0, 0), 0.0).y
    assert_array_equal(y, reports_scaled.X[:, 0])
    assert_array_equal(pp.synthesize_target(reports_scaled, (0, 0, 0, 0), 0.0).y, 0.0)


def test_synthesize_media_z1(reports_table, reports_scaled):
    i = [r.source_id for r in reports_table.rows].index("Media_z1")
    c = [Fraction(2, 5), Fraction(1, 10), Fraction(2, 5), Fraction(1, 10)]
    x = [Fraction(100, 160), Fraction(19, 49), Fraction(50, 230), Fraction(20, 150)]
    expected = sum(a * b for a, b in zip(c, x))
    assert_allclose(reports_scaled.X[i], [float(v) for v in x], atol=1e-15)
    y = pp.synthesize_target(reports_scaled, noise_sd=0.0).y
    assert y[i] == pytest.approx(float(expected), abs=1e-15)


def test_synthesize_determinism_and_range(reports_scaled):
    a = pp.synthesize_target(reports_scaled, seed=42).y
    b = pp.synthesize_target(reports_scaled, seed=42).y
    c = pp.synthesize_target(reports_scaled, seed=43).y
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    assert np.all((a >= 0) & (a <= 1))
    clipped = pp.synthesize_target(reports_scaled, (3, 3, 3, 3), 0.0).y
    assert clipped.max() == 1.0


def test_synthesize_errors(reports_scaled):
    with pytest.raises(ShapeError):
        pp.synthesize_target(reports_scaled, (1, 2), 0.0)
    with pytest.raises(DomainError):
        pp.synthesize_target(reports_scaled, noise_sd=-1)


def test_serialization(reports_dataset):
    assert pp.parse_csv(pp.to_csv(reports_dataset)).fingerprint() == reports_dataset.fingerprint()
    assert pp.from_dict(pp.to_dict(reports_dataset)).fingerprint() == reports_dataset.fingerprint()
    s = pp.minmax_fit(reports_dataset)
    s2 = pp.Scaler.from_dict(s.to_dict())
    assert s2.names == s.names
    assert_array_equal(s2.mins, s.mins)
    assert s.to_dict()["columns"][0] == {"name": "a34", "min": 0.0, "max": 1.0, "constant": False}


def test_parse_csv_skips_comments():
    d = pp.parse_csv("# seed: 42\na,Y\n0.5,1\n0.25,0\n")
    assert d.feature_names == ("a",)
    assert_array_equal(d.y, [1, 0])
    with pytest.raises(SchemaError):
        pp.parse_csv("a\nxyz\n")


# --- round-trip property ------------------------------------------------------

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
matrices = hnp.arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 5)),
    elements=finite,
)


def check_round_trip(X):
    d = ds(X)
    s = pp.minmax_fit(d)
    scaled = pp.minmax_apply(s, d)
    back = pp.minmax_invert(s, scaled)
    for j in range(X.shape[1]):
        if j in s.constant_columns:
            assert_array_equal(scaled.X[:, j], 0.0)
            continue
        # relative to the column's magnitude: x = 0 has no finite relative scale
        mag = np.max(np.abs(X[:, j]))
        assert_allclose(back.X[:, j], X[:, j], rtol=1e-12, atol=1e-12 * mag)
        assert scaled.X[np.argmin(X[:, j]), j] == 0.0
        assert scaled.X[np.argmax(X[:, j]), j] == 1.0


@given(matrices)
@settings(max_examples=500, deadline=None)
def test_round_trip(X):
    check_round_trip(X)


def test_round_trip_reports(reports_table):
    check_round_trip(pp.from_report_table(reports_table).X)
