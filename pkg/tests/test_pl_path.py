import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmtransforms import pl_path as pl
from bmtransforms.errors import DomainError, KnotLimitError
from bmtransforms.pl_path import Grid, PlPath, from_knots, zero_path


def knots_of(p):
    return np.column_stack([p.times, p.values])


@st.composite
def pl_paths(draw, min_knots=2, max_knots=12, horizon=1.0):
    k = draw(st.integers(min_knots, max_knots))
    inner = draw(st.lists(st.floats(0.01, 0.99), min_size=k - 2, max_size=k - 2,
                          unique=True))
    times = np.concatenate([[0.0], np.sort(inner), [1.0]]) * horizon
    if np.any(np.diff(times) < 1e-6):
        times = np.linspace(0.0, horizon, k)
    values = draw(st.lists(st.floats(-3, 3), min_size=k, max_size=k))
    return PlPath(times, values)


def dense_values(p, n=4001):
    # knots included, so extrema of the samples are exact
    s = np.union1d(np.linspace(0.0, p.horizon, n), p.times)
    return s, p(s)


class TestConstruction:
    def test_rejects_unsorted_times(self):
        with pytest.raises(DomainError):
            PlPath([0, 1, 1], [0, 1, 2])

    def test_rejects_nonzero_start_time(self):
        with pytest.raises(DomainError):
            PlPath([0.5, 1], [0, 1])

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            PlPath([0, 1], [0, np.nan])

    def test_rejects_single_knot(self):
        with pytest.raises(DomainError):
            PlPath([0.0], [1.0])

    def test_knot_cap(self):
        with pytest.raises(KnotLimitError):
            PlPath(np.linspace(0, 1, 11), np.zeros(11), max_knots=10)

    def test_arrays_are_read_only(self, tent):
        with pytest.raises(ValueError):
            tent.values[0] = 3.0

    def test_grid_times(self):
        g = Grid(2.0, 8)
        assert g.dt == 0.25
        assert g.times[-1] == 2.0 and g.times.size == 9


class TestEvaluate:
    def test_midpoint_of_down_segment(self, tent):
        assert tent(1.5) == 0.0

    def test_zero_path(self):
        assert np.all(zero_path(3.0)(np.linspace(0, 3, 7)) == 0.0)

    def test_linear(self, unit_line):
        assert unit_line(0.25) == 0.25

    def test_outside_horizon(self, tent):
        with pytest.raises(DomainError):
            tent(2.5)
        with pytest.raises(DomainError):
            tent(-0.1)


class TestExtrema:
    def test_running_max_tent(self, tent):
        m = pl.running_max(tent)
        np.testing.assert_array_equal(knots_of(m), [[0, 0], [1, 1], [2, 1]])

    def test_running_max_inserts_crossing(self, vee):
        m = pl.running_max(vee)
        assert 1.5 in m.times
        assert m(1.5) == 0.0 and m(0.7) == 0.0
        assert m(1.75) == pytest.approx(0.5)
        assert m.terminal == 1.0

    def test_running_max_zero(self, zero):
        assert pl.running_max(zero) == zero

    def test_suffix_max_tent(self, tent):
        m = pl.suffix_extremum(tent, "max")
        np.testing.assert_allclose(m(np.array([0.0, 1.0, 2.0])), [1, 1, -1])

    def test_suffix_min_of_increasing_path(self, unit_line):
        assert pl.sup_distance(pl.suffix_extremum(unit_line, "min"), unit_line) == 0.0

    def test_suffix_extremum_zero(self, zero):
        for kind in ("max", "min"):
            assert pl.sup_distance(pl.suffix_extremum(zero, kind), zero) == 0.0

    def test_bad_kind(self, tent):
        with pytest.raises(DomainError):
            pl.suffix_extremum(tent, "median")

    @settings(max_examples=60, deadline=None)
    @given(pl_paths())
    def test_running_max_matches_dense_evaluation(self, p):
        s, v = dense_values(p)
        np.testing.assert_allclose(pl.running_max(p)(s), np.maximum.accumulate(v),
                                   atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(pl_paths())
    def test_suffix_max_matches_dense_evaluation(self, p):
        s, v = dense_values(p)
        ref = np.maximum.accumulate(v[::-1])[::-1]
        np.testing.assert_allclose(pl.suffix_extremum(p, "max")(s), ref, atol=1e-12)


class TestReversal:
    def test_linear(self, unit_line):
        np.testing.assert_array_equal(knots_of(pl.time_reverse(unit_line)),
                                      [[0, 0], [1, -1]])

    def test_tent(self, tent):
        np.testing.assert_array_equal(knots_of(pl.time_reverse(tent)),
                                      [[0, 0], [1, 2], [2, 1]])

    def test_zero(self, zero):
        assert pl.time_reverse(zero) == zero

    @settings(max_examples=40, deadline=None)
    @given(pl_paths())
    def test_involution_up_to_start(self, p):
        back = pl.time_reverse(pl.time_reverse(p))
        assert pl.sup_distance(back, pl.shift(p, -p.start)) < 1e-12


class TestAlgebra:
    def test_cancellation(self, tent):
        assert pl.sup_distance(pl.affine_combine(1, tent, -1, tent),
                               zero_path(2.0)) == 0.0

    def test_zero_plus_path(self, tent):
        assert pl.sup_distance(pl.affine_combine(2, zero_path(2.0), 1, tent), tent) == 0.0

    def test_pointwise_addition(self):
        p = from_knots([(0, 0), (2, 2)])
        q = from_knots([(0, 0), (1, 1), (2, 0)])
        np.testing.assert_array_equal(knots_of(pl.affine_combine(1, p, 1, q)),
                                      [[0, 0], [1, 2], [2, 2]])

    def test_horizon_mismatch(self, tent, unit_line):
        with pytest.raises(DomainError):
            pl.affine_combine(1, tent, 1, unit_line)

    def test_abs_inserts_zero_crossing(self):
        p = from_knots([(0, -1), (2, 1)])
        np.testing.assert_array_equal(knots_of(pl.abs_path(p)),
                                      [[0, 1], [1, 0], [2, 1]])

    def test_abs_of_nonnegative(self, unit_line, zero):
        assert pl.abs_path(unit_line) == unit_line
        assert pl.abs_path(zero) == zero

    @settings(max_examples=60, deadline=None)
    @given(pl_paths(), pl_paths())
    def test_pointwise_min_matches_dense(self, p, q):
        s = np.linspace(0, 1, 4001)
        np.testing.assert_allclose(pl.pointwise_min(p, q)(s), np.minimum(p(s), q(s)),
                                   atol=1e-12)

    def test_merge_collapses_nearby_times(self):
        t = pl.merge_times(np.array([0.0, 0.5, 1.0]), np.array([0.5 + 1e-17, 0.25]), 1.0)
        np.testing.assert_array_equal(t, [0.0, 0.25, 0.5, 1.0])


class TestSupDistance:
    def test_identical(self, tent):
        assert pl.sup_distance(tent, tent) == 0.0

    def test_endpoint(self, unit_line, zero):
        assert pl.sup_distance(unit_line, zero) == 1.0

    def test_interior_knots(self):
        p = from_knots([(0, 0), (2, 0)])
        q = from_knots([(0, 1), (1, -1), (2, 1)])
        assert pl.sup_distance(p, q) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(pl_paths(), pl_paths())
    def test_dominates_dense_sampling(self, p, q):
        s = np.linspace(0, 1, 2001)
        assert pl.sup_distance(p, q) >= np.max(np.abs(p(s) - q(s))) - 1e-12


def test_csv_round_trip(tmp_path, tent):
    f = tmp_path / "p.csv"
    pl.write_csv(tent, f)
    assert pl.read_csv(f) == tent


def test_csv_bad_header(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("t,x\n0,0\n1,1\n")
    with pytest.raises(DomainError):
        pl.read_csv(f)
