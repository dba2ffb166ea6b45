import math

import numpy as np
import pytest

from bmtransforms import rng
from bmtransforms.errors import DomainError
from bmtransforms.pl_path import Grid
from bmtransforms.sampler import SampleSpec, rescale, sample, write_long_csv


class TestPhilox:
    @pytest.mark.parametrize("seed, path, stream", [(0, 0, 0), (123456789, 5, 3),
                                                    (2**64 - 1, 2**40, 1)])
    def test_matches_numpy_bit_generator(self, seed, path, stream):
        # numpy increments its counter before each block
        bg = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64),
                              counter=np.array([0, path, stream, 0], dtype=np.uint64))
        expected = bg.random_raw(40)
        got = rng.raw_words(seed, [path], stream, 44)[0, 4:]
        np.testing.assert_array_equal(got, expected)

    def test_path_streams_do_not_depend_on_batch(self):
        a = rng.normals(7, np.arange(10), 0, 33)
        b = rng.normals(7, np.array([3, 9]), 0, 33)
        np.testing.assert_array_equal(a[[3, 9]], b)

    def test_streams_differ(self):
        assert not np.array_equal(rng.uniforms(1, [0], 0, 8), rng.uniforms(1, [0], 1, 8))

    def test_uniforms_open_interval(self):
        u = rng.uniforms(3, np.arange(50), 0, 400)
        assert u.min() > 0 and u.max() < 1

    def test_normal_moments(self):
        z = rng.normals(11, np.arange(200), 0, 1000).ravel()
        assert abs(z.mean()) < 4 / math.sqrt(z.size)
        assert abs(z.var() - 1) < 0.02

    def test_seed_range(self):
        with pytest.raises(ValueError):
            rng.raw_words(-1, [0], 0, 4)


class TestBrownian:
    def test_moments(self):
        b = sample(SampleSpec(Grid(1.0, 16), 100_000, seed=5))
        x = b.terminal
        assert abs(x.mean()) < 3 / math.sqrt(x.size)
        assert abs(x.var() - 1) < 0.05

    def test_drift_mean(self):
        b = sample(SampleSpec(Grid(1.0, 16), 20_000, seed=6, drift=2.0))
        x = b.terminal
        assert abs(x.mean() - 2.0) < 3 * x.std(ddof=1) / math.sqrt(x.size)

    def test_deterministic(self):
        spec = SampleSpec(Grid(1.0, 32), 50, seed=9)
        a, b = sample(spec), sample(spec)
        np.testing.assert_array_equal(a.values, b.values)

    def test_prefix_stable_in_n_paths(self):
        small = sample(SampleSpec(Grid(1.0, 32), 5, seed=9))
        big = sample(SampleSpec(Grid(1.0, 32), 5000, seed=9))
        np.testing.assert_array_equal(small.values, big.values[:5])

    def test_starts_at_zero_on_grid(self):
        b = sample(SampleSpec(Grid(2.0, 8), 3, seed=1))
        np.testing.assert_array_equal(b.values[:, 0], 0.0)
        assert b[0].horizon == 2.0 and len(b[0]) == 9

    def test_bridge_maxima_knots(self):
        spec = SampleSpec(Grid(1.0, 8), 200, seed=2, extrema="max")
        b = sample(spec)
        g = b.at_grid()
        np.testing.assert_array_equal(g, sample(spec.replace(extrema=None)).values)
        peaks = b.values[:, 1::2]
        assert np.all(peaks >= np.maximum(g[:, :-1], g[:, 1:]))
        assert np.all(np.diff(b.times, axis=1) > 0)

    def test_bridge_max_law(self):
        # P(max over [0,1] of B <= 1) = 2 Phi(1) - 1
        b = sample(SampleSpec(Grid(1.0, 4), 40_000, seed=3, extrema="max"))
        p_hat = np.mean(b.values.max(axis=1) <= 1.0)
        p = math.erf(1 / math.sqrt(2))
        assert abs(p_hat - p) < 4 * math.sqrt(p * (1 - p) / 40_000)

    def test_bridge_minima(self):
        b = sample(SampleSpec(Grid(1.0, 8), 100, seed=2, extrema="min"))
        g = b.at_grid()
        assert np.all(b.values[:, 1::2] <= np.minimum(g[:, :-1], g[:, 1:]))

    def test_invalid_spec(self):
        with pytest.raises(DomainError):
            SampleSpec(Grid(1.0, 8), 0)
        with pytest.raises(DomainError):
            SampleSpec(Grid(1.0, 8), 5, kind="levy")
        with pytest.raises(DomainError):
            Grid(1.0, 0)


class TestBessel:
    def test_nonnegative_and_starts_at_zero(self):
        b = sample(SampleSpec(Grid(1.0, 16), 500, seed=4, kind="bessel3"))
        assert np.all(b.values >= 0)
        np.testing.assert_array_equal(b.values[:, 0], 0.0)

    def test_chi3_mean(self):
        b = sample(SampleSpec(Grid(1.0, 4), 100_000, seed=4, kind="bessel3"))
        x = b.terminal
        target = 2 * math.sqrt(2 / math.pi)
        assert abs(x.mean() - target) < 3 * x.std(ddof=1) / math.sqrt(x.size)

    def test_deterministic(self):
        spec = SampleSpec(Grid(1.0, 16), 20, seed=8, kind="bessel3")
        np.testing.assert_array_equal(sample(spec).values, sample(spec).values)


def test_rescale():
    b = sample(SampleSpec(Grid(1.0, 4), 1, seed=0))
    r = rescale(b[0], 3.0)
    assert r.horizon == 9.0
    assert r(9.0) == pytest.approx(3.0 * b[0].terminal)


def test_long_csv(tmp_path):
    b = sample(SampleSpec(Grid(1.0, 4), 2, seed=0))
    f = tmp_path / "paths.csv"
    write_long_csv(b, f)
    lines = f.read_text().splitlines()
    assert lines[0] == "path_id,time,value"
    assert len(lines) == 1 + 2 * 5
