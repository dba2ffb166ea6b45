import json

import numpy as np
import pytest

from bmtransforms import identities as idt
from bmtransforms import pl_path as pl
from bmtransforms.errors import ConfigurationError, PreconditionError
from bmtransforms.pl_path import PlPath, linear_path, zero_path

PATHS = idt.random_paths(20, 7)
EXACT = [n for n, i in idt.IDENTITIES.items() if not i.refined]
REFINED = [n for n, i in idt.IDENTITIES.items() if i.refined]


def bump_second_knot(p):
    v = p.values.copy()
    v[len(v) // 2] += 0.1
    return PlPath(p.times, v)


def test_registry_has_fourteen_entries():
    assert len(idt.IDENTITY_NAMES) == 14


@pytest.mark.parametrize("name", EXACT)
def test_exact_identities_hold(name):
    r = idt.check_identity(name, PATHS, seed=7)
    assert r.passed, r
    assert r.refinement_trace is None and r.n_paths == 20


@pytest.mark.parametrize("name", REFINED)
def test_refined_identities_converge(name):
    r = idt.check_identity(name, PATHS[:5], seed=7, grids=(32, 128))
    residuals = [x for _, x in r.refinement_trace]
    assert residuals[1] < residuals[0]
    assert residuals[1] < 1e-3


@pytest.mark.parametrize("name", [n for n in EXACT if n not in ("zform_consistency", "endpoint_values")]
                         + ["tc_involution"])
def test_injected_fault_detected(name):
    r = idt.check_identity(name, PATHS[:3], fault=bump_second_knot, grids=(64, 256))
    assert not r.passed
    assert r.max_residual >= 0.05


def test_endpoint_values_zero_path():
    assert idt.check_identity("endpoint_values", [zero_path()]).max_residual == 0.0


def test_unknown_identity():
    with pytest.raises(ConfigurationError):
        idt.check_identity("t_squared", PATHS)


def test_zero_start_required():
    with pytest.raises(PreconditionError):
        idt.check_identity("m_involution", [pl.shift(PATHS[0], 1.0)])


def test_nonzero_start_allowed_where_identity_is_general():
    p = pl.shift(PATHS[0], 1.0)
    for name in ("g_involution", "s1_roundtrip", "s2_roundtrip", "mmin_mirror"):
        assert idt.check_identity(name, [p]).passed


def test_random_paths_shape_and_determinism():
    a = idt.random_paths(50, 3)
    b = idt.random_paths(10, 3)
    assert all(p == q for p, q in zip(a, b))
    assert all(8 <= len(p) <= 64 and p.start == 0.0 for p in a)
    assert max(np.abs(p.values).max() for p in a) <= 3.0
    assert len(idt.random_path(3, 0, n_knots=16)) == 16


def test_report_json():
    d = idt.check_identity("tc_involution", PATHS[:2], grids=(16, 32)).to_dict()
    json.dumps(d)
    assert set(d) == {"identity_name", "n_paths", "max_residual", "tolerance",
                      "refinement_trace", "passed", "seed"}


class TestSweep:
    CS_UP = [2.0**k for k in range(9)]
    CS_DOWN = [2.0**-k for k in range(9)]

    def test_linear_path_distances_vanish(self):
        r = idt.sweep_c(linear_path(1.0), "to_infinity", self.CS_UP)
        assert max(d for _, d in r.refinement_trace) < 1e-12
        assert r.passed

    @pytest.mark.parametrize("direction", ["to_zero", "to_infinity"])
    def test_zero_path(self, direction):
        r = idt.sweep_c(zero_path(), direction, self.CS_UP)
        assert all(d == 0.0 for _, d in r.refinement_trace)

    def test_to_zero_random_path(self):
        r = idt.sweep_c(idt.random_path(7, 0, n_knots=16), "to_zero", self.CS_DOWN)
        assert r.passed

    def test_to_infinity_needs_zero_start(self):
        with pytest.raises(PreconditionError):
            idt.sweep_c(pl.shift(PATHS[0], 0.5), "to_infinity", self.CS_UP)

    def test_bad_direction(self):
        with pytest.raises(ConfigurationError):
            idt.sweep_c(PATHS[0], "sideways", self.CS_UP)


class TestLogSumExpLimit:
    def test_dominant_first_term(self):
        c = np.arange(1.0, 51.0)
        r = idt.log_sum_exp_limit_check(2 * c, c, c, 2.0, 1.0)
        assert r.passed
        assert r.max_residual <= np.log(2) / 50 + 1e-12

    def test_tie_is_log2_over_c(self):
        c = np.arange(1.0, 21.0)
        r = idt.log_sum_exp_limit_check(np.zeros(20), np.zeros(20), c, 0.0, 0.0)
        np.testing.assert_allclose([x for _, x in r.refinement_trace], np.log(2) / c,
                                   rtol=1e-14)
        assert r.passed

    def test_dominant_second_term(self):
        c = np.arange(1.0, 51.0)
        assert idt.log_sum_exp_limit_check(-c, 3 * c, c, -1.0, 3.0).passed

    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            idt.log_sum_exp_limit_check([1.0], [1.0, 2.0], [1.0], 0, 0)


class TestDini:
    def test_constant_family(self):
        lim = idt.random_path(1, 0, n_knots=2)
        lim = PlPath(lim.times, [0.0, 1.0])
        r = idt.dini_uniform_check([(k, lim) for k in range(5)], lim)
        assert r.passed and r.max_residual == 0.0

    def test_non_monotone_member_rejected(self, tent):
        with pytest.raises(PreconditionError):
            idt.dini_uniform_check([(1, tent)], tent)

    def test_injected_fault(self):
        p = idt.random_path(7, 0, n_knots=16)
        if p.terminal < 0:
            p = -p
        fam, lim = idt.tc_minus_identity_family(p, [2.0**k for k in range(6)])
        assert idt.dini_uniform_check(fam, lim).passed
        c3, f3 = fam[3]
        v = f3.values.copy()
        v[0] += 0.1
        fam[3] = (c3, PlPath(f3.times, v))
        assert not idt.dini_uniform_check(fam, lim).passed
