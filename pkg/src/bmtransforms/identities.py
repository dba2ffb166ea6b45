"""Deterministic path identities, packaged as reportable checks.

Exact identities (involutions, commutation with time reversal, Pitman
preservation, reconstructions...) are checked on the exact PL algebra and
must hold to rounding.  Identities that involve the sampled ``Tc`` report a
refinement trace over grid sizes and pass when the residual strictly
decreases and ends below tolerance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import pl_path as pl
from .errors import ConfigurationError, PreconditionError
from .exp_functional import LogFunctional
from .pl_path import Grid, PlPath
from .transforms import (
    reconstruct_S1,
    reconstruct_S2,
    tc_value,
    transform_G,
    transform_M,
    transform_M_min,
    transform_P,
    transform_Tc,
    z_form_value,
)

EXACT_TOL = 1e-9
REFINEMENT_GRIDS = (64, 256, 1024)
MONOTONE_SLACK = 1e-10
#: final residual must be below ``first / CONVERGENCE_FACTOR`` in c-sweeps
CONVERGENCE_FACTOR = 50.0


@dataclass
class IdentityReport:
    identity_name: str
    n_paths: int
    max_residual: float
    tolerance: float
    refinement_trace: list | None
    passed: bool
    seed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.refinement_trace is not None:
            d["refinement_trace"] = [list(map(float, p)) for p in self.refinement_trace]
        return d


Fault = Callable[[PlPath], PlPath]


def _id(p: PlPath) -> PlPath:
    return p


# ---------------------------------------------------------------------------
# random fixtures
# ---------------------------------------------------------------------------


def random_path(seed: int, index: int, n_knots: int | tuple = (8, 64),
                value_range: float = 3.0, horizon: float = 1.0,
                pin_start: bool = True) -> PlPath:
    """Seeded random PL path; path ``index`` of ``seed`` never depends on others.

    Knot count uniform in ``n_knots`` (inclusive) unless an int is given;
    interior knot times uniform on ``(0, t)``; values uniform on
    ``[-value_range, value_range]`` with ``phi_0 = 0`` when ``pin_start``.
    """
    gen = np.random.default_rng([int(seed), int(index)])
    if isinstance(n_knots, tuple):
        k = int(gen.integers(n_knots[0], n_knots[1] + 1))
    else:
        k = int(n_knots)
    while True:
        inner = np.sort(gen.uniform(0.0, horizon, k - 2))
        times = np.concatenate([[0.0], inner, [horizon]])
        if np.all(np.diff(times) > pl.KNOT_MERGE_RTOL * horizon * 10):
            break
    values = gen.uniform(-value_range, value_range, k)
    if pin_start:
        values[0] = 0.0
    return PlPath(times, values)


def random_paths(n_paths: int, seed: int, **kwargs) -> list[PlPath]:
    return [random_path(seed, i, **kwargs) for i in range(n_paths)]


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------


def _needs_zero_start(name, path):
    if path.start != 0.0:
        raise PreconditionError(f"{name} requires phi_0 = 0")


def _m_involution(p, fault, **_):
    return pl.sup_distance(transform_M(fault(transform_M(p))), p)


def _g_involution(p, fault, **_):
    return pl.sup_distance(transform_G(fault(transform_G(p))), p)


def _m_reversal(p, fault, **_):
    return pl.sup_distance(pl.time_reverse(fault(transform_M(p))),
                           transform_M(pl.time_reverse(p)))


def _g_reversal(p, fault, **_):
    return pl.sup_distance(pl.time_reverse(fault(transform_G(p))),
                           transform_G(pl.time_reverse(p)))


def _pitman_preservation(p, fault, **_):
    return pl.sup_distance(transform_P(fault(transform_M(p))), transform_P(p))


def _suffix_max_reversal(p, fault, **_):
    m = fault(transform_M(p))
    lhs = pl.affine_combine(2.0, pl.suffix_extremum(m, "max"), -1.0, m)
    rhs = pl.affine_combine(2.0, pl.suffix_extremum(p, "max"), -1.0, p)
    return pl.sup_distance(lhs, pl.shift(rhs, -2.0 * p.terminal))


def _endpoint_values(p, fault, c=1.0, **_):
    m = fault(transform_M(p))
    t = p.horizon
    return max(
        abs(m.start),
        abs(m.terminal + p.terminal),
        abs(tc_value(p, c, 0.0) - p.start),
        abs(tc_value(p, c, t) + p.terminal),
    )


def _s1_roundtrip(p, fault, **_):
    return pl.sup_distance(fault(reconstruct_S1(transform_P(p), p.terminal)), p)


def _s2_roundtrip(p, fault, **_):
    return pl.sup_distance(fault(reconstruct_S2(transform_P(p), p.terminal)),
                           transform_M(p))


def _mmin_mirror(p, fault, **_):
    return pl.sup_distance(fault(transform_M_min(p)), -transform_M(-p))


def _zform(p, fault, c=1.0, seed=0, index=0, **_):
    gen = np.random.default_rng([int(seed), int(index), 4])
    s = np.sort(gen.uniform(0.0, p.horizon, 20))
    s = s[s > 0]
    phi = pl.evaluate(p, s)
    tc = tc_value(p, c, s)
    back = z_form_value(p, c, s, -1)
    fwd = z_form_value(p, c, s, +1)
    err_back = np.abs(back - phi) / np.maximum(1.0, np.abs(phi))
    err_fwd = np.abs(fwd - tc) / np.maximum(1.0, np.abs(tc))
    return float(max(err_back.max(), err_fwd.max()))


def _tc_involution(p, fault, n, c=1.0, **_):
    g = Grid(p.horizon, n)
    once = fault(transform_Tc(p, c, g))
    return pl.sup_distance(transform_Tc(once, c, g), p)


def _inverse_functional_shift(p, fault, n, c=1.0, **_):
    # 1/A_s(c Tc(phi)) = 1/A_s(c phi) + (exp(2 c phi_t) - 1) / A_t(c phi)
    once = fault(transform_Tc(p, c, Grid(p.horizon, n)))
    s = once.times[1:]
    lhs = np.exp(-LogFunctional.build(once, c).at(s))
    lf = LogFunctional.build(p, c)
    rhs = np.exp(-lf.at(s)) + np.expm1(2.0 * c * p.terminal) * np.exp(-lf.log_total)
    return float(np.max(np.abs(lhs - rhs) / rhs))


def _z_preserved(p, fault, n, c=1.0, **_):
    # log Z_s(c Tc(phi)) = log Z_s(c phi)
    once = fault(transform_Tc(p, c, Grid(p.horizon, n)))
    s = once.times[1:]
    lhs = LogFunctional.build(once, c).at(s) - c * once.values[1:]
    rhs = LogFunctional.build(p, c).at(s) - c * pl.evaluate(p, s)
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


@dataclass(frozen=True)
class _Identity:
    residual: Callable
    tolerance: float
    refined: bool = False
    zero_start: bool = False


IDENTITIES: dict[str, _Identity] = {
    "m_involution": _Identity(_m_involution, EXACT_TOL, zero_start=True),
    "g_involution": _Identity(_g_involution, EXACT_TOL),
    "m_reversal": _Identity(_m_reversal, EXACT_TOL, zero_start=True),
    "g_reversal": _Identity(_g_reversal, EXACT_TOL, zero_start=True),
    "pitman_preservation": _Identity(_pitman_preservation, EXACT_TOL, zero_start=True),
    "suffix_max_reversal": _Identity(_suffix_max_reversal, EXACT_TOL, zero_start=True),
    "endpoint_values": _Identity(_endpoint_values, EXACT_TOL, zero_start=True),
    "tc_involution": _Identity(_tc_involution, 1e-4, refined=True),
    "inverse_functional_shift": _Identity(_inverse_functional_shift, 1e-4, refined=True),
    "s1_roundtrip": _Identity(_s1_roundtrip, EXACT_TOL),
    "s2_roundtrip": _Identity(_s2_roundtrip, EXACT_TOL),
    "zform_consistency": _Identity(_zform, 1e-8),
    "mmin_mirror": _Identity(_mmin_mirror, EXACT_TOL),
    "z_preserved": _Identity(_z_preserved, 1e-4, refined=True),
}

IDENTITY_NAMES = tuple(IDENTITIES)


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _nonincreasing(values, slack=MONOTONE_SLACK) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def check_identity(kind: str, paths: Iterable[PlPath], tolerance: float | None = None,
                   seed: int = 0, c: float = 1.0,
                   grids: Sequence[int] = REFINEMENT_GRIDS,
                   fault: Fault | None = None) -> IdentityReport:
    """Run one registered identity over ``paths``.

    ``fault`` (testing hook) is applied to the transformed path before it is
    compared, to confirm that a broken transform is caught.
    """
    if kind not in IDENTITIES:
        raise ConfigurationError(f"unknown identity {kind!r}; known: {IDENTITY_NAMES}")
    ident = IDENTITIES[kind]
    tol = ident.tolerance if tolerance is None else tolerance
    fault = fault or _id
    paths = list(paths)
    if ident.zero_start:
        for p in paths:
            _needs_zero_start(kind, p)
    if not ident.refined:
        res = [ident.residual(p, fault, c=c, seed=seed, index=i) for i, p in enumerate(paths)]
        worst = float(max(res)) if res else 0.0
        return IdentityReport(kind, len(paths), worst, tol, None, worst <= tol, int(seed))
    trace = []
    for n in grids:
        res = [ident.residual(p, fault, n=n, c=c, seed=seed, index=i)
               for i, p in enumerate(paths)]
        trace.append((int(n), float(max(res)) if res else 0.0))
    final = trace[-1][1]
    residuals = [r for _, r in trace]
    trend = _strictly_decreasing(residuals) or max(residuals) == 0.0
    return IdentityReport(kind, len(paths), final, tol, trace, trend and final <= tol,
                          int(seed))


def run_identity_suite(paths: Sequence[PlPath], seed: int = 0,
                       names: Sequence[str] = IDENTITY_NAMES, executor=None
                       ) -> list[IdentityReport]:
    """All registered identities, in registry order."""
    if executor is None:
        return [check_identity(name, paths, seed=seed) for name in names]
    futures = [executor.submit(check_identity, name, paths, seed=seed) for name in names]
    return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# c-sweeps and the two calculus checks
# ---------------------------------------------------------------------------


def sweep_c(path: PlPath, direction: str, c_values: Sequence[float],
            grid: Grid | None = None, seed: int = 0) -> IdentityReport:
    """Distance from ``Tc(phi)`` to its limit along ``c_values``.

    ``to_zero`` compares with ``G(phi)``, ``to_infinity`` with ``M(phi)`` (the
    latter requires ``phi_0 = 0``).  ``Tc`` is also sampled at the knots of
    the limit so that the sup distance is not floored by interpolating the
    limit's kinks.  Passes when the trace is nonincreasing (slack 1e-10) and
    the last distance is below the first over 50; a trace that is zero to
    within the slack throughout also passes.
    """
    if direction in ("to_zero", "to-zero"):
        limit = transform_G(path)
        name = "sweep_c[to_zero]"
    elif direction in ("to_infinity", "to-infinity"):
        if path.start != 0.0:
            raise PreconditionError("the c -> infinity limit requires phi_0 = 0")
        limit = transform_M(path)
        name = "sweep_c[to_infinity]"
    else:
        raise ConfigurationError(f"unknown direction {direction!r}")
    c_values = [float(c) for c in c_values]
    if not c_values:
        raise ConfigurationError("need at least one c value")
    trace = [
        (c, pl.sup_distance(transform_Tc(path, c, grid, extra_times=limit.times), limit))
        for c in c_values
    ]
    d = [r for _, r in trace]
    tol = max(d[0] / CONVERGENCE_FACTOR, MONOTONE_SLACK)
    trivial = max(d) <= MONOTONE_SLACK
    passed = trivial or (_nonincreasing(d) and d[-1] < d[0] / CONVERGENCE_FACTOR)
    return IdentityReport(name, 1, d[-1], tol, trace, bool(passed), int(seed))


def log_sum_exp_limit_check(log_a, log_b, c, alpha: float, beta: float,
                tolerance: float | None = None) -> IdentityReport:
    """``(1/c_n) log(a_n + b_n) -> max(alpha, beta)``.

    The residual at the last index is compared with ``tolerance`` (default
    ``log(2) / c_last + 1e-12``, the worst case when both terms tie).
    """
    log_a, log_b, c = (np.asarray(x, dtype=float) for x in (log_a, log_b, c))
    if not (log_a.shape == log_b.shape == c.shape) or log_a.ndim != 1 or log_a.size == 0:
        raise ConfigurationError("log_a, log_b and c must be nonempty and of equal length")
    if np.any(c <= 0):
        raise ConfigurationError("c must be positive")
    res = np.abs(np.logaddexp(log_a, log_b) / c - max(alpha, beta))
    tol = np.log(2.0) / c[-1] + 1e-12 if tolerance is None else tolerance
    trace = list(zip(c.tolist(), res.tolist()))
    return IdentityReport("log_sum_exp_limit", int(c.size), float(res[-1]), float(tol), trace,
                          bool(res[-1] <= tol), 0)


def _monotone(values, slack=1e-12) -> bool:
    d = np.diff(values)
    return bool(np.all(d >= -slack) or np.all(d <= slack))


def dini_uniform_check(family: Sequence[tuple[float, PlPath]], limit: PlPath,
                       slack: float = MONOTONE_SLACK) -> IdentityReport:
    """Uniform-convergence check for a family of monotone functions.

    ``family`` holds ``(index, function)`` pairs in increasing index order.
    Every member must be monotone in ``s`` (else :class:`PreconditionError`);
    the check passes when the sup distances to ``limit`` are nonincreasing
    along the index, within ``slack``.
    """
    trace = []
    for idx, f in family:
        if not _monotone(f.values):
            raise PreconditionError(f"family member {idx} is not monotone")
        trace.append((float(idx), pl.sup_distance(f, limit)))
    d = [r for _, r in trace]
    return IdentityReport("dini_uniform", len(trace), d[-1] if d else 0.0, slack, trace,
                          _nonincreasing(d, slack), 0)


def tc_minus_identity_family(path: PlPath, c_values: Sequence[float],
                             grid: Grid | None = None):
    """``[(c, Tc(phi) - phi)]`` and the limit ``M(phi) - phi`` for the Dini check."""
    limit_m = transform_M(path)
    family = [
        (c, pl.affine_combine(1.0, transform_Tc(path, c, grid, extra_times=limit_m.times),
                              -1.0, path))
        for c in c_values
    ]
    return family, pl.affine_combine(1.0, limit_m, -1.0, path)
