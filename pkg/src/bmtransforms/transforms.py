"""Anticipative path transformations.

``transform_G``, ``transform_M``, ``transform_P``, ``transform_M_min`` and the
two reconstruction maps are closed over piecewise-linear paths and return
exact :class:`PlPath` objects.  ``transform_Tc`` is not: its image is smooth
between the knots of the input, so it is evaluated exactly at a set of sample
times and linearly interpolated.

The ``batch_*`` helpers evaluate the same maps at the knots of many paths at
once (arrays of shape ``(n_paths, n_knots)``).  For M, P, G and the minus-min
variant knot values are exact, because running and suffix maxima of a PL path
evaluated at a knot only involve knot values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pl_path as pl
from .errors import DomainError
from .exp_functional import (
    LogFunctional,
    integral_inv_z_squared,
    prefix_log_integrals,
    suffix_log_integrals,
)
from .pl_path import Grid, PlPath

#: default number of uniform steps for sampled transforms
DEFAULT_GRID_STEPS = 1024

_TAGS = ("T", "Tc", "G", "M", "P", "R", "MMin", "S1", "S2")


@dataclass(frozen=True)
class TransformKind:
    """A transformation tag plus its parameter.

    ``T`` is ``Tc`` with ``c = 1``.  ``grid`` only matters for ``T``/``Tc``,
    whose output is sampled; ``None`` means the default 1024-step grid.
    """

    tag: str
    c: float = 1.0
    grid: Grid | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise DomainError(f"unknown transform {self.tag!r}; expected one of {_TAGS}")
        if self.tag == "T" and self.c != 1.0:
            raise DomainError("T is Tc with c = 1")
        if not self.c > 0:
            raise DomainError("Tc requires c > 0")

    @property
    def sampled(self) -> bool:
        return self.tag in ("T", "Tc")

    @property
    def name(self) -> str:
        return f"Tc({self.c:g})" if self.tag == "Tc" else self.tag

    @classmethod
    def parse(cls, text: str) -> "TransformKind":
        """Parse ``"G"``, ``"Tc:0.25"``, ``"Tc(4)"`` and the like."""
        text = text.strip()
        for sep in (":", "("):
            if sep in text:
                tag, arg = text.split(sep, 1)
                return cls(tag.strip(), float(arg.rstrip(")")))
        return cls(text)


# ---------------------------------------------------------------------------
# exact PL transforms
# ---------------------------------------------------------------------------


def transform_G(path: PlPath) -> PlPath:
    """``s -> phi_s - (2 s / t) phi_t``."""
    t = path.horizon
    ramp = pl.linear_path(path.terminal / t, t)
    return pl.affine_combine(1.0, path, -2.0, ramp)


def transform_P(path: PlPath) -> PlPath:
    """Pitman's ``2 max_{[0,s]} phi - phi_s``."""
    return pl.affine_combine(2.0, pl.running_max(path), -1.0, path)


def _m_from_extrema(path: PlPath, prefix: PlPath, suffix: PlPath, sign: float) -> PlPath:
    # sign=+1: phi - phi_t - |phi_t + d| + |d| with d = prefix max - suffix max
    # sign=-1: phi - phi_t + |phi_t + d| - |d| with d = prefix min - suffix min
    d = pl.affine_combine(1.0, prefix, -1.0, suffix)
    first = pl.abs_path(pl.shift(d, path.terminal))
    second = pl.abs_path(d)
    out = pl.affine_combine(1.0, path, -sign, first)
    out = pl.affine_combine(1.0, out, sign, second)
    return pl.shift(out, -path.terminal)


def transform_M(path: PlPath) -> PlPath:
    """``phi_s - phi_t - |phi_t + m(s) - mbar(s)| + |m(s) - mbar(s)|``.

    ``m`` is the running maximum and ``mbar`` the maximum over ``[s, t]``.
    """
    return _m_from_extrema(
        path, pl.running_max(path), pl.suffix_extremum(path, "max"), 1.0
    )


def transform_M_min(path: PlPath) -> PlPath:
    """The mirrored map ``-M(-phi)``, written with running and suffix minima."""
    return _m_from_extrema(
        path, pl.running_min(path), pl.suffix_extremum(path, "min"), -1.0
    )


def _reconstruct(p: PlPath, offset: float) -> PlPath:
    suffix_min = pl.suffix_extremum(p, "min")
    inner = pl.pointwise_min(
        pl.scale(suffix_min, 2.0), pl.constant_path(p.terminal + offset, p.horizon)
    )
    return pl.affine_combine(-1.0, p, 1.0, inner)


def reconstruct_S1(p: PlPath, phi_t: float) -> PlPath:
    """Recover ``phi`` from its Pitman image ``p = P(phi)`` and ``phi_t``.

    ``-p(s) + min(2 min_{[s,t]} p, p(t) + phi_t)``.  Inputs that are not
    genuine Pitman images are accepted; the result is then meaningless.
    """
    return _reconstruct(p, phi_t)


def reconstruct_S2(p: PlPath, phi_t: float) -> PlPath:
    """``M(phi)`` from ``p = P(phi)`` and ``phi_t``: the S1 formula with ``-phi_t``."""
    return _reconstruct(p, -phi_t)


# ---------------------------------------------------------------------------
# Tc
# ---------------------------------------------------------------------------


def _check_c(c):
    if not c > 0:
        raise DomainError(f"c must be positive, got {c!r}")


def tc_value(path: PlPath, c: float, s, functional: LogFunctional | None = None):
    """Exact pointwise ``Tc(phi)(s)`` for scalar or array ``s``.

    ``phi_s - (1/c) [LSE(2 c phi_t + log A_s, log int_s^t) - log A_t]``, all
    integrals of ``exp(2 c phi)``.  At ``s = 0`` this is ``phi_0``; at
    ``s = t`` it is ``-phi_t``.
    """
    _check_c(c)
    lf = functional if functional is not None else LogFunctional.build(path, c)
    s = np.asarray(s, dtype=float)
    out = pl.evaluate(path, s) - _log_correction(
        c, path.terminal, lf.at(s), lf.suffix_at(s), lf.log_total) / c
    return float(out) if np.ndim(out) == 0 else out


def _log_correction(c, terminal, log_a, log_suffix, log_total):
    """``log(1 + (A_s / A_t) (exp(2 c phi_t) - 1))``.

    The log1p form is used for small ``|2 c phi_t|`` (exactly 0 when
    ``phi_t = 0``); the log-sum-exp form otherwise.
    """
    x = 2.0 * c * np.asarray(terminal, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.log1p(np.exp(log_a - log_total) * np.expm1(np.minimum(np.abs(x), 1.0)
                                                              * np.sign(x)))
    large = np.logaddexp(x + log_a, log_suffix) - log_total
    return np.where(np.abs(x) <= 1.0, small, large)


def sample_times(path: PlPath, grid: Grid | None = None, extra=None) -> np.ndarray:
    """Uniform grid times merged with the knots of ``path`` (and ``extra``)."""
    if grid is None:
        grid = Grid(path.horizon, DEFAULT_GRID_STEPS)
    if grid.horizon != path.horizon:
        raise DomainError(f"grid horizon {grid.horizon} != path horizon {path.horizon}")
    times = pl.merge_times(grid.times, path.times, path.horizon)
    if extra is not None:
        times = pl.merge_times(times, np.asarray(extra, dtype=float), path.horizon)
    return times


def transform_Tc(path: PlPath, c: float = 1.0, out_grid: Grid | None = None,
                 extra_times=None, defect_tol: float | None = None) -> PlPath:
    """``Tc(phi)`` sampled exactly and linearly interpolated.

    Sampling starts from the uniform ``out_grid`` merged with the knots of
    ``phi`` and ``extra_times``.  Any piece whose exact midpoint value is
    further than ``defect_tol`` (default ``1/n^2`` for an ``n``-step grid)
    from the chord is then bisected, until none is.  The log term bends
    sharply where ``A_s`` moves fast relative to ``A_t``, which a uniform
    grid alone cannot resolve.
    """
    _check_c(c)
    if out_grid is None:
        out_grid = Grid(path.horizon, DEFAULT_GRID_STEPS)
    if defect_tol is None:
        defect_tol = 1.0 / out_grid.n_steps**2
    lf = LogFunctional.build(path, c)
    times = sample_times(path, out_grid, extra_times)
    vals = tc_value(path, c, times, lf)
    for _ in range(64):
        mid = 0.5 * (times[:-1] + times[1:])
        vmid = tc_value(path, c, mid, lf)
        bad = np.nonzero(np.abs(vmid - 0.5 * (vals[:-1] + vals[1:])) > defect_tol)[0]
        # pieces at the merge resolution cannot be split further
        bad = bad[(times[bad + 1] - times[bad]) > 4 * pl.KNOT_MERGE_RTOL * path.horizon]
        if bad.size == 0:
            break
        if times.size + bad.size > path.max_knots:
            raise pl.KnotLimitError("Tc refinement exceeds the knot cap")
        times = np.insert(times, bad + 1, mid[bad])
        vals = np.insert(vals, bad + 1, vmid[bad])
    vals[0] = path.start
    return PlPath(times, vals, path.max_knots)


def transform_T(path: PlPath, out_grid: Grid | None = None) -> PlPath:
    return transform_Tc(path, 1.0, out_grid)


def z_form_value(path: PlPath, c: float, s, sign: int):
    """``-(1/c) log{Z_s int_s^t du/Z_u^2 + (Z_s/Z_t) exp(sign * c phi_t)}``.

    ``sign=-1`` gives back ``phi_s``; ``sign=+1`` gives ``Tc(phi)(s)``.
    Everything is evaluated with ``Z = Z(c phi)`` for ``0 < s <= t``.
    """
    _check_c(c)
    if sign not in (-1, 1):
        raise DomainError("sign must be +1 or -1")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0) or np.any(s_arr > path.horizon):
        raise DomainError(f"s must lie in (0, {path.horizon}]")
    lf = LogFunctional.build(path, c)
    log_zs = lf.at(s_arr) - c * pl.evaluate(path, s_arr)
    log_zt = lf.log_total - c * path.terminal
    with np.errstate(divide="ignore"):
        log_int = np.log(integral_inv_z_squared(path, c, s_arr))
    out = -np.logaddexp(log_zs + log_int, log_zs - log_zt + sign * c * path.terminal) / c
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# batch evaluation at knots
# ---------------------------------------------------------------------------


def batch_tc(times, values, c: float):
    """``Tc`` at the knots; ``values[..., k]`` sits at ``times[..., k]``."""
    _check_c(c)
    values = np.asarray(values, dtype=float)
    pre = prefix_log_integrals(times, values, c)
    suf = suffix_log_integrals(times, values, c)
    return values - _log_correction(c, values[..., -1:], pre, suf, pre[..., -1:]) / c


def _rev_cummax(v):
    return np.maximum.accumulate(v[..., ::-1], axis=-1)[..., ::-1]


def batch_M(values):
    v = np.asarray(values, dtype=float)
    term = v[..., -1:]
    d = np.maximum.accumulate(v, axis=-1) - _rev_cummax(v)
    return v - term - np.abs(term + d) + np.abs(d)


def batch_M_min(values):
    return -batch_M(-np.asarray(values, dtype=float))


def batch_P(values):
    v = np.asarray(values, dtype=float)
    return 2.0 * np.maximum.accumulate(v, axis=-1) - v


def batch_G(times, values):
    v = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    horizon = times[..., -1:]
    return v - 2.0 * times / horizon * v[..., -1:]


def batch_apply(kind: TransformKind, times, values):
    """Values of ``kind`` applied to each path, at that path's knots."""
    if kind.tag in ("T", "Tc"):
        return batch_tc(times, values, kind.c)
    if kind.tag == "G":
        return batch_G(times, values)
    if kind.tag == "M":
        return batch_M(values)
    if kind.tag == "MMin":
        return batch_M_min(values)
    if kind.tag == "P":
        return batch_P(values)
    raise DomainError(f"{kind.tag} has no batch form")


def apply(kind: TransformKind, path: PlPath, phi_t: float | None = None) -> PlPath:
    """Apply ``kind`` to a single path (``phi_t`` is required for S1/S2)."""
    if kind.sampled:
        return transform_Tc(path, kind.c, kind.grid)
    if kind.tag in ("S1", "S2"):
        if phi_t is None:
            raise DomainError("reconstruction needs the terminal value phi_t")
        return (reconstruct_S1 if kind.tag == "S1" else reconstruct_S2)(path, phi_t)
    return {
        "G": transform_G,
        "M": transform_M,
        "P": transform_P,
        "R": pl.time_reverse,
        "MMin": transform_M_min,
    }[kind.tag](path)
