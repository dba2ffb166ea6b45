"""Exact algebra of continuous piecewise-linear paths on ``[0, t]``.

A :class:`PlPath` is a sorted list of knots ``(time, value)`` with linear
interpolation in between.  Running and suffix extrema, absolute values and
pointwise minima of such paths are again piecewise linear, so every operation
here returns an exact :class:`PlPath` (up to floating point rounding of the
inserted crossing knots).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, KnotLimitError

#: relative tolerance (times ``t``) under which two knot times are merged
KNOT_MERGE_RTOL = 1e-14
#: default cap on the number of knots of any path
MAX_KNOTS = 1_000_000


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlPath:
    """Continuous piecewise-linear path on ``[0, horizon]``.

    Parameters
    ----------
    times : array_like
        Strictly increasing knot times, ``times[0] == 0``.
    values : array_like
        Finite values at the knots.

    The horizon is ``times[-1]``.  Instances are immutable; the arrays are
    flagged read-only.
    """

    times: np.ndarray
    values: np.ndarray
    max_knots: int = field(default=MAX_KNOTS, repr=False, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float).ravel()
        values = np.array(self.values, dtype=float).ravel()
        if times.shape != values.shape:
            raise DomainError("times and values must have equal length")
        if times.size < 2:
            raise DomainError("a path needs at least two knots")
        if times.size > self.max_knots:
            raise KnotLimitError(
                f"path has {times.size} knots, cap is {self.max_knots}"
            )
        if times[0] != 0.0:
            raise DomainError(f"first knot time must be 0, got {times[0]!r}")
        if times[-1] <= 0.0:
            raise DomainError("horizon must be positive")
        if not np.all(np.diff(times) > 0):
            raise DomainError("knot times must be strictly increasing")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(times))):
            raise DomainError("knots must be finite")
        object.__setattr__(self, "times", _readonly(times))
        object.__setattr__(self, "values", _readonly(values))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def start(self) -> float:
        return float(self.values[0])

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def __len__(self):
        return self.times.size

    def __call__(self, s):
        return evaluate(self, s)

    def __neg__(self):
        return PlPath(self.times, -self.values, self.max_knots)

    def __eq__(self, other):
        if not isinstance(other, PlPath):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None  # type: ignore[assignment]

    def with_knots(self, extra) -> "PlPath":
        """Same path with the knot times ``extra`` inserted."""
        times = merge_times(self.times, np.asarray(extra, dtype=float), self.horizon)
        return PlPath(times, np.interp(times, self.times, self.values), self.max_knots)

    def knots(self):
        return list(zip(self.times.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class Grid:
    """Uniform partition ``{k t / n : k = 0..n}`` of ``[0, t]``."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError("grid horizon must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError("grid needs a positive integer number of steps")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        times = np.arange(self.n_steps + 1) * (self.horizon / self.n_steps)
        times[-1] = self.horizon
        return times


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------


def from_knots(knots) -> PlPath:
    """Build a path from an iterable of ``(time, value)`` pairs."""
    arr = np.asarray(list(knots), dtype=float)
    return PlPath(arr[:, 0], arr[:, 1])


def zero_path(horizon: float = 1.0) -> PlPath:
    return PlPath([0.0, horizon], [0.0, 0.0])


def constant_path(value: float, horizon: float = 1.0) -> PlPath:
    return PlPath([0.0, horizon], [value, value])


def linear_path(slope: float, horizon: float = 1.0, intercept: float = 0.0) -> PlPath:
    return PlPath([0.0, horizon], [intercept, intercept + slope * horizon])


def merge_times(a: np.ndarray, b: np.ndarray, horizon: float) -> np.ndarray:
    """Sorted union of two knot sets; times closer than ``1e-14 t`` are merged.

    The endpoints ``0`` and ``horizon`` always survive exactly.
    """
    ts = np.concatenate([a, b])
    ts = ts[(ts > 0.0) & (ts < horizon)]
    ts = np.unique(ts)
    tol = KNOT_MERGE_RTOL * horizon
    if ts.size:
        keep = np.concatenate([[True], np.diff(ts) > tol])
        ts = ts[keep]
        ts = ts[(ts > tol) & (ts < horizon - tol)]
    return np.concatenate([[0.0], ts, [horizon]])


def _check_same_horizon(p: PlPath, q: PlPath) -> float:
    if p.horizon != q.horizon:
        raise DomainError(f"horizons differ: {p.horizon} vs {q.horizon}")
    return p.horizon


def _common(p: PlPath, q: PlPath):
    horizon = _check_same_horizon(p, q)
    times = merge_times(p.times, q.times, horizon)
    return (
        times,
        np.interp(times, p.times, p.values),
        np.interp(times, q.times, q.values),
    )


def _cap(p: PlPath, q: PlPath | None = None) -> int:
    return p.max_knots if q is None else min(p.max_knots, q.max_knots)


def _crossings(times, d):
    """Times where the PL function with knot values ``d`` changes sign strictly."""
    d0, d1 = d[:-1], d[1:]
    idx = np.nonzero(((d0 < 0) & (d1 > 0)) | ((d0 > 0) & (d1 < 0)))[0]
    w = d0[idx] / (d0[idx] - d1[idx])
    return times[idx] + w * (times[idx + 1] - times[idx])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def evaluate(path: PlPath, s):
    """Value of ``path`` at time(s) ``s`` by linear interpolation.

    Raises :class:`DomainError` for ``s`` outside ``[0, t]``.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0) or np.any(s_arr > path.horizon) or np.any(np.isnan(s_arr)):
        raise DomainError(f"evaluation time outside [0, {path.horizon}]")
    out = np.interp(s_arr, path.times, path.values)
    return float(out) if out.ndim == 0 else out


def running_max(path: PlPath) -> PlPath:
    """Exact PL path ``s -> max_{0<=u<=s} path(u)``.

    A knot is inserted wherever the path climbs back through its previous
    maximum in the interior of a segment.
    """
    t, v = path.times, path.values
    prev = np.maximum.accumulate(v)[:-1]
    v0, v1 = v[:-1], v[1:]
    idx = np.nonzero((v0 < prev) & (v1 > prev))[0]
    cross = t[idx] + (prev[idx] - v0[idx]) / (v1[idx] - v0[idx]) * (t[idx + 1] - t[idx])
    times = merge_times(t, cross, path.horizon)
    vals = np.interp(times, t, v)
    return PlPath(times, np.maximum.accumulate(vals), path.max_knots)


def _reversed_in_time(path: PlPath) -> PlPath:
    # u -> path(t - u), no recentring
    times = path.horizon - path.times[::-1]
    times[0], times[-1] = 0.0, path.horizon
    return PlPath(times, path.values[::-1], path.max_knots)


def suffix_extremum(path: PlPath, kind: str = "max") -> PlPath:
    """Exact PL path ``s -> max`` (or ``min``) of ``path`` over ``[s, t]``."""
    if kind == "max":
        return _reversed_in_time(running_max(_reversed_in_time(path)))
    if kind == "min":
        return -suffix_extremum(-path, "max")
    raise DomainError(f"kind must be 'max' or 'min', got {kind!r}")


def running_min(path: PlPath) -> PlPath:
    return -running_max(-path)


def time_reverse(path: PlPath) -> PlPath:
    """``s -> path(t - s) - path(t)``; same horizon and knot count."""
    rev = _reversed_in_time(path)
    return PlPath(rev.times, rev.values - path.terminal, path.max_knots)


def affine_combine(a: float, p: PlPath, b: float, q: PlPath) -> PlPath:
    """``a p + b q`` on the union of the two knot sets."""
    times, pv, qv = _common(p, q)
    return PlPath(times, a * pv + b * qv, _cap(p, q))


def shift(path: PlPath, c: float) -> PlPath:
    return PlPath(path.times, path.values + c, path.max_knots)


def scale(path: PlPath, c: float) -> PlPath:
    return PlPath(path.times, c * path.values, path.max_knots)


def abs_path(path: PlPath) -> PlPath:
    """Exact ``|path|`` with knots inserted at the zero crossings."""
    t, v = path.times, path.values
    times = merge_times(t, _crossings(t, v), path.horizon)
    return PlPath(times, np.abs(np.interp(times, t, v)), path.max_knots)


def pointwise_min(p: PlPath, q: PlPath) -> PlPath:
    """Exact ``min(p, q)`` with knots inserted where the two paths cross."""
    times, pv, qv = _common(p, q)
    times2 = merge_times(times, _crossings(times, pv - qv), p.horizon)
    return PlPath(
        times2,
        np.minimum(np.interp(times2, times, pv), np.interp(times2, times, qv)),
        _cap(p, q),
    )


def pointwise_max(p: PlPath, q: PlPath) -> PlPath:
    return -pointwise_min(-p, -q)


def sup_distance(p: PlPath, q: PlPath) -> float:
    """``sup_{[0,t]} |p - q|``; attained at a knot of the merged knot set."""
    _, pv, qv = _common(p, q)
    return float(np.max(np.abs(pv - qv)))


def max_value(path: PlPath) -> float:
    return float(np.max(path.values))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_csv(path: PlPath, dest) -> None:
    """Write knots as ``time,value`` rows with 17 significant digits."""
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "value"])
        for s, x in zip(path.times, path.values):
            w.writerow([f"{s:.17g}", f"{x:.17g}"])


def read_csv(src) -> PlPath:
    src = Path(src)
    with open(src, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time", "value"]:
            raise DomainError(f"{src}: expected header 'time,value'")
        rows = [(float(a), float(b)) for a, b in reader]
    if len(rows) < 2:
        raise DomainError(f"{src}: need at least two knots")
    return from_knots(rows)
