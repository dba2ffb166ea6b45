"""Exponential functional ``A_s(c phi) = int_0^s exp(2 c phi_u) du`` and ``Z``.

Everything is computed in the log domain.  On a linear segment with start
value ``a``, increment ``d`` and length ``h`` the integral is

    exp(2 c a) * h * (exp(x) - 1) / x,    x = 2 c d,

so segments contribute ``2 c a + log h + log((e^x - 1)/x)`` and are combined
with a running log-sum-exp.  A Simpson/Richardson quadrature of the defining
integral is provided as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .pl_path import PlPath, evaluate

#: slopes below this magnitude are treated as flat
FLAT_SLOPE = 1e-12
_ASYMPTOTIC_X = 30.0


def log_expm1_ratio(x):
    """``log((exp(x) - 1) / x)`` for real ``x``, with value ``0`` at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    big = x > _ASYMPTOTIC_X
    small = x < -_ASYMPTOTIC_X
    mid = ~(big | small) & (x != 0.0)
    xb = x[big]
    out[big] = xb + np.log1p(-np.exp(-xb)) - np.log(xb)
    xs = x[small]
    out[small] = np.log(-np.expm1(xs)) - np.log(-xs)
    xm = x[mid]
    out[mid] = np.log(np.expm1(xm) / xm)
    return out


def segment_log_integrals(times, values, c: float):
    """Per-segment ``log int exp(2 c phi)`` along the last axis.

    ``times`` and ``values`` broadcast against each other; the result has one
    entry fewer along the last axis.  Zero-length segments give ``-inf``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    h = np.diff(times, axis=-1)
    d = np.diff(values, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = d / h
        x = np.where(np.abs(slope) < FLAT_SLOPE, 0.0, 2.0 * c * d)
        return 2.0 * c * values[..., :-1] + np.log(h) + log_expm1_ratio(x)


def _check_scale(c):
    if not c > 0:
        raise DomainError(f"scale c must be positive, got {c!r}")


def prefix_log_integrals(times, values, c: float):
    """``log A_{t_k}(c phi)`` at every knot (``-inf`` at the first one)."""
    seg = segment_log_integrals(times, values, c)
    pad = np.full(seg.shape[:-1] + (1,), -np.inf)
    return np.concatenate([pad, np.logaddexp.accumulate(seg, axis=-1)], axis=-1)


def suffix_log_integrals(times, values, c: float):
    """``log int_{t_k}^t exp(2 c phi)`` at every knot (``-inf`` at the last)."""
    seg = segment_log_integrals(times, values, c)[..., ::-1]
    pad = np.full(seg.shape[:-1] + (1,), -np.inf)
    acc = np.logaddexp.accumulate(seg, axis=-1)
    return np.concatenate([acc[..., ::-1], pad], axis=-1)


@dataclass(frozen=True)
class LogFunctional:
    """Knotwise ``log A`` of ``scale * base_path``, queryable at any time."""

    base_path: PlPath
    scale: float
    prefix_logs: np.ndarray
    suffix_logs: np.ndarray

    @classmethod
    def build(cls, path: PlPath, c: float) -> "LogFunctional":
        _check_scale(c)
        return cls(
            path,
            float(c),
            prefix_log_integrals(path.times, path.values, c),
            suffix_log_integrals(path.times, path.values, c),
        )

    @property
    def log_total(self) -> float:
        return float(self.prefix_logs[-1])

    def _locate(self, s):
        p = self.base_path
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > p.horizon):
            raise DomainError(f"time outside [0, {p.horizon}]")
        k = np.clip(np.searchsorted(p.times, s, side="right") - 1, 0, len(p) - 2)
        return s, k, evaluate(p, s)

    def at(self, s):
        """``log A_s(c phi)`` for scalar or array ``s``."""
        s, k, vs = self._locate(s)
        p, c = self.base_path, self.scale
        part = segment_log_integrals(
            np.stack([p.times[k], s], axis=-1), np.stack([p.values[k], vs], axis=-1), c
        )[..., 0]
        out = np.logaddexp(self.prefix_logs[k], part)
        return float(out) if out.ndim == 0 else out

    def suffix_at(self, s):
        """``log int_s^t exp(2 c phi_u) du``."""
        s, k, vs = self._locate(s)
        p, c = self.base_path, self.scale
        part = segment_log_integrals(
            np.stack([s, p.times[k + 1]], axis=-1),
            np.stack([vs, p.values[k + 1]], axis=-1),
            c,
        )[..., 0]
        out = np.logaddexp(self.suffix_logs[k + 1], part)
        return float(out) if out.ndim == 0 else out


def log_A(path: PlPath, c: float, s):
    """``log A_s(c phi)``; ``-inf`` at ``s = 0``."""
    return LogFunctional.build(path, c).at(s)


def _positive_time(path: PlPath, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0) or np.any(s_arr > path.horizon):
        raise DomainError(f"time must lie in (0, {path.horizon}]")
    return s_arr


def log_Z(path: PlPath, c: float, s, functional: LogFunctional | None = None):
    """``log Z_s(c phi) = -c phi_s + log A_s(c phi)`` for ``0 < s <= t``."""
    _positive_time(path, s)
    lf = functional if functional is not None else LogFunctional.build(path, c)
    return lf.at(s) - c * evaluate(path, s)


def integral_inv_z_squared(path: PlPath, c: float, s, mode: str = "closed"):
    """``int_s^t du / Z_u(c phi)^2``.

    ``mode="closed"`` uses ``1/A_s - 1/A_t`` (``d/ds 1/A_s = -1/Z_s^2``);
    ``mode="quadrature"`` integrates ``exp(-2 log Z)`` numerically.
    """
    _positive_time(path, s)
    lf = LogFunctional.build(path, c)
    if mode == "closed":
        return np.exp(-lf.at(s)) - np.exp(-lf.log_total)
    if mode == "quadrature":
        t = path.horizon

        def integrand(u):
            return -2.0 * (lf.at(u) - c * evaluate(path, u))

        s_list = np.atleast_1d(s)
        out = np.array([np.exp(piecewise_log_integral(integrand, path.times, si, t))
                        for si in s_list])
        return float(out[0]) if np.ndim(s) == 0 else out
    raise DomainError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------


def simpson_log_integral(log_f, a: float, b: float, rtol: float = 1e-9,
                         max_panels: int = 2**20) -> float:
    """``log int_a^b exp(log_f(u)) du`` by composite Simpson with Richardson.

    ``log_f`` must be vectorised.  Panels are doubled until two successive
    Richardson-extrapolated values agree to ``rtol``; the integrand is pivoted
    on its largest sample to stay in floating range.
    """
    if b <= a:
        return -np.inf
    n = 16
    prev_rich = None
    prev_simp = None
    while True:
        u = np.linspace(a, b, n + 1)
        lf = np.asarray(log_f(u), dtype=float)
        pivot = lf.max()
        f = np.exp(lf - pivot)
        h = (b - a) / n
        simp = h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())
        simp_log = pivot + np.log(simp)
        if prev_simp is not None:
            # Richardson on Simpson (h^4): S_2n + (S_2n - S_n) / 15, in log scale
            ref = max(simp_log, prev_simp)
            s2, s1 = np.exp(simp_log - ref), np.exp(prev_simp - ref)
            rich = ref + np.log(s2 + (s2 - s1) / 15.0)
            if prev_rich is not None and abs(np.expm1(rich - prev_rich)) <= rtol:
                return float(rich)
            if n >= max_panels:
                return float(rich)
            prev_rich = rich
        prev_simp = simp_log
        n *= 2


def quadrature_log_A(path: PlPath, c: float, s: float, rtol: float = 1e-9) -> float:
    """``log A_s(c phi)`` by Simpson quadrature, segment by segment.

    Independent of the closed form: the integrand is only ever evaluated
    pointwise through :func:`evaluate`.
    """
    _check_scale(c)
    return piecewise_log_integral(
        lambda u: 2.0 * c * evaluate(path, u), path.times, 0.0, s, rtol
    )


def piecewise_log_integral(log_f, breaks, a: float, b: float, rtol: float = 1e-9) -> float:
    """:func:`simpson_log_integral` applied between consecutive ``breaks``."""
    if b <= a:
        return -np.inf
    inner = np.asarray(breaks, dtype=float)
    edges = np.concatenate([[a], inner[(inner > a) & (inner < b)], [b]])
    parts = [simpson_log_integral(log_f, lo, hi, rtol) for lo, hi in zip(edges[:-1], edges[1:])]
    return float(np.logaddexp.reduce(parts))
