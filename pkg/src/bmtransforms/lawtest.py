"""Monte Carlo checks of equality in law.

Equality of processes in law is tested through surrogates: two-sample
Kolmogorov-Smirnov tests on one-dimensional marginals and on a few
functionals, always between independently generated batches (seeds ``seed``
and ``seed ^ 1``).  Significance is Bonferroni-adjusted across all
statistics of one report.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Union

import numpy as np

from . import rng
from .errors import ConfigurationError, DomainError
from .exp_functional import prefix_log_integrals
from .sampler import SampleSpec, sample_bessel3, sample_brownian
from .transforms import TransformKind, batch_apply, batch_G, batch_M, batch_P

#: smallest batch accepted by the report-level tests
MIN_SAMPLES = 500
DEFAULT_ALPHA = 1e-3

PathMap = Union[TransformKind, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass
class LawTestReport:
    test_name: str
    statistic: float
    threshold: float
    n_samples: tuple
    n_marginals: int
    seed: int
    passed: bool
    per_marginal: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    alpha: float = DEFAULT_ALPHA
    rng: str = f"{rng.GENERATOR_NAME}/{rng.NORMAL_METHOD}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_samples"] = list(self.n_samples)
        d["per_marginal"] = [list(p) for p in self.per_marginal]
        return d


@dataclass(frozen=True)
class KSResult:
    statistic: float
    threshold: float
    n: int
    m: int

    @property
    def rejected(self) -> bool:
        return self.statistic > self.threshold


def ks_critical_value(alpha: float) -> float:
    """Asymptotic ``c(alpha) = sqrt(-log(alpha / 2) / 2)``."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    return math.sqrt(-math.log(alpha / 2.0) / 2.0)


def ks_two_sample(x, y, alpha: float = DEFAULT_ALPHA) -> KSResult:
    """Two-sample KS distance and its asymptotic critical value.

    ``D = sup |F_x - F_y|`` over the pooled sample; the threshold is
    ``c(alpha) sqrt((n + m) / (n m))``.
    """
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    n, m = x.size, y.size
    if n == 0 or m == 0:
        raise DomainError("KS test needs two nonempty samples")
    pooled = np.concatenate([x, y])
    fx = np.searchsorted(x, pooled, side="right") / n
    fy = np.searchsorted(y, pooled, side="right") / m
    d = float(np.max(np.abs(fx - fy)))
    return KSResult(d, ks_critical_value(alpha) * math.sqrt((n + m) / (n * m)), n, m)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _check_size(spec: SampleSpec):
    if spec.n_paths < MIN_SAMPLES:
        raise ConfigurationError(
            f"law tests need at least {MIN_SAMPLES} paths per batch, got {spec.n_paths}"
        )


def grid_columns(spec: SampleSpec, marginal_times) -> np.ndarray:
    """Grid indices of ``marginal_times``; off-grid times are an error."""
    grid_times = spec.grid.times
    tol = 1e-12 * spec.grid.horizon
    out = []
    for s in np.atleast_1d(np.asarray(marginal_times, dtype=float)):
        k = int(np.argmin(np.abs(grid_times - s)))
        if abs(grid_times[k] - s) > tol:
            raise ConfigurationError(f"marginal time {s} is not a grid time")
        out.append(k)
    return np.asarray(out)


def default_marginals(spec: SampleSpec, count: int) -> np.ndarray:
    """``count`` grid times spread evenly over ``(0, t]``."""
    n = spec.grid.n_steps
    idx = np.unique(np.round(np.arange(1, count + 1) * n / count).astype(int))
    return spec.grid.times[idx]


def _finish(name, spec, stats, labels, times, alpha, n_samples) -> LawTestReport:
    # stats were computed at the Bonferroni-adjusted level; the headline
    # pair is the one closest to (or furthest past) its own threshold
    worst = max(stats, key=lambda r: r.statistic / r.threshold)
    return LawTestReport(
        test_name=name,
        statistic=worst.statistic,
        threshold=worst.threshold,
        n_samples=n_samples,
        n_marginals=len(stats),
        seed=int(spec.seed),
        passed=not any(r.rejected for r in stats),
        per_marginal=[(float(s), r.statistic) for s, r in zip(times, stats)],
        labels=list(labels),
        alpha=alpha,
    )


def _kind_name(kind: PathMap) -> str:
    if isinstance(kind, TransformKind):
        return kind.name
    return getattr(kind, "__name__", "custom")


def _extrema_for(kind: PathMap):
    if isinstance(kind, TransformKind):
        return {"M": "max", "P": "max", "MMin": "min"}.get(kind.tag)
    return None


def _apply(kind: PathMap, batch):
    if isinstance(kind, TransformKind):
        return batch_apply(kind, batch.times, batch.values)
    return kind(batch.times, batch.values)


# ---------------------------------------------------------------------------
# report-level tests
# ---------------------------------------------------------------------------


def invariance_test(kind: PathMap, spec: SampleSpec, marginal_times=None,
                    alpha: float = DEFAULT_ALPHA) -> LawTestReport:
    """KS of ``kind(B)`` marginals against an independent Brownian batch.

    ``kind`` is a :class:`TransformKind` (T, Tc, G, M, MMin) or any callable
    ``(times, values) -> values`` evaluated at the knots.  M and MMin batches
    carry exact bridge maxima / minima (see :mod:`bmtransforms.sampler`).
    """
    _check_size(spec)
    if isinstance(kind, TransformKind) and kind.tag not in ("T", "Tc", "G", "M", "MMin"):
        raise ConfigurationError(f"invariance_test does not cover {kind.tag}")
    if marginal_times is None:
        marginal_times = default_marginals(spec, 16)
    cols = grid_columns(spec, marginal_times)
    spec = spec.replace(kind="brownian", drift=0.0, extrema=_extrema_for(kind))
    first = sample_brownian(spec)
    second = sample_brownian(spec.replace(seed=spec.seed ^ 1))
    moved = first.at_grid(_apply(kind, first))[:, cols]
    ref = second.at_grid()[:, cols]
    a = alpha / len(cols)
    stats = [ks_two_sample(moved[:, j], ref[:, j], a) for j in range(len(cols))]
    times = spec.grid.times[cols]
    labels = [f"{_kind_name(kind)}(B)({s:g}) vs B({s:g})" for s in times]
    return _finish(f"invariance[{_kind_name(kind)}]", spec, stats, labels, times,
                   alpha, (spec.n_paths, spec.n_paths))


def covariance_test(spec: SampleSpec, times=(0.25, 0.5, 0.75, 1.0),
                    z_bound: float = 4.0, kind: TransformKind | None = None) -> LawTestReport:
    """Empirical ``E[G(B)(s1) G(B)(s2)]`` against ``min(s1, s2)``.

    The statistic is the largest ``|estimate - min(s1, s2)| / stderr`` over
    all pairs ``s1 <= s2``.
    """
    if kind is not None and kind.tag != "G":
        raise ConfigurationError("covariance_test only covers G")
    _check_size(spec)
    cols = grid_columns(spec, times)
    spec = spec.replace(kind="brownian", drift=0.0, extrema=None)
    batch = sample_brownian(spec)
    g = batch.at_grid(batch_G(batch.times, batch.values))[:, cols]
    s = spec.grid.times[cols]
    per, labels, zs = [], [], []
    n = spec.n_paths
    for i in range(len(cols)):
        for j in range(i, len(cols)):
            prod = g[:, i] * g[:, j]
            target = min(s[i], s[j])
            z = abs(prod.mean() - target) / (prod.std(ddof=1) / math.sqrt(n))
            zs.append(float(z))
            per.append((float(s[i]), float(z)))
            labels.append(f"cov({s[i]:g},{s[j]:g}) target {target:g}")
    return LawTestReport(
        test_name="covariance[G]",
        statistic=max(zs),
        threshold=z_bound,
        n_samples=(n, 0),
        n_marginals=len(zs),
        seed=int(spec.seed),
        passed=max(zs) <= z_bound,
        per_marginal=per,
        labels=labels,
        alpha=None,
    )


def _drift_triples(values):
    return values, batch_M(values), batch_P(values)


def drift_flip_test(mu: float, spec: SampleSpec, alpha: float = DEFAULT_ALPHA,
                    marginal_times=None, flip: bool = True) -> LawTestReport:
    """Marginal check of ``(B^mu, M(B^mu), P(B^mu)) = (M(B^-mu), B^-mu, P(B^-mu))``.

    Per marginal time: the three components plus the sum and the maximum of
    the triple.  ``flip=False`` pairs against ``B^{+mu}`` instead (a negative
    control that must fail for ``mu != 0``).
    """
    _check_size(spec)
    if marginal_times is None:
        marginal_times = default_marginals(spec, 8)
    cols = grid_columns(spec, marginal_times)
    spec = spec.replace(kind="brownian", drift=mu, extrema="max")
    left = sample_brownian(spec)
    right = sample_brownian(spec.replace(seed=spec.seed ^ 1, drift=-mu if flip else mu))
    bl, ml, pl_ = (left.at_grid(v)[:, cols] for v in _drift_triples(left.values))
    br, mr, pr = (right.at_grid(v)[:, cols] for v in _drift_triples(right.values))
    lhs = (bl, ml, pl_)
    rhs = (mr, br, pr)
    names = ("B", "M", "P")
    s_vals = spec.grid.times[cols]
    a = alpha / (5 * len(cols))
    stats, labels, times = [], [], []
    for j, s in enumerate(s_vals):
        for name, x, y in zip(names, lhs, rhs):
            stats.append(ks_two_sample(x[:, j], y[:, j], a))
            labels.append(f"component {name} at {s:g}")
            times.append(s)
        lsum = lhs[0][:, j] + lhs[1][:, j] + lhs[2][:, j]
        rsum = rhs[0][:, j] + rhs[1][:, j] + rhs[2][:, j]
        stats.append(ks_two_sample(lsum, rsum, a))
        labels.append(f"sum at {s:g}")
        times.append(s)
        lmax = np.maximum(np.maximum(lhs[0][:, j], lhs[1][:, j]), lhs[2][:, j])
        rmax = np.maximum(np.maximum(rhs[0][:, j], rhs[1][:, j]), rhs[2][:, j])
        stats.append(ks_two_sample(lmax, rmax, a))
        labels.append(f"max at {s:g}")
        times.append(s)
    name = f"drift_flip[mu={mu:g}{'' if flip else ',no-flip'}]"
    return _finish(name, spec, stats, labels, times, alpha, (spec.n_paths, spec.n_paths))


def _binned_symmetry(key, terminal, n_bins, a):
    """KS of ``terminal`` vs ``-terminal`` inside quantile bins of ``key``."""
    if n_bins < 1:
        raise ConfigurationError("need at least one bin")
    order = np.argsort(key, kind="stable")
    stats = []
    for chunk in np.array_split(order, n_bins):
        x = terminal[chunk]
        stats.append(ks_two_sample(x, -x, a))
    return stats


def pitman_bessel_test(spec: SampleSpec, alpha: float = DEFAULT_ALPHA,
                       marginal_times=None, n_bins: int = 8,
                       reference: str = "bessel3") -> LawTestReport:
    """Pitman's 2M - X theorem and the conditional symmetry of ``B_t``.

    (a) marginals of ``P(B)`` against an independent three-dimensional Bessel
    batch (``reference="reflected"`` uses ``|B|`` instead, a negative
    control); (b) ``B_t`` against ``-B_t`` inside quantile bins of
    ``P(B)(t)``.
    """
    _check_size(spec)
    if marginal_times is None:
        marginal_times = default_marginals(spec, 8)
    cols = grid_columns(spec, marginal_times)
    bspec = spec.replace(kind="brownian", drift=0.0, extrema="max")
    batch = sample_brownian(bspec)
    p = batch.at_grid(batch_P(batch.values))
    if reference == "bessel3":
        ref = sample_bessel3(bspec.replace(kind="bessel3", extrema=None,
                                           seed=spec.seed ^ 1)).at_grid()
    elif reference == "reflected":
        ref = np.abs(sample_brownian(bspec.replace(extrema=None,
                                                   seed=spec.seed ^ 1)).at_grid())
    else:
        raise ConfigurationError(f"unknown reference {reference!r}")
    a = alpha / (len(cols) + n_bins)
    s_vals = spec.grid.times[cols]
    stats = [ks_two_sample(p[:, k], ref[:, k], a) for k in cols]
    labels = [f"P(B)({s:g}) vs {reference}({s:g})" for s in s_vals]
    times = list(s_vals)
    sym = _binned_symmetry(p[:, -1], batch.terminal, n_bins, a)
    stats += sym
    labels += [f"B_t vs -B_t in P(B)(t) bin {i}" for i in range(len(sym))]
    times += [spec.grid.horizon] * len(sym)
    name = "pitman_bessel" if reference == "bessel3" else f"pitman_bessel[{reference}]"
    return _finish(name, bspec, stats, labels, times, alpha, (spec.n_paths, spec.n_paths))


def pitman_mean_zscore(spec: SampleSpec) -> float:
    """``(mean P(B)(t) - 2 sqrt(2t/pi)) / stderr`` with exact bridge maxima."""
    batch = sample_brownian(spec.replace(kind="brownian", drift=0.0, extrema="max"))
    x = batch_P(batch.values)[:, -1]
    target = 2.0 * math.sqrt(2.0 * spec.grid.horizon / math.pi)
    return float((x.mean() - target) / (x.std(ddof=1) / math.sqrt(x.size)))


def log_terminal_z(times, values) -> np.ndarray:
    """``log Z_t(B) = log A_t(B) - B_t`` for each row of a batch."""
    return prefix_log_integrals(times, values, 1.0)[..., -1] - values[..., -1]


def conditional_symmetry_test(spec: SampleSpec, n_bins: int = 8,
                              alpha: float = DEFAULT_ALPHA,
                              bin_by: str = "z") -> LawTestReport:
    """``B_t`` against ``-B_t`` inside quantile bins of ``Z_t(B)``.

    Conditioning is on ``Z_t`` only, a coarse surrogate for conditioning on
    the whole ``Z`` path.  ``bin_by="terminal"`` bins by ``B_t`` itself (a
    negative control).
    """
    _check_size(spec)
    spec = spec.replace(kind="brownian", drift=0.0, extrema=None)
    batch = sample_brownian(spec)
    if bin_by == "z":
        key = log_terminal_z(batch.times, batch.values)
    elif bin_by == "terminal":
        key = batch.terminal
    else:
        raise ConfigurationError(f"unknown binning {bin_by!r}")
    stats = _binned_symmetry(key, batch.terminal, n_bins, alpha / n_bins)
    labels = [f"B_t vs -B_t in {bin_by} bin {i}" for i in range(n_bins)]
    name = "conditional_symmetry" if bin_by == "z" else f"conditional_symmetry[{bin_by}]"
    return _finish(name, spec, stats, labels, [spec.grid.horizon] * n_bins, alpha,
                   (spec.n_paths, spec.n_paths))
