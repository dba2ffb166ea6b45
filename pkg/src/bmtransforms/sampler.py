"""Seeded Brownian and three-dimensional Bessel paths on uniform grids.

Paths are returned as a :class:`PathBatch`, which stores all knots in dense
arrays (so transforms can be applied to the whole batch at once) and also
behaves as a sequence of :class:`~bmtransforms.pl_path.PlPath`.

Streams (see :mod:`bmtransforms.rng`) are keyed by ``(seed, path index,
stream id)``; path ``i`` is identical whatever ``n_paths`` is.

With ``extrema="max"`` every grid step additionally gets one knot carrying
the exact maximum of the Brownian bridge between the two grid values,

    m = (a + b + sqrt((b - a)^2 - 2 dt log U)) / 2,

so running and suffix maxima read off the PL path at grid times have exactly
the law of those of the continuous path.  The knot is placed at the time
where two lines of equal and opposite slope through the endpoints would meet
it; that placement is a convention and only affects off-grid values.
``extrema="min"`` does the same with the bridge minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import rng
from .errors import DomainError
from .pl_path import Grid, PlPath

STREAM_INCREMENTS = 0
STREAM_EXTREMA = 1
STREAM_BESSEL = (2, 3, 4)

#: paths generated per vectorised chunk (bounds peak memory only)
CHUNK = 4096
#: default number of steps for law tests
DEFAULT_LAW_STEPS = 256


@dataclass(frozen=True)
class SampleSpec:
    grid: Grid
    n_paths: int
    seed: int = 0
    drift: float = 0.0
    kind: str = "brownian"
    extrema: str | None = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise DomainError("n_paths must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.kind not in ("brownian", "bessel3"):
            raise DomainError(f"unknown sample kind {self.kind!r}")
        if self.extrema not in (None, "max", "min"):
            raise DomainError(f"extrema must be None, 'max' or 'min', got {self.extrema!r}")

    def replace(self, **changes) -> "SampleSpec":
        fields = dict(grid=self.grid, n_paths=self.n_paths, seed=self.seed,
                      drift=self.drift, kind=self.kind, extrema=self.extrema)
        fields.update(changes)
        return SampleSpec(**fields)


@dataclass(frozen=True)
class PathBatch(Sequence[PlPath]):
    """Dense storage for paths sharing a grid.

    ``times`` is either ``(n_knots,)`` (common knots) or
    ``(n_paths, n_knots)``; ``values`` is ``(n_paths, n_knots)``;
    ``grid_index[k]`` is the column holding grid time ``k``.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    grid_index: np.ndarray
    spec: SampleSpec | None = field(default=None, compare=False)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        t = self.times if self.times.ndim == 1 else self.times[i]
        return PlPath(t, self.values[i])

    def __iter__(self) -> Iterator[PlPath]:
        return (self[i] for i in range(len(self)))

    def at_grid(self, values: np.ndarray | None = None) -> np.ndarray:
        """Columns of ``values`` (default: the path values) at grid times."""
        v = self.values if values is None else values
        return v[:, self.grid_index]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[:, -1]


def _chunks(n):
    for lo in range(0, n, CHUNK):
        yield np.arange(lo, min(n, lo + CHUNK))


def _brownian_grid_values(seed, ids, grid: Grid, drift: float, stream: int):
    dt = grid.dt
    z = rng.normals(seed, ids, stream, grid.n_steps)
    inc = np.sqrt(dt) * z + drift * dt
    out = np.zeros((ids.size, grid.n_steps + 1))
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def _with_bridge_extrema(seed, ids, grid: Grid, vals, which: str):
    dt = grid.dt
    u = rng.uniforms(seed, ids, STREAM_EXTREMA, grid.n_steps)
    a, b = vals[:, :-1], vals[:, 1:]
    root = np.sqrt((b - a) ** 2 - 2.0 * dt * np.log(u))
    sign = 1.0 if which == "max" else -1.0
    m = 0.5 * (a + b + sign * root)
    rise_a, rise_b = np.abs(m - a), np.abs(m - b)
    frac = np.clip(rise_a / (rise_a + rise_b), 1e-9, 1.0 - 1e-9)
    t0 = grid.times[:-1]
    theta = t0[None, :] + dt * frac
    n, k = vals.shape
    times = np.empty((n, 2 * k - 1))
    values = np.empty((n, 2 * k - 1))
    times[:, 0::2] = grid.times[None, :]
    times[:, 1::2] = theta
    values[:, 0::2] = vals
    values[:, 1::2] = m
    return times, values


def sample_brownian(spec: SampleSpec) -> PathBatch:
    """Brownian paths with drift ``spec.drift`` started at 0.

    Grid increments are independent ``N(drift dt, dt)``.
    """
    if spec.kind != "brownian":
        raise DomainError("sample_brownian needs kind='brownian'")
    grid = spec.grid
    k = grid.n_steps + 1
    if spec.extrema is None:
        values = np.empty((spec.n_paths, k))
        for ids in _chunks(spec.n_paths):
            values[ids] = _brownian_grid_values(spec.seed, ids, grid, spec.drift,
                                                STREAM_INCREMENTS)
        return PathBatch(grid, grid.times, values, np.arange(k), spec)
    times = np.empty((spec.n_paths, 2 * k - 1))
    values = np.empty((spec.n_paths, 2 * k - 1))
    for ids in _chunks(spec.n_paths):
        v = _brownian_grid_values(spec.seed, ids, grid, spec.drift, STREAM_INCREMENTS)
        times[ids], values[ids] = _with_bridge_extrema(spec.seed, ids, grid, v, spec.extrema)
    return PathBatch(grid, times, values, np.arange(0, 2 * k - 1, 2), spec)


def sample_bessel3(spec: SampleSpec) -> PathBatch:
    """Euclidean norm of three independent driftless Brownian motions."""
    if spec.kind != "bessel3":
        raise DomainError("sample_bessel3 needs kind='bessel3'")
    grid = spec.grid
    k = grid.n_steps + 1
    values = np.empty((spec.n_paths, k))
    for ids in _chunks(spec.n_paths):
        sq = np.zeros((ids.size, k))
        for stream in STREAM_BESSEL:
            sq += _brownian_grid_values(spec.seed, ids, grid, 0.0, stream) ** 2
        values[ids] = np.sqrt(sq)
    return PathBatch(grid, grid.times, values, np.arange(k), spec)


def sample(spec: SampleSpec) -> PathBatch:
    return sample_brownian(spec) if spec.kind == "brownian" else sample_bessel3(spec)


def rescale(path: PlPath, c: float) -> PlPath:
    """Brownian scaling ``u -> c phi(u / c^2)`` on ``[0, c^2 t]``."""
    return PlPath(path.times * c * c, path.values * c)


def write_long_csv(batch: PathBatch, dest) -> None:
    """Long-format ``path_id,time,value`` export."""
    import csv

    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "time", "value"])
        for i, p in enumerate(batch):
            for s, x in zip(p.times, p.values):
                w.writerow([i, f"{s:.17g}", f"{x:.17g}"])
