"""Brownian motion and Brownian bridge sampling on dyadic grids.

Paths are sampled on uniform dyadic grids of [0, 1].  The scale parameter
``sigma`` is a standard-deviation scale throughout: a path with scale sigma
is sigma times a standard path, so the increment over a cell of width h has
standard deviation sigma * sqrt(h).

Randomness comes from a counter-based Philox stream keyed on
(master_seed, sample_index); Gaussian variates are produced by inverse-CDF
transform of open-interval uniforms, which makes every draw a pure function
of the seed spec regardless of how samples are distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri


class ConfigurationError(ValueError):
    """Invalid grid or campaign configuration."""


class ResolutionError(ValueError):
    """A requested scale is below the resolution of the grid."""


class RejectedPathError(ValueError):
    """Path rejected by the overflow guard (max |value| too large)."""

    def __init__(self, max_abs: float):
        self.max_abs = max_abs
        super().__init__(f"path rejected: max |value| = {max_abs:.3g} exceeds exp-overflow guard")


@dataclass(frozen=True)
class Grid:
    """Uniform dyadic grid of [0, 1] with n subintervals, n a power of two."""

    n: int

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ConfigurationError(f"grid size must be a power of two >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @property
    def levels(self) -> int:
        return int(self.n).bit_length() - 1


class PathKind(Enum):
    FREE = "free"
    BRIDGE = "bridge"


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible stream key: (master_seed, sample_index) -> Philox stream."""

    master_seed: int
    sample_index: int = 0

    def generator(self) -> Generator:
        key = (np.uint64(self.master_seed & (2**64 - 1)), np.uint64(self.sample_index & (2**64 - 1)))
        return Generator(Philox(key=key))


def standard_normals(rng: Generator, size: int) -> np.ndarray:
    """Inverse-CDF Gaussians from open-interval uniforms (reproducible)."""
    u = (rng.integers(0, 2**53, size=size).astype(np.float64) + 0.5) / 2**53
    return ndtri(u)


@dataclass(frozen=True)
class Path:
    """A sampled real path on a dyadic grid; values[0] = 0 always."""

    grid: Grid
    values: np.ndarray
    sigma: float
    kind: PathKind

    def __post_init__(self):
        if len(self.values) != self.grid.n + 1:
            raise ConfigurationError("value vector does not match grid")
        if self.values[0] != 0.0:
            raise ConfigurationError("paths start at 0")
        if self.kind is PathKind.BRIDGE and self.values[-1] != 0.0:
            raise ConfigurationError("bridge paths must end at 0")
        self.values.setflags(write=False)


def zero_path(grid: Grid, sigma: float = 1.0, kind: PathKind = PathKind.BRIDGE) -> Path:
    return Path(grid, np.zeros(grid.n + 1), sigma, kind)


def sample_brownian(grid: Grid, sigma: float, seed: SeedSpec) -> Path:
    """Brownian motion on the grid: independent N(0, sigma^2 h) increments."""
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    rng = seed.generator()
    incr = sigma * np.sqrt(grid.h) * standard_normals(rng, grid.n)
    values = np.concatenate(([0.0], np.cumsum(incr)))
    return Path(grid, values, sigma, PathKind.FREE)


def bridge_project(path: Path) -> Path:
    """Project a path onto bridges: x(t) = y(t) - t*y(1).

    Linear and idempotent; kills linear paths, fixes bridges.
    """
    t = path.grid.points
    values = path.values - t * path.values[-1]
    values[-1] = 0.0  # exact endpoint, not just up to rounding
    return Path(path.grid, values, path.sigma, PathKind.BRIDGE)


def sample_bridge(grid: Grid, sigma: float, seed: SeedSpec) -> Path:
    """Brownian bridge: projection of a Brownian path from the same stream."""
    return bridge_project(sample_brownian(grid, sigma, seed))


def sample_bridge_levy(grid: Grid, sigma: float, seed: SeedSpec, levels: int | None = None) -> Path:
    """Brownian bridge by dyadic midpoint refinement.

    Independent of :func:`sample_bridge` (different construction, same
    distribution); intended for cross-validation.  Level-m refinement fills
    midpoints of spans of width d with N(midpoint mean, sigma^2 d/4) draws.
    A truncation at ``levels=0`` returns the zero path.  Values at coarse
    dyadic points are unchanged by deeper refinement, so the restriction of
    a fine sample to a coarser grid is the coarser sample of the same seed.
    """
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    total_levels = grid.levels
    if levels is None:
        levels = total_levels
    if not 0 <= levels <= total_levels:
        raise ConfigurationError(f"levels must lie in [0, {total_levels}]")
    rng = seed.generator()
    values = np.zeros(grid.n + 1)
    for m in range(1, levels + 1):
        span = grid.n >> (m - 1)          # index width of the spans being split
        half = span >> 1
        left = np.arange(0, grid.n, span)
        mid_sd = sigma * np.sqrt(grid.h * half / 2.0)  # Var = d/4, d = span*h
        noise = standard_normals(rng, len(left))
        values[left + half] = 0.5 * (values[left] + values[left + span]) + mid_sd * noise
    return Path(grid, values, sigma, PathKind.BRIDGE)


def levy_modulus_ratio(path: Path, eps: float) -> float:
    """sup over grid pairs with |t-s| <= eps of |x(t)-x(s)| / (sigma*w(eps)).

    w(t) = sqrt(2 t |log t|) is the Levy modulus; the a.s. limit of this
    ratio as eps -> 0 is 1 for Brownian paths.
    """
    n = path.grid.n
    if eps < path.grid.h or eps >= 0.5:
        raise ResolutionError(f"eps must lie in [1/n, 1/2), got {eps}")
    k_max = int(np.floor(eps * n))
    v = path.values
    sup = 0.0
    for k in range(1, k_max + 1):
        d = np.max(np.abs(v[k:] - v[:-k]))
        if d > sup:
            sup = d
    w = np.sqrt(2.0 * eps * abs(np.log(eps)))
    return sup / (path.sigma * w)


def holder_exponent_estimate(path: Path, min_lag_exp: int = 2, n_windows: int = 64) -> float:
    """Holder exponent by log-log regression of max increment against scale.

    For each dyadic lag k = 2^j the statistic is the maximum of
    |x(t+kh) - x(t)| over a fixed number of disjoint windows (at most
    ``n_windows``, always including the window at t = 0).  Keeping the
    window count fixed across scales keeps the extreme-value factor
    scale-independent, so Brownian paths regress to slope 1/2 without a
    logarithmic bias.
    """
    grid = path.grid
    if grid.n < 2**8:
        raise ConfigurationError("holder_exponent_estimate needs n >= 2^8")
    v = path.values
    if np.all(v == v[0]):
        raise ValueError("degenerate constant path: slope undefined")
    lags, maxima = [], []
    max_lag_exp = grid.levels - int(np.ceil(np.log2(n_windows)))
    for j in range(min_lag_exp, max_lag_exp + 1):
        k = 1 << j
        starts_all = np.arange(0, grid.n - k + 1, k)
        if len(starts_all) > n_windows:
            idx = np.linspace(0, len(starts_all) - 1, n_windows).astype(int)
            starts = starts_all[idx]
        else:
            starts = starts_all
        m = np.max(np.abs(v[starts + k] - v[starts]))
        if m == 0.0:
            continue
        lags.append(k * grid.h)
        maxima.append(m)
    if len(lags) < 2:
        raise ValueError("not enough nonempty scales for a slope")
    slope, _ = np.polyfit(np.log(lags), np.log(maxima), 1)
    return float(slope)


def empirical_increment_covariance(
    paths: list[Path], t_indices: list[int]
) -> np.ndarray:
    """Empirical covariance matrix of path values at the given grid indices."""
    data = np.stack([p.values[t_indices] for p in paths])
    return np.cov(data, rowvar=False, bias=True)
