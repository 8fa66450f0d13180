"""Schwarzian derivative, Cameron-Martin density, and change-of-variables cocycles.

The left action of a smooth diffeomorphism phi on a random diffeomorphism f
is L_phi f = phi^{-1} o f.  Its Radon-Nikodym density against the sampling
measure with scale sigma (a standard-deviation scale; the underlying
Gaussian variance is sigma^2) is

    circle:    exp{ (1/sigma^2) integral_T S_phi(f(t)) f'(t)^2 dt }
    interval:  exp{ -(1/sigma^2) [ (phi''/phi')(f(1)) f'(1)
                                   - (phi''/phi')(f(0)) f'(0)
                                   - integral_0^1 S_phi(f(t)) f'(t)^2 dt ] }

with S_phi the Schwarzian derivative.  At sigma = 1 the circle form is the
classical display exp{ integral S_phi(f) f'^2 }.  Rotations have S = 0, so
their density is identically 1.  Mass conservation E[density] = 1 holds for
every admissible phi and is checked by Monte Carlo in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diffeo import CircleDiffeo, IntervalDiffeo
from .paths import Grid, Path, PathKind, SeedSpec, sample_bridge


def _fd_derivative(fun: Callable, x, step: float = 1e-3):
    """Five-point central difference, O(step^4)."""
    x = np.asarray(x, dtype=float)
    return (-fun(x + 2 * step) + 8 * fun(x + step)
            - 8 * fun(x - step) + fun(x - 2 * step)) / (12 * step)


class SmoothMap:
    """Closed-form diffeomorphism with derivatives up to order three.

    ``fun`` is the map itself; circle maps are given by their degree-one
    lift.  Missing derivative callables fall back to high-order central
    finite differences of the previous order.
    """

    def __init__(self, fun, d1=None, d2=None, d3=None, circle=False, name="map",
                 fd_step=1e-3):
        self.fun = fun
        self.circle = circle
        self.name = name
        self.d1 = d1 if d1 is not None else (lambda t: _fd_derivative(fun, t, fd_step))
        self.d2 = d2 if d2 is not None else (lambda t: _fd_derivative(self.d1, t, fd_step))
        self.d3 = d3 if d3 is not None else (lambda t: _fd_derivative(self.d2, t, fd_step))

    def __call__(self, t):
        return self.fun(np.asarray(t, dtype=float))

    def lift(self, t):
        return self.__call__(t)

    def nonlinearity(self, t):
        """phi''/phi' (the log-derivative's derivative)."""
        return self.d2(t) / self.d1(t)

    def inverse(self, y, tol: float = 1e-13):
        """phi^{-1}(y) by safeguarded Newton (monotone maps only)."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        if self.circle:
            # degree-one lift: phi(y - 1) <= ... bracket within [y-2, y+2]
            lo, hi = y - 2.0, y + 2.0
        else:
            lo, hi = np.zeros_like(y), np.ones_like(y)
        x = 0.5 * (lo + hi)
        for _ in range(100):
            fx = self.fun(x) - y
            lo = np.where(fx < 0, x, lo)
            hi = np.where(fx >= 0, x, hi)
            step = fx / self.d1(x)
            x_new = x - step
            bad = (x_new <= lo) | (x_new >= hi) | ~np.isfinite(x_new)
            x_new = np.where(bad, 0.5 * (lo + hi), x_new)
            if np.max(np.abs(x_new - x)) < tol:
                x = x_new
                break
            x = x_new
        return float(x[0]) if scalar else x


class DomainError(ValueError):
    pass


def schwarzian(phi: SmoothMap, t):
    """S_phi = phi'''/phi' - (3/2) (phi''/phi')^2."""
    d1 = np.asarray(phi.d1(t), dtype=float)
    if np.any(d1 <= 0):
        raise DomainError("Schwarzian needs a strictly increasing map (phi' > 0)")
    ratio2 = np.asarray(phi.d2(t), dtype=float) / d1
    return np.asarray(phi.d3(t), dtype=float) / d1 - 1.5 * ratio2**2


def compose_smooth(phi: SmoothMap, psi: SmoothMap, name=None) -> SmoothMap:
    """phi o psi with chain-rule derivatives up to order three."""
    def fun(t):
        return phi.fun(psi.fun(t))

    def d1(t):
        return phi.d1(psi.fun(t)) * psi.d1(t)

    def d2(t):
        u, p1, p2 = psi.fun(t), psi.d1(t), psi.d2(t)
        return phi.d2(u) * p1**2 + phi.d1(u) * p2

    def d3(t):
        u, p1, p2, p3 = psi.fun(t), psi.d1(t), psi.d2(t), psi.d3(t)
        return phi.d3(u) * p1**3 + 3 * phi.d2(u) * p1 * p2 + phi.d1(u) * p3

    return SmoothMap(fun, d1, d2, d3, circle=phi.circle and psi.circle,
                     name=name or f"{phi.name}*{psi.name}")


def schwarzian_cocycle_check(phi: SmoothMap, psi: SmoothMap, t_samples) -> float:
    """max |S_{phi o psi} - (S_phi o psi * psi'^2 + S_psi)| over the samples."""
    t = np.asarray(t_samples, dtype=float)
    comp = compose_smooth(phi, psi)
    lhs = schwarzian(comp, t)
    rhs = schwarzian(phi, psi.fun(t)) * np.asarray(psi.d1(t)) ** 2 + schwarzian(psi, t)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class DensityEval:
    value: float
    log_value: float
    quadrature_cells: int
    error_estimate: float


def cameron_martin_density(x_prime: Callable, y: Path) -> DensityEval:
    """Density of the shift y -> y + x against the free-path measure.

    x must be a Dirichlet-space direction given through its derivative
    x'(t); the stochastic integral is the left-point Stieltjes sum
    sum x'(s_i) (y_{i+1} - y_i), valid because x' is smooth.  The path's
    sigma scale is honored: the exponent carries 1/sigma^2.
    """
    if y.kind is not PathKind.FREE:
        raise ValueError("Cameron-Martin density is evaluated at free paths")
    t = y.grid.points
    xp = np.asarray(x_prime(t), dtype=float)
    incr = np.diff(y.values)

    def log_density(sub: int) -> float:
        coarse_incr = np.add.reduceat(incr, np.arange(0, len(incr), sub))
        stieltjes = float(np.sum(xp[:-1:sub] * coarse_incr))
        energy = float(np.trapezoid(xp[::sub] ** 2, t[::sub]))
        return (stieltjes - 0.5 * energy) / y.sigma**2

    log_full = log_density(1)
    log_half = log_density(2)
    err = abs(log_full - log_half)
    return DensityEval(value=math.exp(log_full), log_value=log_full,
                       quadrature_cells=y.grid.n, error_estimate=err)


def _circle_log_density(phi: SmoothMap, f: CircleDiffeo, sigma: float, sub: int = 1) -> float:
    t = f.grid.points[::sub]
    ft = f.lift(t)
    fp = f.derivative(t)
    integrand = schwarzian(phi, ft) * fp**2
    return float(np.trapezoid(integrand, t)) / sigma**2


def shavgulidze_cocycle(phi: SmoothMap, f: CircleDiffeo, sigma: float = 1.0) -> DensityEval:
    """Radon-Nikodym density of L_phi = (f -> phi^{-1} o f) on circle maps.

    exp{ (1/sigma^2) integral_T S_phi(f(t)) f'(t)^2 dt }, by composite
    trapezoid quadrature on f's grid; the error estimate is the Richardson
    difference between the full and half grids.  Rotations give exactly 1.
    """
    if not phi.circle:
        raise ValueError("phi must be a circle map")
    log_full = _circle_log_density(phi, f, sigma, 1)
    log_half = _circle_log_density(phi, f, sigma, 2)
    return DensityEval(value=math.exp(log_full), log_value=log_full,
                       quadrature_cells=f.grid.n,
                       error_estimate=abs(log_full - log_half))


def _interval_log_density(phi: SmoothMap, f: IntervalDiffeo, sigma: float, sub: int = 1) -> float:
    t = f.grid.points[::sub]
    ft = f.evaluate(t)
    fp = f.derivative(t)
    integral = float(np.trapezoid(schwarzian(phi, ft) * fp**2, t))
    boundary = (float(phi.nonlinearity(1.0)) * float(f.derivative(1.0))
                - float(phi.nonlinearity(0.0)) * float(f.derivative(0.0)))
    return -(boundary - integral) / sigma**2


def shavgulidze_cocycle_interval(phi: SmoothMap, f: IntervalDiffeo, sigma: float = 1.0) -> DensityEval:
    """Interval form of the density, with nonlinearity boundary terms."""
    if phi.circle:
        raise ValueError("phi must be an interval map")
    log_full = _interval_log_density(phi, f, sigma, 1)
    log_half = _interval_log_density(phi, f, sigma, 2)
    return DensityEval(value=math.exp(log_full), log_value=log_full,
                       quadrature_cells=f.grid.n,
                       error_estimate=abs(log_full - log_half))


class LeftTranslated:
    """Lazy lift of phi^{-1} o f (enough interface for orbit statistics)."""

    def __init__(self, phi: SmoothMap, f: CircleDiffeo):
        if not phi.circle:
            raise ValueError("phi must be a circle map")
        self.phi = phi
        self.f = f
        self.grid = f.grid

    def lift(self, t):
        return self.phi.inverse(self.f.lift(t))

    def evaluate(self, t):
        out = np.mod(self.lift(t), 1.0)
        return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ChangeOfVariablesResult:
    lhs: float                  # mean h(phi^{-1} o f)
    rhs: float                  # mean h(f) * density(f)
    stderr: float               # standard error of the paired difference
    n: int
    mean_density: float

    @property
    def passed(self) -> bool:
        return abs(self.lhs - self.rhs) <= 3.0 * self.stderr


def change_of_variables_test(
    phi: SmoothMap,
    h: Callable[[CircleDiffeo], float],
    n_samples: int,
    sigma: float,
    seed: SeedSpec,
    grid_n: int = 2**10,
    h_translated: Callable | None = None,
) -> ChangeOfVariablesResult:
    """Two-estimator Monte Carlo check of the change-of-variables identity.

    lhs averages h(phi^{-1} o f); rhs averages h(f) * density(phi, f).  For
    the identity E[h(L_phi f)] = E[h(f) rho_phi(f)] the two agree within
    Monte Carlo error.  ``h_translated`` may supply a cheaper evaluation of
    h(phi^{-1} o f) (defaults to building the lazy translated map).
    """
    grid = Grid(grid_n)
    rng_master = seed.master_seed
    lhs_vals = np.empty(n_samples)
    rhs_vals = np.empty(n_samples)
    dens_vals = np.empty(n_samples)
    for i in range(n_samples):
        s = SeedSpec(rng_master, seed.sample_index + i)
        path = sample_bridge(grid, sigma, s)
        alpha = _alpha_draw(s, grid)
        f = CircleDiffeo(IntervalDiffeo(grid, path.values), alpha)
        dens = shavgulidze_cocycle(phi, f, sigma)
        if h_translated is not None:
            lhs_vals[i] = h_translated(phi, f)
        else:
            lhs_vals[i] = h(LeftTranslated(phi, f))
        rhs_vals[i] = h(f) * dens.value
        dens_vals[i] = dens.value
    diff = lhs_vals - rhs_vals
    stderr = float(np.std(diff, ddof=1) / math.sqrt(n_samples))
    return ChangeOfVariablesResult(
        lhs=float(np.mean(lhs_vals)), rhs=float(np.mean(rhs_vals)),
        stderr=stderr, n=n_samples, mean_density=float(np.mean(dens_vals)),
    )


def _alpha_draw(seed: SeedSpec, grid: Grid) -> float:
    """Uniform offset drawn after the path draws of the same stream."""
    rng = seed.generator()
    rng.integers(0, 2**53, size=grid.n)   # skip the increments consumed by the path
    return float((rng.integers(0, 2**53) + 0.5) / 2**53)


def sample_ms_circle(grid: Grid, sigma: float, seed: SeedSpec) -> CircleDiffeo:
    """One random circle diffeomorphism: bridge path plus independent offset."""
    path = sample_bridge(grid, sigma, seed)
    alpha = _alpha_draw(seed, grid)
    return CircleDiffeo(IntervalDiffeo(grid, path.values), alpha)


# ---------------------------------------------------------------------------
# registry of smooth test maps (used by the CLI and the acceptance suite)

def identity_map() -> SmoothMap:
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return SmoothMap(lambda t: np.asarray(t, dtype=float), one, zero, zero,
                     circle=False, name="identity")


def rotation_map(theta: float) -> SmoothMap:
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return SmoothMap(lambda t: np.asarray(t, dtype=float) + theta, one, zero, zero,
                     circle=True, name=f"rotation({theta})")


def sine_map(a: float, circle: bool = True) -> SmoothMap:
    """t + a sin(2 pi t); diffeomorphism for |a| < 1/(2 pi)."""
    if abs(a) >= 1.0 / (2 * math.pi):
        raise ValueError("sine amplitude too large for a diffeomorphism")
    w = 2 * math.pi
    return SmoothMap(
        lambda t: t + a * np.sin(w * t),
        lambda t: 1 + a * w * np.cos(w * t),
        lambda t: -a * w**2 * np.sin(w * t),
        lambda t: -a * w**3 * np.cos(w * t),
        circle=circle, name=f"sine({a})",
    )


def mobius_interval(c: float) -> SmoothMap:
    """t -> t / (c - (c-1) t): the Mobius maps of [0,1] fixing 0 and 1 (c > 0)."""
    if c <= 0:
        raise ValueError("need c > 0")
    k = c - 1.0

    def fun(t):
        return t / (c - k * t)

    def d1(t):
        return c / (c - k * t) ** 2

    def d2(t):
        return 2 * c * k / (c - k * t) ** 3

    def d3(t):
        return 6 * c * k**2 / (c - k * t) ** 4

    return SmoothMap(fun, d1, d2, d3, circle=False, name=f"mobius({c})")


def mobius_line(a: float, b: float, c: float, d: float) -> SmoothMap:
    """(a t + b)/(c t + d) on an interval where it is increasing and finite."""
    det = a * d - b * c
    if det <= 0:
        raise ValueError("need positive determinant for an increasing map")

    def fun(t):
        return (a * t + b) / (c * t + d)

    def d1(t):
        return det / (c * t + d) ** 2

    def d2(t):
        return -2 * det * c / (c * t + d) ** 3

    def d3(t):
        return 6 * det * c**2 / (c * t + d) ** 4

    return SmoothMap(fun, d1, d2, d3, circle=False, name="mobius_line")


def mobius_circle(r: float, theta: float = 0.0) -> SmoothMap:
    """Boundary angle map of the disk automorphism z -> e^{2 pi i theta}(z+r)/(1+rz).

    For r = 0 this is the rigid rotation by theta (a projective rotation),
    whose Schwarzian in the angle coordinate vanishes identically.  For
    r != 0 the angle-coordinate Schwarzian does NOT vanish (it equals
    2 pi^2 (1 - phi'^2)), although the map is projectively flat on the disk.
    """
    if not -1 < r < 1:
        raise ValueError("need |r| < 1")
    w = 2 * math.pi

    def fun(t):
        t = np.asarray(t, dtype=float)
        z = np.exp(1j * w * t)
        m = (z + r) / (1 + r * z)
        ang = np.angle(m) / w
        # unwrap into a degree-one lift: the angle of M(e^{iwt}) minus t is periodic
        return t + np.mod(ang - t + 0.5, 1.0) - 0.5 + theta

    def d1(t):
        t = np.asarray(t, dtype=float)
        z = np.exp(1j * w * t)
        return (1 - r**2) / np.abs(1 + r * z) ** 2

    return SmoothMap(fun, d1, None, None, circle=True, name=f"mobius_circle({r},{theta})",
                     fd_step=2e-4)


MAP_REGISTRY: dict[str, Callable[[], SmoothMap]] = {
    "identity": identity_map,
    "rotation-0.3": lambda: rotation_map(0.3),
    "sine-0.05": lambda: sine_map(0.05, circle=True),
    "sine-0.10": lambda: sine_map(0.10, circle=True),
    "mobius-elliptic-0.2": lambda: mobius_circle(0.2, 0.0),
    "mobius-rotation-0.3": lambda: mobius_circle(0.0, 0.3),
}


def h_eval_half(f) -> float:
    """Bounded statistic: the image of 1/2 as a circle point."""
    return float(np.mod(f.lift(0.5), 1.0))


H_REGISTRY: dict[str, Callable] = {
    "eval-half": h_eval_half,
}
