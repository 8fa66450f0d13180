"""Rotation numbers, continued fractions, and rational lock-in detection.

The rotation number of a circle map f with lift F is estimated by
(F^n(t0) - t0)/n, which is always within 1/n of the true value.  Rational
lock-in is a numerical verdict obtained by scanning F^q(t) - t - p for sign
changes over the convergents p/q of the estimate; absence of a lock is
reported as ``irrational_undecided``, never as a claim of irrationality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuedFraction:
    """x = a0 + 1/(a1 + 1/(a2 + ...)), truncated; all a_i >= 1 for i >= 1."""

    a0: int
    partial_quotients: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)


def continued_fraction(x: float, depth: int, tol: float = 0.0) -> ContinuedFraction:
    """Continued-fraction expansion, halting when the remainder drops below tol.

    The halting guard keeps float noise out of the partial quotients: digits
    beyond the precision of a rotation-number estimate are meaningless.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    a0 = int(np.floor(x))
    r = x - a0
    quotients: list[int] = []
    for _ in range(depth):
        if r <= tol or r <= 0:
            break
        inv = 1.0 / r
        a = int(np.floor(inv))
        if a < 1:
            break
        quotients.append(a)
        r = inv - a
    return ContinuedFraction(a0, tuple(quotients))


def convergents(cf: ContinuedFraction) -> list[Fraction]:
    """Convergents p_k/q_k in lowest terms, q_k strictly increasing."""
    out = []
    p_prev, q_prev = 1, 0
    p, q = cf.a0, 1
    out.append(Fraction(p, q))
    for a in cf.partial_quotients:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append(Fraction(p, q))
    return out


def cf_to_rational(cf: ContinuedFraction) -> Fraction:
    return convergents(cf)[-1]


class Verdict(Enum):
    RATIONAL = "rational"
    IRRATIONAL_UNDECIDED = "irrational_undecided"


@dataclass(frozen=True)
class RotationReport:
    estimate: float
    n_iter: int
    cf: ContinuedFraction
    convergents: tuple[Fraction, ...]
    verdict: Verdict
    p: int | None = None
    q: int | None = None
    witness: tuple[float, ...] | None = None
    witness_residual: float | None = None


def iterate_lift(f, t0: float, n: int) -> float:
    """F^n(t0) for any object exposing .lift (scalar iteration)."""
    t = float(t0)
    for _ in range(n):
        t = f.lift(t)
    return t


def rotation_number_estimate(f, n_iter: int = 500, t0: float = 0.0) -> float:
    """(F^n(t0) - t0)/n mod 1; within 1/n_iter of the rotation number."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    return (iterate_lift(f, t0, n_iter) - t0) / n_iter % 1.0


def orbit_trace(f, t0: float = 0.0, n_iter: int = 500, burn_in: int = 200) -> np.ndarray:
    """Circle orbit points f^k(t0) for k in [burn_in, n_iter)."""
    t = float(t0)
    out = []
    for k in range(n_iter):
        if k >= burn_in:
            out.append(t % 1.0)
        t = f.lift(t)
    return np.asarray(out)


def _bisect_root(g, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    glo = g(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (glo < 0) == (gm < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _lift_power_on_grid(f, q_values: list[int], scan_points: np.ndarray) -> dict[int, np.ndarray]:
    """F^q over all scan points for each q in q_values (shared iteration)."""
    out = {}
    t = scan_points.astype(float)
    q_max = max(q_values)
    wanted = set(q_values)
    for k in range(1, q_max + 1):
        t = f.lift(t)
        if k in wanted:
            out[k] = t.copy()
    return out


def rational_lock_in(
    f,
    q_max: int = 50,
    n_iter: int = 500,
    scan_n: int | None = None,
    residual_tol: float = 1e-9,
) -> RotationReport:
    """Detect a rational rotation number p/q by locating a periodic point.

    Candidates p/q are the convergents of the orbit estimate with q <= q_max.
    For each candidate, G(t) = F^q(t) - t - p is scanned for sign changes on
    the grid; a sign change is refined by bisection to a periodic witness.
    No lock within q_max keeps the verdict ``irrational_undecided``.
    """
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    est = rotation_number_estimate(f, n_iter=n_iter)
    cf = continued_fraction(est, depth=12, tol=10.0 / n_iter)
    convs = convergents(cf)
    candidates = [c for c in convs if 1 <= c.denominator <= q_max]

    if scan_n is None:
        scan_n = min(f.grid.n, 2**12) if hasattr(f, "grid") else 2**12
    grid_t = np.arange(scan_n) / scan_n

    report_kwargs = dict(estimate=est, n_iter=n_iter, cf=cf, convergents=tuple(convs))
    if candidates:
        powers = _lift_power_on_grid(f, [c.denominator for c in candidates], grid_t)
        for cand in candidates:
            p_lift, q = cand.numerator, cand.denominator   # lift translation count
            g_vals = powers[q] - grid_t - float(p_lift)
            root = None
            if np.max(np.abs(g_vals)) <= 1e-12:
                root = float(grid_t[0])      # degenerate: every grid point periodic
            else:
                exact = np.nonzero(g_vals == 0.0)[0]
                sign = np.sign(g_vals)
                flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
                if len(exact):
                    root = float(grid_t[exact[0]])
                elif len(flips):
                    i = flips[0]
                    gq = lambda t: iterate_lift(f, t, q) - t - p_lift
                    root = _bisect_root(gq, float(grid_t[i]), float(grid_t[i + 1]))
            if root is not None:
                residual = abs(iterate_lift(f, root, q) - root - p_lift)
                if residual <= residual_tol:
                    orbit = []
                    t = root
                    for _ in range(q):
                        orbit.append(t % 1.0)
                        t = f.lift(t)
                    return RotationReport(**report_kwargs, verdict=Verdict.RATIONAL,
                                          p=p_lift % q, q=q, witness=tuple(orbit),
                                          witness_residual=float(residual))
    return RotationReport(**report_kwargs, verdict=Verdict.IRRATIONAL_UNDECIDED)


def denjoy_koksma_check(
    alpha: float,
    q: int,
    u_samples: np.ndarray,
    var_u: float,
    quad_tol: float | None = None,
) -> bool:
    """Check the ergodic-sum bound for the rigid rotation by alpha.

    For q a convergent denominator of alpha, the Birkhoff sum of u over q
    steps stays within Var(u) of q * mean(u), uniformly.  u is given by
    samples on a uniform circle grid and evaluated off-grid by linear
    interpolation, so a small quadrature tolerance is added to the bound.
    """
    cf = continued_fraction(alpha, depth=30, tol=1e-14)
    denoms = {c.denominator for c in convergents(cf)}
    if q not in denoms:
        raise PreconditionError(f"q={q} is not a convergent denominator of alpha={alpha}")
    u = np.asarray(u_samples, dtype=float)
    m = len(u) - 1 if u[0] == u[-1] else len(u)
    base = u[:m]
    grid = np.arange(m) / m
    mean_u = float(np.mean(base))

    def u_at(t):
        s = (t % 1.0) * m
        i = np.floor(s).astype(int) % m
        frac = s - np.floor(s)
        return base[i] * (1 - frac) + base[(i + 1) % m] * frac

    total = np.zeros(m)
    for k in range(q):
        total += u_at(grid + k * alpha)
    lhs = float(np.max(np.abs(total - q * mean_u)))
    if quad_tol is None:
        quad_tol = max(1e-9, var_u * q / m)
    return lhs <= var_u + quad_tol
