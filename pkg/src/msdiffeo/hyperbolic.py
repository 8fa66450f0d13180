"""Fixed and periodic orbits, multipliers, linearization, and flow matching.

Hyperbolic fixed points are linearized by the Koenigs limit
h(x) = lim a^{-n} (f^n(x) - t*), iterated on the attracting side (the
inverse map is used at repelling points).  The linearizer conjugates f to
multiplication by a = f'(t*), which yields fractional iterates
f_s = h^{-1}(a^s h) and, for maps with exactly two hyperbolic ends, the
transition function matching the two boundary flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .diffeo import CircleDiffeo, IntervalDiffeo, empirical_modulus, from_lift_values
from .paths import Grid

DEFAULT_TOL_PAR = 1e-6
KOENIGS_STOP = 1e-12
KOENIGS_MAX_ITER = 10_000


class PointClass(Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    PARABOLIC_FLAGGED = "parabolic_flagged"


def classify(multiplier: float, tol_par: float = DEFAULT_TOL_PAR) -> PointClass:
    if multiplier < 1.0 - tol_par:
        return PointClass.ATTRACTING
    if multiplier > 1.0 + tol_par:
        return PointClass.REPELLING
    return PointClass.PARABOLIC_FLAGGED


@dataclass(frozen=True)
class FixedPoint:
    t: float
    multiplier: float
    cls: PointClass


@dataclass(frozen=True)
class FixedPointReport:
    points: tuple[FixedPoint, ...]
    degenerate_identity: bool = False

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _refine_fixed_point(f: IntervalDiffeo, lo: float, hi: float, tol: float = 1e-12) -> float:
    g = lambda t: f.evaluate(t) - t
    glo = g(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (glo < 0) == (gm < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_fixed_points(f: IntervalDiffeo, tol_par: float = DEFAULT_TOL_PAR) -> FixedPointReport:
    """All fixed points of an interval diffeomorphism, with multipliers.

    The endpoints 0 and 1 are always fixed and always reported.  Interior
    fixed points are sign changes of f(t) - t on the grid, refined by
    bisection to 1e-12.  If f is the identity to 1e-12 on the whole grid, a
    degenerate flag is returned instead of a point list.
    """
    t = f.grid.points
    g = f.cum - t
    if np.max(np.abs(g)) <= 1e-12:
        return FixedPointReport(points=(), degenerate_identity=True)
    roots = [0.0]
    interior = g[1:-1]
    sign = np.sign(interior)
    # grid values that vanish exactly are roots; otherwise look for flips
    zero_idx = np.nonzero(interior == 0.0)[0] + 1
    roots.extend(t[zero_idx])
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0] + 1
    for i in flips:
        roots.append(_refine_fixed_point(f, t[i], t[i + 1]))
    # sign change in the first/last cell (interior root next to an endpoint)
    if g[1] != 0.0 and np.sign(g[1]) != 0 and len(t) > 2:
        pass  # covered by the flip scan over interior nodes
    roots.append(1.0)
    roots = sorted(set(roots))
    pts = tuple(FixedPoint(r, float(f.derivative(r)), classify(float(f.derivative(r)), tol_par))
                for r in roots)
    return FixedPointReport(points=pts)


@dataclass(frozen=True)
class GapCheckResult:
    holds: bool
    alpha: float
    norm: float
    slacks: tuple[float, ...]      # (t1-t0) - bound, one per adjacent pair

    def __bool__(self) -> bool:
        return self.holds


def fixed_point_gap_check(f: IntervalDiffeo, alpha: float, fps: FixedPointReport | list[FixedPoint]) -> GapCheckResult:
    """Lower bound on gaps between adjacent fixed points from |log f'|.

    Between adjacent fixed points the derivative passes through 1, so the
    Holder seminorm of log f' bounds the gap from below:
    t1 - t0 >= (|log f'(t0)|^(1/a) + |log f'(t1)|^(1/a)) / ||log f'||_a^(1/a).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    pts = sorted((p.t for p in fps))
    norm = empirical_modulus(f, "holder", alpha)
    slacks = []
    holds = True
    for t0, t1 in zip(pts, pts[1:]):
        num = abs(f.log_derivative(t0)) ** (1.0 / alpha) + abs(f.log_derivative(t1)) ** (1.0 / alpha)
        bound = num / norm ** (1.0 / alpha)
        slack = (t1 - t0) - bound
        slacks.append(float(slack))
        if slack < 0:
            holds = False
    return GapCheckResult(holds, alpha, float(norm), tuple(slacks))


@dataclass(frozen=True)
class OrbitReport:
    q: int
    points: tuple[float, ...]       # cyclically ordered images under f
    multiplier: float
    cls: PointClass


@dataclass(frozen=True)
class PeriodicOrbitsReport:
    orbits: tuple[OrbitReport, ...]
    degenerate_rotation: bool = False

    def __iter__(self):
        return iter(self.orbits)

    def __len__(self):
        return len(self.orbits)


def _lift_iterates(f: CircleDiffeo, t: np.ndarray, q: int) -> np.ndarray:
    out = t.astype(float)
    for _ in range(q):
        out = f.lift(out)
    return out


def find_periodic_orbits(f: CircleDiffeo, p: int, q: int,
                         tol_par: float = DEFAULT_TOL_PAR,
                         scan_n: int | None = None) -> PeriodicOrbitsReport:
    """Periodic orbits of rotation type p/q: roots of F^q(t) - t - p on [0,1).

    Orbit multipliers are chain-rule products of f' along the orbit; when
    all orbits are hyperbolic their count is even and attracting/repelling
    orbits alternate around the circle.
    """
    if q < 1:
        raise ValueError("period q must be >= 1")
    if math.gcd(p, q) != 1 and not (p == 0 and q == 1):
        raise ValueError("p/q must be in lowest terms")
    if scan_n is None:
        scan_n = min(f.grid.n, 2**12)
    t = np.arange(scan_n) / scan_n
    g_vals = _lift_iterates(f, t, q) - t - p
    if np.max(np.abs(g_vals)) <= 1e-12:
        return PeriodicOrbitsReport(orbits=(), degenerate_rotation=True)
    sign = np.sign(g_vals)
    wrapped = np.append(g_vals, g_vals[0] + 0.0)  # circle wrap: compare last to first
    roots = []
    for i in np.nonzero(g_vals == 0.0)[0]:
        roots.append(float(t[i]))
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    gq = lambda s: float(_lift_iterates(f, np.asarray([s]), q)[0]) - s - p
    for i in flips:
        lo, hi, glo = float(t[i]), float(t[i + 1]), g_vals[i]
        for _ in range(200):
            if hi - lo <= 1e-12:
                break
            mid = 0.5 * (lo + hi)
            gm = gq(mid)
            if gm == 0.0:
                lo = hi = mid
                break
            if (glo < 0) == (gm < 0):
                lo, glo = mid, gm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    if sign[-1] * sign[0] < 0:   # root in the wrap cell [1-1/scan, 1)
        lo, hi, glo = float(t[-1]), 1.0, g_vals[-1]
        for _ in range(200):
            if hi - lo <= 1e-12:
                break
            mid = 0.5 * (lo + hi)
            gm = gq(mid)
            if (glo < 0) == (gm < 0):
                lo, glo = mid, gm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi) % 1.0)

    roots = sorted(roots)
    used = [False] * len(roots)
    orbits = []
    for i, r in enumerate(roots):
        if used[i]:
            continue
        orbit_pts = []
        s = r
        for _ in range(q):
            orbit_pts.append(s % 1.0)
            for j, rr in enumerate(roots):
                if not used[j] and abs(((rr - s + 0.5) % 1.0) - 0.5) <= 1e-7:
                    used[j] = True
                    break
            s = f.lift(s)
        mult = float(np.exp(np.sum(f.log_derivative(np.asarray(orbit_pts)))))
        orbits.append(OrbitReport(q, tuple(orbit_pts), mult, classify(mult, tol_par)))
    return PeriodicOrbitsReport(orbits=tuple(orbits))


@dataclass
class Linearization:
    """Koenigs linearizer around a hyperbolic fixed point.

    h is monotone on the domain, h(t*) = 0, h'(t*) = 1, and
    h(f(x)) = a h(x) with a the multiplier.  ``h_samples`` holds values on
    a uniform domain grid; arbitrary points are evaluated by re-running the
    defining iteration, which keeps the conjugacy residual at truncation
    level rather than interpolation level.
    """

    fp: FixedPoint
    a: float
    domain: tuple[float, float]
    xs: np.ndarray
    h_samples: np.ndarray
    _evaluator: object

    def h(self, x: float) -> float:
        return self._evaluator(x)

    def h_inverse(self, y: float, tol: float = 1e-13) -> float:
        """Monotone root-find of h(x) = y over the domain."""
        lo, hi = self.domain
        hlo, hhi = self.h(lo), self.h(hi)
        if not (min(hlo, hhi) <= y <= max(hlo, hhi)):
            raise ValueError(f"h target {y} outside linearization range")
        increasing = hhi >= hlo
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo <= tol:
                return mid
            hm = self.h(mid)
            if (hm < y) == increasing:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class UnsupportedMapError(ValueError):
    pass


def _koenigs_evaluator(f: IntervalDiffeo, t_star: float, a: float):
    """Return h(x) = lim r^{-n} (step^n(x) - t*) with step toward the fixed point.

    Far from t* the orbit is iterated directly; once within a quarter cell
    the iteration switches to difference space (stable in-cell closed
    forms), which avoids the floating-point absorption of x against t*
    and keeps h accurate to the truncation level of the stop criterion.
    """
    attracting = a < 1.0
    rate = a if attracting else 1.0 / a
    step = f.evaluate if attracting else f.inverse_evaluate
    i_star, u_star = f.cell_position(t_star)
    r_star = float(f.evaluate(t_star)) - t_star        # residual of the refined root
    switch = 0.25 * f.grid.h
    n = f.grid.n

    def h(x: float) -> float:
        cur = float(x)
        acc = 1.0
        it = 0
        # phase 1: plain iteration until close to the fixed point
        while abs(cur - t_star) >= switch and it < KOENIGS_MAX_ITER:
            cur = float(step(cur))
            acc /= rate
            it += 1
        dt = cur - t_star
        # phase 2: difference-space iteration at full relative precision
        while abs(dt) > KOENIGS_STOP and it < KOENIGS_MAX_ITER and acc < 1e290:
            if attracting:
                dt = f.increment_near(i_star, u_star, dt * n) + r_star
            else:
                dt = f.solve_increment_near(i_star, u_star, dt - r_star) / n
            acc /= rate
            it += 1
        return acc * dt

    return h


def koenigs_linearize(
    f: IntervalDiffeo,
    fp: FixedPoint,
    m_points: int = 129,
    domain: tuple[float, float] | None = None,
    margin: float = 1e-3,
) -> Linearization:
    """Linearize f at a hyperbolic fixed point by the Koenigs limit.

    The domain defaults to the open basin up to the adjacent fixed points
    (shrunk by a relative margin); pass ``domain`` to restrict it.
    """
    if fp.cls is PointClass.PARABOLIC_FLAGGED:
        raise UnsupportedMapError("cannot linearize a parabolic-flagged fixed point")
    if domain is None:
        report = find_fixed_points(f)
        ts = sorted(p.t for p in report)
        lo_adj = max((t for t in ts if t < fp.t), default=0.0)
        hi_adj = min((t for t in ts if t > fp.t), default=1.0)
        width = hi_adj - lo_adj
        lo = lo_adj + margin * width if lo_adj < fp.t else fp.t
        hi = hi_adj - margin * width if hi_adj > fp.t else fp.t
        domain = (lo, hi)
    evaluator = _koenigs_evaluator(f, fp.t, fp.multiplier)
    xs = np.linspace(domain[0], domain[1], m_points)
    hs = np.asarray([evaluator(x) for x in xs])
    return Linearization(fp=fp, a=fp.multiplier, domain=domain, xs=xs,
                         h_samples=hs, _evaluator=evaluator)


def conjugacy_residual(lin: Linearization, f: IntervalDiffeo, xs: np.ndarray | None = None) -> float:
    """sup |h(f(x)) - a h(x)| over sample points inside the domain."""
    if xs is None:
        xs = lin.xs
    res = 0.0
    lo, hi = lin.domain
    for x in xs:
        fx = float(f.evaluate(float(x)))
        if not (lo <= fx <= hi):
            continue
        res = max(res, abs(lin.h(fx) - lin.a * lin.h(float(x))))
    return res


def szekeres_flow(lin: Linearization, x: float, s: float) -> float:
    """Fractional iterate f_s(x) = h^{-1}(a^s h(x)); f_1 = f, f_0 = id."""
    lo, hi = lin.domain
    if not lo <= x <= hi:
        raise ValueError(f"point {x} outside the linearization domain {lin.domain}")
    return lin.h_inverse(lin.a ** s * lin.h(x))


def mather_transition(lin0: Linearization, lin1: Linearization, x: float, y: float, t: float) -> float:
    """Transition function between the two boundary flows at parameter t.

    W(t) = log_a( h(k^{-1}(b^t k(y))) / h(x) ) with h, k the linearizers at
    the repelling (multiplier a > 1) and attracting (b < 1) ends.
    """
    a, b = lin0.a, lin1.a
    z = lin1.h_inverse(b ** t * lin1.h(y))
    return math.log(lin0.h(z) / lin0.h(x)) / math.log(a)


def mather_invariant(
    f: IntervalDiffeo,
    lin0: Linearization,
    lin1: Linearization,
    x: float,
    y: float,
    grid: Grid,
) -> CircleDiffeo:
    """Mather-type invariant of an interval map with two hyperbolic ends.

    Requires multipliers a = f'(0) > 1 > b = f'(1); the transition function
    commutes with integer translations and is returned as a degree-one
    circle diffeomorphism resampled onto ``grid``.
    """
    a, b = lin0.a, lin1.a
    if not (a > 1.0 > b):
        raise UnsupportedMapError("need a repelling left end and attracting right end (a > 1 > b)")
    ts = grid.points
    w = np.asarray([mather_transition(lin0, lin1, x, y, float(t)) for t in ts])
    defect = (w[-1] - w[0]) - 1.0
    if abs(defect) > 1e-6:
        raise UnsupportedMapError(f"transition function not 1-periodic (defect {defect:.2e})")
    w = w.copy()
    w[-1] = w[0] + 1.0
    if np.any(np.diff(w) <= 0):
        raise UnsupportedMapError("transition function not strictly increasing on the grid")
    return from_lift_values(grid, w)
