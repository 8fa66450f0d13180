"""C1 diffeomorphisms of the interval and circle from sampled log-derivatives.

A diffeomorphism is stored as samples of log f' (up to an additive
constant) on a dyadic grid.  Between grid points log f' is interpolated
linearly, so f' is log-linear on each cell and f itself is the exact
closed-form integral of an exponential there.  This keeps the derivative
strictly positive, makes the coordinate roundtrips exact on grids, and
gives closed-form cell integrals and inverses.

Interval maps fix 0 and 1: f(t) = int_0^t exp(x) / int_0^1 exp(x).
Circle maps add an offset alpha = f(0) and are handled through their
degree-one lifts F (F(t+1) = F(t) + 1 exactly).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .paths import Grid, Path, PathKind, RejectedPathError

EXP_OVERFLOW_GUARD = 700.0


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, stable near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0, np.expm1(safe) / safe)


@dataclass(frozen=True)
class IntervalDiffeo:
    """Increasing C1 diffeomorphism of [0,1] with log-linear derivative cells."""

    grid: Grid
    logderiv: np.ndarray            # log f' + const, at grid nodes
    cumraw: np.ndarray = field(init=False)   # unnormalized integral of exp(logderiv)
    log_z: float = field(init=False)

    def __post_init__(self):
        ld = np.asarray(self.logderiv, dtype=float)
        if len(ld) != self.grid.n + 1:
            raise ValueError("logderiv length does not match grid")
        if not np.all(np.isfinite(ld)):
            raise ValueError("logderiv must be finite")
        if np.max(np.abs(ld)) > EXP_OVERFLOW_GUARD:
            raise RejectedPathError(float(np.max(np.abs(ld))))
        ld = ld.copy()
        ld.setflags(write=False)
        object.__setattr__(self, "logderiv", ld)
        a, b = ld[:-1], ld[1:]
        cells = self.grid.h * np.exp(a) * _phi1(b - a)
        cumraw = np.concatenate(([0.0], np.cumsum(cells)))
        cumraw.setflags(write=False)
        object.__setattr__(self, "cumraw", cumraw)
        object.__setattr__(self, "log_z", float(np.log(cumraw[-1])))

    @property
    def cum(self) -> np.ndarray:
        """Normalized node values f(t_i); cum[0] = 0, cum[n] = 1."""
        return self.cumraw / self.cumraw[-1]

    def evaluate(self, t):
        """f(t) for t in [0,1]; exact exponential-cell integral (vectorized)."""
        t = np.asarray(t, dtype=float)
        n = self.grid.n
        i = np.clip((t * n).astype(int), 0, n - 1)
        a, b = self.logderiv[i], self.logderiv[i + 1]
        u = t * n - i
        partial = self.grid.h * np.exp(a) * u * _phi1((b - a) * u)
        out = (self.cumraw[i] + partial) / self.cumraw[-1]
        return out if out.ndim else float(out)

    def derivative(self, t):
        """f'(t) = exp(interpolated log-derivative - log Z)."""
        t = np.asarray(t, dtype=float)
        n = self.grid.n
        i = np.clip((t * n).astype(int), 0, n - 1)
        u = t * n - i
        a, b = self.logderiv[i], self.logderiv[i + 1]
        out = np.exp(a + (b - a) * u - self.log_z)
        return out if out.ndim else float(out)

    def log_derivative(self, t):
        """log f'(t), interpolated."""
        t = np.asarray(t, dtype=float)
        n = self.grid.n
        i = np.clip((t * n).astype(int), 0, n - 1)
        u = t * n - i
        a, b = self.logderiv[i], self.logderiv[i + 1]
        out = a + (b - a) * u - self.log_z
        return out if out.ndim else float(out)

    def _segment_raw(self, i: int, u0: float, du: float) -> float:
        """Unnormalized integral of exp(interp logderiv) over [u0, u0+du] in cell i.

        du >= 0; stable for tiny du (no cancellation): the closed form is
        h * exp(a + z*u0) * du * phi1(z*du).
        """
        a, b = self.logderiv[i], self.logderiv[i + 1]
        z = b - a
        return self.grid.h * np.exp(a + z * u0) * du * float(_phi1(z * du))

    def increment_near(self, i: int, u: float, delta_u: float) -> float:
        """f(t + delta_u*h) - f(t) for t at in-cell position (i, u), stably.

        Crosses at most one cell node (requires |delta_u| <= 1); intended
        for difference-space iteration near fixed points, where evaluating
        f and subtracting would lose all precision.
        """
        z_inv = np.exp(-self.log_z)
        if delta_u >= 0:
            rem = 1.0 - u
            if delta_u <= rem or i == self.grid.n - 1:
                return self._segment_raw(i, u, delta_u) * z_inv
            return (self._segment_raw(i, u, rem)
                    + self._segment_raw(i + 1, 0.0, delta_u - rem)) * z_inv
        down = -delta_u
        if down <= u or i == 0:
            return -self._segment_raw(i, u - down, down) * z_inv
        extra = down - u
        return -(self._segment_raw(i, 0.0, u)
                 + self._segment_raw(i - 1, 1.0 - extra, extra)) * z_inv

    def solve_increment_near(self, i: int, u: float, d: float) -> float:
        """delta_u with increment_near(i, u, delta_u) = d (local inverse)."""

        def cell_solve(ci: int, cu: float, raw: float) -> float:
            # raw = unnormalized mass to absorb going up from (ci, cu)
            a, b = self.logderiv[ci], self.logderiv[ci + 1]
            z = b - a
            w = raw * z / (self.grid.h * np.exp(a + z * cu))
            if abs(z) < 1e-10:
                return raw / (self.grid.h * np.exp(a + z * cu))
            return float(np.log1p(w) / z)

        z_fac = np.exp(self.log_z)
        if d >= 0:
            raw = d * z_fac
            cap = self._segment_raw(i, u, 1.0 - u)
            if raw <= cap or i == self.grid.n - 1:
                return cell_solve(i, u, raw)
            return (1.0 - u) + cell_solve(i + 1, 0.0, raw - cap)
        raw = -d * z_fac
        cap = self._segment_raw(i, 0.0, u)
        if raw <= cap or i == 0:
            # solve downward: mass raw below position u in cell i
            a, b = self.logderiv[i], self.logderiv[i + 1]
            z = b - a
            w = raw * z / (self.grid.h * np.exp(a + z * u))
            if abs(z) < 1e-10:
                return -raw / (self.grid.h * np.exp(a + z * u))
            return float(np.log1p(-w) / z)
        extra_raw = raw - cap
        a, b = self.logderiv[i - 1], self.logderiv[i]
        z = b - a
        w = extra_raw * z / (self.grid.h * np.exp(a + z * 1.0))
        if abs(z) < 1e-10:
            delta = extra_raw / (self.grid.h * np.exp(b))
        else:
            delta = -float(np.log1p(-w) / z)
        return -(u + delta)

    def cell_position(self, t: float) -> tuple[int, float]:
        """(cell index, in-cell coordinate u) of t, with t=1 in the last cell."""
        n = self.grid.n
        i = min(max(int(t * n), 0), n - 1)
        return i, t * n - i

    def inverse_evaluate(self, y):
        """t with f(t) = y; closed-form solve inside the located cell."""
        y = np.asarray(y, dtype=float)
        n = self.grid.n
        cum = self.cum
        i = np.clip(np.searchsorted(cum, y, side="right") - 1, 0, n - 1)
        c = y * self.cumraw[-1] - self.cumraw[i]
        a, b = self.logderiv[i], self.logderiv[i + 1]
        z = b - a
        w = c * z / (self.grid.h * np.exp(a))
        small = np.abs(z) < 1e-10
        safe_z = np.where(small, 1.0, z)
        u = np.where(small,
                     c / (self.grid.h * np.exp(a)),
                     np.log1p(w) / safe_z)
        out = (i + np.clip(u, 0.0, 1.0)) / n
        return out if out.ndim else float(out)


def from_path_interval(path: Path) -> IntervalDiffeo:
    """Diffeomorphism with log f' = path values (up to the normalizing constant)."""
    return IntervalDiffeo(path.grid, path.values)


def to_path_interval(d: IntervalDiffeo, sigma: float = 1.0) -> Path:
    """Recover the defining path, normalized to start at 0 (exact on grids)."""
    values = d.logderiv - d.logderiv[0]
    kind = PathKind.BRIDGE if values[-1] == 0.0 else PathKind.FREE
    return Path(d.grid, values, sigma, kind)


@dataclass(frozen=True)
class CircleDiffeo:
    """Orientation-preserving circle diffeomorphism: base interval data + offset.

    The lift is F(t) = k + alpha + base(t - k) for t in [k, k+1), so
    F(t + 1) = F(t) + 1 holds exactly.
    """

    base: IntervalDiffeo
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def grid(self) -> Grid:
        return self.base.grid

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        k = np.floor(t)
        out = k + self.alpha + self.base.evaluate(t - k)
        return out if out.ndim else float(out)

    def evaluate(self, t):
        """Circle value in [0, 1)."""
        out = np.mod(self.lift(t), 1.0)
        return out if np.ndim(out) else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = self.base.derivative(t - np.floor(t))
        return out if out.ndim else float(out)

    def log_derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = self.base.log_derivative(t - np.floor(t))
        return out if out.ndim else float(out)

    def inverse_lift(self, y):
        """t with lift(t) = y."""
        y = np.asarray(y, dtype=float)
        w = y - self.alpha
        k = np.floor(w)
        out = k + self.base.inverse_evaluate(w - k)
        return out if out.ndim else float(out)

    def inverse_evaluate(self, y):
        """Circle point t in [0, 1) with f(t) = y (mod 1)."""
        y = np.asarray(y, dtype=float)
        out = np.mod(self.inverse_lift(np.mod(y, 1.0)), 1.0)
        return out if np.ndim(out) else float(out)


class Lift:
    """Lift view of a circle diffeomorphism: evaluation without mod-1 reduction."""

    def __init__(self, diffeo: CircleDiffeo):
        self.diffeo = diffeo

    def __call__(self, t):
        return self.diffeo.lift(t)


def from_path_circle(path: Path, alpha: float) -> CircleDiffeo:
    """Random circle diffeomorphism: normalized exponential integral plus offset.

    A bridge path with alpha drawn uniformly realizes the circle measure of
    the sampled family; the bridge condition makes log f' continuous at the
    marked point (f'(0) = f'(1)).
    """
    if path.kind is not PathKind.BRIDGE:
        raise ValueError("circle diffeomorphisms require a bridge path")
    return CircleDiffeo(IntervalDiffeo(path.grid, path.values), float(alpha))


def to_path_circle(d: CircleDiffeo, sigma: float = 1.0) -> tuple[Path, float]:
    return to_path_interval(d.base, sigma), d.alpha


def rotation(grid: Grid, theta: float) -> CircleDiffeo:
    """Rigid rotation by theta as a grid circle diffeomorphism."""
    return CircleDiffeo(IntervalDiffeo(grid, np.zeros(grid.n + 1)), theta % 1.0)


def identity_interval(grid: Grid) -> IntervalDiffeo:
    return IntervalDiffeo(grid, np.zeros(grid.n + 1))


def from_lift_values(grid: Grid, lift_values: np.ndarray) -> CircleDiffeo:
    """Circle diffeomorphism resampled from strictly increasing lift samples.

    lift_values[i] are samples of a degree-one lift at the grid nodes with
    lift_values[n] = lift_values[0] + 1.  Node log-derivatives are taken as
    the average of the adjacent secant log-slopes (cyclically), so node
    values are reproduced up to O(h^2) resampling error.
    """
    v = np.asarray(lift_values, dtype=float)
    if len(v) != grid.n + 1:
        raise ValueError("lift_values length does not match grid")
    if abs((v[-1] - v[0]) - 1.0) > 1e-9:
        raise ValueError("lift samples must satisfy V(1) = V(0) + 1")
    dv = np.diff(v)
    if np.any(dv <= 0):
        raise ValueError("lift samples must be strictly increasing")
    slopes = np.log(dv / grid.h)
    node = 0.5 * (slopes + np.roll(slopes, 1))     # node i averages cells i-1, i
    logderiv = np.concatenate((node, [node[0]]))
    return CircleDiffeo(IntervalDiffeo(grid, logderiv), v[0] % 1.0)


class ExactInverse:
    """Exact functional inverse of a circle diffeomorphism.

    Evaluation goes through the closed-form cell inverse, so no resampling
    error is introduced; composing f with ExactInverse(f) therefore cancels
    to rounding error.  Duck-types the circle-map interface used by
    :func:`compose`.
    """

    def __init__(self, f: CircleDiffeo):
        self.f = f
        self.alpha = f.inverse_lift(0.0) % 1.0

    @property
    def grid(self) -> Grid:
        return self.f.grid

    def lift(self, t):
        return self.f.inverse_lift(t)

    def evaluate(self, t):
        out = np.mod(self.lift(np.asarray(t, dtype=float)), 1.0)
        return out if np.ndim(out) else float(out)

    def log_derivative(self, t):
        s = self.f.inverse_lift(np.asarray(t, dtype=float))
        return -self.f.log_derivative(s)

    def derivative(self, t):
        return np.exp(self.log_derivative(t))


def compose(g, f) -> CircleDiffeo:
    """g o f, resampled onto f's grid (node log-derivatives via chain rule).

    Both arguments may be CircleDiffeo or any object with the same lift /
    log_derivative interface (e.g. ExactInverse).
    """
    t = f.grid.points
    ft = f.lift(t)
    logd = np.asarray(f.log_derivative(t) + g.log_derivative(ft), dtype=float).copy()
    logd[-1] = logd[0]       # degree-1 wrap: same circle point, same derivative
    alpha = g.lift(f.alpha % 1.0) % 1.0
    return CircleDiffeo(IntervalDiffeo(f.grid, logd), alpha)


def inverse(f: CircleDiffeo, resample: bool = False) -> CircleDiffeo | ExactInverse:
    """f^{-1}: exact wrapper by default, optionally resampled onto the grid."""
    inv = ExactInverse(f)
    if not resample:
        return inv
    t = f.grid.points
    logd = np.asarray(inv.log_derivative(t), dtype=float).copy()
    logd[-1] = logd[0]
    return CircleDiffeo(IntervalDiffeo(f.grid, logd), inv.alpha)


def word_evaluate(word, gens: list[CircleDiffeo]) -> CircleDiffeo:
    """Evaluate a reduced word of generators as a composed circle map.

    ``word`` is a sequence of (generator_index, exponent) with exponent +-1;
    the word is read as a left-to-right group product, i.e. the first letter
    is the outermost map.  Non-reduced words are evaluated as written (useful
    for cancellation checks); reducedness matters only for free-group
    statistics and is enforced by the harness, not here.
    """
    if not word:
        raise ValueError("word must be nonempty")
    maps = [gens[i] if e == 1 else inverse(gens[i]) for i, e in word]
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = compose(m, out)
    return out


def c0_distance_to_identity(d: CircleDiffeo) -> float:
    """sup_t of the circle distance between the lift and the identity."""
    diff = d.lift(d.grid.points) - d.grid.points
    m, l = float(np.max(diff)), float(np.min(diff))
    best = np.inf
    for k in (np.floor((m + l) / 2), np.ceil((m + l) / 2)):
        best = min(best, max(abs(m - k), abs(l - k)))
    return float(best)


def c0_distance(f: CircleDiffeo, g: CircleDiffeo) -> float:
    """sup grid distance between two circle maps (circle metric on values)."""
    diff = f.lift(f.grid.points) - g.lift(f.grid.points)
    m, l = float(np.max(diff)), float(np.min(diff))
    best = np.inf
    for k in (np.floor((m + l) / 2), np.ceil((m + l) / 2)):
        best = min(best, max(abs(m - k), abs(l - k)))
    return float(best)


def _lag_ladder(n: int, dense_until: int = 64, geometric: int = 160) -> list[int]:
    lags = set(range(1, min(dense_until, n) + 1))
    if n > dense_until:
        lags.update(int(k) for k in np.geomspace(dense_until, n - 1, geometric).astype(int))
    return sorted(lags)


def empirical_modulus(d: CircleDiffeo | IntervalDiffeo, w: str, alpha: float = 0.5) -> float:
    """Empirical modulus-of-continuity norm of log f' over grid pairs.

    ``w`` selects the gauge: "holder" uses w(s) = s^alpha, "levy" uses
    w(s) = sqrt(2 s |log s|).  The supremum runs over a lag ladder (all
    small lags plus a geometric ladder of large ones).
    """
    base = d.base if isinstance(d, CircleDiffeo) else d
    x = base.logderiv
    n = base.grid.n
    if w == "holder":
        gauge = lambda s: s ** alpha
    elif w == "levy":
        gauge = lambda s: np.sqrt(2.0 * s * abs(np.log(s)))
    else:
        raise ValueError(f"unknown modulus tag {w!r}")
    sup = 0.0
    for k in _lag_ladder(n):
        dmax = float(np.max(np.abs(x[k:] - x[:-k])))
        r = dmax / gauge(k / n)
        if r > sup:
            sup = r
    return sup
