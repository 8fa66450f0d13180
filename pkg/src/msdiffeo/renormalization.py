"""First-return renormalization of circle diffeomorphisms without fixed points.

The first-return time q of the orbit of 0 is the smallest k such that
f^k(0) lies in the arc on the left of 0 delimited by f(0), with f^{k+1}(0)
in the right arc; with the closed-left-endpoint convention this q equals
the first partial quotient of the rotation number.  The renormalized map
glues the first-return map of the arc [0, f(0)] (the commuting pair
(f^{q+1}, f^q) split at the preimage of the gluing point) and rescales it
to the unit circle with an orientation flip; on rigid rotations this sends
the angle alpha exactly to its Gauss image G(alpha) = 1/alpha mod 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffeo import CircleDiffeo, IntervalDiffeo
from .paths import Grid


class NotRenormalizableError(ValueError):
    """The map has a fixed point; no first-return structure exists."""


class RenormalizationInconclusiveError(ValueError):
    """No first return found within the iteration budget."""

    def __init__(self, k_max: int, step: int | None = None):
        self.k_max = k_max
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(f"no first return within k_max={k_max}{at}")


def _check_no_fixed_point(f, scan_n: int = 4096) -> None:
    t = np.arange(scan_n) / scan_n
    d = f.lift(t) - t
    if np.min(d) <= 0.0 or np.max(d) >= 1.0:
        raise NotRenormalizableError("map has a fixed point on the scan grid")


def first_return_time(f, k_max: int = 10_000) -> int:
    """Smallest k with f^k(0) in the left arc and f^{k+1}(0) in the right arc.

    Arcs are delimited by 0 and f(0) in the fundamental domain
    [f(0)-1, f(0)); the left arc is closed at its left endpoint, which
    makes q equal to the first partial quotient a_1 of the rotation number
    (for rotation numbers both below and above 1/2).
    """
    _check_no_fixed_point(f)
    beta = f.lift(0.0)
    if not 0.0 < beta < 1.0:
        raise NotRenormalizableError("f(0) coincides with 0")
    lo = beta - 1.0

    def rep(x: float) -> float:
        return (x - lo) % 1.0 + lo

    t = beta
    prev_in_left = False
    for k in range(1, k_max + 2):
        r = rep(t)              # position of f^k(0)
        if prev_in_left and 0.0 < r < beta:
            return k - 1
        prev_in_left = r < 0.0
        t = f.lift(t)
    raise RenormalizationInconclusiveError(k_max)


@dataclass(frozen=True)
class RenormStep:
    q: int                      # first-return time of the map at this step
    q_cumulative: int           # return time of the original map (CF denominator)
    interval_length: float      # arc through 0 between the q_{k-1}- and q_k-orbit points
    gluing_residual: float      # commuting-pair consistency before rescaling
    lil_factor: float           # sqrt(interval_length) * sum_{j<q_cum} sqrt(Df^j(0))
    rho_estimate: float         # rotation-number estimate after this step


def renormalize(f, grid_out: Grid | None = None, k_max: int = 10_000) -> CircleDiffeo:
    """One renormalization step: glued, flip-rescaled first-return map.

    The returned map is a circle diffeomorphism on ``grid_out`` (default:
    the input grid), with node log-derivatives accumulated along orbits by
    the chain rule.  For a rigid rotation R_alpha the result is exactly the
    rotation by the Gauss image of alpha.
    """
    q = first_return_time(f, k_max=k_max)
    if grid_out is None:
        grid_out = f.grid
    beta = float(f.lift(0.0))
    # branch point c in (0, beta): f^q(c) = 1 (preimage of the gluing point)
    c = 1.0
    for _ in range(q):
        c = float(f.inverse_lift(c))
    s = grid_out.points
    t = beta * (1.0 - s)                    # flip-rescale onto [0, beta]
    # q chain-rule steps for everyone, one extra for the branch t <= c
    logd = np.zeros_like(t)
    cur = t.copy()
    for _ in range(q):
        logd += f.log_derivative(cur)
        cur = f.lift(cur)
    extra = t <= c
    logd[extra] += f.log_derivative(cur[extra])
    logd[-1] = logd[0]
    orbit = 0.0
    for _ in range(q):
        orbit = float(f.lift(orbit))
    gamma = float(f.lift(orbit)) - 1.0      # F^{q+1}(0) - 1 in (0, beta)
    alpha_new = (1.0 - gamma / beta) % 1.0
    return CircleDiffeo(IntervalDiffeo(grid_out, logd), alpha_new)


def gluing_residual(f, q: int) -> float:
    """|F(F^q(0)) - F^q(F(0))| : consistency of the commuting pair."""
    a = 0.0
    for _ in range(q):
        a = float(f.lift(a))
    a = float(f.lift(a))
    b = float(f.lift(0.0))
    for _ in range(q):
        b = float(f.lift(b))
    return abs(a - b)


def renormalize_n(
    f: CircleDiffeo,
    n: int,
    grid_out: Grid | None = None,
    k_max: int = 10_000,
    n_iter_rho: int = 500,
) -> tuple[CircleDiffeo, list[RenormStep]]:
    """Iterate the renormalization n times with a per-step report.

    Per step k the report carries the local first-return time q, the
    cumulative return time of the original map (continued-fraction
    denominator recursion), the length of the arc through 0 between the
    two current orbit points of the original map, and the local-modulus
    factor sqrt(length) * sum_{j < q_cum} sqrt(Df^j(0)) evaluated along the
    original orbit (reported, never asserted convergent).
    """
    from .rotation import rotation_number_estimate

    if n < 0:
        raise ValueError("n must be >= 0")
    cur = f
    steps: list[RenormStep] = []
    q_prev2, q_prev = 0, 1          # q_{-1}, q_0
    frac_prev = float(f.lift(0.0)) % 1.0     # frac(F^{q_0}(0))
    # original-orbit bookkeeping
    for k in range(1, n + 1):
        try:
            q_local = first_return_time(cur, k_max=k_max)
        except (NotRenormalizableError, RenormalizationInconclusiveError) as e:
            raise type(e)(f"renormalization failed at step {k}: {e}") from e
        residual = gluing_residual(cur, q_local)
        q_cum = q_local * q_prev + q_prev2
        # original-map orbit point F^{q_cum}(0) and the LIL factor
        t_orb = 0.0
        dlog = 0.0
        sqrt_sum = 0.0
        for _ in range(q_cum):
            sqrt_sum += np.exp(0.5 * dlog)
            dlog += float(f.log_derivative(t_orb))
            t_orb = float(f.lift(t_orb))
        frac_cur = t_orb % 1.0
        length = 1.0 - abs(frac_cur - frac_prev)
        cur = renormalize(cur, grid_out=grid_out, k_max=k_max)
        steps.append(RenormStep(
            q=q_local, q_cumulative=q_cum, interval_length=float(length),
            gluing_residual=float(residual),
            lil_factor=float(np.sqrt(length) * sqrt_sum),
            rho_estimate=float(rotation_number_estimate(cur, n_iter=n_iter_rho)),
        ))
        q_prev2, q_prev = q_prev, q_cum
        frac_prev = frac_cur
    return cur, steps
