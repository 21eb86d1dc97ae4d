"""Bracketed root finding for monotone scalar maps.

Both routines keep a sign-changing bracket at every step.  Candidate points
come from a secant step in log-log coordinates (exact in one step for power
laws); a plain bisection step is taken whenever the secant point would not
shrink the bracket by at least a quarter, so the bracket always contracts at
least as fast as bisection every other iteration.
"""

from __future__ import annotations

import math
from typing import Callable

MAX_ITER = 400


def _log_secant(lo, hi, glo, ghi):
    # zero of the line through (log lo, glo), (log hi, ghi), mapped back
    if not (math.isfinite(glo) and math.isfinite(ghi)) or glo == ghi:
        return None
    a, b = math.log(lo), math.log(hi)
    x = a - glo * (b - a) / (ghi - glo)
    if not a < x < b:
        return None
    return math.exp(x)


def solve_increasing(g: Callable[[float], float], lo: float, hi: float,
                     rtol: float = 0.0, ftol: float = 0.0):
    """Find x in [lo, hi] with g(x) = 0 for increasing g, 0 < lo < hi.

    Requires g(lo) <= 0 <= g(hi).  ``g`` should return a log-scale residual
    (e.g. log f(x) - log y) for the secant step to be effective.  Stops when
    |g| <= ftol, when hi/lo - 1 <= rtol, or when the bracket can no longer be
    split in floating point.  Returns (x, g(x), iterations).
    """
    glo, ghi = g(lo), g(hi)
    if glo >= 0:
        return lo, glo, 0
    if ghi <= 0:
        return hi, ghi, 0
    best, gbest = (lo, glo) if -glo < ghi else (hi, ghi)
    use_secant = True
    for it in range(1, MAX_ITER + 1):
        mid = None
        if use_secant:
            mid = _log_secant(lo, hi, glo, ghi)
        if mid is None or not lo < mid < hi:
            mid = math.sqrt(lo * hi) if hi / lo > 4.0 else 0.5 * (lo + hi)
            use_secant = True
        else:
            use_secant = False  # alternate: guarantees contraction
        if not lo < mid < hi:
            break
        gm = g(mid)
        if abs(gm) < abs(gbest):
            best, gbest = mid, gm
        if gm == 0 or abs(gm) <= ftol:
            return mid, gm, it
        width = hi - lo
        if gm < 0:
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
        if (hi - lo) < 0.25 * width:
            use_secant = True
        if hi / lo - 1.0 <= rtol:
            break
    return best, gbest, it
