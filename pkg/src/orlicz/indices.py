"""Numerical Matuszewska-Orlicz indices and the constants built from them.

Everything here works on dyadic grids lambda, t in {2^-j : 0 <= j <= J}.
Because lambda * t is again dyadic, the ratio

    M(lambda t) / (M(lambda) t^q)

only needs log M at the 2J + 1 points 2^-m, which are computed in log space
(the smallest arguments are far below the double range).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .funcdsl import OrliczFunction

__all__ = ["DyadicGrid", "IndexEstimate", "ConstantEstimate", "BasisCriterionSeries",
           "ConstantTooSmall", "estimate_indices", "estimate_C", "cotype",
           "basis_criterion", "small_scale_ratio_limit", "classify_trend"]

LN2 = math.log(2.0)
GRID_FLOOR = 1e-6
GRID_CEILING = 1e6
BISECTION_WIDTH = 0.01
Q_RANGE = (0.5, 64.0)


class ConstantTooSmall(ArithmeticError):
    """The grid infimum defining C fell below 1e-12."""


@dataclass(frozen=True)
class DyadicGrid:
    J: int = 2048

    def __post_init__(self):
        if self.J < 20:
            raise ValueError("dyadic index grid needs J >= 20")

    @property
    def resolution(self) -> float:
        """Smallest exponent gap the floor/ceiling test can see at depth J."""
        return math.log2(GRID_CEILING) / self.J

    @property
    def slack(self) -> float:
        """One-sided bracket pad: the resolution plus room for a logarithmic factor
        (t^p / log(1/t) shifts the grid threshold by about log2(1 + J ln 2) / J)."""
        return self.resolution + math.log2(1.0 + self.J * LN2) / self.J


def _log_ratio_table(M: OrliczFunction, J: int):
    """L[j, k] = log M(2^-(j+k)) - log M(2^-j) and u[k] = k ln 2."""
    m = np.arange(2 * J + 1)
    logM = np.asarray(M.log_at(-m * LN2), dtype=float)
    j = np.arange(J + 1)[:, None]
    k = np.arange(J + 1)[None, :]
    return logM[j + k] - logM[j], (k * LN2).astype(float)


def _bisect(pred, lo, hi, width):
    """Bisect a monotone predicate (False below, True above) on [lo, hi]."""
    trace = []
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        ok = pred(mid)
        trace.append((mid, bool(ok)))
        if ok:
            hi = mid
        else:
            lo = mid
    return lo, hi, trace


@dataclass(frozen=True)
class IndexEstimate:
    alpha_low: float
    alpha_high: float
    beta_low: float
    beta_high: float
    grid: DyadicGrid
    samples: int
    trace: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def beta_mid(self) -> float:
        if math.isinf(self.beta_high):
            return math.inf
        return 0.5 * (self.beta_low + self.beta_high)

    @property
    def beta_bracket(self):
        return (self.beta_low, self.beta_high)

    def to_dict(self):
        return {
            "alpha": [self.alpha_low, self.alpha_high],
            "beta": [self.beta_low, _json_float(self.beta_high)],
            "grid": {"J": self.grid.J, "floor": GRID_FLOOR, "ceiling": GRID_CEILING,
                     "resolution": self.grid.resolution, "slack": self.grid.slack},
            "samples": self.samples,
            "trace": {k: [[q, ok] for q, ok in v] for k, v in self.trace.items()},
        }


def _json_float(x):
    return "inf" if math.isinf(x) else x


def estimate_indices(M: OrliczFunction, grid: DyadicGrid = DyadicGrid()) -> IndexEstimate:
    """Bracket alpha_M and beta_M.

    q is beta-feasible when the grid minimum of the ratio stays >= 1e-6 and
    alpha-feasible when the grid maximum stays <= 1e6.  Bisection locates the
    feasibility threshold to within 0.01.  A finite grid can only see
    exponent differences larger than log2(1e6)/J, so the threshold
    underestimates beta (and overestimates alpha) by at most that amount;
    the brackets are widened by it on the far side.
    """
    L, u = _log_ratio_table(M, grid.J)
    L, u = L[:, 1:], u[:, 1:]  # t = 1 rows are identically 1
    log_floor, log_ceil = math.log(GRID_FLOOR), math.log(GRID_CEILING)

    def beta_ok(q):
        return float(np.min(L + q * u)) >= log_floor

    def alpha_ok(q):
        return float(np.max(L + q * u)) <= log_ceil

    lo, hi = Q_RANGE
    pad = 1e-9
    # the feasibility thresholds are explicit; bisection is kept for its trace
    b_thr = (log_floor - L) / u
    a_thr = (log_ceil - L) / u
    res = grid.slack
    b_exact, a_exact = float(b_thr.max()), float(a_thr.min())
    if not beta_ok(hi):
        trace_b = [(hi, False)]
        beta = (max(hi, b_exact), math.inf)
    else:
        _, _, trace_b = _bisect(beta_ok, lo, hi, BISECTION_WIDTH)
        lo_end = max(1.0, b_exact - pad)
        beta = (lo_end, max(lo_end, b_exact + res + pad))
    # alpha feasibility is monotone the other way round
    _, _, trace_a = _bisect(lambda q: not alpha_ok(q), lo, hi, BISECTION_WIDTH)
    a_hi_end = max(1.0, a_exact + pad)
    alpha = (max(1.0, a_exact - res - pad), a_hi_end)
    return IndexEstimate(alpha[0], alpha[1], beta[0], beta[1], grid,
                         samples=L.size, trace={"beta": trace_b, "alpha": trace_a})


@dataclass(frozen=True)
class ConstantEstimate:
    q: float
    C: float
    D: float
    C_ext: float
    boundary: bool = False

    def to_dict(self):
        return {"q": self.q, "C": self.C, "D": self.D, "C_ext": self.C_ext,
                "boundary": self.boundary}


def estimate_C(M: OrliczFunction, q: float, grid: DyadicGrid = DyadicGrid(),
               t_max: float = 1e4, beta_high: float = None) -> ConstantEstimate:
    """C = grid inf of M(lt)/(M(l) t^q) on (0,1]^2, D = max(1, sup M(t)/t^q on (1, t_max]).

    ``C_ext = C / D`` bounds the ratio for every lambda > 0.  When ``q`` does
    not exceed ``beta_high`` the estimate is flagged as a boundary case.
    """
    L, u = _log_ratio_table(M, grid.J)
    C = math.exp(min(0.0, float(np.min(L + q * u))))
    if C < 1e-12:
        raise ConstantTooSmall(f"C = {C:.3g} at q = {q}: q is too close to beta_M")
    ts = np.geomspace(1.0, t_max, 512)[1:]
    D = max(1.0, float(np.max(M(ts) / ts ** q)))
    boundary = beta_high is not None and q <= beta_high
    return ConstantEstimate(q, C, D, C / D, boundary)


def cotype(M: OrliczFunction, estimate: IndexEstimate = None) -> float:
    """Cotype index of h_M: max(2, beta_M), beta_M taken as the bracket midpoint."""
    if estimate is None:
        estimate = estimate_indices(M)
    return max(2.0, estimate.beta_mid)


def classify_trend(values, window: int = 10) -> str:
    """vanishing / bounded-away / inconclusive for a positive sequence.

    vanishing: strictly decreasing over the last ``window`` points and the
    last value below a tenth of the first.  bounded-away: no decay at all
    over the last ``window`` points.
    """
    v = np.asarray(values, dtype=float)
    tail = v[-window:]
    if np.all(np.diff(tail) < 0) and v[-1] < 0.1 * v[0]:
        return "vanishing"
    if tail[-1] >= tail[0] * (1.0 - 1e-9):
        return "bounded-away"
    return "inconclusive"


@dataclass(frozen=True)
class BasisCriterionSeries:
    ns_log2: tuple
    cs: tuple
    trend: str

    def c_at(self, log2_n: int) -> float:
        return self.cs[self.ns_log2.index(log2_n)]

    def to_dict(self):
        return {"log2_n": list(self.ns_log2), "c": list(self.cs), "trend": self.trend}


def basis_criterion(M: OrliczFunction, max_log2_n: int = 960) -> BasisCriterionSeries:
    """c_n = n^{-1/2} ||e_1 + ... + e_n|| = M(t_n)^{1/2} / t_n with t_n = M^{-1}(1/n).

    Evaluated at n = 2^j, j = 0..max_log2_n, after normalising M(1) = 1.
    Logarithmic decay (as for t^2/(1 - ln t)) is only visible over many
    octaves, hence the long default range.
    """
    M = M.normalize()
    js = tuple(range(max_log2_n + 1))
    cs = []
    for j in js:
        y = 2.0 ** -j
        t = M.inverse(y)
        cs.append(math.sqrt(y) / t)
    return BasisCriterionSeries(js, tuple(cs), classify_trend(cs))


def small_scale_ratio_limit(M: OrliczFunction, depth: int = 40) -> str:
    """Trend of M(t)/t^2 along t = 2^-j, j = 1..depth."""
    j = np.arange(1, depth + 1)
    vals = np.exp(np.asarray(M.log_at(-j * LN2)) + 2 * j * LN2)
    return classify_trend(vals)
