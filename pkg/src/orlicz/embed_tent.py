"""Strong uniform embedding of h_M into l_p built from dyadic tent functions.

For n, k in Z the tent f_{n,k} is supported on [(k-1)/2^{n+1}, (k-1)/2^{n+1} + 4/2^{n+1}],
rises with slope a_n = 2^{n+2} M(2^{-(n+1)})^{1/p} to its apex a_n/2^n and falls
back to 0.  Summing |f_{n,k}(s) - f_{n,k}(t)|^p over all (n, k) lies between
M(|s-t|) and A M(|s-t|); applying the family to every coordinate (relative to
the basepoint 0) gives the embedding.

Only finitely many scales are evaluated.  The scales far from the dyadic scale N
of |s-t| contribute geometric tails

    finer   (n > N):  <= 8 4^p 2^{-(n-N)} M(|s-t|)
    coarser (n <= N): <= (8 4^p / C) 2^{-(p/q - 1)(N-n)} M(|s-t|)

and the window is sized so that the dropped part is below tail_eps M(|s-t|).

Translations are handled in "scaled" units w = x 2^{n+1} - (k-1) so that the
arithmetic on dyadic inputs is exact even when k exceeds 2^53.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .funcdsl import OrliczFunction
from .indices import DyadicGrid, estimate_C, estimate_indices
from .moduli import ModulusPair
from .space import SparseVector

__all__ = ["TentParams", "TentCoordinates", "SandwichSum", "make_tent_params", "tent_slope",
           "tent_eval", "scalar_sandwich_sum", "lower_witness", "embed_vector", "moduli",
           "dyadic_scale", "window_for_range"]


def dyadic_scale(d: float) -> int:
    """The integer N with 2^-(N+1) < d <= 2^-N."""
    if not d > 0:
        raise ValueError("scale of a non-positive distance")
    m, e = math.frexp(d)  # d = m 2^e, 0.5 <= m < 1
    return -(e - 1) if m == 0.5 else -e


@dataclass(frozen=True)
class TentParams:
    M: OrliczFunction = field(repr=False)
    p: float
    q: float
    C: float
    tail_eps: float = 1e-6
    window: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not self.q < self.p:
            raise ValueError("need q < p")
        if not 0 < self.C <= 1.0:
            raise ValueError("need 0 < C <= 1")
        if not self.M.normalized:
            raise ValueError("the tent construction expects M(1) = 1")

    @property
    def K8(self) -> float:
        return 8.0 * 4.0 ** self.p

    @property
    def ratio(self) -> float:
        """Per-scale decay factor of the coarse tail."""
        return 2.0 ** (1.0 - self.p / self.q)

    @property
    def A(self) -> float:
        return self.K8 * (1.0 + (1.0 / self.C) / (1.0 - self.ratio))

    @property
    def fine_depth(self) -> int:
        return max(1, math.ceil(math.log2(2.0 * self.K8 / self.tail_eps)))

    @property
    def coarse_depth(self) -> int:
        r = self.ratio
        factor = self.K8 / self.C / (1.0 - r)
        # smallest B with factor * r^(B+1) <= tail_eps / 2
        B = math.ceil(math.log(self.tail_eps / (2.0 * factor)) / math.log(r)) - 1
        return max(2, B)

    def tail_factor(self, coarse: int, fine: int) -> float:
        """Bound on the dropped sum, in units of M(|s-t|), for a window [N-coarse, N+fine]."""
        r = self.ratio
        return self.K8 * 2.0 ** -fine + self.K8 / self.C * r ** (coarse + 1) / (1.0 - r)

    def with_window(self, window) -> "TentParams":
        return TentParams(self.M, self.p, self.q, self.C, self.tail_eps,
                          None if window is None else (int(window[0]), int(window[1])))

    def to_dict(self):
        return {"M": self.M.describe(), "p": self.p, "q": self.q, "C": self.C, "A": self.A,
                "tail_eps": self.tail_eps, "coarse_depth": self.coarse_depth,
                "fine_depth": self.fine_depth, "window": self.window}


def make_tent_params(M: OrliczFunction, p: float, q: float = None, C: float = None,
                     tail_eps: float = 1e-6, grid: DyadicGrid = DyadicGrid(),
                     t_max: float = 1e4) -> TentParams:
    """Normalise M, pick q in (beta_M, p) and estimate C on the grid when not given."""
    M = M.normalize()
    beta_high = None
    if q is None or C is None:
        est = estimate_indices(M, grid)
        beta_high = est.beta_high
        if not beta_high < p:
            raise ValueError(f"p = {p} does not exceed the beta bracket {est.beta_bracket}")
        if q is None:
            q = beta_high + (p - beta_high) / 4.0
    if C is None:
        C = min(1.0, estimate_C(M, q, grid, t_max, beta_high=beta_high).C_ext)
    return TentParams(M, float(p), float(q), float(C), tail_eps)


def _slopes(params: TentParams, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n)
    return np.ldexp(1.0, n + 2) * np.asarray(params.M(np.ldexp(1.0, -(n + 1)))) ** (1.0 / params.p)


def tent_slope(params: TentParams, n: int) -> float:
    """a_n = 2^{n+2} M(2^{-(n+1)})^{1/p}."""
    a = math.ldexp(1.0, n + 2) * params.M.eval(math.ldexp(1.0, -(n + 1))) ** (1.0 / params.p)
    if math.isinf(a):
        raise OverflowError(f"tent slope overflows at scale {n}")
    return a


def tent_eval(params: TentParams, n: int, k: int, t: float) -> float:
    """f_{n,k}(t)."""
    scale = math.ldexp(1.0, n + 1)
    F = t * scale
    base = math.floor(F)
    w = (F - base) + (base - (k - 1))  # t 2^{n+1} - (k-1), exact for dyadic t
    if not 0.0 <= w <= 4.0:
        return 0.0
    return tent_slope(params, n) / scale * (2.0 - abs(w - 2.0))


def _scale_block(params, ns, x):
    """x 2^{n+1} and its floor for every scale in ``ns``.

    The floor stays a float: translate indices at fine scales can exceed int64.
    """
    F = x * np.ldexp(1.0, ns + 1)
    return F, np.floor(F)


def _tent_values(a_over_scale, F, base_ref, m):
    # w = F - (base_ref - m); values a_n/2^{n+1} * (2 - |w - 2|) on [0, 4]
    w = (F - base_ref)[:, None] + m[None, :]
    return a_over_scale[:, None] * np.clip(2.0 - np.abs(w - 2.0), 0.0, None)


def _pair_terms(params, ns, s, t):
    """Per-scale sums of |f_{n,k}(s) - f_{n,k}(t)|^p over the union of active translates."""
    a_sc = _slopes(params, ns) / np.ldexp(1.0, ns + 1)
    m = np.arange(4, dtype=float)
    Fs, bs = _scale_block(params, ns, s)
    Ft, bt = _scale_block(params, ns, t)
    # translates active at s
    d1 = _tent_values(a_sc, Fs, bs, m) - _tent_values(a_sc, Ft, bs, m)
    # translates active at t but not already counted; bt - bs is exact when the floors are close
    d2 = _tent_values(a_sc, Fs, bt, m) - _tent_values(a_sc, Ft, bt, m)
    off = (bt - bs)[:, None] - m[None, :]
    d2 = np.where((off <= 0) & (off >= -3), 0.0, d2)
    return np.sum(np.abs(d1) ** params.p, axis=1) + np.sum(np.abs(d2) ** params.p, axis=1)


@dataclass(frozen=True)
class SandwichSum:
    sum: float
    tail_bound: float
    N: Optional[int] = None
    window: Optional[Tuple[int, int]] = None


def _window(params, N, window=None):
    if window is not None:
        return window
    return (N - params.coarse_depth, N + params.fine_depth)


def scalar_sandwich_sum(params: TentParams, s: float, t: float,
                        window: Tuple[int, int] = None) -> SandwichSum:
    """Windowed sum over (n, k) of |f_{n,k}(s) - f_{n,k}(t)|^p with its tail bound."""
    if s == t:
        return SandwichSum(0.0, 0.0)
    d = abs(s - t)
    N = dyadic_scale(d)
    lo, hi = _window(params, N, window)
    ns = np.arange(lo, hi + 1)
    total = float(np.sum(_pair_terms(params, ns, s, t)))
    tail = params.tail_factor(N - lo, hi - N) * params.M.eval(d)
    return SandwichSum(total, tail, N, (lo, hi))


def lower_witness(params: TentParams, s: float, t: float) -> float:
    """The single term |f_{N,K}(s) - f_{N,K}(t)|^p with 2^-(N+2) < |s-t| <= 2^-(N+1)
    and K the largest translate whose support contains min(s, t)."""
    s, t = min(s, t), max(s, t)
    N = dyadic_scale(t - s) - 1
    K = math.floor(s * math.ldexp(1.0, N + 1)) + 1
    return abs(tent_eval(params, N, K, s) - tent_eval(params, N, K, t)) ** params.p


def window_for_range(params: TentParams, d_min: float, d_max: float) -> Tuple[int, int]:
    """A fixed scale window adequate for every coordinate distance in [d_min, d_max]."""
    return (dyadic_scale(d_max) - params.coarse_depth, dyadic_scale(d_min) + params.fine_depth)


class TentCoordinates:
    """Sparse coordinates of f(x), keyed by (i, n, k)."""

    __slots__ = ("keys", "values", "params")

    def __init__(self, keys: np.ndarray, values: np.ndarray, params: TentParams = None):
        self.keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
        self.values = np.asarray(values, dtype=float)
        self.params = params

    def __len__(self):
        return len(self.values)

    def to_json(self) -> dict:
        out = {"entries": [[[int(a) for a in k], float(v)] for k, v in zip(self.keys, self.values)]}
        if self.params is not None:
            out["params"] = self.params.to_dict()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def as_dict(self) -> dict:
        return {tuple(int(a) for a in k): float(v) for k, v in zip(self.keys, self.values)}

    def norm_p(self, p: float) -> float:
        return float(np.sum(np.abs(self.values) ** p) ** (1.0 / p))

    def distance(self, other: "TentCoordinates", p: float) -> float:
        """||self - other||_p over the union of keys."""
        keys = np.concatenate([self.keys, other.keys])
        vals = np.concatenate([self.values, -other.values])
        if not len(vals):
            return 0.0
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        keys, vals = keys[order], vals[order]
        new = np.ones(len(vals), dtype=bool)
        new[1:] = np.any(keys[1:] != keys[:-1], axis=1)
        sums = np.add.reduceat(vals, np.flatnonzero(new))
        return float(np.sum(np.abs(sums) ** p) ** (1.0 / p))


def _coordinate_entries(params, x, window):
    lo, hi = window
    ns = np.arange(lo, hi + 1)
    a_sc = _slopes(params, ns) / np.ldexp(1.0, ns + 1)
    m = np.arange(4, dtype=float)
    Fx, bx = _scale_block(params, ns, x)
    if np.max(np.abs(bx)) >= 2.0 ** 62:
        raise OverflowError(f"translate index of {x!r} at scale {hi} exceeds int64")
    jx = bx.astype(np.int64)[:, None] - np.arange(4)[None, :]
    F0 = np.zeros(len(ns))
    b0 = np.zeros(len(ns))
    j0 = np.zeros((len(ns), 1), dtype=np.int64) - np.arange(4)[None, :]
    v1 = _tent_values(a_sc, Fx, bx, m) - _tent_values(a_sc, F0, bx, m)
    v2 = _tent_values(a_sc, Fx, b0, m) - _tent_values(a_sc, F0, b0, m)
    bxi = jx[:, :1]
    v2 = np.where((j0 <= bxi) & (j0 >= bxi - 3), 0.0, v2)
    nn = np.broadcast_to(ns[:, None], jx.shape)
    keys = np.concatenate([np.stack([nn, jx + 1], -1).reshape(-1, 2),
                           np.stack([nn, np.broadcast_to(j0, jx.shape) + 1], -1).reshape(-1, 2)])
    vals = np.concatenate([v1.reshape(-1), v2.reshape(-1)])
    keep = vals != 0.0
    return keys[keep], vals[keep]


def embed_vector(params: TentParams, x: SparseVector) -> TentCoordinates:
    """f(x) = (f_{n,k}(x_i) - f_{n,k}(0)) over (i, n, k), truncated to a scale window.

    The window is ``params.window`` when set (use :func:`window_for_range` so
    that every pair distance of interest is covered), otherwise the default
    window around the dyadic scale of |x_i|, coordinate by coordinate.
    """
    all_keys, all_vals = [], []
    for i, xi in zip(x.indices.tolist(), x.values.tolist()):
        w = params.window or _window(params, dyadic_scale(abs(xi)))
        keys, vals = _coordinate_entries(params, xi, w)
        all_keys.append(np.column_stack([np.full(len(vals), i, dtype=np.int64), keys]))
        all_vals.append(vals)
    if not all_vals:
        return TentCoordinates(np.zeros((0, 3), dtype=np.int64), np.zeros(0), params)
    return TentCoordinates(np.concatenate(all_keys), np.concatenate(all_vals), params)


def moduli(params: TentParams) -> ModulusPair:
    """rho1(t) = C^{1/p} t^{q/p} (t < 1), t^{1/p} (t >= 1);
    rho2(t) = A^{1/p} t^{1/p} (t <= 1), (A/C)^{1/p} t^{q/p} (t > 1)."""
    p, q, C, A = params.p, params.q, params.C, params.A

    def rho1(t):
        t = np.asarray(t, dtype=float)
        r = np.where(t < 1.0, C ** (1 / p) * t ** (q / p), t ** (1 / p))
        return r if r.ndim else float(r)

    def rho2(t):
        t = np.asarray(t, dtype=float)
        r = np.where(t <= 1.0, A ** (1 / p) * t ** (1 / p), (A / C) ** (1 / p) * t ** (q / p))
        return r if r.ndim else float(r)

    return ModulusPair("tent", rho1, rho2, {"C": C, "q": q, "p": p, "A": A})
