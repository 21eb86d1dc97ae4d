"""Strong uniform embedding of l_2 into (sum l_p)_{l_p}, 1 <= p < 2, via Gaussian kernels.

For each level n a feature map phi_{t_n} into l_2 with

    ||phi_t(x) - phi_t(y)||^2 = 2 (1 - exp(-t ||x - y||^2)),   ||phi_t(x)|| = 1

is composed with the Mazur map S_{l_2} -> S_{l_p}; the levels are stacked and
the image of the basepoint is subtracted.

The feature map is the symmetric-tensor expansion of exp(2t<x,y>):

    phi_t(x)_alpha = exp(-t|x|^2) sqrt((2t)^|alpha| / alpha!) x^alpha,   |alpha| <= K,

renormalised to the unit sphere.  The squared norm before renormalisation is
P(Poisson(2t|x|^2) <= K), so the degree tail at radius R is
tau = P(Poisson(2tR^2) > K).  Two consequences bound the truncation effect:

* the projection onto degrees <= K is a contraction and, in a Hilbert space,
  ||a/|a| - b/|b||| <= 2||a - b|| / (|a| + |b|), so distances grow by at most
  the factor (1 - tau)^{-1/2};
* |<P a, P b> - <a, b>| <= tau by Cauchy-Schwarz on the tails, so squared
  distances shrink by at most 4 tau / (1 - tau).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln, pdtrc

from .mazur import mazur_dense
from .moduli import ModulusPair
from .space import SparseVector

__all__ = ["GaussParams", "FeatureVector", "TruncationBudgetExceeded", "OutsideRadius",
           "multi_indices", "phi", "stacked_embed", "gauss_moduli", "degree_tail",
           "truncation_degree", "bound_tolerances", "default_schedule"]


class TruncationBudgetExceeded(ValueError):
    """The degree tail at the configured radius exceeds the budget for the given K."""


class OutsideRadius(ValueError):
    pass


def default_schedule(levels: int) -> Tuple[float, ...]:
    """t_n = 4^-n, n = 1..levels."""
    return tuple(4.0 ** -n for n in range(1, levels + 1))


def degree_tail(K: int, t: float, radius: float) -> float:
    """P(Poisson(2 t R^2) > K)."""
    return float(pdtrc(K, 2.0 * t * radius * radius))


def truncation_degree(t: float, radius: float, eps: float) -> int:
    """Smallest K whose degree tail is at most eps / 2."""
    z = 2.0 * t * radius * radius
    K = 0
    # jump close to the answer, then step
    if z > 8:
        K = max(0, int(z) - 1)
    while degree_tail(K, t, radius) > eps / 2.0:
        K += 1 if K < 64 else max(1, K // 64)
    # step back to the minimal K after coarse strides
    while K > 0 and degree_tail(K - 1, t, radius) <= eps / 2.0:
        K -= 1
    return K


@lru_cache(maxsize=32)
def multi_indices(d: int, K: int) -> np.ndarray:
    """All exponent vectors alpha in N^d with |alpha| <= K, graded by degree."""
    if d == 1:
        return np.arange(K + 1, dtype=np.int64)[:, None]
    blocks = []
    for first in range(K + 1):
        rest = multi_indices(d - 1, K - first)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    out = np.concatenate(blocks)
    order = np.argsort(out.sum(axis=1), kind="stable")
    out = out[order]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _tables(d: int, K: int):
    """Float exponents, degrees, sum of log alpha_j! and parity per coordinate."""
    A = multi_indices(d, K)
    Af = A.astype(float)
    return Af, Af.sum(axis=1), gammaln(Af + 1.0).sum(axis=1), (A % 2 == 1)


@dataclass(frozen=True)
class GaussParams:
    p: float
    levels: int = 12
    ts: Tuple[float, ...] = None
    d: int = 4
    radius: float = 2.0
    K: Optional[int] = None  # None: smallest degree meeting eps_trunc per level
    eps_trunc: float = 1e-6
    x0: Optional[SparseVector] = field(default=None, compare=False)

    def __post_init__(self):
        if not 1.0 <= self.p < 2.0:
            raise ValueError("need 1 <= p < 2")
        if self.ts is None:
            object.__setattr__(self, "ts", default_schedule(self.levels))
        else:
            object.__setattr__(self, "ts", tuple(float(t) for t in self.ts))
            object.__setattr__(self, "levels", len(self.ts))
        if any(t <= 0 for t in self.ts):
            raise ValueError("level parameters t_n must be positive")
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.K is not None:
            worst = max(self.tails)
            if worst > self.eps_trunc / 2.0:
                raise TruncationBudgetExceeded(
                    f"degree {self.K} leaves a tail of {worst:.3g} at radius {self.radius}; "
                    f"budget is {self.eps_trunc / 2:.3g}")
        if self.x0 is not None:
            self._check_input(self.x0)

    @cached_property
    def degrees(self) -> Tuple[int, ...]:
        if self.K is not None:
            return (self.K,) * self.levels
        return tuple(truncation_degree(t, self.radius, self.eps_trunc) for t in self.ts)

    @cached_property
    def tails(self) -> Tuple[float, ...]:
        return tuple(degree_tail(K, t, self.radius) for K, t in zip(self.degrees, self.ts))

    @property
    def sqrt_t_sum(self) -> float:
        return math.fsum(math.sqrt(t) for t in self.ts)

    def feature_count(self) -> int:
        return sum(math.comb(self.d + K, K) for K in self.degrees)

    def _check_input(self, x: SparseVector):
        if len(x) and x.indices[-1] > self.d:
            raise ValueError(f"support {x.indices.tolist()} exceeds dimension {self.d}")
        r = float(np.linalg.norm(x.values)) if len(x) else 0.0
        if r > self.radius * (1.0 + 1e-12):
            raise OutsideRadius(f"||x||_2 = {r:.6g} exceeds the radius {self.radius}")

    def to_dict(self):
        return {"p": self.p, "levels": self.levels, "ts": list(self.ts), "d": self.d,
                "radius": self.radius, "K": list(self.degrees), "eps_trunc": self.eps_trunc,
                "tails": list(self.tails),
                "x0": None if self.x0 is None else self.x0.to_json()}


def _phi_dense(x: np.ndarray, t: float, K: int) -> np.ndarray:
    Af, deg, lfact, odd = _tables(len(x), K)
    ax = np.abs(x)
    nz = ax > 0
    logc = 0.5 * (deg * math.log(2.0 * t) - lfact) - t * float(np.dot(x, x))
    if np.any(nz):
        logc = logc + Af[:, nz] @ np.log(ax[nz])
    # monomials touching a zero coordinate vanish
    if not np.all(nz):
        logc[np.any(Af[:, ~nz] > 0, axis=1)] = -np.inf
    vals = np.exp(logc)
    neg = x < 0
    if np.any(neg):
        flip = np.logical_xor.reduce(odd[:, neg], axis=1)
        vals[flip] = -vals[flip]
    return vals / np.linalg.norm(vals)


def phi(params: GaussParams, t: float, x: SparseVector, K: int = None) -> np.ndarray:
    """The unit-norm feature block of x at kernel parameter t (graded monomial order)."""
    params._check_input(x)
    if K is None:
        K = params.K if params.K is not None else truncation_degree(t, params.radius,
                                                                   params.eps_trunc)
    return _phi_dense(x.to_dense(params.d), t, K)


class FeatureVector:
    """Per-level blocks of f(x); block n is indexed by multi_indices(d, K_n)."""

    __slots__ = ("blocks", "params")

    def __init__(self, blocks, params: GaussParams):
        self.blocks = list(blocks)
        self.params = params

    def distance(self, other: "FeatureVector", p: float = None) -> float:
        p = self.params.p if p is None else p
        total = math.fsum(float(np.sum(np.abs(a - b) ** p))
                          for a, b in zip(self.blocks, other.blocks))
        return total ** (1.0 / p)

    def level_norms(self):
        return [float(np.linalg.norm(b)) for b in self.blocks]

    def to_json(self) -> dict:
        entries = []
        for n, (block, K) in enumerate(zip(self.blocks, self.params.degrees), start=1):
            A = multi_indices(self.params.d, K)
            for j in np.flatnonzero(block):
                multiset = [i + 1 for i, e in enumerate(A[j]) for _ in range(int(e))]
                entries.append([[n, multiset], float(block[j])])
        return {"entries": entries, "params": self.params.to_dict()}


def stacked_embed(params: GaussParams, x: SparseVector) -> FeatureVector:
    """f(x) = (M_{2,p}(phi_{t_n}(x)) - M_{2,p}(phi_{t_n}(x0)))_n."""
    params._check_input(x)
    xd = x.to_dense(params.d)
    e = 2.0 / params.p
    blocks = [mazur_dense(_phi_dense(xd, t, K), e) - b0
              for t, K, b0 in zip(params.ts, params.degrees, _base_blocks(params))]
    return FeatureVector(blocks, params)


@lru_cache(maxsize=8)
def _base_blocks(params: GaussParams):
    x0 = params.x0 if params.x0 is not None else SparseVector()
    x0d = x0.to_dense(params.d)
    e = 2.0 / params.p
    return tuple(mazur_dense(_phi_dense(x0d, t, K), e) for t, K in zip(params.ts, params.degrees))


def gauss_moduli(params: GaussParams, C_hat: float) -> ModulusPair:
    """rho1(s) = 2^{1/p} C_hat (sum_n (1 - e^{-t_n s^2}))^{1/p},  rho2(s) = (2 sqrt 2 / p)(sum_n sqrt t_n) s."""
    if not C_hat > 0:
        raise ValueError("C_hat must be positive")
    p = params.p
    ts = np.asarray(params.ts)
    slope = 2.0 * math.sqrt(2.0) / p * params.sqrt_t_sum

    def rho1(s):
        s = np.asarray(s, dtype=float)
        inner = -np.expm1(-np.multiply.outer(s * s, ts)).sum(axis=-1)
        r = 2.0 ** (1.0 / p) * C_hat * inner ** (1.0 / p)
        return r if r.ndim else float(r)

    def rho2(s):
        r = slope * np.asarray(s, dtype=float)
        return r if r.ndim else float(r)

    return ModulusPair("gauss", rho1, rho2, {"p": p, "C_hat": C_hat, "slope": slope,
                                            "levels": params.levels})


def bound_tolerances(params: GaussParams, C_hat: float) -> Tuple[float, float]:
    """(absolute slack for the lower bound, relative slack for the upper bound).

    Lower: ||f(x)-f(y)||_p^p >= rho1^p - E with E = 4 C_hat^p sum tau_n / (1 - tau_n),
    and rho1 - (rho1^p - E)^{1/p} <= E^{1/p}.  Upper: every level distance grows by
    at most (1 - tau_n)^{-1/2}.
    """
    taus = np.asarray(params.tails)
    E = 4.0 * C_hat ** params.p * float(np.sum(taus / (1.0 - taus)))
    upper_rel = 1.0 / math.sqrt(1.0 - float(taus.max())) - 1.0
    return E ** (1.0 / params.p), upper_rel
