"""The Mazur map S_{l_p} -> S_{l_q}, x -> |x|^{p/q} sign(x), and its estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .space import SparseVector, lp_norm

__all__ = ["MazurParams", "MazurBounds", "NotOnSphere", "mazur_map", "mazur_dense",
           "check_mazur_bounds", "sphere_pairs"]

SPHERE_TOL = 1e-9


class NotOnSphere(ValueError):
    pass


@dataclass(frozen=True)
class MazurParams:
    """Map from the unit sphere of l_p to that of l_q."""

    p: float
    q: float

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("Mazur map needs p, q >= 1")

    @property
    def exponent(self) -> float:
        return self.p / self.q

    def inverse(self) -> "MazurParams":
        return MazurParams(self.q, self.p)


def mazur_dense(values: np.ndarray, exponent: float) -> np.ndarray:
    """Coordinatewise signed power; no sphere check."""
    return np.sign(values) * np.abs(values) ** exponent


def _on_sphere(values, p):
    if values.size == 0:
        raise NotOnSphere("the zero vector is not on the unit sphere")
    a = np.abs(values)
    m = a.max()
    norm = m * np.sum((a / m) ** p) ** (1.0 / p)
    if abs(norm - 1.0) > SPHERE_TOL:
        raise NotOnSphere(f"||x||_{p:g} = {norm!r} is not 1 within {SPHERE_TOL}")
    return values / norm


def mazur_map(params: MazurParams, x: SparseVector) -> SparseVector:
    """M_{p,q}(x); inputs within 1e-9 of the sphere are renormalised first."""
    v = _on_sphere(x.values, params.p)
    return SparseVector.from_arrays(x.indices, mazur_dense(v, params.exponent))


@dataclass(frozen=True)
class MazurBounds:
    upper_holds: bool
    C_hat: float
    pairs: int
    witness: Optional[Tuple[SparseVector, SparseVector]] = None
    worst_upper_ratio: float = 0.0


def check_mazur_bounds(params: MazurParams, pairs: Iterable) -> MazurBounds:
    """Check ||M(x)-M(y)||_q <= (p/q)||x-y||_p and estimate the lower constant.

    C_hat is the minimum of ||M(x)-M(y)||_q / ||x-y||_p^{p/q} over the
    pairs with x != y.  A violated upper bound is reported with a witness.
    """
    p, q = params.p, params.q
    if not p > q:
        raise ValueError("the estimate is stated for p > q")
    c_hat = math.inf
    worst = 0.0
    witness = None
    n = 0
    for x, y in pairs:
        n += 1
        d_in = lp_norm(x - y, p)
        if d_in == 0.0:
            continue
        d_out = lp_norm(mazur_map(params, x) - mazur_map(params, y), q)
        ratio = d_out / d_in
        # rounding allowance only; the constant itself is exactly p/q
        if ratio > params.exponent * (1.0 + 1e-12) and witness is None:
            witness = (x, y)
        worst = max(worst, ratio)
        c_hat = min(c_hat, d_out / d_in ** params.exponent)
    return MazurBounds(witness is None, c_hat, n, witness, worst)


def sphere_pairs(p: float, max_dim: int, count: int, seed: int = 0, min_dim: int = 1):
    """``count`` pairs on S_{l_p}; the dimension is drawn per pair from [min_dim, max_dim]."""
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        dim = int(rng.integers(min_dim, max_dim + 1))
        pair = []
        for _ in range(2):
            v = rng.standard_normal(dim)
            while not np.any(v):
                v = rng.standard_normal(dim)
            v = v / np.sum(np.abs(v) ** p) ** (1.0 / p)
            pair.append(SparseVector.from_dense(v))
        out.append(tuple(pair))
    return out
