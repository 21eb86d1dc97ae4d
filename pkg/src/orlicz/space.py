"""Finitely supported sequences and the Luxemburg norm of h_M."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .funcdsl import OrliczFunction
from .roots import solve_increasing

__all__ = ["SparseVector", "NormResult", "LemmaCheck", "luxemburg_norm",
           "modular_sum", "check_lemma_sum_vs_norm", "lp_norm"]

RESIDUAL_TOL = 1e-10


class SparseVector:
    """A finitely supported real sequence indexed by positive integers.

    Zero values are dropped; indices are kept sorted and unique.
    """

    __slots__ = ("indices", "values")

    def __init__(self, entries: Iterable = ()):
        if isinstance(entries, dict):
            entries = entries.items()
        acc = {}
        for i, v in entries:
            i = int(i)
            if i < 1:
                raise ValueError(f"indices are positive integers, got {i}")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"entry {i} is not finite: {v}")
            acc[i] = acc.get(i, 0.0) + v
        keys = sorted(k for k, v in acc.items() if v != 0.0)
        self.indices = np.array(keys, dtype=np.int64)
        self.values = np.array([acc[k] for k in keys], dtype=float)

    @classmethod
    def from_arrays(cls, indices, values):
        return cls(zip(np.asarray(indices).tolist(), np.asarray(values, dtype=float).tolist()))

    @classmethod
    def from_dense(cls, values):
        return cls((i + 1, v) for i, v in enumerate(np.asarray(values, dtype=float)))

    @classmethod
    def ones(cls, n: int):
        return cls((i, 1.0) for i in range(1, n + 1))

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        if isinstance(data, dict):
            data = data["entries"]
        return cls((i, v) for i, v in data)

    def to_json(self) -> dict:
        return {"entries": [[int(i), float(v)] for i, v in zip(self.indices, self.values)]}

    @property
    def entries(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return (isinstance(other, SparseVector) and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"SparseVector({self.entries})"

    def _combine(self, other, sign):
        acc = dict(self.entries)
        for i, v in other.entries:
            acc[i] = acc.get(i, 0.0) + sign * v
        return SparseVector(acc)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, c):
        return SparseVector(zip(self.indices.tolist(), (self.values * float(c)).tolist()))

    __rmul__ = __mul__

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        if len(self) and self.indices[-1] > dim:
            raise ValueError(f"support exceeds dimension {dim}")
        out[self.indices - 1] = self.values
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0


def lp_norm(x: SparseVector, p: float) -> float:
    if not len(x):
        return 0.0
    a = np.abs(x.values)
    m = a.max()
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class NormResult:
    value: float
    residual: float
    iterations: int

    def __float__(self):
        return self.value


def modular_sum(M: OrliczFunction, x: SparseVector, rho: float) -> float:
    """sum_i M(|x_i| / rho)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not len(x):
        return 0.0
    return float(np.sum(M(np.abs(x.values) / rho)))


def luxemburg_norm(M: OrliczFunction, x: SparseVector) -> NormResult:
    """The rho at which the modular sum equals 1.

    The map rho -> sum M(|x_i|/rho) is strictly decreasing; the root is
    bracketed by [max|x|/M^{-1}(1), max|x|/M^{-1}(1/n)] and the bracket is
    widened geometrically if rounding pushes the root outside it.
    """
    if not len(x):
        return NormResult(0.0, 0.0, 0)
    a = np.abs(x.values)
    m = float(a.max())
    n = len(a)
    lo = m / M.inverse(1.0)
    hi = m / M.inverse(1.0 / n) if n > 1 else lo

    def resid(rho):
        return float(np.sum(M(a / rho))) - 1.0

    while resid(lo) < 0:
        lo *= 0.5
    while resid(hi) > 0:
        hi *= 2.0
        if not math.isfinite(hi):
            raise OverflowError("Luxemburg norm bracket overflowed")
    if lo == hi:
        return NormResult(lo, resid(lo), 0)

    # in the variable s = 1/rho the modular sum is increasing
    def g(s):
        v = float(np.sum(M(a * s)))
        return math.log(v) if v > 0 else -math.inf

    s, _, it = solve_increasing(g, 1.0 / hi, 1.0 / lo, rtol=4 * np.finfo(float).eps,
                               ftol=1e-15)
    rho = 1.0 / s
    r = resid(rho)
    # rounding in 1/s can cost an ulp; polish over the neighbouring doubles
    for cand in (np.nextafter(rho, 0.0), np.nextafter(rho, math.inf)):
        rc = resid(float(cand))
        if abs(rc) < abs(r):
            rho, r = float(cand), rc
    if abs(r) > RESIDUAL_TOL:
        raise ArithmeticError(f"Luxemburg norm did not converge (residual {r:.3g})")
    return NormResult(rho, r, it)


@dataclass(frozen=True)
class LemmaCheck:
    side: str  # below | above | unit
    holds: bool
    margin: float
    norm: float
    modular: float


def check_lemma_sum_vs_norm(M: OrliczFunction, x: SparseVector, tol: float = 1e-9,
                            norm: float = None) -> LemmaCheck:
    """Compare sum M(|x_i|) with ||x||: <= below the unit sphere, >= above it.

    ``norm`` may carry a previously computed Luxemburg norm of x.
    """
    if norm is None:
        norm = luxemburg_norm(M, x).value
    s = float(np.sum(M(np.abs(x.values)))) if len(x) else 0.0
    slack = tol * max(1.0, norm)
    if abs(norm - 1.0) <= 1e-12:
        margin = -abs(s - norm)
        return LemmaCheck("unit", margin >= -slack, margin, norm, s)
    if norm < 1.0:
        margin = norm - s
        return LemmaCheck("below", margin >= -slack, margin, norm, s)
    margin = s - norm
    return LemmaCheck("above", margin >= -slack, margin, norm, s)
