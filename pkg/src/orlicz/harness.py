"""Sampling checks of rho1(d(x, y)) <= d(f(x), f(y)) <= rho2(d(x, y)).

A :class:`SamplePlan` yields a deterministic stream of input pairs (pair i is
drawn from ``default_rng([seed, i])``, so serial and parallel runs agree).
An embedding adapter supplies the map, both metrics, its moduli and the
per-pair tolerance that its own truncation certificate allows.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import embed_gauss, embed_tent
from .mazur import MazurParams, mazur_map
from .moduli import ModulusPair, identity_moduli, power_moduli
from .space import SparseVector, lp_norm, luxemburg_norm

__all__ = ["SamplePlan", "DistortionReport", "IdentityEmbedding", "TentEmbedding",
           "GaussEmbedding", "MazurEmbedding", "run_distortion", "empirical_moduli",
           "small_distance_check", "thread_count"]

ROUNDING = 1e-9


def thread_count() -> int:
    """Worker cap from ORLICZ_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("ORLICZ_THREADS", "1")))
    except ValueError:
        return 1


# -- sample plans

@dataclass(frozen=True)
class SamplePlan:
    generator: str  # dyadic-sparse | sphere | pairs-at-distance
    count: int
    seed: int = 0
    max_support: int = 8
    max_index: int = 64
    scale_range: Tuple[int, int] = (-10, 10)
    dyadic_fraction: float = 0.9
    p: float = 2.0  # sphere / pairs-at-distance: the l_p in which points are drawn
    dim: int = 8
    distances: Tuple[float, ...] = ()
    radius: float = 1.0

    def __post_init__(self):
        if self.generator not in ("dyadic-sparse", "sphere", "pairs-at-distance"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.generator == "pairs-at-distance":
            if not self.distances:
                raise ValueError("pairs-at-distance needs a distance grid")
            if max(self.distances) > 2 * self.radius:
                raise ValueError("distance grid exceeds the diameter of the sampling ball")

    def pair(self, i: int) -> Tuple[SparseVector, SparseVector]:
        rng = np.random.default_rng([self.seed, i])
        return getattr(self, "_" + self.generator.replace("-", "_"))(rng, i)

    def pairs(self) -> List[Tuple[SparseVector, SparseVector]]:
        return [self.pair(i) for i in range(self.count)]

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["scale_range"] = list(self.scale_range)
        d["distances"] = list(self.distances)
        return d

    def _value(self, rng, lo, hi):
        # sign * 2^e * (1 + m/8): exact in binary; occasionally perturbed off the dyadic grid
        v = math.ldexp(1.0 + int(rng.integers(0, 8)) / 8.0, int(rng.integers(lo, hi + 1)))
        if rng.random() >= self.dyadic_fraction:
            v *= 1.0 + rng.uniform(-0.1, 0.1)
        return v if rng.random() < 0.5 else -v

    def _dyadic_sparse(self, rng, i):
        lo, hi = self.scale_range
        k = int(rng.integers(1, self.max_support + 1))
        idx = rng.choice(self.max_index, size=k, replace=False) + 1
        x = {int(j): self._value(rng, lo, hi) for j in idx}
        y = dict(x)
        # move a random subset by dyadic amounts of independent size
        kd = int(rng.integers(1, self.max_support + 1))
        for j in rng.choice(self.max_index, size=kd, replace=False) + 1:
            j = int(j)
            y[j] = y.get(j, 0.0) + self._value(rng, lo, hi)
        return SparseVector(x), SparseVector(y)

    def _sphere_point(self, rng):
        v = rng.standard_normal(int(rng.integers(1, self.dim + 1)))
        while not np.any(v):
            v = rng.standard_normal(len(v))
        return SparseVector.from_dense(v / np.sum(np.abs(v) ** self.p) ** (1.0 / self.p))

    def _sphere(self, rng, i):
        return self._sphere_point(rng), self._sphere_point(rng)

    def _pairs_at_distance(self, rng, i):
        d = float(self.distances[i % len(self.distances)])
        u = self._unit(rng)
        w = self._unit(rng)
        # midpoint inside the ball of radius R - d/2 keeps both points within R
        m = w * (self.radius - d / 2.0) * rng.random() ** (1.0 / self.dim)
        return SparseVector.from_dense(m - 0.5 * d * u), SparseVector.from_dense(m + 0.5 * d * u)

    def _unit(self, rng):
        v = rng.standard_normal(self.dim)
        return v / np.sum(np.abs(v) ** self.p) ** (1.0 / self.p)


# -- embedding adapters

class IdentityEmbedding:
    name = "identity"

    def __init__(self, p: float = 2.0):
        self.p = p
        self.moduli = identity_moduli()

    def prepare(self, pairs):
        pass

    def input_distance(self, x, y):
        return lp_norm(x - y, self.p)

    def embed(self, x):
        return x

    def output_distance(self, fx, fy):
        return lp_norm(fx - fy, self.p)

    def tolerance(self, x, y, d_in, r1, r2):
        return ROUNDING, ROUNDING

    def describe(self):
        return {"name": self.name, "p": self.p}


class TentEmbedding:
    """h_M -> l_p via tent functions on one fixed scale window.

    The window is chosen in :meth:`prepare` to cover every coordinate distance
    of the sample, so every pair sees the same (truncated) map.
    """

    name = "tent"

    def __init__(self, params: embed_tent.TentParams, moduli: ModulusPair = None):
        self.params = params
        self.moduli = moduli or embed_tent.moduli(params)

    def prepare(self, pairs):
        if self.params.window is not None:
            return
        ds = [abs(v) for x, y in pairs for v in (x - y).values]
        if ds:
            self.params = self.params.with_window(
                embed_tent.window_for_range(self.params, min(ds), max(ds)))

    def input_distance(self, x, y):
        return luxemburg_norm(self.params.M, x - y).value

    def embed(self, x):
        return embed_tent.embed_vector(self.params, x)

    def output_distance(self, fx, fy):
        return fx.distance(fy, self.params.p)

    def tolerance(self, x, y, d_in, r1, r2):
        # windowed sum >= (1 - eps) sum_i M(|x_i - y_i|), the quantity rho1^p bounds from below
        lo, hi = self.params.window
        eps = 0.0
        for v in (x - y).values:
            N = embed_tent.dyadic_scale(abs(v))
            eps = max(eps, self.params.tail_factor(N - lo, hi - N))
        eps = min(eps, 1.0)
        return r1 * (1.0 - (1.0 - eps) ** (1.0 / self.params.p)) + ROUNDING, ROUNDING

    def describe(self):
        return {"name": self.name, "params": self.params.to_dict()}


class GaussEmbedding:
    name = "gauss"

    def __init__(self, params: embed_gauss.GaussParams, C_hat: float):
        self.params = params
        self.C_hat = C_hat
        self.moduli = embed_gauss.gauss_moduli(params, C_hat)
        self._tol = embed_gauss.bound_tolerances(params, C_hat)

    def prepare(self, pairs):
        pass

    def input_distance(self, x, y):
        return lp_norm(x - y, 2.0)

    def embed(self, x):
        return embed_gauss.stacked_embed(self.params, x)

    def output_distance(self, fx, fy):
        return fx.distance(fy)

    def tolerance(self, x, y, d_in, r1, r2):
        lo_abs, hi_rel = self._tol
        return lo_abs + ROUNDING, r2 * hi_rel + ROUNDING

    def describe(self):
        return {"name": self.name, "C_hat": self.C_hat, "params": self.params.to_dict()}


class MazurEmbedding:
    """S_{l_p} -> S_{l_q} with rho1(s) = C_hat s^{p/q}, rho2(s) = (p/q) s."""

    name = "mazur"

    def __init__(self, params: MazurParams, C_hat: float = 0.0):
        self.params = params
        self.C_hat = C_hat
        e = params.exponent
        self.moduli = power_moduli(C_hat, e, e, 1.0, kind="mazur")

    def prepare(self, pairs):
        pass

    def input_distance(self, x, y):
        return lp_norm(x - y, self.params.p)

    def embed(self, x):
        return mazur_map(self.params, x)

    def output_distance(self, fx, fy):
        return lp_norm(fx - fy, self.params.q)

    def tolerance(self, x, y, d_in, r1, r2):
        return ROUNDING, r2 * 1e-12 + ROUNDING

    def describe(self):
        return {"name": self.name, "p": self.params.p, "q": self.params.q, "C_hat": self.C_hat}


# -- reports

@dataclass
class DistortionReport:
    embedding: dict
    moduli: dict
    plan: dict
    d_in: np.ndarray
    d_out: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    tol_lo: np.ndarray
    tol_hi: np.ndarray
    violations: List[dict] = field(default_factory=list)
    errors: List[dict] = field(default_factory=list)

    @property
    def slack_lo(self):
        return self.d_out - self.rho1

    @property
    def slack_hi(self):
        return self.rho2 - self.d_out

    @property
    def min_lower_slack(self) -> float:
        return float(np.min(self.slack_lo)) if len(self.d_in) else math.inf

    @property
    def min_upper_slack(self) -> float:
        return float(np.min(self.slack_hi)) if len(self.d_in) else math.inf

    @property
    def exit_code(self) -> int:
        if self.violations:
            return 2
        return 3 if self.errors else 0

    def to_dict(self, include_pairs: bool = False):
        out = {"embedding": self.embedding, "moduli": self.moduli, "plan": self.plan,
               "pairs": int(len(self.d_in)), "min_lower_slack": self.min_lower_slack,
               "min_upper_slack": self.min_upper_slack, "violations": self.violations,
               "errors": self.errors, "curves": empirical_moduli(self),
               "exit_code": self.exit_code}
        if include_pairs:
            out["records"] = [dict(zip(_CSV_FIELDS, row)) for row in self._rows()]
        return out

    def _rows(self):
        return zip(*(a.tolist() for a in (self.d_in, self.d_out, self.rho1, self.rho2,
                                           self.slack_lo, self.slack_hi)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_CSV_FIELDS)
        for row in self._rows():
            w.writerow([repr(v) for v in row])
        return buf.getvalue()


_CSV_FIELDS = ("d_in", "d_out", "rho1", "rho2", "slack_lo", "slack_hi")


def _evaluate(emb, pair):
    x, y = pair
    d_in = emb.input_distance(x, y)
    d_out = emb.output_distance(emb.embed(x), emb.embed(y))
    return d_in, d_out


def run_distortion(embedding, plan: SamplePlan, pairs: Sequence = None,
                   workers: int = None) -> DistortionReport:
    """Evaluate both sides of the moduli inequalities on every pair of the plan."""
    pairs = plan.pairs() if pairs is None else list(pairs)
    embedding.prepare(pairs)
    workers = workers or thread_count()

    def safe(i):
        try:
            return i, _evaluate(embedding, pairs[i]), None
        except Exception as exc:  # recorded per pair
            return i, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(safe, range(len(pairs))))
    else:
        results = [safe(i) for i in range(len(pairs))]

    rows, errors, kept = [], [], []
    for i, res, err in results:
        if err is not None:
            errors.append({"pair": i, "error": err})
        else:
            rows.append(res)
            kept.append(i)
    d_in = np.array([r[0] for r in rows], dtype=float)
    d_out = np.array([r[1] for r in rows], dtype=float)
    mod = embedding.moduli
    rho1 = np.array([float(mod.rho1(s)) for s in d_in])
    rho2 = np.array([float(mod.rho2(s)) for s in d_in])
    tols = [embedding.tolerance(*pairs[i], s, a, b) for i, s, a, b in zip(kept, d_in, rho1, rho2)]
    tol_lo = np.array([t[0] for t in tols])
    tol_hi = np.array([t[1] for t in tols])
    report = DistortionReport(embedding.describe(), mod.to_dict(), plan.to_dict(), d_in, d_out,
                              rho1, rho2, tol_lo, tol_hi, errors=errors)
    for j in np.flatnonzero((report.slack_lo < -tol_lo) | (report.slack_hi < -tol_hi)):
        x, y = pairs[kept[j]]
        report.violations.append({
            "pair": kept[j], "x": x.to_json(), "y": y.to_json(), "d_in": d_in[j],
            "d_out": d_out[j], "rho1": rho1[j], "rho2": rho2[j],
            "side": "lower" if report.slack_lo[j] < -tol_lo[j] else "upper"})
    return report


def empirical_moduli(report: DistortionReport) -> dict:
    """Min/max output distance per log2 bucket of input distance, with monotone envelopes.

    The lower envelope is a running minimum from the right and the upper one a
    running maximum from the left, so both are nondecreasing.
    """
    pos = report.d_in > 0
    if not np.any(pos):
        return {"bucket": [], "d_in_min": [], "d_in_max": [], "lower": [], "upper": [],
                "lower_envelope": [], "upper_envelope": []}
    b = np.floor(np.log2(report.d_in[pos])).astype(int)
    d_in, d_out = report.d_in[pos], report.d_out[pos]
    keys = np.unique(b)
    lower = np.array([d_out[b == k].min() for k in keys])
    upper = np.array([d_out[b == k].max() for k in keys])
    return {
        "bucket": keys.tolist(),
        "d_in_min": [float(d_in[b == k].min()) for k in keys],
        "d_in_max": [float(d_in[b == k].max()) for k in keys],
        "lower": lower.tolist(),
        "upper": upper.tolist(),
        "lower_envelope": np.minimum.accumulate(lower[::-1])[::-1].tolist(),
        "upper_envelope": np.maximum.accumulate(upper).tolist(),
    }


def small_distance_check(report: DistortionReport, moduli: ModulusPair,
                         threshold: float = 2.0 ** -10) -> Optional[bool]:
    """Uniform-continuity side: the largest bucket below ``threshold`` stays under rho2(threshold).

    Returns None when the sample has no input distance below the threshold.
    """
    small = (report.d_in > 0) & (report.d_in < threshold)
    if not np.any(small):
        return None
    b = np.floor(np.log2(report.d_in))
    top = small & (b == b[small].max())
    bound = float(moduli.rho2(threshold)) + float(report.tol_hi[top].max())
    return bool(report.d_out[top].max() < bound)
