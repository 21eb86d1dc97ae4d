"""Decision tables for coarse and uniform embeddability.

``classify_lp`` covers l_p -> l_q.  ``classify_orlicz`` covers h_M -> h_N in
terms of the upper indices beta_M, beta_N, with four cases partitioning
[1, inf]^2:

    1  beta_M < beta_N, or beta_N <= beta_M < 2, or beta_M = beta_N = inf   embeds
    2  beta_M > 2 and beta_N < beta_M                                       does not embed
    3  beta_N <= beta_M = 2                                                 not decided by indices
    4  2 < beta_M = beta_N < inf                                            open

Brackets are accepted in place of exact indices; when a bracket meets a case
boundary every case it could fall in is reported and the verdict is flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

__all__ = ["Verdict", "Obstruction", "classify_lp", "classify_orlicz", "cotype_obstruction",
           "orlicz_cases", "orlicz_case_masks", "obstruction_exponent", "KINDS", "CITATIONS",
           "BoundaryReport", "classify_with_evidence"]

EMBEDS = "StrongUniformEmbeds"
NO = "NoCoarseNoUniform"
UNDETERMINED = "NotDeterminedByIndices"
OPEN = "OpenProblem"
KINDS = (EMBEDS, NO, UNDETERMINED, OPEN)

CASE_KIND = {1: EMBEDS, 2: NO, 3: UNDETERMINED, 4: OPEN}

CITATIONS = {
    "lp-embeds": "l_p -> l_q classification (iv): p <= q or q < p <= 2 gives a strong uniform embedding",
    "lp-no": "l_p -> l_q classification (iv): p > q and p > 2; cotype obstruction (Mendel-Naor) "
             "rules out coarse and uniform embeddings",
    "orlicz-case-1": "Orlicz case 1: tent-function construction (beta_M < beta_N) or Gaussian "
                     "kernel with Mazur map (beta_N <= beta_M < 2)",
    "orlicz-case-2": "Orlicz case 2: beta_M > 2 and beta_N < beta_M; cotype obstruction "
                     "(Mendel-Naor) through an intermediate l_p",
    "orlicz-case-3": "Orlicz case 3: beta_N <= beta_M = 2; both outcomes occur, e.g. the "
                     "symmetric-basis non-embeddability criterion (Johnson-Randrianarivony) "
                     "separates t^2/(1 - ln t) from t^2",
    "orlicz-case-4": "Orlicz case 4: 2 < beta_M = beta_N < inf; open",
}

Index = Union[float, Tuple[float, float]]


@dataclass(frozen=True)
class Verdict:
    kind: str  # unique kind, or "Ambiguous" when a bracket straddles a boundary
    case: str
    citation: str
    inputs: dict
    possible: Tuple[str, ...] = ()
    boundary: bool = False
    notes: Tuple[str, ...] = field(default=(), compare=False)

    def to_dict(self):
        return {"kind": self.kind, "case": self.case, "citation": self.citation,
                "inputs": self.inputs, "possible": list(self.possible),
                "boundary": self.boundary, "notes": list(self.notes)}


def classify_lp(p: float, q: float) -> Verdict:
    """l_p strongly uniformly embeds into l_q iff p <= q or p <= 2; otherwise no coarse or uniform embedding."""
    if p < 1 or q < 1:
        raise ValueError("p, q must be >= 1")
    inputs = {"p": p, "q": q}
    if p <= q or p <= 2:
        return Verdict(EMBEDS, "lp-embeds", CITATIONS["lp-embeds"], inputs, (EMBEDS,))
    return Verdict(NO, "lp-no", CITATIONS["lp-no"], inputs, (NO,))


def _bracket(b: Index) -> Tuple[float, float]:
    if isinstance(b, (tuple, list)):
        lo, hi = float(b[0]), float(b[1])
    else:
        lo = hi = float(b)
    if not 1.0 <= lo <= hi:
        raise ValueError(f"invalid index bracket {b!r}")
    return lo, hi


def orlicz_cases(betaM: Index, betaN: Index) -> Tuple[int, ...]:
    """Every case that can fire for some (beta_M, beta_N) in the product of brackets."""
    ml, mh = _bracket(betaM)
    nl, nh = _bracket(betaN)
    inf = math.inf
    out = []
    if ml < nh or (ml < 2 and nl <= mh and nl < 2) or (mh == inf and nh == inf):
        out.append(1)
    if mh > 2 and nl < mh:
        out.append(2)
    if ml <= 2 <= mh and nl <= 2:
        out.append(3)
    lo, hi = max(ml, nl), min(mh, nh)
    if lo <= hi and hi > 2 and lo < inf and not (lo == hi == 2):
        out.append(4)
    return tuple(out)


def classify_orlicz(betaM: Index, betaN: Index) -> Verdict:
    """Verdict for h_M -> h_N from index values or brackets (inf allowed)."""
    cases = orlicz_cases(betaM, betaN)
    inputs = {"beta_M": list(_bracket(betaM)), "beta_N": list(_bracket(betaN))}
    inputs = {k: [_json(v) for v in b] for k, b in inputs.items()}
    kinds = tuple(dict.fromkeys(CASE_KIND[c] for c in cases))
    if len(cases) == 1:
        tag = f"orlicz-case-{cases[0]}"
        return Verdict(CASE_KIND[cases[0]], tag, CITATIONS[tag], inputs, kinds)
    tags = [f"orlicz-case-{c}" for c in cases]
    return Verdict("Ambiguous", "|".join(tags), "; ".join(CITATIONS[t] for t in tags),
                   inputs, kinds, boundary=True)


def _json(v):
    return "inf" if math.isinf(v) else v


def orlicz_case_masks(bm: np.ndarray, bn: np.ndarray):
    """Vectorised case predicates on exact index values; used for exhaustiveness sweeps."""
    inf = np.isinf
    c1 = (bm < bn) | ((bn <= bm) & (bm < 2)) | (inf(bm) & inf(bn))
    c2 = (bm > 2) & (bn < bm)
    c3 = (bm == 2) & (bn <= 2)
    c4 = (bm > 2) & (bm == bn) & ~inf(bm)
    return c1, c2, c3, c4


@dataclass(frozen=True)
class Obstruction:
    blocked: bool
    rationale: str


def cotype_obstruction(qX: float, qY: float, target_has_nontrivial_type: bool) -> Obstruction:
    """A coarse or uniform embedding X -> Y with Y of nontrivial type forces q_X <= q_Y."""
    if qX < 2 or qY < 2:
        raise ValueError("cotype indices are >= 2")
    blocked = bool(target_has_nontrivial_type and qX > qY)
    if blocked:
        why = f"q_X = {qX:g} > q_Y = {qY:g} with a target of nontrivial type (Mendel-Naor)"
    elif not target_has_nontrivial_type:
        why = "target has trivial type; the cotype comparison does not apply"
    else:
        why = f"q_X = {qX:g} <= q_Y = {qY:g}; no cotype obstruction"
    return Obstruction(blocked, why)


def obstruction_exponent(betaM: float, betaN: float) -> float:
    """An intermediate p in (max(beta_N, 2), beta_M) for a case-2 pair.

    h_N embeds into l_p (beta_N < p), l_p has nontrivial type (p > 1), and
    q_{h_M} = beta_M > p = q_{l_p}, so h_M cannot embed into h_N.
    """
    if not (betaM > 2 and betaN < betaM):
        raise ValueError("not a case-2 pair")
    lo = max(betaN, 2.0)
    if math.isinf(betaM):
        return lo + 1.0
    mid = 0.5 * (lo + betaM)
    if not lo < mid < betaM:
        mid = math.nextafter(lo, math.inf)
        if not mid < betaM:
            raise ValueError("no double lies strictly between the two exponents")
    return mid


@dataclass(frozen=True)
class BoundaryReport:
    """Index, small-scale and basis evidence for an Orlicz function, with the verdict."""

    beta_bracket: Tuple[float, float]
    small_scale: str
    basis_trend: str
    basis_c: Tuple[float, ...]
    verdict: Verdict
    snapped: bool

    def to_dict(self):
        return {"beta": [_json(v) for v in self.beta_bracket], "small_scale_ratio": self.small_scale,
                "basis_criterion": self.basis_trend, "verdict": self.verdict.to_dict(),
                "snapped_to_2": self.snapped}


def classify_with_evidence(M, betaN: Index, max_log2_n: int = 960) -> BoundaryReport:
    """Classify h_M -> h_N, resolving beta_M = 2 when the numerical bracket contains it.

    A bracket around 2 straddles the case-3 boundary; the verdict is then taken
    at beta_M = 2 exactly and the snap is recorded.  The small-scale ratio
    M(t)/t^2 and the basis criterion c_n are reported alongside: c_n -> 0 means
    h_M does not coarsely embed into l_2 even though its indices equal 2.
    """
    from .indices import basis_criterion, estimate_indices, small_scale_ratio_limit

    est = estimate_indices(M)
    small = small_scale_ratio_limit(M)
    basis = basis_criterion(M, max_log2_n)
    snapped = est.beta_low <= 2.0 <= est.beta_high
    verdict = classify_orlicz(2.0 if snapped else est.beta_bracket, betaN)
    notes = []
    if snapped:
        notes.append(f"beta_M bracket [{est.beta_low:.4f}, {est.beta_high:.4f}] contains 2; "
                     "classified at beta_M = 2")
    if basis.trend == "vanishing":
        notes.append("symmetric-basis criterion (Johnson-Randrianarivony): n^{-1/2}||e_1+...+e_n|| "
                     "-> 0, so h_M does not coarsely embed into l_2")
    verdict = Verdict(verdict.kind, verdict.case, verdict.citation, verdict.inputs,
                      verdict.possible, verdict.boundary, tuple(notes))
    return BoundaryReport(est.beta_bracket, small, basis.trend, basis.cs, verdict, snapped)
