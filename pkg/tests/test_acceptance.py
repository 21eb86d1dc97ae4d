"""Acceptance criteria, one check per criterion.

Each ``criterion_*`` function returns (passed, detail).  Under pytest every
criterion records a PASS/FAIL line that is printed in the terminal summary;
``python3 tests/test_acceptance.py`` prints the same lines directly.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import ACCEPTANCE_LINES, sparse_corpus  # noqa: E402

from orlicz import funcdsl as f  # noqa: E402
from orlicz.classify import (classify_lp, classify_orlicz, classify_with_evidence,  # noqa: E402
                             orlicz_case_masks)
from orlicz.embed_gauss import GaussParams, gauss_moduli, phi  # noqa: E402
from orlicz.embed_tent import (lower_witness, make_tent_params, scalar_sandwich_sum,  # noqa: E402
                               window_for_range)
from orlicz.harness import (GaussEmbedding, SamplePlan, TentEmbedding, run_distortion,  # noqa: E402
                            small_distance_check)
from orlicz.indices import basis_criterion, estimate_indices, small_scale_ratio_limit  # noqa: E402
from orlicz.mazur import MazurParams, check_mazur_bounds, mazur_map, sphere_pairs  # noqa: E402
from orlicz.space import (SparseVector, check_lemma_sum_vs_norm, lp_norm,  # noqa: E402
                          luxemburg_norm, modular_sum)

CORPUS_SIZE = 10_000


def _corpus():
    return sparse_corpus(CORPUS_SIZE, seed=1, max_support=32, exp_range=(-10, 10))


def criterion_01():
    xs = _corpus()
    t0 = time.perf_counter()
    worst = 0.0
    for p in (1.0, 1.5, 2.0, 3.0):
        M = f.power(p)
        for x in xs:
            ref = lp_norm(x, p)
            worst = max(worst, abs(luxemburg_norm(M, x).value - ref) / ref)
    dt = time.perf_counter() - t0
    return worst <= 1e-10 and dt < 10.0, f"max rel err {worst:.2e}, {dt:.1f}s (limit 10s)"


def criterion_02():
    xs = _corpus()
    worst_mod, bad = 0.0, 0
    for M in (f.power(1.0), f.power(1.5), f.power(2.0), f.power(3.0), f.power_log()):
        for x in xs:
            n = luxemburg_norm(M, x).value
            worst_mod = max(worst_mod, abs(modular_sum(M, x, n) - 1.0))
            bad += not check_lemma_sum_vs_norm(M, x, norm=n).holds
    return worst_mod <= 1e-9 and bad == 0, f"max |modular - 1| {worst_mod:.2e}, lemma violations {bad}"


def criterion_03():
    t0 = time.perf_counter()
    ok, parts = True, []
    for p in (1.0, 1.5, 2.0, 3.0, 4.0):
        e = estimate_indices(f.power(p))
        good = (e.beta_low <= p <= e.beta_high and e.alpha_low <= p <= e.alpha_high
                and e.beta_high - e.beta_low <= 0.05 and e.alpha_high - e.alpha_low <= 0.05)
        ok &= good
        parts.append(f"p={p:g}:{'ok' if good else 'MISS'}")
    e = estimate_indices(f.power_log())
    good = (e.beta_low <= 2 <= e.beta_high and e.alpha_low <= 2 <= e.alpha_high
            and e.beta_high - e.beta_low <= 0.1 and e.alpha_high - e.alpha_low <= 0.1)
    ok &= good
    parts.append(f"log:[{e.beta_low:.4f},{e.beta_high:.4f}]")
    dt = time.perf_counter() - t0
    return ok and dt < 60.0, " ".join(parts) + f", {dt:.1f}s (limit 60s)"


def criterion_04():
    P = make_tent_params(f.power(1), 2.0, q=1.5)
    rng = np.random.default_rng(4)
    viol = wit = 0
    for _ in range(10_000):
        d = 2.0 ** rng.uniform(-16, 8)
        s = rng.uniform(-1000, 1000)
        t = s + d * rng.choice([-1.0, 1.0])
        r = scalar_sandwich_sum(P, s, t)
        m = P.M.eval(abs(s - t))
        viol += not (m - r.tail_bound <= r.sum <= P.A * m + r.tail_bound)
        wit += not lower_witness(P, s, t) >= m * (1 - 1e-9)
    return viol == 0 and wit == 0, f"sandwich violations {viol}, witness failures {wit} / 10000"


def criterion_05():
    runs = [(make_tent_params(f.power(1), 2.0, q=1.5), "power(1),p=2"),
            (make_tent_params(f.power_log(), 3.0), "power_log,p=3")]
    codes = []
    for params, label in runs:
        r = run_distortion(TentEmbedding(params), SamplePlan("dyadic-sparse", 1000, seed=5))
        codes.append(f"{label}: exit {r.exit_code}")
        if r.exit_code != 0:
            return False, "; ".join(codes)
    return True, "; ".join(codes)


def criterion_06():
    P = MazurParams(2, 1)
    pairs = sphere_pairs(2, 8, 10_000, seed=6)
    res = check_mazur_bounds(P, pairs)
    inv = max(float(np.max(np.abs(mazur_map(P.inverse(), mazur_map(P, x)).values - x.values)))
              for x, _ in pairs)
    c1 = check_mazur_bounds(P, sphere_pairs(2, 8, 1000, seed=7)).C_hat
    c4 = check_mazur_bounds(P, sphere_pairs(2, 8, 4000, seed=7)).C_hat
    stable = 0.5 <= c1 / c4 <= 2.0
    ok = res.upper_holds and inv <= 1e-9 and stable
    return ok, (f"worst upper ratio {res.worst_upper_ratio:.6f} (bound 2), inverse err {inv:.1e}, "
                f"C_hat 1e3 {c1:.4f} vs 4e3 {c4:.4f}")


def criterion_07():
    G = GaussParams(p=1.5, d=4, radius=2.0, K=12, eps_trunc=1e-6)
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(1000):
        t = 4.0 ** -(1 + i % 6)
        x, y = (_ball(rng, 4, 2.0) for _ in range(2))
        px = phi(G, t, SparseVector.from_dense(x))
        py = phi(G, t, SparseVector.from_dense(y))
        got = float(np.sum((px - py) ** 2))
        worst = max(worst, abs(got - 2 * (1 - math.exp(-t * float(np.sum((x - y) ** 2))))))
    X = np.array([_ball(rng, 4, 2.0) for _ in range(20)])
    D = ((X[:, None] - X[None]) ** 2).sum(-1)
    mineig = min(np.linalg.eigvalsh(np.exp(-t * D)).min() for t in (4.0 ** -k for k in range(1, 7)))
    ok = worst <= 3e-6 and mineig >= -1e-9
    return ok, f"max kernel deviation {worst:.2e} (limit 3e-6), min Gram eigenvalue {mineig:.2e}"


def _ball(rng, d, radius):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v) * radius * rng.uniform() ** (1 / d)


def criterion_08():
    p = 1.5
    G = GaussParams(p=p, levels=12, d=2, radius=32.0, eps_trunc=1e-12)
    C_hat = check_mazur_bounds(MazurParams(2, p), sphere_pairs(2, 8, 2000, seed=8)).C_hat
    emb = GaussEmbedding(G, C_hat)
    slope = emb.moduli.rho2(1.0)
    slope_ok = abs(slope - 2 * math.sqrt(2) / p * (1 - 2.0 ** -12)) <= 1e-14
    ds = tuple(2.0 ** np.linspace(-6, 6, 25))
    r = run_distortion(emb, SamplePlan("pairs-at-distance", 500, seed=8, dim=2, radius=32.0,
                                       distances=ds))
    # the spanning plan has no distance below 2^-10, so the uniform side is sampled separately
    small = run_distortion(emb, SamplePlan("pairs-at-distance", 60, seed=9, dim=2, radius=32.0,
                                           distances=(2.0 ** -16, 2.0 ** -13, 2.0 ** -11)))
    check = small_distance_check(small, emb.moduli)
    ok = slope_ok and r.exit_code == 0 and small.exit_code == 0 and check is True
    return ok, (f"500 pairs exit {r.exit_code}, min lower slack {r.min_lower_slack:.3e}, "
                f"small-distance check {check}, C_hat {C_hat:.4f}")


def criterion_09():
    t0 = time.perf_counter()
    lp = [classify_lp(1.5, 2).kind, classify_lp(2, 1).kind, classify_lp(3, 2).kind,
          classify_lp(2, 2).kind]
    lp_ok = lp == ["StrongUniformEmbeds", "StrongUniformEmbeds", "NoCoarseNoUniform",
                   "StrongUniformEmbeds"]
    orl = [classify_orlicz(1.5, 1.2).kind, classify_orlicz(3, 2.5).kind,
           classify_orlicz(2, 1.5).kind, classify_orlicz(3, 3).kind]
    orl_ok = orl == ["StrongUniformEmbeds", "NoCoarseNoUniform", "NotDeterminedByIndices",
                     "OpenProblem"]
    vals = np.concatenate([[1.0, 2.0, math.inf], np.linspace(1.0, 6.0, 997)])
    bm, bn = (a.ravel() for a in np.meshgrid(vals, vals))
    hits = np.add.reduce([m.astype(int) for m in orlicz_case_masks(bm, bn)])
    sweep_ok = bool(np.all(hits == 1)) and bm.size == 10 ** 6
    dt = time.perf_counter() - t0
    return lp_ok and orl_ok and sweep_ok and dt < 5.0, (
        f"lp rows {'ok' if lp_ok else lp}, orlicz rows {'ok' if orl_ok else orl}, "
        f"sweep {'one case per point' if sweep_ok else 'FAILED'}, {dt:.2f}s")


def criterion_10():
    t0 = time.perf_counter()
    M = f.power_log()
    e = estimate_indices(M)
    small = small_scale_ratio_limit(M)
    basis = basis_criterion(M)
    cs = np.array(basis.cs)
    decreasing = bool(np.all(np.diff(cs) < 0))
    c40 = basis.c_at(40)
    report = classify_with_evidence(M, 1.5)
    verdict = report.verdict
    cites = any("Johnson-Randrianarivony" in n for n in verdict.notes)
    dt = time.perf_counter() - t0
    checks = {
        "indices contain 2": e.beta_low <= 2 <= e.beta_high,
        "small-scale vanishing": small == "vanishing",
        "basis vanishing": basis.trend == "vanishing",
        "c_n decreasing": decreasing,
        "c_{2^40} < 0.2": c40 < 0.2,
        "NotDeterminedByIndices": verdict.kind == "NotDeterminedByIndices",
        "cites criterion": cites,
        "runtime < 10s": dt < 10.0,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = f"c_(2^40) = {c40:.5f}, {dt:.1f}s"
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


CRITERIA = {
    1: ("Luxemburg norm matches closed-form l_p norms", criterion_01),
    2: ("modular normalisation and sum-vs-norm inequalities", criterion_02),
    3: ("index brackets recover known indices", criterion_03),
    4: ("tent sandwich and lower witness", criterion_04),
    5: ("tent embedding distortion", criterion_05),
    6: ("Mazur map bounds, inverse and C_hat stability", criterion_06),
    7: ("Gaussian kernel identity and positive definiteness", criterion_07),
    8: ("stacked l_2 -> l_p embedding moduli", criterion_08),
    9: ("classifier tables and exhaustiveness", criterion_09),
    10: ("t^2/(1 - ln t) pipeline", criterion_10),
}


def _line(n, passed, detail):
    return f"[{'PASS' if passed else 'FAIL'}] {n:2d}. {CRITERIA[n][0]}: {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_acceptance(n):
    passed, detail = CRITERIA[n][1]()
    ACCEPTANCE_LINES[n] = _line(n, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    results = []
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n][1]()
        results.append(passed)
        print(_line(n, passed, detail), flush=True)
    sys.exit(0 if all(results) else 1)
