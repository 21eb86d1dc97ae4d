import csv
import io
import json
import math

import numpy as np
import pytest

from orlicz import funcdsl as f
from orlicz.embed_gauss import GaussParams
from orlicz.embed_tent import make_tent_params, moduli as tent_moduli
from orlicz.harness import (GaussEmbedding, IdentityEmbedding, MazurEmbedding, SamplePlan,
                            TentEmbedding, empirical_moduli, run_distortion,
                            small_distance_check)
from orlicz.mazur import MazurParams, check_mazur_bounds, sphere_pairs
from orlicz.space import lp_norm


@pytest.fixture(scope="module")
def tent_params():
    return make_tent_params(f.power(1), 2.0, q=1.5)


@pytest.fixture(scope="module")
def tent_report(tent_params):
    return run_distortion(TentEmbedding(tent_params), SamplePlan("dyadic-sparse", 300, seed=3))


# -- plans

def test_plan_is_deterministic_per_index():
    a = SamplePlan("dyadic-sparse", 20, seed=5)
    b = SamplePlan("dyadic-sparse", 40, seed=5)
    assert all(x == u and y == v for (x, y), (u, v) in zip(a.pairs(), b.pairs()))
    assert a.pair(3) != SamplePlan("dyadic-sparse", 20, seed=6).pair(3)


def test_dyadic_values_stay_in_range():
    plan = SamplePlan("dyadic-sparse", 200, seed=1, scale_range=(-4, 3), dyadic_fraction=1.0,
                      max_index=10, max_support=3)
    for x, _ in plan.pairs():
        a = np.abs(x.values)
        assert np.all(a >= 2.0 ** -4) and np.all(a < 2.0 ** 4)
        assert np.all(np.frexp(a)[0] * 16 == np.round(np.frexp(a)[0] * 16))
        assert x.indices.max() <= 10 and len(x) <= 3


def test_sphere_plan_points_are_unit():
    for x, y in SamplePlan("sphere", 50, seed=2, p=1.5, dim=5).pairs():
        assert lp_norm(x, 1.5) == pytest.approx(1.0) and lp_norm(y, 1.5) == pytest.approx(1.0)


def test_pairs_at_distance_hit_the_grid():
    ds = (2.0 ** -12, 0.5, 1.5)
    plan = SamplePlan("pairs-at-distance", 30, seed=4, distances=ds, dim=3, radius=1.0)
    for i, (x, y) in enumerate(plan.pairs()):
        assert lp_norm(x - y, 2.0) == pytest.approx(ds[i % 3], rel=1e-9)
        assert lp_norm(x, 2.0) <= 1.0 + 1e-12 and lp_norm(y, 2.0) <= 1.0 + 1e-12


def test_plan_validation():
    with pytest.raises(ValueError):
        SamplePlan("gaussian", 5)
    with pytest.raises(ValueError):
        SamplePlan("pairs-at-distance", 5)
    with pytest.raises(ValueError):
        SamplePlan("pairs-at-distance", 5, distances=(3.0,), radius=1.0)


# -- reports

def test_identity_has_zero_slack():
    r = run_distortion(IdentityEmbedding(), SamplePlan("dyadic-sparse", 100, seed=0))
    assert r.exit_code == 0 and not r.violations
    assert np.all(r.slack_lo == 0) and np.all(r.slack_hi == 0)
    c = empirical_moduli(r)
    # the identity's curves are the diagonal: each bucket spans exactly its input range
    assert c["lower"] == c["d_in_min"] and c["upper"] == c["d_in_max"]


def test_tent_report_is_clean(tent_report):
    assert tent_report.exit_code == 0 and not tent_report.errors
    assert len(tent_report.d_in) == 300


def test_tent_lower_envelope_sits_above_rho1(tent_report, tent_params):
    c = empirical_moduli(tent_report)
    tol = float(tent_report.tol_lo.max())
    for k, lo in zip(c["bucket"], c["lower"]):
        sel = np.floor(np.log2(tent_report.d_in)) == k
        assert lo >= float(np.min(tent_report.rho1[sel])) - tol
    rho1 = tent_moduli(tent_params).rho1
    for floor, env in zip(c["d_in_min"], c["lower_envelope"]):
        assert env >= rho1(floor) - tol


def test_envelopes_are_nondecreasing(tent_report):
    c = empirical_moduli(tent_report)
    assert np.all(np.diff(c["lower_envelope"]) >= 0)
    assert np.all(np.diff(c["upper_envelope"]) >= 0)


def test_inflated_rho1_is_caught(tent_params):
    mod = tent_moduli(tent_params).with_rho1_scaled(16.0)
    r = run_distortion(TentEmbedding(tent_params, mod), SamplePlan("dyadic-sparse", 100, seed=3))
    assert r.exit_code == 2 and r.violations
    w = r.violations[0]
    assert w["side"] == "lower" and w["d_out"] < w["rho1"] and "entries" in w["x"]


def test_mazur_upper_curve_has_slope_two():
    P = MazurParams(2, 1)
    C = check_mazur_bounds(P, sphere_pairs(2, 8, 1000, seed=1)).C_hat
    r = run_distortion(MazurEmbedding(P, C), SamplePlan("sphere", 400, seed=7, p=2.0))
    assert r.exit_code == 0
    c = empirical_moduli(r)
    assert all(u <= 2 * d * (1 + 1e-12) for u, d in zip(c["upper"], c["d_in_max"]))


def test_gauss_small_distances_stay_small():
    G = GaussParams(p=1.5, levels=8, d=3, radius=1.0)
    C = check_mazur_bounds(MazurParams(2, 1.5), sphere_pairs(2, 8, 1000, seed=2)).C_hat
    emb = GaussEmbedding(G, C)
    plan = SamplePlan("pairs-at-distance", 60, seed=1, dim=3,
                      distances=(2.0 ** -14, 2.0 ** -12, 2.0 ** -11, 0.25, 1.0))
    r = run_distortion(emb, plan)
    assert r.exit_code == 0
    assert small_distance_check(r, emb.moduli) is True


def test_tent_small_distance_check(tent_params):
    emb = TentEmbedding(tent_params)
    r = run_distortion(emb, SamplePlan("dyadic-sparse", 150, seed=9, scale_range=(-20, -12)))
    assert small_distance_check(r, emb.moduli) is True


def test_small_distance_check_needs_small_inputs():
    r = run_distortion(IdentityEmbedding(), SamplePlan("dyadic-sparse", 20, seed=0, scale_range=(0, 2)))
    assert small_distance_check(r, IdentityEmbedding().moduli) is None


def test_errors_are_recorded_not_raised():
    G = GaussParams(p=1.5, levels=2, d=3, radius=0.5)
    emb = GaussEmbedding(G, 0.5)
    plan = SamplePlan("pairs-at-distance", 6, seed=0, dim=3, radius=1.0, distances=(0.1,))
    r = run_distortion(emb, plan)
    assert r.errors and all("OutsideRadius" in e["error"] for e in r.errors)
    assert r.exit_code in (0, 3) and len(r.d_in) + len(r.errors) == 6
    if not r.violations:
        assert r.exit_code == 3


def test_reports_are_bit_identical_across_runs_and_threads(tent_params):
    plan = SamplePlan("dyadic-sparse", 80, seed=13)
    a = run_distortion(TentEmbedding(tent_params), plan, workers=1)
    b = run_distortion(TentEmbedding(tent_params), plan, workers=4)
    for name in ("d_in", "d_out", "rho1", "rho2", "tol_lo", "tol_hi"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert json.dumps(a.to_dict(True)) == json.dumps(b.to_dict(True))
    assert a.to_csv() == b.to_csv()


def test_csv_layout(tent_report):
    rows = list(csv.reader(io.StringIO(tent_report.to_csv())))
    assert rows[0] == ["d_in", "d_out", "rho1", "rho2", "slack_lo", "slack_hi"]
    assert len(rows) == 301
    d_in, d_out, r1, r2, lo, hi = map(float, rows[1])
    assert lo == d_out - r1 and hi == r2 - d_out


def test_json_report_fields(tent_report):
    d = tent_report.to_dict(include_pairs=True)
    for k in ("embedding", "moduli", "plan", "min_lower_slack", "min_upper_slack", "violations",
              "curves", "exit_code", "records"):
        assert k in d
    assert d["plan"]["seed"] == 3 and len(d["records"]) == 300
    assert d["min_lower_slack"] == min(r["slack_lo"] for r in d["records"])
    json.dumps(d)


def test_thread_count_from_environment(monkeypatch):
    from orlicz.harness import thread_count
    monkeypatch.setenv("ORLICZ_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("ORLICZ_THREADS", "zero")
    assert thread_count() == 1
