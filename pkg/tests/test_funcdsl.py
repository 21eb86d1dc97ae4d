import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz import funcdsl as f
from orlicz.funcdsl import GridSpec, ParseError, ValidationError


# -- parse

def test_parse_power():
    assert f.parse("t^2").ast.sexpr() == "pow(t,2)"


def test_parse_log_example():
    assert f.parse("t^2 / (1 - ln(t))").ast.sexpr() == "div(pow(t,2),sub(1,ln(t)))"


def test_parse_error_reports_offset():
    with pytest.raises(ParseError) as e:
        f.parse("t +")
    assert e.value.position == 3
    assert "offset 3" in str(e.value)


@pytest.mark.parametrize("text", ["", "   ", "t ^ t", "s", "ln t", "(t", "t)", "2 3", "t^-"])
def test_malformed_inputs_raise(text):
    with pytest.raises(ParseError):
        f.parse(text)


def test_unknown_identifier_position():
    with pytest.raises(ParseError) as e:
        f.parse("t + sqrt(t)")
    assert e.value.position == 4


def test_precedence_and_associativity():
    e = f.parse("1 - t - t * 2 / 4")
    assert e.ast.sexpr() == "sub(sub(1,t),div(mul(t,2),4))"


@given(st.floats(0.0, 5.0), st.floats(0.01, 10.0))
def test_parsed_expression_evaluates_like_python(a, t):
    M = f.parse(f"{a!r}*t + t^2 + exp(t) - 1")
    got = float(f._np_eval(M.ast, np.array(t)))
    assert got == pytest.approx(a * t + t * t + math.exp(t) - 1, rel=1e-13)


# -- validate

def test_square_is_valid_and_normalized():
    M = f.validate("t^2")
    assert M.validation.passed and M.normalized
    assert M.eval(3.0) == 9.0


def test_log_example_is_valid_with_affine_continuation():
    M = f.validate("t^2/(1-ln(t))")
    assert M.validation.passed
    assert M.validation.continuation == 1.0
    # matched value and slope 3 at the knot (derivative of t^2/(1-ln t) at 1)
    assert M.knot_value == pytest.approx(1.0, abs=1e-15)
    assert M.knot_slope == pytest.approx(3.0, rel=1e-9)
    assert M.eval(2.0) == pytest.approx(4.0, rel=1e-9)


def test_plateau_is_rejected_as_degenerate():
    with pytest.raises(ValidationError) as e:
        f.from_callable(lambda t: np.maximum(t - 0.5, 0.0), name="plateau")
    assert "degenerate" in {v.property for v in e.value.report.violations}


def test_zero_function_is_degenerate():
    with pytest.raises(ValidationError) as e:
        f.validate("0*t")
    assert "degenerate" in {v.property for v in e.value.report.violations}


def test_concave_function_is_rejected():
    with pytest.raises(ValidationError) as e:
        f.validate("t^0.5")
    assert "nonconvex" in {v.property for v in e.value.report.violations}


def test_decreasing_function_is_rejected():
    with pytest.raises(ValidationError) as e:
        f.validate("exp(0-t) - 1")
    props = {v.property for v in e.value.report.violations}
    assert "negative" in props or "decreasing" in props


def test_nonzero_at_origin_is_rejected():
    with pytest.raises(ValidationError) as e:
        f.validate("t + 1")
    assert "zero_at_origin" in {v.property for v in e.value.report.violations}


def test_report_lists_every_violation():
    with pytest.raises(ValidationError) as e:
        f.validate("t^0.5 + 1")
    props = {v.property for v in e.value.report.violations}
    assert {"zero_at_origin", "nonconvex"} <= props
    assert not e.value.report.passed


def test_grid_must_span_required_range():
    with pytest.raises(ValueError):
        f.validate("t^2", GridSpec(t_min=1e-4))
    with pytest.raises(ValueError):
        f.validate("t^2", GridSpec(points=32))


# -- eval and inverse

def test_eval_examples():
    assert f.power(2).eval(3.0) == 9.0
    assert f.power_log().eval(1.0) == 1.0
    for M in (f.power(1.5), f.power_log(), f.validate("exp(t) - 1")):
        assert M.eval(0.0) == 0.0


def test_eval_rejects_negative_arguments():
    with pytest.raises(ValueError):
        f.power(2).eval(-1.0)


def test_inverse_examples():
    assert f.power(2).inverse(0.25) == 0.5
    assert f.power_log().inverse(1.0) == pytest.approx(1.0, abs=1e-15)
    assert f.power_log().inverse(0.0) == 0.0


def test_inverse_residual_tolerance():
    for M in (f.power(3), f.power_log(), f.validate("t^2/(1-ln(t))")):
        for y in (1e-200, 1e-30, 0.3, 7.0, 1e6):
            t = M.inverse(y)
            assert abs(M.eval(t) - y) <= 1e-12 * max(1.0, y)


def test_inverse_out_of_range():
    with pytest.raises(OverflowError):
        f.power(1).inverse(math.inf)


@pytest.mark.parametrize("M", [f.power(1), f.power(2.5), f.power_log(), f.validate("exp(t)-1")],
                         ids=["p1", "p2.5", "log", "exp"])
def test_round_trip_on_grid(M):
    for t in GridSpec().values():
        y = M.eval(t)
        if y == 0.0 or not math.isfinite(y):
            continue
        assert abs(M.inverse(y) - t) <= 1e-8 * max(1.0, t)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 4.0])
def test_catalog_power_matches_expression(p):
    ts = GridSpec().values()
    expr = f.validate(f"t^{p}")
    np.testing.assert_allclose(f.power(p)(ts), expr(ts), rtol=1e-14, atol=0)


@pytest.mark.parametrize("M", [f.power(1.2), f.power_log(), f.validate("t^2/(1-ln(t))"),
                               f.validate("exp(t)-1")], ids=["p1.2", "log", "log-expr", "exp"])
def test_midpoint_convexity_on_adjacent_grid_points(M):
    ts = GridSpec().values()
    v = M(ts)
    mid = M(0.5 * (ts[:-1] + ts[1:]))
    assert np.all(mid <= 0.5 * (v[:-1] + v[1:]) + 1e-12 * v[1:])


def test_power_log_agrees_with_its_expression_below_one():
    ts = GridSpec().values()
    ts = ts[ts <= 1.0]
    np.testing.assert_allclose(f.power_log()(ts), f.validate("t^2/(1-ln(t))")(ts), rtol=1e-13)


def test_log_domain_evaluation_far_below_double_range():
    M = f.power_log()
    u = -2000.0
    assert M.log_at(u) == pytest.approx(2 * u - math.log1p(-u), rel=1e-14)
    E = f.validate("t^2/(1-ln(t))")
    assert E.log_at(u) == pytest.approx(2 * u - math.log1p(-u), rel=1e-12)


def test_normalize_rescales_argument():
    M = f.validate("2*t^2")
    N = M.normalize()
    assert N.normalized
    assert N.eval(0.3) == pytest.approx(M.eval(0.3 / math.sqrt(2.0)), rel=1e-14)


def test_resolve_catalog_and_text():
    assert f.resolve("power:1.5").p == 1.5
    assert f.resolve("power_log").kind == "power_log"
    assert f.resolve("t^3").eval(2.0) == 8.0


@settings(max_examples=50)
@given(st.floats(1.0, 6.0))
def test_power_closed_form_log(p):
    M = f.power(p)
    assert M.log_at(-500.0) == pytest.approx(-500.0 * p)


def test_overflowing_expression_is_continued_affinely():
    # exp overflows past t ~ 709, so only the part on (0, 1] is kept
    M = f.validate("exp(t)-1")
    assert M.validation.continuation == 1.0
    assert M.eval(1e3) == pytest.approx(math.e - 1 + math.e * 999, rel=1e-9)


def test_eval_overflow_is_infinite():
    assert math.isinf(f.power(3).eval(1e200))
