import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from liecontrol import systems
from liecontrol.expr import (
    DomainError,
    ParseError,
    UnboundSymbolError,
    compile_exprs,
    differentiate,
    evaluate,
    is_zero,
    jet,
    parse,
    simplify,
    split_jet,
    substitute,
    symbols,
    to_text,
    tolerances,
)

x, y, v, theta, b, nu_m, K_S, K_I = symbols("x y v theta b nu_m K_S K_I")
HALDANE = "nu_m*b/(b + K_S + K_I*b^2)"


# --- parse -----------------------------------------------------------------


def test_parse_product_with_function():
    assert parse("v*cos(theta)") == v * sp.cos(theta)


def test_parse_haldane_rate():
    e = parse(HALDANE)
    assert e == nu_m * b / (b + K_S + K_I * b**2)


def test_parse_syntax_error_offset():
    with pytest.raises(ParseError) as info:
        parse("x +* y")
    assert info.value.offset == 3


def test_parse_unknown_function():
    with pytest.raises(ParseError, match="unknown function"):
        parse("foo(x)")


def test_parse_rejects_trailing_tokens_and_bad_chars():
    with pytest.raises(ParseError):
        parse("x y")
    with pytest.raises(ParseError) as info:
        parse("x $ 2")
    assert info.value.offset == 2


def test_decimal_literals_are_exact_rationals():
    e = parse("0.1*x + 2.5e-1")
    assert e == sp.Rational(1, 10) * x + sp.Rational(1, 4)
    assert not e.atoms(sp.Float)


def test_power_is_right_associative_and_binds_unary():
    assert parse("2^3^2") == 2**9
    assert parse("-x^2") == -(x**2)
    assert parse("x**2") == x**2


def test_jet_names():
    t1 = jet(x, 2)
    assert t1.name == "x''"
    assert split_jet(t1) == (x, 2)
    assert parse("x'' + 1") == t1 + 1


# --- differentiate -----------------------------------------------------------


def test_differentiate_chain_rule():
    assert differentiate(parse("v*cos(theta)"), theta) == -v * sp.sin(theta)


def test_differentiate_haldane_against_hand_formula_and_mpmath():
    d = differentiate(parse(HALDANE), b)
    hand = nu_m * (K_S - K_I * b**2) / (b + K_S + K_I * b**2) ** 2
    assert simplify(d - hand) == 0
    gen = np.random.default_rng(3)
    mpmath.mp.dps = 30
    for _ in range(10):
        vals = {nu_m: gen.uniform(0.5, 2), K_S: gen.uniform(0.5, 2), K_I: gen.uniform(0.5, 2)}
        b0 = gen.uniform(0.1, 3)
        f = lambda bb: vals[nu_m] * bb / (bb + vals[K_S] + vals[K_I] * bb**2)  # noqa: E731
        ref = float(mpmath.diff(f, mpmath.mpf(b0)))
        got = evaluate(d, {**vals, b: b0})
        assert abs(got - ref) <= 1e-8 * abs(ref)
    mpmath.mp.dps = 15


def test_differentiate_constant():
    assert differentiate(parse("7"), x) == 0


# --- is_zero -----------------------------------------------------------------


def test_is_zero_pythagoras_symbolic():
    z = is_zero(parse("sin(x)^2 + cos(x)^2 - 1"))
    assert z and z.path == "symbolic"


def test_is_zero_false():
    z = is_zero(parse("x + 1"))
    assert not z and z.decided


def test_is_zero_car_rotation_residual(car):
    from liecontrol.symmetry import symmetry_residual

    res = symmetry_residual(car.system, car.generators["v1"])
    assert all(is_zero(r).path == "symbolic" and is_zero(r) for r in res)


def test_is_zero_numeric_fallback_decides():
    # atan(x) + atan(1/x) = pi/2 for x > 0 is not closed by the simplifier
    e = parse("arctan(exp(x)) + arctan(exp(-x)) - pi/2")
    z = is_zero(e)
    assert z and z.path == "numeric" and z.points == 32


def test_is_zero_undecidable_when_all_samples_singular():
    z = is_zero(parse("ln(-1 - x^2)"))
    assert not z and not z.decided and z.path == "undecidable"


def test_is_zero_tolerance_override():
    e = parse("x*1/10000000000")
    assert not is_zero(e, symbolic=False, zero_tol=1e-12)
    with tolerances(zero_tol=1):
        assert is_zero(e, symbolic=False)


# --- evaluate --------------------------------------------------------------


def test_evaluate_square():
    assert evaluate(parse("x^2"), {"x": 3}) == 9


def test_evaluate_haldane_maximum():
    # the rate peaks at b = sqrt(K_S/K_I) with value nu_m/(1 + 2 sqrt(K_S K_I))
    val = evaluate(parse(HALDANE), {"nu_m": 1, "b": math.sqrt(1 / 1), "K_S": 1, "K_I": 1})
    assert val == pytest.approx(1 / 3, abs=1e-15)
    ks, ki = 2.0, 0.5
    bstar = math.sqrt(ks / ki)
    assert evaluate(parse(HALDANE), {"nu_m": 1, "b": bstar, "K_S": ks, "K_I": ki}) == pytest.approx(
        1 / (1 + 2 * math.sqrt(ks * ki)))


def test_evaluate_domain_error_reports_subtree():
    with pytest.raises(DomainError) as info:
        evaluate(parse("1/x"), {"x": 0})
    assert info.value.subtree == 1 / x
    with pytest.raises(DomainError, match="logarithm"):
        evaluate(parse("ln(x - 1)"), {"x": 1})


def test_evaluate_unbound():
    with pytest.raises(UnboundSymbolError, match="y"):
        evaluate(parse("x + y"), {"x": 1})


def test_compiled_matches_tree_evaluation():
    exprs = [parse("v*cos(theta)"), parse(HALDANE)]
    fn = compile_exprs(exprs, [v, theta, nu_m, b, K_S, K_I])
    vals = (0.7, 1.2, 1.0, 0.4, 1.0, 1.0)
    got = fn(*vals)
    binding = dict(zip([v, theta, nu_m, b, K_S, K_I], vals))
    assert got == pytest.approx([evaluate(e, binding) for e in exprs], rel=1e-14)


# --- printer and canonical form -------------------------------------------


@pytest.mark.parametrize("text", [
    "v*cos(theta)", HALDANE, "atan2(y, x) + sqrt(x^2 + 1)", "exp(-x)/(1 + x)", "x^(1/3) - ln(y)",
    "abs(x)*sign(y) + arctan(x) + pi", "-x^2", "1/(x*y)", "x'^2 + y''",
])
def test_print_parse_roundtrip(text):
    e = parse(text)
    assert parse(to_text(e)) == e
    c = simplify(e)
    assert parse(to_text(c)) == c


def test_simplify_trig_and_tan():
    assert simplify(parse("tan(x)*cos(x) - sin(x)")) == 0
    assert simplify(parse("(sin(x)^2 + cos(x)^2)*y - y")) == 0


def test_substitute_simultaneous():
    assert substitute(parse("x + 2*y"), {x: y, y: x}) == y + 2 * x


# --- properties ------------------------------------------------------------

_leaf = st.sampled_from([x, y, sp.Integer(1), sp.Integer(2), sp.Rational(1, 3), sp.Integer(-3)])


def _grow(children):
    return st.one_of(
        st.tuples(children, children).map(lambda p: p[0] + p[1]),
        st.tuples(children, children).map(lambda p: p[0] * p[1]),
        st.tuples(children, children).map(lambda p: p[0] / (1 + p[1] ** 2)),
        st.tuples(children, st.integers(2, 3)).map(lambda p: p[0] ** p[1]),
        children.map(sp.sin),
        children.map(sp.cos),
        children.map(lambda c: sp.exp(c / 4)),
        children.map(lambda c: sp.tan(c / (4 + c**2))),
    )


expressions = st.recursive(_leaf, _grow, max_leaves=6)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expressions)
def test_simplify_idempotent(e):
    s = simplify(e)
    assert simplify(s) == s


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expressions, st.floats(-2, 2), st.floats(-2, 2))
def test_simplify_preserves_values(e, xv, yv):
    binding = {x: xv, y: yv}
    try:
        a = evaluate(e, binding)
        c = evaluate(simplify(e), binding)
    except (DomainError, ZeroDivisionError):
        return
    if not (math.isfinite(a) and math.isfinite(c)):
        return
    scale = max(1.0, abs(a))
    assert abs(a - c) <= 1e-12 * scale
    # and exactly, free of floating-point rounding
    exact = {k: sp.Rational(val) for k, val in binding.items()}
    hi_a = sp.N(e.subs(exact), 50)
    hi_c = sp.N(simplify(e).subs(exact), 50)
    assert abs(hi_a - hi_c) <= 1e-40 * max(1, abs(hi_a))


@settings(max_examples=60, deadline=None)
@given(expressions)
def test_parse_print_fixpoint(e):
    once = parse(to_text(e))
    assert parse(to_text(once)) == once


def test_catalog_derivatives_match_finite_differences():
    gen = np.random.default_rng(11)
    worst = 0.0
    for e in systems.expressions():
        syms = sorted(e.free_symbols, key=lambda s: s.name)
        for s in syms:
            d = differentiate(e, s)
            fd_checked = 0
            for _ in range(200):
                if fd_checked == 20:
                    break
                pt = {q: gen.uniform(0.2, 1.5) for q in syms}
                h = 1e-6
                try:
                    fp = evaluate(e, {**pt, s: pt[s] + h})
                    fm = evaluate(e, {**pt, s: pt[s] - h})
                    dv = evaluate(d, pt)
                except DomainError:
                    continue
                fd = (fp - fm) / (2 * h)
                if abs(dv) < 1e-3:
                    err = abs(fd - dv)
                else:
                    err = abs(fd - dv) / abs(dv)
                worst = max(worst, err)
                fd_checked += 1
            assert fd_checked == 20
    assert worst < 1e-5
