import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsec.errors import EmptySet, EvalAtJump, MissingLimits, NoConvergence, ParseError, UnknownSymbolFunction
from finsec.symbols import (
    FunctionClass,
    ValidationParams,
    accumulation_values,
    check_invariants,
    constant,
    indicator,
    oscillation,
    paired,
    pc_decomposition,
    symbol,
    validate_class,
)


# --- eval --------------------------------------------------------------------

def test_eval_examples():
    assert symbol("sgn(x)")(2.5) == 1
    assert symbol("chi[0,inf)")(-1.0) == 0
    assert symbol("atan(x)")(0.0) == 0


def test_eval_at_jump_raises():
    with pytest.raises(EvalAtJump):
        symbol("sgn(x)").eval(0.0)
    with pytest.raises(EvalAtJump):
        symbol("chi[1,inf)").eval(np.array([0.5, 1.0]))


def test_vectorised_eval():
    s = symbol("2 + atan(x)")
    x = np.array([-1.0, 0.0, 1.0])
    assert np.allclose(s(x), 2 + np.arctan(x))


# --- metadata ----------------------------------------------------------------

@pytest.mark.parametrize("text, tag, lm, lp", [
    ("2 + atan(x)", "C_Rbar", 2 - math.pi / 2, 2 + math.pi / 2),
    ("sgn(x)", "PiecewiseConstant", -1, 1),
    ("1/(1+x^2)", "Linf0", 0, 0),
    ("exp(i*1.5*x)", "AP", None, None),
    ("2+0.5*sin(ln(1+ln(1+abs(x))))", "SO_inf", None, None),
])
def test_derived_class_and_limits(text, tag, lm, lp):
    s = symbol(text)
    assert s.cls.tag == tag
    for got, want in ((s.limit_minus, lm), (s.limit_plus, lp)):
        if want is None:
            assert got is None
        else:
            assert abs(got - want) < 1e-12


def test_declared_jumps():
    s = symbol("chi[1,inf) + 2*sgn(xi)")
    assert s.var == "xi"
    assert s.jump_points == (0.0, 1.0)
    j0, j1 = s.jumps
    assert (j0.left, j0.right) == (-2, 2)
    assert (j1.left, j1.right) == (2, 3)
    assert check_invariants(s) == []


def test_function_class_vocabulary():
    assert str(FunctionClass.parse("SO_at(1.5)")) == "SO_at(1.5)"
    with pytest.raises(ValueError):
        FunctionClass("Foo")
    with pytest.raises(ValueError):
        FunctionClass("PC_at")
    with pytest.raises(ValueError):
        symbol("sgn(x)", cls="C_Rbar")


def test_parse_errors():
    with pytest.raises(UnknownSymbolFunction):
        symbol("foo(x)")
    with pytest.raises(ParseError):
        symbol("2 +")


def test_constructors():
    assert constant(3).is_constant()
    chi = indicator(-1, 1)
    assert chi(0.5) == 1 and chi(1.5) == 0
    p = paired(2, 5, var="xi")
    assert p(-1.0) == 2 and p(1.0) == 5


# --- oscillation -------------------------------------------------------------

def test_oscillation_examples():
    assert oscillation(constant(3), (0, 10)) == 0
    assert oscillation(symbol("sgn(x)"), (-1, 1)) == 2


def test_oscillation_matches_dense_oracle():
    s = symbol("sin(ln(1+abs(x)))")
    x = 1e3
    t = np.linspace(x, 2 * x, 10**5)
    v = np.sin(np.log1p(t))
    # real valued: the farthest pair is (max, min)
    assert abs(oscillation(s, (x, 2 * x)) - (v.max() - v.min())) <= 1e-3


def test_oscillation_empty_set():
    with pytest.raises(EmptySet):
        oscillation(symbol("sgn(x)"), (1.0, 1.0))


def test_oscillation_monotone_in_density():
    s = symbol("sin(3*x) + cos(7*x)")
    vals = [oscillation(s, (0, 5), spu) for spu in (4, 8, 16, 64, 256)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-10, 10), la=st.floats(0.1, 5), b=st.floats(-10, 10), lb=st.floats(0.1, 5))
def test_oscillation_union_dominates_parts(a, la, b, lb):
    s = symbol("sin(3*x)*exp(-x^2/50) + 0.3*sgn(x-1) + atan(x)")
    I, J = (a, a + la), (b, b + lb)
    both = oscillation(s, [I, J])
    assert both >= max(oscillation(s, I), oscillation(s, J)) - 1e-12
    # symmetric in the order of the sets
    assert both == pytest.approx(oscillation(s, [J, I]), abs=1e-12)


# --- class validation --------------------------------------------------------

def test_so_inf_rejects_fixed_ratio_log_oscillation():
    # ln maps [r x, x] to an interval of fixed length ln(1/r), so the
    # oscillation stays of order 1 (at most 2 sin(ln(1/r) / 2)) and never decays
    rep = validate_class(symbol("sin(ln(1+abs(x)))", cls="SO_inf"))
    assert not rep.passed
    vals = [r["value"] for r in rep.rows]
    assert max(vals) <= 2 * math.sin(math.log(2) / 2) + 1e-6
    # smallest when the interval straddles a peak of sin
    assert min(vals) >= 1 - math.cos(math.log(2) / 2) - 1e-6
    assert vals[-1] > ValidationParams().tol


def test_so_inf_accepts_iterated_log():
    rep = validate_class(symbol("sin(ln(1+ln(1+abs(x))))"))
    vals = [r["value"] for r in rep.rows]
    assert rep.passed
    # sin is 1-Lipschitz, so osc is below the increment of the inner function
    inner = lambda t: math.log1p(math.log1p(t))
    for row in rep.rows:
        x, r = row["x"], row["r"]
        assert row["value"] <= inner(x) - inner(r * x) + 1e-12


def test_so_inf_rejects_sin_and_exp():
    assert not validate_class(symbol("sin(x)", cls="SO_inf")).passed
    rep = validate_class(symbol("exp(i*x)", cls="SO_inf"))
    assert not rep.passed
    assert min(r["value"] for r in rep.rows) > 1.9


def test_ap_is_declarative():
    assert validate_class(symbol("exp(i*x)")).passed
    assert not validate_class(symbol("atan(x)", cls="AP")).passed


def test_linf0_and_pc_checks():
    assert validate_class(symbol("1/(1+x^2)")).passed
    assert validate_class(symbol("sgn(x-2) + atan(x)")).passed
    assert not validate_class(symbol("atan(x)", cls="C_Rdot")).passed


@settings(max_examples=15, deadline=None)
@given(c1=st.floats(-1, 1).filter(lambda c: abs(c) > 1e-3), c0=st.floats(-3, 3))
def test_so_inf_iterated_log_family(c1, c0):
    s = symbol(f"sin({c1!r}*ln(1+ln(1+abs(x))) + {c0!r})", cls="SO_inf")
    assert validate_class(s, ValidationParams(x_list=(10.0, 100.0, 1000.0, 10000.0))).passed


# --- PC decomposition --------------------------------------------------------

@pytest.mark.parametrize("text, cm, cp", [
    ("atan(x)", -math.pi / 2, math.pi / 2),
    ("chi[1,inf)", 0, 1),
    ("sgn(x)", -1, 1),
])
def test_pc_decomposition_examples(text, cm, cp):
    got_m, got_p, a0 = pc_decomposition(symbol(text))
    assert got_m == pytest.approx(cm) and got_p == pytest.approx(cp)
    assert a0.cls.tag == "Linf0"
    assert a0.limit_minus == 0 and a0.limit_plus == 0


def test_pc_decomposition_components():
    _, _, a0 = pc_decomposition(symbol("chi[1,inf)"))
    # a0 = -chi[0,1)
    assert a0(0.5) == pytest.approx(-1) and a0(1.5) == pytest.approx(0) and a0(-0.5) == pytest.approx(0)
    _, _, z = pc_decomposition(symbol("sgn(x)"))
    assert np.all(z.eval_unchecked(np.array([-3.0, 2.0])) == 0)


def test_pc_decomposition_needs_limits():
    with pytest.raises(MissingLimits):
        pc_decomposition(symbol("exp(i*x)"))


_PC_SYMBOLS = ["atan(x)", "2+atan(x)*sgn(x-1)", "chi[-2,3) + 1/(1+x^2)", "(x-i)/(x+i)", "sgn(x)*exp(-x^2)"]


@settings(max_examples=30, deadline=None)
@given(text=st.sampled_from(_PC_SYMBOLS),
       xs=st.lists(st.floats(-50, 50).filter(lambda v: v not in (0.0, 1.0, -2.0, 3.0)), min_size=1, max_size=100))
def test_pc_decomposition_exact(text, xs):
    a = symbol(text)
    cm, cp, a0 = pc_decomposition(a)
    x = np.array(xs)
    chi_m = (x < 0).astype(float)
    rebuilt = cm * chi_m + cp * (1 - chi_m) + a0.eval_unchecked(x)
    assert np.max(np.abs(a.eval_unchecked(x) - rebuilt)) <= 1e-13


# --- accumulation values -----------------------------------------------------

def test_accumulation_exact_log_lattice():
    s = symbol("sin(ln(1+abs(x)))")
    g = np.exp(2 * np.pi * np.arange(1, 40)) - 1
    cl = accumulation_values(s, 1.0, g, 1e-3)
    assert len(cl) == 1 and abs(cl[0].value) < 1e-9


def test_accumulation_constant():
    cl = accumulation_values(constant(2.5), 1.0, np.arange(1, 40.0), 0.1)
    assert len(cl) == 1 and cl[0].value == 2.5


def test_accumulation_multiple_clusters_reproduce():
    s = symbol("sin(ln(1+abs(x)))")
    g = np.arange(1, 200.0)
    eps = 0.1
    cl = accumulation_values(s, 1.0, g, eps)
    assert len(cl) > 1
    for c in cl:
        assert len(c.indices) >= 4
        vals = s.eval_unchecked(g[list(c.indices)])
        assert np.max(np.abs(vals - c.value)) <= eps


def test_accumulation_no_convergence():
    s = symbol("sin(x)")
    g = np.arange(1, 33.0)
    with pytest.raises(NoConvergence):
        accumulation_values(s, 1.0, g, 1e-9)


@settings(max_examples=20, deadline=None)
@given(x0=st.floats(0.5, 3), eps=st.floats(0.05, 0.5))
def test_accumulation_clusters_within_eps(x0, eps):
    s = symbol("2+0.5*sin(ln(1+ln(1+abs(x))))")
    g = np.geomspace(10, 1e6, 64)
    for c in accumulation_values(s, x0, g, eps):
        vals = s.eval_unchecked(g[list(c.indices)] * x0)
        assert len(vals) >= 4
        assert np.max(np.abs(vals - c.value)) <= eps + 1e-12


def test_so_inf_rejects_growing_oscillation():
    # below tol up to 1e4 but growing tenfold per decade
    assert not validate_class(symbol("sin(x/1e5)", cls="SO_inf")).passed
