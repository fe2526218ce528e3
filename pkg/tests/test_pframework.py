import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsec.discretize import make_grid
from finsec.errors import OffLattice
from finsec.operators import H, Conv, FiniteRank, Mult, Wc, Wminus, Wplus, cauchy, gaussian_pair
from finsec.opgrammar import parse_operator
from finsec.pframework import (
    BOUNDED,
    DECAYS,
    INCONCLUSIVE,
    ZERO_TOL,
    cauchy_bound,
    cauchy_tail_check,
    commutator_probe,
    default_test_compacts,
    pcompact_probe,
    pstrong_limit_probe,
    quasibanded_probe,
    tag_trajectory,
)
from finsec.symbols import symbol

G32 = make_grid(32, 8, 2)
G64 = make_grid(64, 8, 2)
# cubic B-spline: kernel supported in [-2, 2], twice continuously differentiable
BSPLINE = "(sin(xi/2)/(xi/2))^4"
KERNEL = 'kernel("chi[-4,4)(x)*chi[-4,4)(y)*exp(-(x-y)^2)")'


# --- tags --------------------------------------------------------------------

@pytest.mark.parametrize("values, tag", [
    ([1, 0.5, 0.01], DECAYS),
    ([1, 0.05, 0.0], DECAYS),
    ([0, 0, 0], DECAYS),
    ([1, 1, 1], BOUNDED),
    ([1, 0.5, 0.6, 0.05], INCONCLUSIVE),
    ([1, 0.5, 0.05, 0.2], INCONCLUSIVE),
])
def test_tag_examples(values, tag):
    assert tag_trajectory(values) == tag


def test_tag_rejects_negative_norms():
    with pytest.raises(ValueError):
        tag_trajectory([1.0, -0.1])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=2, max_size=12))
def test_tag_rules(values):
    v = np.array(values)
    tag = tag_trajectory(v)
    assert tag in (DECAYS, BOUNDED, INCONCLUSIVE)
    if tag == DECAYS:
        assert v[-1] <= 0.1 * v[0] or v[-1] <= ZERO_TOL
        assert np.all(np.diff(v[1:]) <= ZERO_TOL + 1e-9 * v[0])
    elif tag == BOUNDED:
        assert np.all(v[len(v) // 2:] >= 0.1 * v[0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-3, 10), min_size=2, max_size=10), st.floats(1e-3, 1e3))
def test_tag_is_scale_invariant(values, c):
    v = np.sort(values)[::-1]
    assert tag_trajectory(c * v, zero_tol=0) == tag_trajectory(v, zero_tol=0)


# --- P-compactness -----------------------------------------------------------

def test_pcompact_finite_rank_vanishes_outside_support():
    u = symbol("exp(-x^2)*chi[-5,5)")
    r = pcompact_probe(FiniteRank(((u, u),)), G32, [5, 8, 16])
    assert np.all(r.norms <= 1e-14)
    assert r.tag == DECAYS


def test_pcompact_decaying_coefficient():
    ns = [4, 8, 16]
    r = pcompact_probe(Mult(symbol("1/(1+x^2)")), G32, ns)
    oracle = np.array([1 / (1 + n * n) for n in ns])
    # nodes sit half a step beyond n, so the tail maximum is a bit smaller
    assert np.all(r.norms[:, 0] <= oracle) and np.all(r.norms[:, 0] >= 0.95 * oracle)
    assert np.allclose(r.norms[:, 0], r.norms[:, 1])
    assert r.tag == DECAYS


def test_pcompact_convolution_is_bounded_away():
    r = pcompact_probe(Conv(symbol("2+atan(xi)")), G32, [4, 8, 16])
    assert r.tag == BOUNDED
    assert np.all(np.array(r.extra["witness"]) >= 1.0)
    assert np.all(r.norms[:, 0] >= np.array(r.extra["witness"]) - 1e-12)


# --- quasi-banded tails ------------------------------------------------------

def test_quasibanded_mult_is_exactly_banded():
    r = quasibanded_probe(Mult(symbol("2+atan(x)")), [1, 2, 4, 8], 16, G32)
    assert np.all(r.norms == 0) and r.tag == DECAYS


def test_quasibanded_compact_kernel_convolution():
    r = quasibanded_probe(Conv(symbol(BSPLINE)), [1, 2, 3, 4, 8, 16], 16, G32)
    # zero beyond the kernel support up to aliasing residue
    assert np.all(r.values[2:] <= 1e-6)
    assert r.tag == DECAYS


def test_quasibanded_compact_kernel():
    r = quasibanded_probe(parse_operator(KERNEL), [1, 2, 4, 8], 16, G32)
    assert r.tag == DECAYS and r.values[-1] == 0


def test_cauchy_operator_is_not_quasibanded():
    r = quasibanded_probe(cauchy(), [1, 2, 4, 8, 16], 16, G64)
    assert np.all(r.values >= 0.2)
    assert r.tag == BOUNDED


def test_quasibanded_margin():
    with pytest.raises(ValueError):
        quasibanded_probe(cauchy(), [8, 32], 16, make_grid(16, 8, 2))


# --- Cauchy tail bound -------------------------------------------------------

def test_cauchy_bound_arithmetic():
    assert cauchy_bound(1, 10) == pytest.approx(math.sqrt(2 * math.log(11 / 9)) / math.pi, rel=1e-15)
    # p = 3: C = pi^-3 (1/2)^-2
    assert cauchy_bound(2, 6, 3.0) == pytest.approx((4 / math.pi**3 * 2 * math.log(2)) ** (1 / 3), rel=1e-14)
    with pytest.raises(ValueError):
        cauchy_bound(3, 3)
    with pytest.raises(ValueError):
        cauchy_bound(1, 3, 1.0)


def test_cauchy_tail_examples():
    c = cauchy_tail_check(1, 10, grid=G64)
    assert c.passed and c.measured <= 1.1 * c.bound
    meas = [cauchy_tail_check(1, n, grid=G64).measured for n in (10, 20, 40)]
    assert meas[0] > meas[1] > meas[2]


@pytest.mark.parametrize("m, n", [(1, 2), (1, 5), (2, 8), (4, 16), (8, 24), (16, 32)])
def test_cauchy_tail_bound_holds(m, n):
    c = cauchy_tail_check(m, n, grid=G64)
    assert c.passed
    assert c.measured <= 1 + 1e-12


# --- commutators -------------------------------------------------------------

T_LIST = [1, 2, 4, 8, 16]


@pytest.mark.parametrize("family", ["Exponential", "SplineCRbar", "SplineCRdot"])
def test_commutator_with_mult_is_zero(family):
    r = commutator_probe(Mult(symbol("2+sgn(x-1)*atan(x)")), family, T_LIST, G64)
    assert np.all(r.norms == 0)


def test_commutator_compact_kernel_convolution_decays():
    r = commutator_probe(Conv(symbol(BSPLINE)), "Exponential", T_LIST, G64)
    assert r.tag == DECAYS
    # band-width times the Lipschitz constant 1/t
    assert np.all(r.values * np.array(T_LIST) <= 2.0)


def test_commutator_kernel_spline_decays():
    r = commutator_probe(parse_operator(KERNEL), "SplineCRbar", T_LIST + [32], G64)
    assert r.tag == DECAYS


@pytest.mark.parametrize("family", ["Exponential", "SplineCRbar"])
def test_commutator_cauchy_bounded_away(family):
    r = commutator_probe(cauchy(), family, T_LIST, G64)
    assert r.tag == BOUNDED


def test_commutator_unknown_family():
    with pytest.raises(ValueError):
        commutator_probe(Mult(symbol("x")), "Bessel", T_LIST, G64)


# --- P-strong limits ---------------------------------------------------------

def test_pstrong_projection_sequence_wminus():
    r = pstrong_limit_probe(parse_operator("P"), Wminus, None, (8, 16, 32), make_grid(32, 8, 2.5))
    assert r.tag == DECAYS and np.all(r.values <= 1e-12)


def test_pstrong_coefficient_wplus():
    # the residual is about |atan(n) - pi/2| ~ 1/n against a compact at the origin
    r = pstrong_limit_probe(parse_operator('FS(mult("atan(x)"))'), Wplus, [gaussian_pair(0, 0.5)],
                            (4, 8, 16, 32, 64), make_grid(64, 4, 2.5))
    assert r.tag == DECAYS
    ns = np.array(r.params)
    assert np.all(r.values * ns <= 1.6)


def test_pstrong_finite_rank_separates():
    r = pstrong_limit_probe(parse_operator("FS(gaussian(0, 0.5))"), Wplus, None, (8, 16, 32),
                            make_grid(32, 8, 2.5))
    assert r.tag == DECAYS and r.values[-1] <= 1e-12


def test_pstrong_full_line_convolution():
    r = pstrong_limit_probe(parse_operator('FS(conv("2+atan(xi)"))'), Wc, [gaussian_pair(0, 0.5)],
                            (8, 16, 32), make_grid(32, 8, 2.5))
    assert r.tag == DECAYS and r.values[-1] <= 1e-10


def test_pstrong_off_lattice():
    with pytest.raises(OffLattice):
        pstrong_limit_probe(parse_operator('FS(mult("sgn(x)"))'), H(0.1), None, (8, 16, 32),
                            make_grid(32, 8, 2.5))


def test_default_test_compacts():
    K = default_test_compacts()
    assert len(K) == 2
    assert isinstance(K[0], Mult) and K[0].a(0.5) == 1 and K[0].a(1.5) == 0
