import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import finsec.analysis as analysis
from finsec.analysis import (
    INCONCLUSIVE,
    INVERTIBLE,
    NOT_INVERTIBLE,
    AnalysisConfig,
    DirectionRecord,
    condition_trajectory,
    invertibility_verdict,
    manufactured_study,
    singular_values,
    solve_fsm,
    splitting_study,
    stability_report,
    winding_number,
    write_csv,
)
from finsec.cli import build, load_corpus
from finsec.discretize import Modulation, Shift, make_grid, transform_matrix
from finsec.errors import MissingLimits, SingularSection, SymbolVanishes
from finsec.operators import Const, Conv, FiniteSection, Flip, Identity, Wminus, Wplus, snapshot
from finsec.opgrammar import parse_operator
from finsec.symbols import symbol

G = make_grid(8, 8, 2)
CAYLEY = '(xi-i)/(xi+i)'


def corpus_expr(name):
    return build(load_corpus(name))


# --- singular values ---------------------------------------------------------

def test_singular_values_examples():
    assert np.array_equal(singular_values(np.diag([1.0, 2.0, 3.0]), 2), [1.0, 2.0])
    assert np.allclose(singular_values(np.diag([3.0, -1.0, 2j])), [1, 2, 3])
    with pytest.raises(ValueError):
        singular_values(np.eye(2), 3)


def test_singular_values_match_full_svd():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    oracle = np.sort(np.linalg.svd(A, compute_uv=False))
    assert np.allclose(singular_values(A, 5), oracle[:5], rtol=1e-12, atol=0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.integers(-3, 3), t=st.integers(-20, 20))
def test_singular_values_invariant_under_unitary_transforms(seed, s, t):
    g = make_grid(2, 4, 2)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((g.N, g.N)) + 1j * rng.standard_normal((g.N, g.N))
    base = singular_values(A)
    for T in (Shift(float(s)), Modulation(t * math.pi / g.L), Flip()):
        U = transform_matrix(g, T).matrix
        assert np.allclose(singular_values(U @ A @ U.conj().T), base, atol=1e-10 * base[-1], rtol=0)


# --- winding numbers ---------------------------------------------------------

@pytest.mark.parametrize("text, k", [
    ("2+atan(xi)", 0),
    (CAYLEY, 1),
    ("(xi+i)/(xi-i)", -1),
    ("((xi-i)/(xi+i))^2", 2),
    ("5", 0),
    ("2*chi[-inf,0) + 3*chi[0,inf)", 0),
])
def test_winding_examples(text, k):
    assert winding_number(symbol(text, var="xi"), G) == k


def test_winding_errors():
    with pytest.raises(SymbolVanishes):
        winding_number(symbol("atan(xi)"), G)
    with pytest.raises(SymbolVanishes):
        # the chord between the one-sided values passes through 0
        winding_number(symbol("sgn(xi)"), G)
    with pytest.raises(MissingLimits):
        winding_number(symbol("exp(i*xi)"), G)


# --- invertibility verdicts --------------------------------------------------

def test_paired_verdict_is_analytic():
    e = parse_operator('2*conv("chi[-inf,0)") + conv("chi[0,inf)")')
    r = invertibility_verdict(e)
    assert (r.verdict, r.method) == (INVERTIBLE, "analytic-paired")
    assert r.evidence["moduli"] == [2.0, 1.0]
    assert (r.dim_ker, r.dim_coker, r.index) == (0, 0, 0)


def test_paired_verdict_zero_coefficient_and_segment_rule():
    # on the full line only the coefficients matter
    assert invertibility_verdict(parse_operator('conv("chi[0,inf)")')).verdict == NOT_INVERTIBLE
    assert invertibility_verdict(parse_operator('conv("chi[-inf,0)") - conv("chi[0,inf)")')).verdict == INVERTIBLE
    # on a half line the segment from c- = 1 to c+ = -1 passes through 0
    half = parse_operator('mult("chi[0,inf)") * (conv("chi[-inf,0)") - conv("chi[0,inf)")) * mult("chi[0,inf)")'
                          ' + mult("chi[-inf,0)")')
    assert invertibility_verdict(half).verdict == NOT_INVERTIBLE
    ok = parse_operator('mult("chi[0,inf)") * (conv("chi[-inf,0)") + 2*conv("chi[0,inf)")) * mult("chi[0,inf)")'
                        ' + mult("chi[-inf,0)")')
    assert invertibility_verdict(ok).verdict == INVERTIBLE


def test_full_line_convolution_sigma_min():
    r = invertibility_verdict(Conv(symbol("2+atan(xi)")))
    assert r.verdict == INVERTIBLE
    # the essential infimum of |b| is 2 - pi/2
    assert min(r.evidence["sigma_min"]) >= 2 - math.pi / 2 - 0.05


def test_half_line_compression_of_cayley_fails():
    snap = snapshot(parse_operator(f'FS(conv("{CAYLEY}"))'), Wplus)
    r = invertibility_verdict(snap)
    assert r.verdict == NOT_INVERTIBLE
    assert r.evidence["sigma_min"][-1] <= 1e-10
    assert r.index == r.dim_ker - r.dim_coker


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.2, 3.0), tau_exp=st.integers(-8, -1))
def test_tau_monotonicity(c, tau_exp):
    e = Conv(symbol(f"{c!r}+atan(xi)"))
    ns = (4, 8, 16)
    lo, hi = 10.0**tau_exp, 10.0 ** (tau_exp + 1)
    v_lo = invertibility_verdict(e, ns, lo).verdict
    v_hi = invertibility_verdict(e, ns, hi).verdict
    if v_hi == INVERTIBLE:
        assert v_lo == INVERTIBLE
    if v_lo == NOT_INVERTIBLE:
        assert v_hi == NOT_INVERTIBLE


def test_config_validation():
    with pytest.raises(ValueError):
        AnalysisConfig(n_list=(8, 16))
    with pytest.raises(ValueError):
        AnalysisConfig(n_list=(8, 8, 16))
    with pytest.raises(ValueError):
        AnalysisConfig(tau=0)


# --- stability reports -------------------------------------------------------

def test_flagship_is_stable():
    r = stability_report(corpus_expr("flagship"))
    assert r.verdict == "stable" and r.stable is True
    assert r.culprits == []
    assert (r.alpha, r.beta, r.index_sum) == (0, 0, 0)
    assert "verdict = stable" in r.table()


def test_cayley_is_unstable_on_both_half_lines():
    r = stability_report(corpus_expr("cayley"))
    assert r.verdict == "unstable" and r.stable is False
    assert set(r.culprits) == {Wminus, Wplus}
    assert r.index_sum == 0


def test_lift_is_unstable_at_the_right_end():
    r = stability_report(corpus_expr("lift"))
    assert r.verdict == "unstable"
    assert r.culprits == [Wplus]
    assert r.alpha == 1


@pytest.mark.parametrize("verdicts, expected", [
    ([INVERTIBLE, INVERTIBLE], "stable"),
    ([INVERTIBLE, INCONCLUSIVE], "inconclusive"),
    ([INCONCLUSIVE, NOT_INVERTIBLE], "unstable"),
    ([NOT_INVERTIBLE, INVERTIBLE], "unstable"),
])
def test_aggregation_precedence(monkeypatch, verdicts, expected):
    # the first snapshots get the scripted verdicts, the rest are invertible
    it = iter(verdicts)

    def fake(snap, n_list=None, tau=None, config=None):
        return DirectionRecord(None, "s", next(it, INVERTIBLE), "numeric-window", {}, 0, 0, 0)

    monkeypatch.setattr(analysis, "invertibility_verdict", fake)
    r = stability_report(FiniteSection(Const(Identity())))
    assert r.verdict == expected


def test_report_rows_are_csv_ready(tmp_path):
    r = stability_report(corpus_expr("cayley"))
    rows = r.rows()
    assert rows[0][:2] == ["direction", "verdict"]
    write_csv(tmp_path / "r.csv", rows)
    assert (tmp_path / "r.csv").read_text().count("\n") == len(rows)


# --- splitting, conditioning, solving ----------------------------------------

def test_splitting_lift():
    res = splitting_study(corpus_expr("lift"), 3)
    assert res.predicted_alpha == 1
    assert res.observed == 1 and res.verdict == "pass"
    assert res.trajectories[-1, 0] <= 1e-6
    assert res.trajectories[-1, 1] >= 0.5 * res.trajectories[0, 1]


def test_splitting_without_prediction_is_inconclusive():
    res = splitting_study(corpus_expr("flagship"), 2, n_list=(4, 8, 16), predicted_alpha=None)
    assert res.verdict == "inconclusive" and res.observed == 0
    with pytest.raises(ValueError):
        splitting_study(corpus_expr("lift"), 1, predicted_alpha=1)


def test_condition_trajectory_cayley_grows():
    traj = condition_trajectory(corpus_expr("cayley"), (4, 8, 16))
    conds = [c for _, _, c in traj]
    assert conds[0] < conds[1] < conds[2]
    assert traj[-1][1] <= 1e-10


def test_solve_identity():
    g = make_grid(4, 4, 2)
    v = np.exp(-g.nodes**2)
    sol = solve_fsm(Identity(), v, 4, g)
    assert np.allclose(sol.u, v[g.window(4)])
    assert sol.residual <= 1e-15 and sol.cond == pytest.approx(1)


def test_solve_singular_section():
    g = make_grid(8, 8, 2.5)
    with pytest.raises(SingularSection):
        solve_fsm(corpus_expr("lift"), np.ones(g.N), 8, g)


def test_manufactured_errors_decrease():
    rows = manufactured_study(Conv(symbol("2+atan(xi)")), symbol("exp(-(x/4)^2)"), (4, 8, 16))
    errs = [e for _, e, _, _ in rows]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] <= 1e-6
    assert all(r <= 1e-12 for _, _, r, _ in rows)
