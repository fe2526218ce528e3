"""Acceptance criteria 1-8 at their stated tolerances.

Each test logs one ``criterion N: PASS|FAIL`` line (shown in the terminal
summary); slowly converging pairs that are excluded from a ratio check are
logged as ``info`` lines with their measured rates.
"""

import math

import numpy as np
import pytest

from finsec import analysis
from finsec.cli import build, corpus_names, load_corpus
from finsec.discretize import assemble, make_grid
from finsec.operators import H0, WStar, Conv, H, HStar, Wc, Wminus, Wplus, cauchy, gaussian_pair
from finsec.opgrammar import parse_operator
from finsec.pframework import (
    BOUNDED,
    DECAYS,
    cauchy_tail_check,
    commutator_probe,
    pstrong_limit_probe,
    quasibanded_probe,
)
from finsec.symbols import symbol

pytestmark = pytest.mark.slow

N_LIST = (8, 16, 32, 48)
EXPECTED = {
    "flagship": "stable",
    "cayley": "unstable",
    "mixed_pc": "stable",
    "shifted_jump": "stable",
    "lift": "unstable",
    "hankel": "stable",
    "slow_oscillation": "stable",
    "mixed_unstable": "unstable",
    "cauchy_paired": "stable",
}
# relative level below which sigma_min is numerical zero
ZERO = 1e-10


def _line(log, k, ok, detail):
    log(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def corpus():
    """Stability report and condition trajectory of every corpus item."""
    out = {}
    for name in corpus_names():
        spec = load_corpus(name)
        seq = build(spec)
        cfg = analysis.AnalysisConfig(n_list=N_LIST, so_choices=spec.so_dict())
        out[name] = (seq, cfg, analysis.stability_report(seq, cfg), analysis.condition_trajectory(seq, N_LIST, cfg))
    return out


# --- 1. stability dichotomy --------------------------------------------------

def _empirics(verdict, traj):
    smin = {n: s for n, s, _ in traj}
    smax = {n: s * c for n, s, c in traj}
    if verdict == "stable":
        conds = [c for n, _, c in traj if n in (16, 32, 48)]
        return max(conds) / min(conds) <= 2.0, f"plateau {max(conds) / min(conds):.3f}"
    rel8, rel48 = smin[8] / smax[8], smin[48] / smax[48]
    if rel8 <= ZERO and rel48 <= ZERO:
        return True, f"sigma_min at numerical zero ({smin[8]:.1e}, {smin[48]:.1e})"
    ratio = smin[48] / smin[8]
    return ratio <= 1e-3, f"sigma ratio {ratio:.2e}"


def test_criterion_1_stability_dichotomy(corpus, acceptance_log):
    assert len(corpus) >= 8
    fails, details = [], []
    for name, (_, _, rep, traj) in corpus.items():
        ok, what = _empirics(rep.verdict, traj)
        ok = ok and rep.verdict == EXPECTED[name]
        details.append(f"{name}={rep.verdict}({what})")
        if not ok:
            fails.append(name)
    _line(acceptance_log, 1, not fails, "; ".join(details))
    assert not fails


# --- 2. splitting ------------------------------------------------------------

def test_criterion_2_splitting(corpus, acceptance_log):
    seq, cfg, rep, _ = corpus["lift"]
    res = analysis.splitting_study(seq, 3, N_LIST, cfg)
    s1, s2 = res.trajectories[:, 0], res.trajectories[:, 1]
    ok = res.observed == 1 and bool(np.all(s1 <= 1e-6)) and bool(np.all(s2 >= 0.5 * s2[0]))
    stable_counts = {}
    for name, (sq, c, r, _) in corpus.items():
        if r.verdict == "stable":
            stable_counts[name] = analysis.splitting_study(sq, 2, N_LIST, c, predicted_alpha=0).observed
    ok = ok and all(v == 0 for v in stable_counts.values())
    _line(acceptance_log, 2, ok, f"lift vanishing={res.observed} s1_max={s1.max():.1e} "
          f"s2/s2(8)_min={np.min(s2 / s2[0]):.3f}; stable items vanishing={sum(stable_counts.values())}")
    assert ok


# --- 3 and 4. snapshot rules and separability --------------------------------

PI = math.pi
G3 = make_grid(32, 8, 3)  # L = 96 so pi lies on the modulation lattice
TEST_COMPACTS = [gaussian_pair(2.0, 0.05), gaussian_pair(-2.0, 0.05)]

RULE_TABLE = [
    ("mult('1+sgn(x-0.3)')", [Wc, Wminus, Wplus, H0, H(PI)]),
    ("mult('2+chi[-1,1)')", [Wc, Wminus, Wplus, H0, H(PI)]),
    ("conv('2+sgn(xi-pi)')", [Wc, Wminus, Wplus, H0, H(PI), H(-PI), HStar(PI)]),
    ("conv('2+chi[-1,1)')", [Wc, Wminus, Wplus, H(PI)]),
    ("P", [Wc, Wminus, Wplus, H0, H(PI)]),
    ("gaussian(0,0.25)", [Wc, Wminus, Wplus, H0, H(PI)]),
    ("liftplus(gaussian(0,0.25))", [Wplus]),
    ("liftminus(gaussian(0,0.25))", [Wminus]),
    ("lifth(pi, gaussian(0.5,0.025))", [H(PI)]),
    ("J", [Wc, H0, WStar, HStar(PI)]),
    ("J*mult('1+sgn(x)')", [WStar, HStar(PI)]),
    ("I+0.5*hankel('exp(i*xi)')", [WStar, HStar(PI)]),
]
FOREIGN = [
    ("liftplus(gaussian(0,0.25))", [Wc, Wminus, H0, H(PI)]),
    ("liftminus(gaussian(0,0.25))", [Wc, Wplus, H0, H(PI)]),
    ("lifth(pi, gaussian(0.5,0.025))", [Wc, Wminus, Wplus, H0, H(-PI)]),
    ("lifth(0, gaussian(0.5,0.025))", [Wc, Wminus, Wplus, H(PI)]),
]
# algebraic convergence (about 1/n or n^-1/2): rates are logged, not ratio-checked
SLOW = [
    ("mult('atan(x)')", [Wplus, Wminus]),
    ("conv('2+atan(xi)')", [H(PI)]),
    ("conv('2+sgn(xi)')", [WStar]),
]


def _ratio_table(table):
    fails, worst = [], 0.0
    for text, dirs in table:
        op = parse_operator(text)
        for d in dirs:
            v = pstrong_limit_probe(op, d, TEST_COMPACTS, (8, 16, 32), G3).values
            ok = v[-1] <= 0.05 * v[0] or v[-1] <= 1e-10
            if v[-1] > 1e-10:
                worst = max(worst, v[-1] / v[0])
            if not ok:
                fails.append(f"{text}@{d}: {v[0]:.2e} -> {v[-1]:.2e}")
    return fails, worst, sum(len(d) for _, d in table)


def test_criterion_3_snapshot_rules(acceptance_log):
    fails, worst, count = _ratio_table(RULE_TABLE)
    _line(acceptance_log, 3, not fails, f"{count} pairs, worst ratio {worst:.2e}" + (f"; failing {fails}" if fails else ""))
    for text, dirs in SLOW:
        op = parse_operator(text)
        for d in dirs:
            v = pstrong_limit_probe(op, d, TEST_COMPACTS, (8, 16, 32), G3).values
            rate = math.log(v[-1] / v[0]) / math.log(32 / 8)
            acceptance_log(f"info 3: {text}@{d} residual {v[0]:.3f} -> {v[-1]:.3f} (n^{rate:.2f}), "
                           f"monotone={bool(np.all(np.diff(v) < 0))}")
            assert np.all(np.diff(v) < 0)
    assert not fails


def test_criterion_4_separability(acceptance_log):
    fails, worst, count = _ratio_table(FOREIGN)
    _line(acceptance_log, 4, not fails, f"{count} foreign pairs, worst ratio {worst:.2e}")
    assert not fails


# --- 5. Cauchy bound ---------------------------------------------------------

def test_criterion_5_cauchy_bound(acceptance_log):
    g = make_grid(64, 8, 2)
    checks = [cauchy_tail_check(m, n, 2.0, g) for m, n in ((1, 10), (2, 20), (4, 40))]
    ok = all(c.measured <= math.sqrt(2 * math.log((c.n + c.m) / (c.n - c.m))) / math.pi * 1.1 for c in checks)
    for m in (1, 2):
        meas = [cauchy_tail_check(m, n, 2.0, g).measured for n in (10, 20, 40)]
        ok = ok and meas[0] > meas[1] > meas[2]
    _line(acceptance_log, 5, ok, "; ".join(f"(m,n)=({c.m},{c.n}) {c.measured:.4f} <= 1.1*{c.bound:.4f}" for c in checks))
    assert ok


# --- 6. classification -------------------------------------------------------

def test_criterion_6_classification(acceptance_log):
    g = make_grid(64, 8, 2)
    ms = [1, 2, 4, 8, 16]
    banded = {
        "mult(2+atan(x))": quasibanded_probe(parse_operator("mult('2+atan(x)')"), ms, 32, g),
        "mult(1+sgn(x-1))": quasibanded_probe(parse_operator("mult('1+sgn(x-1)')"), ms, 32, g),
        "conv(B-spline)": quasibanded_probe(Conv(symbol("(sin(xi/2)/(xi/2))^4")), ms, 32, g),
        "kernel": quasibanded_probe(parse_operator('kernel("chi[-4,4)(x)*chi[-4,4)(y)*exp(-(x-y)^2)")'), ms, 32, g),
    }
    S_band = quasibanded_probe(cauchy(), ms, 32, g)
    S_comm = commutator_probe(cauchy(), "Exponential", list(range(1, 17)), g)
    ok = all(tr.tag == DECAYS for tr in banded.values())
    ok = ok and bool(np.all(S_band.values >= 0.2)) and S_band.tag == BOUNDED
    ok = ok and S_comm.tag != DECAYS
    _line(acceptance_log, 6, ok,
          ", ".join(f"{k}={tr.tag}" for k, tr in banded.items())
          + f"; S d(m)_min={S_band.values.min():.3f} ({S_band.tag}), S exp-commutator {S_comm.tag}")
    assert ok


# --- 7. discretization integrity ---------------------------------------------

def test_criterion_7_discretization(corpus, acceptance_log):
    g = make_grid(8, 8, 2)
    x = g.nodes
    u = np.exp(-x**2 / 2)
    v = assemble(Conv(symbol("exp(i*xi)")), g).matrix @ u
    w = np.exp(-(x - 1) ** 2 / 2)
    shift_err = np.linalg.norm(v - w) / np.linalg.norm(w)
    P = assemble(Conv(symbol("chi[-inf,0)", var="xi")), g).matrix
    Q = assemble(Conv(symbol("chi[0,inf)", var="xi")), g).matrix
    inv_err = np.max(np.abs((2 * P + 3 * Q) @ (P / 2 + Q / 3) - np.eye(g.N)))
    ok = shift_err <= 1e-6 and inv_err <= 1e-10
    worst, fails = 0.0, []
    eps = np.finfo(float).eps
    for name, (seq, cfg, _, traj) in corpus.items():
        cfg2 = analysis.AnalysisConfig(**{**cfg.__dict__, "pad_factor": 2 * cfg.pad_factor})
        traj2 = analysis.condition_trajectory(seq, N_LIST, cfg2)
        for (n, s1, c1), (_, s2, c2) in zip(traj, traj2):
            N2 = make_grid(n, cfg.m, cfg2.pad_factor).N
            resolution = N2 * eps * max(s1 * c1, s2 * c2)
            if s1 <= resolution and s2 <= resolution:
                continue
            rel = abs(s1 - s2) / max(s1, s2)
            worst = max(worst, rel)
            if rel > 0.01:
                fails.append(f"{name} n={n}: {s1:.3e} vs {s2:.3e}")
    ok = ok and not fails
    _line(acceptance_log, 7, ok, f"shift err {shift_err:.1e}, paired inverse err {inv_err:.1e}, "
          f"pad doubling worst change {worst:.1e}" + (f"; failing {fails}" if fails else ""))
    assert ok


# --- 8. convergence and index ------------------------------------------------

def test_criterion_8_convergence_and_index(corpus, acceptance_log):
    spec = load_corpus("flagship")
    rows = analysis.manufactured_study(build(spec), symbol(spec.solution), N_LIST)
    errs = {n: e for n, e, _, _ in rows}
    gain = errs[8] / errs[48]
    idx = {name: rep.index_sum for name, (_, _, rep, _) in corpus.items()}
    ok = gain >= 10 and all(v == 0 for v in idx.values())
    _line(acceptance_log, 8, ok, f"flagship error {errs[8]:.2e} -> {errs[48]:.2e} (x{gain:.1e}); "
          f"index_sum nonzero on {[k for k, v in idx.items() if v != 0]}")
    assert ok
