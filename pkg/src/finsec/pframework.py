"""Numerical probes of P-compactness, band structure and snapshot limits.

All norms are spectral norms of grid matrices (the ``p = 2`` case).  Every
probe returns a :class:`ProbeTrajectory` whose tag follows fixed rules:

``decays-to-zero``
    final value at most 0.1 of the initial one (or numerically zero) and
    nonincreasing after the first point;
``bounded-away``
    every value in the second half of the list at least 0.1 of the initial one;
``inconclusive``
    anything else.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import (
    assemble,
    assemble_snapshot,
    _seq_entry,
    _shift_matrix,
)
from .errors import OffLattice
from .operators import (
    Block2x2,
    Const,
    Conv,
    Mult,
    OperatorExpr,
    Single,
    cauchy,
    dilate,
    gaussian_pair,
    snapshot,
)
from .symbols import indicator

__all__ = [
    "ProbeTrajectory",
    "CauchyCheck",
    "FAMILIES",
    "tag_trajectory",
    "pcompact_probe",
    "quasibanded_probe",
    "cauchy_tail_check",
    "cauchy_bound",
    "commutator_probe",
    "pstrong_limit_probe",
    "default_test_compacts",
]

DECAYS = "decays-to-zero"
BOUNDED = "bounded-away"
INCONCLUSIVE = "inconclusive"

# numerical zero for unit-size operators; matches the verdict floor
ZERO_TOL = 1e-10


@dataclass
class ProbeTrajectory:
    """Measured norms along a parameter list.

    Attributes
    ----------
    params : list
        ``n``, ``m`` or ``t`` values.
    norms : ndarray
        One row per parameter; several columns for paired measurements.
    tag : str
    columns : tuple of str
        Column names of ``norms``.
    label : str
    """

    params: list
    norms: np.ndarray
    tag: str
    columns: tuple = ("norm",)
    label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def values(self):
        """The tagged series: the row maximum of ``norms``."""
        return np.max(self.norms, axis=1)

    def rows(self):
        out = [["param"] + list(self.columns) + ["tag"]]
        for p, row in zip(self.params, self.norms):
            out.append([p] + [repr(float(v)) for v in row] + [self.tag])
        return out


def tag_trajectory(values, zero_tol=ZERO_TOL):
    """Qualitative tag of a nonnegative series (see the module notes)."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("norms must be nonnegative")
    first, last = v[0], v[-1]
    tail = v[1:]
    slack = zero_tol + 1e-9 * first
    monotone = bool(np.all(np.diff(tail) <= slack)) if tail.size > 1 else True
    if (last <= 0.1 * first or last <= zero_tol) and monotone:
        return DECAYS
    half = v[len(v) // 2:]
    if first > zero_tol and np.all(half >= 0.1 * first):
        return BOUNDED
    return INCONCLUSIVE


def _trajectory(params, norms, columns, label, **extra):
    norms = np.atleast_2d(np.asarray(norms, dtype=float))
    if norms.shape[0] != len(params):
        norms = norms.T
    return ProbeTrajectory(list(params), norms, tag_trajectory(norms.max(axis=1)), tuple(columns), label, extra)


def _norm(A, rtol=1e-10, maxiter=60):
    if A.size == 0 or not A.any():
        return 0.0
    nz = A != 0
    if nz.sum(axis=1).max() <= 1 and nz.sum(axis=0).max() <= 1:
        # partial isometry pattern (diagonals, signed shifts)
        return float(np.abs(A).max())
    if min(A.shape) <= 2048:
        return float(np.linalg.svd(A, compute_uv=False)[0])
    # block power iteration on A^H A for very large blocks; the value estimate
    # tolerates clustered top singular values
    if A.shape[0] < A.shape[1]:
        A = A.conj().T
    rng = np.random.default_rng(0)
    Q = np.linalg.qr(rng.standard_normal((A.shape[1], 8)) + 0j)[0]
    est = 0.0
    for _ in range(maxiter):
        Y = A @ Q
        new = float(np.linalg.svd(Y, compute_uv=False)[0])
        if abs(new - est) <= rtol * new:
            return new
        est = new
        Q = np.linalg.qr(A.conj().T @ Y)[0]
    return est


def _op_matrix(expr, grid):
    if isinstance(expr, np.ndarray):
        return expr
    return assemble(expr, grid).matrix


# ---------------------------------------------------------------------------
# P-compactness and band structure
# ---------------------------------------------------------------------------


def pcompact_probe(expr, grid, n_list):
    """``||A (I - P_n)||`` and ``||(I - P_n) A||`` along ``n_list``.

    A Gaussian test vector centred between ``n`` and the window edge gives
    the lower bound recorded in ``extra["witness"]``.

    Examples
    --------
    A finite-rank operator supported in ``[-5, 5]`` gives exactly 0 for
    ``n >= 5``; ``Mult(1/(1+x^2))`` gives about ``1/(1+n^2)``.
    """
    A = _op_matrix(expr, grid)
    x = grid.nodes
    rows, wit = [], []
    for n in n_list:
        q = np.abs(x) > n
        rows.append((_norm(A[:, q]), _norm(A[q, :])))
        c = 0.5 * (n + grid.L)
        w = max((grid.L - n) / 8.0, grid.h)
        g = np.exp(-((x - c) / w) ** 2 / 2) * q
        gn = np.linalg.norm(g)
        wit.append(float(np.linalg.norm(A @ g) / gn) if gn > 0 else 0.0)
    return _trajectory(n_list, rows, ("K(I-Pn)", "(I-Pn)K"), str(expr), witness=wit)


def _radius_list(n_max):
    ns = [1]
    while ns[-1] * 2 <= n_max:
        ns.append(ns[-1] * 2)
    if ns[-1] != n_max:
        ns.append(n_max)
    return ns


def quasibanded_probe(expr, m_list, n_max, grid):
    """Tail norms ``d(m) = max_n ||Q_{n+m} A P_n||`` and ``max_n ||P_n A Q_{n+m}||``.

    The maximum runs over ``n`` in the powers of two up to ``n_max`` and
    ``n_max`` itself.
    """
    if n_max + max(m_list) > grid.L:
        raise ValueError("n_max + max(m_list) exceeds the window half width")
    A = _op_matrix(expr, grid)
    x = np.abs(grid.nodes)
    ns = _radius_list(n_max)
    rows = []
    for m in m_list:
        d1 = d2 = 0.0
        for n in ns:
            p, q = x <= n, x > n + m
            d1 = max(d1, _norm(A[np.ix_(q, p)]))
            d2 = max(d2, _norm(A[np.ix_(p, q)]))
        rows.append((d1, d2))
    return _trajectory(m_list, rows, ("Q(n+m)APn", "PnAQ(n+m)"), str(expr), n_radii=ns)


# ---------------------------------------------------------------------------
# Cauchy singular integral
# ---------------------------------------------------------------------------


@dataclass
class CauchyCheck:
    """Measured ``||P_m S Q_n||`` against the logarithmic bound."""

    m: int
    n: int
    p: float
    measured: float
    bound: float
    slack: float

    @property
    def passed(self):
        return self.measured <= self.bound * (1 + self.slack)


def cauchy_bound(m, n, p=2.0):
    """``(C * 2 ln((n+m)/(n-m)))^(1/p)`` with ``C = pi^-p (q-1)^(-p/q)``."""
    if not n > m >= 1:
        raise ValueError("need n > m >= 1")
    if not 1 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    q = p / (p - 1)
    C = math.pi ** (-p) * (q - 1) ** (-p / q)
    return (C * 2 * math.log((n + m) / (n - m))) ** (1 / p)


def cauchy_tail_check(m, n, p=2.0, grid=None, slack=0.1, S=None):
    """Measure ``||P_m S Q_n||`` on the grid and compare with the bound.

    The measured side is always the ``L^2`` norm; ``p`` only enters the bound.
    """
    if grid is None:
        raise ValueError("a grid is required")
    if n >= grid.L:
        raise ValueError("n must lie inside the window")
    A = S if S is not None else assemble(cauchy(), grid).matrix
    x = np.abs(grid.nodes)
    measured = _norm(A[np.ix_(x <= m, x > n)])
    return CauchyCheck(m, n, p, measured, cauchy_bound(m, n, p), slack)


# ---------------------------------------------------------------------------
# commutators
# ---------------------------------------------------------------------------


def _exp_plus(x):
    return np.exp(1j * x)


def _exp_minus(x):
    return np.exp(-1j * x)


def _clip01(x):
    return np.clip(x, 0.0, 1.0) + 0j


def _hat(x):
    return np.maximum(0.0, 1.0 - np.abs(x)) + 0j


FAMILIES = {
    "Exponential": (_exp_plus, _exp_minus),
    "SplineCRbar": (_clip01,),
    "SplineCRdot": (_hat,),
}


def commutator_probe(expr, family, t_list, grid):
    """``||A phi_t - phi_t A||`` with ``phi_t(x) = phi(x / t)``.

    Parameters
    ----------
    family : {"Exponential", "SplineCRbar", "SplineCRdot"}
        ``e^{+-ix}`` (maximum over both signs), ``clip(x, 0, 1)`` (different
        limits at infinity) or the hat function (equal limits).

    Notes
    -----
    The commutator is compressed to the central half ``|x| <= L/2`` so that
    the non-periodic ``phi_t`` does not see the wrap-around of the window.
    The largest trustworthy dilation is about ``L / (2 pi)`` for the
    exponentials and ``L / 2`` for the splines.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    A = _op_matrix(expr, grid)
    x = grid.nodes
    c = np.abs(x) <= grid.L / 2
    Ac = A[np.ix_(c, c)]
    xc = x[c]
    rows = []
    for t in t_list:
        best = 0.0
        for phi in FAMILIES[family]:
            f = phi(xc / t)
            C = Ac * f[None, :] - f[:, None] * Ac
            best = max(best, _norm(C))
        rows.append((best,))
    return _trajectory(t_list, rows, ("commutator",), f"{expr} / {family}")


# ---------------------------------------------------------------------------
# P-strong limits of transformed sequences
# ---------------------------------------------------------------------------


def default_test_compacts():
    """Indicator of ``[-1, 1]`` and a rank-one Gaussian pair at the origin."""
    return [Mult(indicator(-1.0, 1.0)), gaussian_pair(0.0, 0.5)]


def _check_modulation(grid, t):
    k = t / grid.dxi
    if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
        raise OffLattice(f"modulation {t} is not a multiple of pi/L = {grid.dxi:g}")


def _mod(grid, t):
    return np.exp(1j * t * grid.nodes)


def _conj_mod(M, u):
    # diag(u) M diag(conj(u))
    return (u[:, None] * M) * u.conj()[None, :]


def _perm(grid, s):
    """Index and sign arrays of the signed cyclic shift ``V_s``."""
    V = _shift_matrix(grid, s)
    idx = np.argmax(np.abs(V), axis=1)
    return idx, V[np.arange(grid.N), idx].real


def _shifted(M, grid, s_left, s_right):
    """``V_{s_left} M V_{s_right}`` without dense products."""
    i, a = _perm(grid, s_left)
    j, b = _perm(grid, -s_right)
    return (a[:, None] * M[np.ix_(i, j)]) * b[None, :]


def _support(K, tol=0.0):
    A = np.abs(K)
    return np.flatnonzero(A.max(axis=1) > tol), np.flatnonzero(A.max(axis=0) > tol)


def _residual(D, Ks):
    # K D and D K only involve the rows and columns K touches
    best = 0.0
    for K in Ks:
        r, c = _support(K)
        if r.size == 0:
            continue
        Kc = K[np.ix_(r, c)]
        left = _norm(Kc @ D[c, :])
        right = _norm(D[:, r] @ Kc)
        best = max(best, left + right)
    return best


def _block_diag(K):
    Z = np.zeros_like(K)
    return np.block([[K, Z], [Z, K]])


def _swap_products(A, R, I):
    """Blocks of ``T diag(A, I) T`` with ``T = [[R, S], [S, R]]``, ``S = I - R``."""
    RA, AR, RR = R @ A, A @ R, R @ R
    RAR = RA @ R
    RS = R - RR
    return (RAR + I - 2 * R + RR, RA - RAR + RS, AR - RAR + RS, A - RA - AR + RAR + RR)


def _diag_swap_products(A, r):
    # the same for diagonal R = diag(r)
    s = 1.0 - r
    return (
        (r[:, None] * A) * r[None, :] + np.diag(s * s),
        (r[:, None] * A) * s[None, :] + np.diag(s * r),
        (s[:, None] * A) * r[None, :] + np.diag(r * s),
        (s[:, None] * A) * s[None, :] + np.diag(r * r),
    )


def pstrong_limit_probe(seq, d, test_compacts=None, n_list=(8, 16, 32), grid=None, so_choices=None):
    """Residual ``||K (A_n^(d) - W^d)|| + ||(A_n^(d) - W^d) K||`` per ``n``.

    Parameters
    ----------
    seq : SequenceExpr or OperatorExpr
    d : SnapshotDirection
    test_compacts : list of OperatorExpr, optional
        Defaults to :func:`default_test_compacts`; the maximum over the list
        is recorded.
    n_list : sequence of int
    grid : Grid
        Must hold the transformed compacts for every ``n``.
    so_choices : dict, optional

    Notes
    -----
    ``A_n^(d)`` is ``A_n`` for ``Wc``, ``V_{-n} A_n V_n`` for ``Wplus`` and
    ``V_n A_n V_{-n}`` for ``Wminus``, with the signed cyclic shift that
    commutes with every discrete convolution.  For ``H(t)`` the isometry
    ``Z_n`` is moved to the other side: ``U_t A_n U_{-t}`` is compared with
    ``Z_n H^t Z_n^{-1}`` against the dilated compacts ``Z_n K Z_n^{-1}``,
    which has the same norm.  The starred directions use the block
    transformations with ``T_1 = [[chi_+, chi_-], [chi_-, chi_+]]`` (for
    ``WStar``) and ``T_2`` built from ``W(chi_+)`` (for ``HStar``) applied to
    ``diag(A_n, I)``.

    Multiplication by an indicator is not compact, so against ``Mult``
    test operators the H-frame residual of a coefficient with a jump away
    from the origin stays of order one; use Gaussian pairs to see norm decay.

    Raises
    ------
    OffLattice
        If a modulation is not a multiple of ``pi / L``.
    """
    if grid is None:
        raise ValueError("a grid is required")
    if isinstance(seq, OperatorExpr):
        seq = Const(seq)
    compacts = test_compacts if test_compacts is not None else default_test_compacts()
    W = snapshot(seq, d, so_choices)
    if d.is_h and d.tag != "H0":
        _check_modulation(grid, d.t)
    N = grid.N
    rows = []
    for n in n_list:
        A = _seq_entry(seq, n, grid, True)
        Ks = [assemble(dilate(K, n) if d.is_h else K, grid).matrix for K in compacts]
        if d.starred:
            Ks = [_block_diag(K) for K in Ks]
            if d.tag == "WStar":
                b11, b12, b21, b22 = _diag_swap_products(A, (grid.nodes >= 0).astype(float))
                X = np.block([
                    [_shifted(b11, grid, -n, n), _shifted(b12, grid, -n, -n)],
                    [_shifted(b21, grid, n, n), _shifted(b22, grid, n, -n)],
                ])
                Wm = assemble_snapshot(W, grid).matrix
            else:
                I = np.eye(N, dtype=complex)
                R = assemble(Conv(indicator(0.0, math.inf, var="xi")), grid).matrix
                b11, b12, b21, b22 = _swap_products(A, R, I)
                u = _mod(grid, d.t)
                uc = u.conj()
                X = np.block([
                    [_conj_mod(b11, u), (u[:, None] * b12) * u[None, :]],
                    [(uc[:, None] * b21) * uc[None, :], _conj_mod(b22, uc)],
                ])
                Wz = Block2x2(*(dilate(e, n) for e in (W.a11, W.a12, W.a21, W.a22)))
                Wm = assemble_snapshot(Wz, grid).matrix
        elif d.tag == "Wc":
            X = A
            Wm = assemble_snapshot(W, grid).matrix
        elif d.tag in ("Wplus", "Wminus"):
            s = n if d.tag == "Wminus" else -n
            X = _shifted(A, grid, s, -s)
            Wm = assemble_snapshot(W, grid).matrix
        else:
            t = 0.0 if d.tag == "H0" else d.t
            X = _conj_mod(A, _mod(grid, t))
            Wm = assemble_snapshot(Single(dilate(W.expr, n)), grid).matrix
        rows.append((_residual(X - Wm, Ks),))
    return _trajectory(n_list, rows, ("residual",), f"{seq} @ {d}")
