"""Dense matrices for operators and sequences on a uniform symmetric grid.

The window ``[-L, L)`` carries ``N`` cells of width ``h`` with nodes at the
cell centres, ``x_j = -L + (j + 1/2) h``.  The dual grid is half shifted as
well, ``xi_k = -pi/h + (k + 1/2) dxi`` with ``dxi = pi / L``, so neither grid
contains 0.  With these nodes the discrete Fourier multiplier

    (W_h(b))_{jl} = (1/N) sum_k b(xi_k) exp(-i (x_j - x_l) xi_k)

is an exact skew-circulant Toeplitz matrix: entries depend on ``j - l`` only
and wrap around the window with a sign change.  All such matrices commute and
are normal, ``W_h(chi_-)`` and ``W_h(chi_+)`` are complementary orthogonal
projections, and ``W_h(exp(i s xi))`` is the signed cyclic shift by ``s``.

Symbols with both limits at infinity are tapered near the Nyquist frequency
towards the piecewise constant symbol ``b(-inf) chi_- + b(inf) chi_+``.  A
sharp cut at ``+-pi/h`` would otherwise act as an extra jump of the sampled
symbol and pollute the smallest singular values of finite sections.

Vectors use the norm ``||u||^2 = h sum |u_j|^2``; for this norm the matrix
spectral norm approximates the ``L^2`` operator norm.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import JumpOnNode, OffLattice, SizeOverflow, WindowTooSmall
from .operators import (
    Block2x2,
    Const,
    Conv,
    FiniteRank,
    FiniteSection,
    Flip,
    Identity,
    LiftH,
    LiftMinus,
    LiftPlus,
    Mult,
    OperatorExpr,
    Prod,
    ProjSeq,
    Scalar,
    Scale,
    SeqProd,
    SeqScale,
    SeqSum,
    SequenceExpr,
    Single,
    SmoothKernel,
    Sum,
    dilate,
    mu_of,
)

__all__ = [
    "DEFAULT_CAP",
    "DEFAULT_PAD",
    "Grid",
    "DiscreteOperator",
    "Shift",
    "Dilation",
    "Modulation",
    "make_grid",
    "grid_for_window",
    "assemble",
    "assemble_sequence",
    "assemble_finite_section",
    "assemble_snapshot",
    "transform_matrix",
    "sampled_symbol",
    "write_matrix",
    "read_matrix",
]

DEFAULT_CAP = 16384
# grid half width over the largest radius; the wrap distance 2L - 2n is then 3n,
# so kernels decaying like e^{-|x|} alias below e^{-n} relative to e^{-2n} effects
DEFAULT_PAD = 2.5

# Nyquist taper: exp(-(xi/xi_c)^(2k)), xi_c = frac * pi / h
TAPER_ORDER = 8
TAPER_FRACTION = 0.6

_NODE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[-L, L)``.

    Parameters
    ----------
    L : float
        Half width.
    h : float
        Step; ``2L/h`` must be an even integer.
    pad_factor : float
        Ratio of ``L`` to the largest admissible finite-section radius.
    """

    L: float
    h: float
    pad_factor: float = DEFAULT_PAD
    N: int = field(init=False)

    def __post_init__(self):
        n = 2.0 * self.L / self.h
        N = int(round(n))
        if abs(n - N) > 1e-9 * max(1.0, n) or N <= 0 or N % 2:
            raise ValueError(f"2L/h = {n} is not a positive even integer")
        object.__setattr__(self, "N", N)

    @property
    def nodes(self):
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    @property
    def dxi(self):
        return 2.0 * math.pi / (self.N * self.h)

    @property
    def dual_nodes(self):
        return -math.pi / self.h + (np.arange(self.N) + 0.5) * self.dxi

    @property
    def n_max(self):
        return self.L / self.pad_factor

    def window(self, n):
        """Indices of the nodes in ``[-n, n]``."""
        x = self.nodes
        return np.flatnonzero(np.abs(x) <= n)

    def check_window(self, n):
        if n > self.n_max * (1 + 1e-12):
            raise WindowTooSmall(
                f"section radius {n} exceeds L/pad_factor = {self.n_max:g}"
            )


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """A dense complex matrix on a grid.

    Attributes
    ----------
    matrix : ndarray
        Square complex matrix (read-only).
    grid : Grid
    label : str
    """

    matrix: np.ndarray
    grid: Grid
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def norm(self):
        """Spectral norm (equal to the ``L^2`` operator norm of the discretisation)."""
        return float(np.linalg.norm(self.matrix, 2))

    def __matmul__(self, other):
        if isinstance(other, DiscreteOperator):
            return DiscreteOperator(self.matrix @ other.matrix, self.grid, f"{self.label}*{other.label}")
        return self.matrix @ other


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def make_grid(n_max, m, pad_factor=DEFAULT_PAD, cap=DEFAULT_CAP):
    """Grid with ``h = 1/m`` and ``L = pad_factor * n_max``.

    Parameters
    ----------
    n_max : int
        Largest finite-section radius.
    m : int
        Nodes per unit length, a power of two.
    pad_factor : float
        At least 2.
    cap : int
        Largest allowed ``N``; ``N == cap`` is accepted.

    Raises
    ------
    SizeOverflow
        If ``N = 2 L m`` exceeds ``cap``.

    Examples
    --------
    >>> make_grid(8, 8, 2).N
    256
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if m < 1 or m & (m - 1):
        raise ValueError("m must be a power of two")
    if pad_factor < 2:
        raise ValueError("pad_factor must be at least 2")
    L = float(pad_factor) * n_max
    N = 2.0 * L * m
    if N > cap:
        raise SizeOverflow(f"grid size N = {N:g} exceeds the cap {cap}")
    return Grid(L, 1.0 / m, float(pad_factor))


def grid_for_window(n, m, pad_factor=DEFAULT_PAD, cap=DEFAULT_CAP):
    """Grid sized for a single window of radius ``n``."""
    return make_grid(n, m, pad_factor, cap)


# ---------------------------------------------------------------------------
# symbol sampling
# ---------------------------------------------------------------------------


def _check_jumps(points, nodes, what, name):
    if not len(points):
        return
    for t in points:
        near = np.min(np.abs(nodes - t))
        if near <= _NODE_TOL * (1.0 + abs(t)):
            raise JumpOnNode(f"jump of {name} at {t:g} lies on a {what} node")


def _taper(xi, h):
    xc = TAPER_FRACTION * math.pi / h
    return np.exp(-((xi / xc) ** (2 * TAPER_ORDER)))


def sampled_symbol(b, grid, taper=True):
    """Values of a multiplier symbol on the dual nodes, as used in assembly.

    Symbols with both limits at infinity are tapered to their limits near
    the Nyquist frequency; all others are sampled directly.
    """
    xi = grid.dual_nodes
    _check_jumps(b.jump_points, xi, "dual-grid", b.name)
    vals = b.eval_unchecked(xi)
    if taper and b.has_limits and b.constant is None:
        b_inf = np.where(xi < 0, b.limit_minus, b.limit_plus)
        vals = b_inf + _taper(xi, grid.h) * (vals - b_inf)
    return vals


@functools.lru_cache(maxsize=8)
def _conv_matrix(b, grid, taper):
    N = grid.N
    vals = sampled_symbol(b, grid, taper)
    d = np.arange(N)
    c = np.fft.fft(vals) / N * np.where(d % 2, -1.0, 1.0) * np.exp(-1j * math.pi * d / N)
    # column: c_d for d >= 0; row: c_{-d} = -c_{N-d}
    row = np.empty(N, dtype=complex)
    row[0] = c[0]
    row[1:] = -c[:0:-1]
    out = sla.toeplitz(c, row)
    out.flags.writeable = False
    return out


def _coef_values(a, grid):
    x = grid.nodes
    _check_jumps(a.jump_points, x, "grid", a.name)
    return a.eval_unchecked(x)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _diagonal(e, grid):
    if isinstance(e, Identity):
        return np.ones(grid.N, dtype=complex)
    if isinstance(e, Scalar):
        return np.full(grid.N, e.c, dtype=complex)
    if isinstance(e, Mult):
        return _coef_values(e.a, grid)
    if isinstance(e, Conv) and e.b.constant is not None:
        return np.full(grid.N, e.b.constant, dtype=complex)
    return None


def _assemble(e, grid, taper):
    N = grid.N
    if isinstance(e, Identity):
        return np.eye(N, dtype=complex)
    if isinstance(e, Scalar):
        return e.c * np.eye(N, dtype=complex)
    if isinstance(e, Mult):
        return np.diag(_coef_values(e.a, grid))
    if isinstance(e, Conv):
        if e.b.constant is not None:
            return e.b.constant * np.eye(N, dtype=complex)
        return np.array(_conv_matrix(e.b, grid, taper))
    if isinstance(e, Flip):
        return np.eye(N, dtype=complex)[::-1].copy()
    if isinstance(e, FiniteRank):
        x = grid.nodes
        out = np.zeros((N, N), dtype=complex)
        for u, v in e.pairs:
            out += grid.h * np.outer(_coef_values(u, grid), _coef_values(v, grid))
        return out
    if isinstance(e, SmoothKernel):
        x = grid.nodes
        return grid.h * np.asarray(e.k(x[:, None], x[None, :]), dtype=complex)
    if isinstance(e, Sum):
        out = np.zeros((N, N), dtype=complex)
        for t in e.terms:
            out += _assemble(t, grid, taper)
        return out
    if isinstance(e, Prod):
        # diagonal factors are applied as row or column scalings
        out, diag = None, np.ones(N, dtype=complex)
        for f in e.factors:
            d = _diagonal(f, grid)
            if d is not None:
                if out is None:
                    diag = diag * d
                else:
                    out = out * d[None, :]
                continue
            m = _assemble(f, grid, taper)
            out = diag[:, None] * m if out is None else out @ m
        return np.diag(diag) if out is None else out
    if isinstance(e, Scale):
        return e.c * _assemble(e.inner, grid, taper)
    raise TypeError(f"cannot assemble {type(e).__name__}")


def assemble(expr, grid, taper=True):
    """Matrix of an operator expression on the full grid.

    Parameters
    ----------
    expr : OperatorExpr
    grid : Grid
    taper : bool
        Apply the Nyquist taper to convolution symbols with limits.

    Returns
    -------
    DiscreteOperator

    Raises
    ------
    JumpOnNode
        A coefficient jump on a node or a symbol jump on a dual node.
    """
    return DiscreteOperator(_assemble(expr, grid, taper), grid, str(expr))


def _shift_matrix(grid, s, mode="twisted"):
    d = s / grid.h
    k = int(round(d))
    if abs(d - k) > 1e-9 * max(1.0, abs(d)):
        raise OffLattice(f"shift {s} is not a multiple of h = {grid.h}")
    N = grid.N
    out = np.zeros((N, N), dtype=complex)
    j = np.arange(N)
    src = j - k
    if mode == "truncate":
        ok = (src >= 0) & (src < N)
        out[j[ok], src[ok]] = 1.0
        return out
    if mode != "twisted":
        raise ValueError("shift mode must be 'twisted' or 'truncate'")
    wraps = np.floor_divide(src, N)
    out[j, src % N] = np.where(wraps % 2, -1.0, 1.0)
    return out


def _seq_entry(seq, n, grid, taper):
    N = grid.N
    if isinstance(seq, OperatorExpr):
        return _assemble(seq, grid, taper)
    if isinstance(seq, Const):
        return _assemble(seq.op, grid, taper)
    if isinstance(seq, ProjSeq):
        return np.diag((np.abs(grid.nodes) <= n).astype(complex))
    if isinstance(seq, (LiftPlus, LiftMinus)):
        s = n if isinstance(seq, LiftPlus) else -n
        V = _shift_matrix(grid, s)
        return V @ _assemble(seq.K, grid, taper) @ V.T
    if isinstance(seq, LiftH):
        K = _assemble(dilate(seq.K, n), grid, taper)
        u = np.exp(1j * seq.t * grid.nodes)
        return (u.conj()[:, None] * K) * u[None, :]
    if isinstance(seq, SeqSum):
        out = np.zeros((N, N), dtype=complex)
        for t in seq.terms:
            out += _seq_entry(t, n, grid, taper)
        return out
    if isinstance(seq, SeqProd):
        out = None
        for f in seq.factors:
            m = _seq_entry(f, n, grid, taper)
            out = m if out is None else out @ m
        return out
    if isinstance(seq, SeqScale):
        return seq.c * _seq_entry(seq.inner, n, grid, taper)
    if isinstance(seq, FiniteSection):
        p = (np.abs(grid.nodes) <= n).astype(complex)
        inner = _seq_entry(seq.inner, n, grid, taper)
        return p[:, None] * inner * p[None, :] + np.diag(1.0 - p)
    raise TypeError(f"cannot assemble {type(seq).__name__}")


def assemble_sequence(seq, n, grid, taper=True):
    """Full-grid matrix of the sequence entry ``A_n``."""
    grid.check_window(n)
    return DiscreteOperator(_seq_entry(seq, n, grid, taper), grid, f"{seq}[n={n}]")


def assemble_finite_section(seq, n, grid, taper=True):
    """Matrix of ``A_n`` restricted to the nodes in ``[-n, n]`` (size ``2 n m``).

    Raises
    ------
    WindowTooSmall
        If ``n`` exceeds ``L / pad_factor``.

    Notes
    -----
    For a finite-section sequence ``P_n A_n P_n + mu (I - P_n)`` the
    restriction is the compression of ``A_n``; ``mu`` only acts off the window.
    """
    grid.check_window(n)
    if isinstance(seq, (SequenceExpr, OperatorExpr)):
        if isinstance(seq, SequenceExpr):
            mu_of(seq)  # raises outside the finite-section algebra
    full = _seq_entry(seq, n, grid, taper)
    idx = grid.window(n)
    return DiscreteOperator(full[np.ix_(idx, idx)], grid, f"{seq}[n={n}]")


def assemble_snapshot(snap, grid, taper=True):
    """Matrix of a snapshot result (block matrices are ``2N x 2N``)."""
    if isinstance(snap, Single):
        return assemble(snap.expr, grid, taper)
    if isinstance(snap, Block2x2):
        blocks = [[_assemble(e, grid, taper) for e in row] for row in snap.entries]
        return DiscreteOperator(np.block(blocks), grid, str(snap))
    if isinstance(snap, OperatorExpr):
        return assemble(snap, grid, taper)
    raise TypeError(f"cannot assemble {type(snap).__name__}")


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Shift:
    """``(V_s u)(x) = u(x - s)``; ``s`` must be a multiple of ``h``.

    ``mode="twisted"`` wraps with a sign change (this is ``W_h(e^{i s xi})``
    and commutes with every discrete convolution); ``mode="truncate"`` drops
    what leaves the window.
    """

    s: float
    mode: str = "twisted"


@dataclass(frozen=True)
class Dilation:
    """``(Z_n u)(x) = n^{-1/2} u(x/n)`` for an integer ``n`` or its inverse ``1/n``."""

    n: float


@dataclass(frozen=True)
class Modulation:
    """``(U_t u)(x) = e^{i t x} u(x)``."""

    t: float


def _dilation_matrix(grid, factor):
    factor = float(factor)
    k = factor if factor >= 1 else 1.0 / factor
    if factor <= 0 or abs(k - round(k)) > 1e-12:
        raise OffLattice(f"dilation factor {factor} is not an integer or its inverse")
    x, xi, h, N = grid.nodes, grid.dual_nodes, grid.h, grid.N
    y = x / factor
    # trigonometric interpolation in the dual basis, evaluated at x / factor
    F = h * np.exp(1j * np.outer(xi, x))
    E = np.exp(-1j * np.outer(y, xi)) / (N * h)
    out = (E @ F) / math.sqrt(factor)
    out[np.abs(y) > grid.L] = 0.0
    return out


def transform_matrix(grid, kind):
    """Matrix of a shift, dilation, modulation or the flip.

    Parameters
    ----------
    grid : Grid
    kind : Shift, Dilation, Modulation or Flip

    Raises
    ------
    OffLattice
        Shifts off the lattice and non-integer dilation factors.

    Examples
    --------
    >>> g = make_grid(2, 4, 2)
    >>> np.allclose(transform_matrix(g, Modulation(0.0)).matrix, np.eye(g.N))
    True
    """
    if isinstance(kind, Shift):
        m = _shift_matrix(grid, kind.s, kind.mode)
    elif isinstance(kind, Dilation):
        m = np.eye(grid.N, dtype=complex) if kind.n == 1 else _dilation_matrix(grid, kind.n)
    elif isinstance(kind, Modulation):
        m = np.diag(np.exp(1j * kind.t * grid.nodes))
    elif isinstance(kind, Flip) or kind == "flip":
        m = _assemble(Flip(), grid, False)
    else:
        raise TypeError(f"unknown transformation {kind!r}")
    return DiscreteOperator(m, grid, str(kind))


# ---------------------------------------------------------------------------
# text export
# ---------------------------------------------------------------------------


def write_matrix(path, M):
    """Write a matrix as text: a header line, then ``re im`` pairs row-major."""
    A = M.matrix if isinstance(M, DiscreteOperator) else np.asarray(M, dtype=complex)
    with open(path, "w") as fh:
        fh.write(f"%%finsec matrix complex {A.shape[0]} {A.shape[1]}\n")
        for row in A:
            fh.write(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) + "\n")


def read_matrix(path):
    """Read a matrix written by :func:`write_matrix`."""
    with open(path) as fh:
        head = fh.readline().split()
        if head[:3] != ["%%finsec", "matrix", "complex"]:
            raise ValueError("not a finsec matrix file")
        r, c = int(head[3]), int(head[4])
        vals = np.array(fh.read().split(), dtype=float)
    if vals.size != 2 * r * c:
        raise ValueError("matrix file is truncated")
    v = vals.reshape(r, c, 2)
    return v[..., 0] + 1j * v[..., 1]
