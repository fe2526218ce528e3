"""Operator and operator-sequence expressions with symbolic snapshots.

Operators on ``L^2(R)`` are finite trees over the generators

* ``Identity``, ``Scalar(c)``,
* ``Mult(a)`` (multiplication by a coefficient),
* ``Conv(b)`` (Fourier multiplier with symbol ``b``),
* ``Flip`` (``(Jf)(x) = f(-x)``),
* ``FiniteRank`` and ``SmoothKernel`` compacts,

closed under ``Sum``, ``Prod`` and ``Scale``.  Sequences ``{A_n}`` add the
projection sequence ``P_n = chi_[-n,n]``, compacts lifted into one direction,
and finite-section wrappers ``P_n A_n P_n + mu (I - P_n)``.

A snapshot is a limit operator of the sequence seen from one direction:

==========  =========================================================
``Wc``      the sequence itself, P-strongly
``Wminus``  after shifting by ``+n`` (the left end of the window)
``Wplus``   after shifting by ``-n`` (the right end of the window)
``H(t)``    after modulating by ``t`` and dilating by ``n``
``WStar``   flip-symmetric pair of ``Wplus`` and ``Wminus``
``HStar``   flip-symmetric pair of ``H(s)`` and ``H(-s)``
``H0``      ``H(0)`` inside the flip-symmetric framework
==========  =========================================================

Snapshots are computed from generator rules and extended
homomorphically; no numerical limits are taken here.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (
    FlipOutsideStarFramework,
    NotFiniteSectionAlgebra,
    NotInAlgebra,
    RichnessRequired,
    UnboundedSupport,
)
from .symbols import KernelSpec, SymbolSpec, constant, indicator, paired, symbol

__all__ = [
    "OperatorExpr",
    "Identity",
    "Scalar",
    "Mult",
    "Conv",
    "Flip",
    "FiniteRank",
    "SmoothKernel",
    "Sum",
    "Prod",
    "Scale",
    "SequenceExpr",
    "Const",
    "ProjSeq",
    "LiftPlus",
    "LiftMinus",
    "LiftH",
    "SeqSum",
    "SeqProd",
    "SeqScale",
    "FiniteSection",
    "SnapshotDirection",
    "Wc",
    "Wminus",
    "Wplus",
    "WStar",
    "H0",
    "H",
    "HStar",
    "Single",
    "Block2x2",
    "DirectionSet",
    "DEFAULT_T_GRID",
    "snapshot",
    "active_directions",
    "mu_of",
    "hankel",
    "cauchy",
    "projection",
    "gaussian_pair",
    "dilate",
    "has_flip",
    "conv_symbols",
    "mult_symbols",
    "expand",
    "collect",
    "simplify",
    "is_zero",
    "to_text",
]

_SCALARS = (int, float, complex, np.number)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


class OperatorExpr:
    """Base class of operator expressions (immutable, hashable)."""

    def __add__(self, other):
        if isinstance(other, _SCALARS):
            return Sum((self, Scalar(other)))
        if isinstance(other, OperatorExpr):
            return Sum(_terms(self) + _terms(other))
        return NotImplemented

    def __radd__(self, other):
        if isinstance(other, _SCALARS):
            return Sum((Scalar(other), self))
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, _SCALARS):
            return Sum((self, Scalar(-other)))
        if isinstance(other, OperatorExpr):
            return Sum(_terms(self) + (Scale(-1.0, other),))
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, _SCALARS):
            return Sum((Scalar(other), Scale(-1.0, self)))
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return Scale(other, self)
        if isinstance(other, OperatorExpr):
            return Prod(_factors(self) + _factors(other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, _SCALARS):
            return Scale(other, self)
        return NotImplemented

    def __neg__(self):
        return Scale(-1.0, self)

    def __str__(self):
        return to_text(self)


def _terms(e):
    return e.terms if isinstance(e, Sum) else (e,)


def _factors(e):
    return e.factors if isinstance(e, Prod) else (e,)


@dataclass(frozen=True, eq=True)
class Identity(OperatorExpr):
    """The identity operator."""


@dataclass(frozen=True, eq=True)
class Scalar(OperatorExpr):
    """The operator ``c I``."""

    c: complex

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))


@dataclass(frozen=True, eq=True)
class Mult(OperatorExpr):
    """Multiplication by the coefficient ``a(x)``."""

    a: SymbolSpec


@dataclass(frozen=True, eq=True)
class Conv(OperatorExpr):
    """Fourier multiplier ``F^{-1} b F`` with ``(Fu)(xi) = int u(t) e^{i t xi} dt``.

    The symbol must carry both limits at infinity or be bounded with a
    declared jump set; ``Conv(-sgn)`` is the Cauchy singular integral.
    """

    b: SymbolSpec


@dataclass(frozen=True, eq=True)
class Flip(OperatorExpr):
    """The flip ``(Jf)(x) = f(-x)``."""


@dataclass(frozen=True, eq=True)
class FiniteRank(OperatorExpr):
    """``K f = sum_i u_i <f, v_i>`` with the bilinear pairing ``<f, v> = int f v``.

    Parameters
    ----------
    pairs : tuple of (SymbolSpec, SymbolSpec)
        Each function must have a bounded support witness.
    """

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((u, v) for u, v in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        for u, v in pairs:
            for f in (u, v):
                if f.support is None:
                    raise UnboundedSupport(f"finite-rank datum {f.name} has no bounded support")


@dataclass(frozen=True, eq=True)
class SmoothKernel(OperatorExpr):
    """Integral operator ``(Kf)(x) = int k(x, y) f(y) dy`` with compact kernel."""

    k: KernelSpec

    def __post_init__(self):
        if self.k.support is None:
            raise UnboundedSupport(f"kernel {self.k.name} has no bounded support")


@dataclass(frozen=True, eq=True)
class Sum(OperatorExpr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True, eq=True)
class Prod(OperatorExpr):
    """Ordered (noncommutative) product."""

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))


@dataclass(frozen=True, eq=True)
class Scale(OperatorExpr):
    c: complex
    inner: OperatorExpr

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))


def is_compact(e):
    """True for expressions that are compact by construction."""
    if isinstance(e, (FiniteRank, SmoothKernel)):
        return True
    if isinstance(e, Scalar):
        return e.c == 0
    if isinstance(e, Scale):
        return e.c == 0 or is_compact(e.inner)
    if isinstance(e, Sum):
        return all(is_compact(t) for t in e.terms)
    if isinstance(e, Prod):
        return any(is_compact(f) for f in e.factors)
    return False


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


class SequenceExpr:
    """Base class of operator-sequence expressions."""

    def __add__(self, other):
        other = _as_seq(other)
        if other is None:
            return NotImplemented
        return SeqSum(_sterms(self) + _sterms(other))

    def __radd__(self, other):
        other = _as_seq(other)
        if other is None:
            return NotImplemented
        return SeqSum(_sterms(other) + _sterms(self))

    def __sub__(self, other):
        other = _as_seq(other)
        if other is None:
            return NotImplemented
        return SeqSum(_sterms(self) + (SeqScale(-1.0, other),))

    def __rsub__(self, other):
        other = _as_seq(other)
        if other is None:
            return NotImplemented
        return SeqSum(_sterms(other) + (SeqScale(-1.0, self),))

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return SeqScale(other, self)
        other = _as_seq(other)
        if other is None:
            return NotImplemented
        return SeqProd(_sfactors(self) + _sfactors(other))

    def __rmul__(self, other):
        if isinstance(other, _SCALARS):
            return SeqScale(other, self)
        other = _as_seq(other)
        if other is None:
            return NotImplemented
        return SeqProd(_sfactors(other) + _sfactors(self))

    def __neg__(self):
        return SeqScale(-1.0, self)

    def __str__(self):
        return to_text(self)


def _as_seq(x):
    if isinstance(x, SequenceExpr):
        return x
    if isinstance(x, OperatorExpr):
        return Const(x)
    if isinstance(x, _SCALARS):
        return Const(Scalar(x))
    return None


def _sterms(e):
    return e.terms if isinstance(e, SeqSum) else (e,)


def _sfactors(e):
    return e.factors if isinstance(e, SeqProd) else (e,)


@dataclass(frozen=True, eq=True)
class Const(SequenceExpr):
    """The constant sequence ``A_n = A``."""

    op: OperatorExpr


@dataclass(frozen=True, eq=True)
class ProjSeq(SequenceExpr):
    """The projection sequence ``P_n = chi_[-n,n] I``."""


def _check_compact(K):
    if not is_compact(K):
        raise NotInAlgebra(f"lifted operator {to_text(K)} is not compact by construction")


@dataclass(frozen=True, eq=True)
class LiftPlus(SequenceExpr):
    """``V_n K V_{-n}``: a compact pushed to the right end of the window."""

    K: OperatorExpr

    def __post_init__(self):
        _check_compact(self.K)


@dataclass(frozen=True, eq=True)
class LiftMinus(SequenceExpr):
    """``V_{-n} K V_n``: a compact pushed to the left end of the window."""

    K: OperatorExpr

    def __post_init__(self):
        _check_compact(self.K)


@dataclass(frozen=True, eq=True)
class LiftH(SequenceExpr):
    """``U_{-t} Z_n K Z_n^{-1} U_t``: a compact spread into direction ``H(t)``."""

    t: float
    K: OperatorExpr

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        _check_compact(self.K)


@dataclass(frozen=True, eq=True)
class SeqSum(SequenceExpr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True, eq=True)
class SeqProd(SequenceExpr):
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))


@dataclass(frozen=True, eq=True)
class SeqScale(SequenceExpr):
    c: complex
    inner: SequenceExpr

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))


@dataclass(frozen=True, eq=True)
class FiniteSection(SequenceExpr):
    """``P_n A_n P_n + (I - P_n)`` for the inner sequence ``A``."""

    inner: SequenceExpr

    def __post_init__(self):
        if isinstance(self.inner, OperatorExpr):
            object.__setattr__(self, "inner", Const(self.inner))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

_CHI_PLUS = indicator(0.0, math.inf)
_CHI_MINUS = indicator(-math.inf, 0.0)
_CHI_UNIT = indicator(-1.0, 1.0)


def hankel(b):
    """The Hankel operator ``chi_+ W(b) chi_- J``."""
    if isinstance(b, str):
        b = symbol(b, var="xi")
    return Prod((Mult(_CHI_PLUS), Conv(b), Mult(_CHI_MINUS), Flip()))


def cauchy():
    """The Cauchy singular integral ``S = Conv(-sgn)``."""
    return Conv(symbol("-sgn(xi)", name="-sgn(xi)"))


def _l2_norm_sq(u):
    lo, hi = u.support
    if hi <= lo:
        return 0.0
    pts = [j.t for j in u.jumps if lo < j.t < hi]
    val, _ = integrate.quad(lambda x: abs(u.eval_unchecked(np.array([x]))[0]) ** 2, lo, hi,
                            points=pts or None, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def projection(u):
    """Rank-one orthogonal projection onto a real compactly supported ``u``."""
    if isinstance(u, str):
        u = symbol(u)
    if u.support is None:
        raise UnboundedSupport(f"{u.name} has no bounded support")
    nrm2 = _l2_norm_sq(u)
    if nrm2 == 0:
        raise ValueError("cannot project onto the zero function")
    return FiniteRank((((u * (1.0 / nrm2)).renamed(f"{u.name}/|{u.name}|^2"), u),))


def gaussian_pair(center=0.0, width=1.0):
    """Rank-one projection onto a Gaussian, truncated at twelve widths.

    The truncation error is below ``1e-31`` and gives the bounded support
    witness required of finite-rank data.
    """
    c, w = float(center), float(width)
    text = f"exp(-((x-({c!r}))/{w!r})^2/2)*chi[{c - 12 * w!r},{c + 12 * w!r})"
    g = symbol(text)
    return projection(g)


# ---------------------------------------------------------------------------
# directions and results
# ---------------------------------------------------------------------------

_DIR_TAGS = ("Wc", "Wminus", "Wplus", "H", "WStar", "HStar", "H0")


@dataclass(frozen=True, order=True)
class SnapshotDirection:
    """A snapshot direction; ``t`` is the parameter of ``H`` and ``HStar``."""

    tag: str
    t: float | None = None

    def __post_init__(self):
        if self.tag not in _DIR_TAGS:
            raise ValueError(f"unknown direction {self.tag!r}")
        if self.tag in ("H", "HStar"):
            if self.t is None:
                raise ValueError(f"{self.tag} needs a parameter")
            object.__setattr__(self, "t", float(self.t) + 0.0)
            if self.tag == "HStar" and not self.t > 0:
                raise ValueError("HStar(s) requires s > 0")
        elif self.t is not None:
            raise ValueError(f"{self.tag} takes no parameter")

    @property
    def starred(self):
        return self.tag in ("WStar", "HStar")

    @property
    def is_h(self):
        return self.tag in ("H", "HStar", "H0")

    def __str__(self):
        return self.tag if self.t is None else f"{self.tag}({self.t:g})"


Wc = SnapshotDirection("Wc")
Wminus = SnapshotDirection("Wminus")
Wplus = SnapshotDirection("Wplus")
WStar = SnapshotDirection("WStar")
H0 = SnapshotDirection("H0")


def H(t):
    """Direction ``H(t)``."""
    return SnapshotDirection("H", t)


def HStar(s):
    """Direction ``HStar(s)``, ``s > 0``."""
    return SnapshotDirection("HStar", s)


def parse_direction(text):
    """Parse ``"Wplus"``, ``"H(0.5)"`` or ``"HStar(2)"``."""
    text = text.strip()
    if "(" in text and text.endswith(")"):
        tag, arg = text[:-1].split("(", 1)
        return SnapshotDirection(tag.strip(), float(arg))
    return SnapshotDirection(text)


@dataclass(frozen=True)
class Single:
    """Snapshot that is a single operator."""

    expr: OperatorExpr
    direction: SnapshotDirection | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Block2x2:
    """Snapshot on ``L^2 x L^2`` given by four operator entries."""

    a11: OperatorExpr
    a12: OperatorExpr
    a21: OperatorExpr
    a22: OperatorExpr
    direction: SnapshotDirection | None = field(default=None, compare=False)

    @property
    def entries(self):
        return ((self.a11, self.a12), (self.a21, self.a22))

    @classmethod
    def diag(cls, a, d, direction=None):
        z = Scalar(0)
        return cls(a, z, z, d, direction)


_ZERO = Scalar(0)


# ---------------------------------------------------------------------------
# traversal helpers
# ---------------------------------------------------------------------------


def _walk(e):
    yield e
    if isinstance(e, (Sum, SeqSum)):
        for t in e.terms:
            yield from _walk(t)
    elif isinstance(e, (Prod, SeqProd)):
        for f in e.factors:
            yield from _walk(f)
    elif isinstance(e, (Scale, SeqScale)):
        yield from _walk(e.inner)
    elif isinstance(e, Const):
        yield from _walk(e.op)
    elif isinstance(e, (LiftPlus, LiftMinus, LiftH)):
        yield from _walk(e.K)
    elif isinstance(e, FiniteSection):
        yield from _walk(e.inner)


def has_flip(e):
    """True when the flip occurs anywhere in the expression."""
    return any(isinstance(n, Flip) for n in _walk(e))


def conv_symbols(e):
    """Convolution symbols occurring in ``e`` (in order, without repetition)."""
    out = []
    for n in _walk(e):
        if isinstance(n, Conv) and n.b not in out:
            out.append(n.b)
    return out


def mult_symbols(e):
    """Multiplication coefficients occurring in ``e``."""
    out = []
    for n in _walk(e):
        if isinstance(n, Mult) and n.a not in out:
            out.append(n.a)
    return out


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def _so_value(a, so):
    for key in (a, a.name):
        if key in so:
            return complex(so[key])
    raise RichnessRequired(
        f"coefficient {a.name} is slowly oscillating; supply an accumulation value"
    )


def _limits(a, so):
    if a.has_limits:
        return complex(a.limit_minus), complex(a.limit_plus)
    if a.cls.tag == "SO_inf":
        c = _so_value(a, so)
        return c, c
    raise NotInAlgebra(f"coefficient {a.name} of class {a.cls} has no limits at infinity")


def _h_param(d):
    return 0.0 if d.tag == "H0" else d.t


def _snap_op(e, d, so):
    """Generator rules for single directions, homomorphic over Sum/Prod/Scale."""
    if isinstance(e, (Identity, Scalar)):
        return e
    if isinstance(e, Mult):
        if d.tag == "Wc":
            return e
        lm, lp = _limits(e.a, so)
        if d.tag == "Wminus":
            return Scalar(lm)
        if d.tag == "Wplus":
            return Scalar(lp)
        if lm == lp:
            return Scalar(lm)
        return Mult(paired(lm, lp, var=e.a.var))
    if isinstance(e, Conv):
        if d.tag in ("Wc", "Wminus", "Wplus"):
            return e
        t = _h_param(d)
        b = e.b
        if b.constant is not None:
            return Scalar(b.constant)
        if b.cls.tag == "SO_at" and b.cls.at == t:
            raise RichnessRequired(f"symbol {b.name} oscillates at {t}")
        if t in b.jump_points:
            return Conv(paired(b.one_sided(t, -1), b.one_sided(t, 1), var=b.var))
        return Scalar(complex(b.eval(t)))
    if isinstance(e, Flip):
        if d.tag in ("Wc", "H0") or (d.tag == "H" and d.t == 0):
            return e
        raise FlipOutsideStarFramework(f"the flip has no {d} snapshot")
    if isinstance(e, (FiniteRank, SmoothKernel)):
        return e if d.tag == "Wc" else _ZERO
    if isinstance(e, Sum):
        return Sum(tuple(_snap_op(t, d, so) for t in e.terms))
    if isinstance(e, Prod):
        return Prod(tuple(_snap_op(f, d, so) for f in e.factors))
    if isinstance(e, Scale):
        return Scale(e.c, _snap_op(e.inner, d, so))
    raise NotInAlgebra(f"unknown operator node {type(e).__name__}")


def _proj_snap(d):
    if d.tag == "Wc":
        return Identity()
    if d.tag == "Wminus":
        return Mult(_CHI_PLUS)
    if d.tag == "Wplus":
        return Mult(_CHI_MINUS)
    return Mult(_CHI_UNIT)


def _same_h(t, d):
    return d.tag in ("H", "H0") and _h_param(d) == t


def _snap_seq(e, d, so):
    if isinstance(e, Const):
        return _snap_op(e.op, d, so)
    if isinstance(e, ProjSeq):
        return _proj_snap(d)
    if isinstance(e, LiftPlus):
        return e.K if d.tag == "Wplus" else _ZERO
    if isinstance(e, LiftMinus):
        return e.K if d.tag == "Wminus" else _ZERO
    if isinstance(e, LiftH):
        return e.K if _same_h(e.t, d) else _ZERO
    if isinstance(e, SeqSum):
        return Sum(tuple(_snap_seq(t, d, so) for t in e.terms))
    if isinstance(e, SeqProd):
        return Prod(tuple(_snap_seq(f, d, so) for f in e.factors))
    if isinstance(e, SeqScale):
        return Scale(e.c, _snap_seq(e.inner, d, so))
    if isinstance(e, FiniteSection):
        p = _proj_snap(d)
        x = _snap_seq(e.inner, d, so)
        return Sum((Prod((p, x, p)), Sum((Identity(), Scale(-1.0, p)))))
    raise NotInAlgebra(f"unknown sequence node {type(e).__name__}")


class _Block:
    """2x2 operator block used for the starred directions."""

    def __init__(self, a, b, c, d, diag=False):
        self.e = [[a, b], [c, d]]
        self.diag = diag

    @classmethod
    def diagonal(cls, a, d):
        return cls(a, _ZERO, _ZERO, d, diag=True)

    def __add__(self, other):
        return _Block(*(_zsum(self.e[i][j], other.e[i][j]) for i in (0, 1) for j in (0, 1)),
                      diag=self.diag and other.diag)

    def __mul__(self, other):
        if self.diag and other.diag:
            return _Block.diagonal(Prod((self.e[0][0], other.e[0][0])),
                                   Prod((self.e[1][1], other.e[1][1])))
        out = []
        for i in (0, 1):
            for j in (0, 1):
                out.append(_zsum(_zprod(self.e[i][0], other.e[0][j]),
                                 _zprod(self.e[i][1], other.e[1][j])))
        return _Block(*out)

    def scale(self, c):
        return _Block(*(_zscale(c, self.e[i][j]) for i in (0, 1) for j in (0, 1)), diag=self.diag)


def _zsum(a, b):
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    return Sum((a, b))


def _zprod(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    return Prod((a, b))


def _zscale(c, a):
    return _ZERO if a == _ZERO or c == 0 else Scale(c, a)


def _pair_dirs(d):
    if d.tag == "WStar":
        return Wplus, Wminus
    return H(d.t), H(-d.t)


def _block_op(e, d, so):
    if not has_flip(e):
        d1, d2 = _pair_dirs(d)
        return _Block.diagonal(_snap_op(e, d1, so), _snap_op(e, d2, so))
    if isinstance(e, Flip):
        return _Block(_ZERO, e, e, _ZERO)
    if isinstance(e, Sum):
        out = _block_op(e.terms[0], d, so)
        for t in e.terms[1:]:
            out = out + _block_op(t, d, so)
        return out
    if isinstance(e, Prod):
        out = _block_op(e.factors[0], d, so)
        for f in e.factors[1:]:
            out = out * _block_op(f, d, so)
        return out
    if isinstance(e, Scale):
        return _block_op(e.inner, d, so).scale(e.c)
    raise NotInAlgebra(f"flip inside unsupported node {type(e).__name__}")


def _block_seq(e, d, so):
    if not has_flip(e):
        d1, d2 = _pair_dirs(d)
        return _Block.diagonal(_snap_seq(e, d1, so), _snap_seq(e, d2, so))
    if isinstance(e, Const):
        return _block_op(e.op, d, so)
    if isinstance(e, SeqSum):
        out = _block_seq(e.terms[0], d, so)
        for t in e.terms[1:]:
            out = out + _block_seq(t, d, so)
        return out
    if isinstance(e, SeqProd):
        out = _block_seq(e.factors[0], d, so)
        for f in e.factors[1:]:
            out = out * _block_seq(f, d, so)
        return out
    if isinstance(e, SeqScale):
        return _block_seq(e.inner, d, so).scale(e.c)
    if isinstance(e, FiniteSection):
        p = _block_seq(ProjSeq(), d, so)
        x = _block_seq(e.inner, d, so)
        ident = _Block.diagonal(Identity(), Identity())
        return p * x * p + (ident + p.scale(-1.0))
    raise NotInAlgebra(f"flip inside unsupported node {type(e).__name__}")


def snapshot(seq, d, so_choices=None):
    """Symbolic snapshot of a sequence in a direction.

    Parameters
    ----------
    seq : SequenceExpr or OperatorExpr
        Operators are read as constant sequences.
    d : SnapshotDirection
    so_choices : dict, optional
        Accumulation values for slowly oscillating coefficients, keyed by
        the :class:`SymbolSpec` or its name.

    Returns
    -------
    Single or Block2x2

    Raises
    ------
    RichnessRequired
        A slowly oscillating coefficient without an accumulation value.
    FlipOutsideStarFramework
        The flip occurs and ``d`` is ``Wminus``, ``Wplus`` or ``H(t)``, t != 0.

    Examples
    --------
    >>> snapshot(ProjSeq(), Wminus).expr.a.name
    'chi[0.0,inf)'
    """
    if isinstance(seq, OperatorExpr):
        seq = Const(seq)
    so = dict(so_choices or {})
    flip = has_flip(seq)
    if flip and (d.tag in ("Wminus", "Wplus") or (d.tag == "H" and d.t != 0)):
        raise FlipOutsideStarFramework(
            f"direction {d} is not flip-symmetric; use WStar, HStar(s), Wc or H0"
        )
    if d.starred:
        if not flip:
            d1, d2 = _pair_dirs(d)
            return Block2x2.diag(_snap_seq(seq, d1, so), _snap_seq(seq, d2, so), direction=d)
        blk = _block_seq(seq, d, so)
        return Block2x2(blk.e[0][0], blk.e[0][1], blk.e[1][0], blk.e[1][1], direction=d)
    return Single(_snap_seq(seq, d, so), direction=d)


# ---------------------------------------------------------------------------
# active directions
# ---------------------------------------------------------------------------

DEFAULT_T_GRID = tuple(
    sorted(set(np.round(np.linspace(-20.0, 20.0, 257), 12).tolist())
           | {s * 20.0 * 2.0**k for k in range(1, 17) for s in (-1, 1)})
)


@dataclass(frozen=True)
class DirectionSet:
    """Finite set of directions to check.

    Attributes
    ----------
    directions : tuple of SnapshotDirection
    jump_points : tuple of float
        Jumps of the convolution symbols (treated exactly).
    continuum : tuple of float
        Grid representatives of the remaining ``H(t)`` continuum; verdicts
        minimise the scalar data over these points.
    """

    directions: tuple
    jump_points: tuple = ()
    continuum: tuple = ()

    def __iter__(self):
        return iter(self.directions)

    def __len__(self):
        return len(self.directions)

    def __contains__(self, d):
        return d in self.directions


def active_directions(seq, t_grid=DEFAULT_T_GRID):
    """Directions whose snapshots decide stability.

    Parameters
    ----------
    seq : SequenceExpr
    t_grid : sequence of float
        Must contain 0.

    Returns
    -------
    DirectionSet
        ``Wc, Wminus, Wplus`` (or ``Wc, WStar, H0`` when the flip occurs),
        every convolution jump point and lifted-compact point, and ``H(t)``
        for the grid points.  Without non-constant convolution symbols,
        ``H(t)`` does not depend on ``t`` off 0 and one representative is kept.
    """
    grid = sorted({float(t) + 0.0 for t in t_grid})
    if 0.0 not in grid:
        raise ValueError("t_grid must contain 0")
    syms = [b for b in conv_symbols(seq) if b.constant is None]
    jumps = sorted({j for b in syms for j in b.jump_points})
    lifts = sorted({n.t for n in _walk(seq) if isinstance(n, LiftH)})
    if syms:
        cont = [t for t in grid if t not in jumps]
    else:
        nonzero = sorted((t for t in grid if t != 0), key=lambda t: (abs(t), -t))
        cont = [0.0] + nonzero[:1]
    points = sorted(set(cont) | set(jumps) | set(lifts))
    if has_flip(seq):
        dirs = [Wc, WStar, H0]
        ss = sorted({abs(t) for t in points if t != 0})
        dirs += [HStar(s) for s in ss]
    else:
        dirs = [Wc, Wminus, Wplus] + [H(t) for t in points]
    return DirectionSet(tuple(dirs), tuple(jumps), tuple(cont))


# ---------------------------------------------------------------------------
# mu
# ---------------------------------------------------------------------------


def mu_of(seq):
    """The constant ``mu`` of a finite-section algebra element.

    ``FiniteSection`` leaves carry ``mu = 1``; constant scalar sequences
    ``c I`` carry ``c``; lifted compacts and ``P_n`` carry 0.  Sums, products
    and scalings combine additively and multiplicatively.

    Raises
    ------
    NotFiniteSectionAlgebra
        For constant sequences other than multiples of the identity.
    """
    if isinstance(seq, FiniteSection):
        return 1.0 + 0j
    if isinstance(seq, SeqSum):
        return complex(sum(mu_of(t) for t in seq.terms))
    if isinstance(seq, SeqProd):
        out = 1.0 + 0j
        for f in seq.factors:
            out *= mu_of(f)
        return out
    if isinstance(seq, SeqScale):
        return seq.c * mu_of(seq.inner)
    if isinstance(seq, (LiftPlus, LiftMinus, LiftH, ProjSeq)):
        return 0j
    if isinstance(seq, Const):
        if isinstance(seq.op, Identity):
            return 1.0 + 0j
        if isinstance(seq.op, Scalar):
            return seq.op.c
    raise NotFiniteSectionAlgebra(f"{to_text(seq)} is not in the finite-section algebra")


# ---------------------------------------------------------------------------
# dilation
# ---------------------------------------------------------------------------


def dilate(e, n):
    """Conjugate by the dilation: ``Z_n e Z_n^{-1}`` with ``(Z_n u)(x) = n^{-1/2} u(x/n)``.

    ``Mult(a)`` becomes ``Mult(a(x/n))``, ``Conv(b)`` becomes ``Conv(b(n xi))``,
    finite-rank data are dilated with the unitary scaling and kernels become
    ``k(x/n, y/n)/n``.  The flip commutes with dilations.
    """
    n = float(n)
    if n == 1:
        return e
    if isinstance(e, (Identity, Scalar, Flip)):
        return e
    if isinstance(e, Mult):
        return Mult(e.a.dilated(n))
    if isinstance(e, Conv):
        return Conv(e.b.dilated(1.0 / n))
    if isinstance(e, FiniteRank):
        s = n**-0.5
        return FiniteRank(tuple((u.dilated(n) * s, v.dilated(n) * s) for u, v in e.pairs))
    if isinstance(e, SmoothKernel):
        return SmoothKernel(e.k.dilated(n))
    if isinstance(e, Sum):
        return Sum(tuple(dilate(t, n) for t in e.terms))
    if isinstance(e, Prod):
        return Prod(tuple(dilate(f, n) for f in e.factors))
    if isinstance(e, Scale):
        return Scale(e.c, dilate(e.inner, n))
    raise NotInAlgebra(f"cannot dilate {type(e).__name__}")


# ---------------------------------------------------------------------------
# normal form
# ---------------------------------------------------------------------------

_MAX_MONOMIALS = 4096


def _is_unit(e):
    return isinstance(e, Identity)


def _normalize_word(coef, word):
    """Merge neighbouring factors of one monomial; return (coef, word) or None."""
    out = []
    for f in word:
        out.append(f)
        changed = True
        while changed and out:
            changed = False
            last = out[-1]
            if isinstance(last, Mult) and last.a.constant is not None:
                coef *= last.a.constant
                out.pop()
                changed = True
            elif isinstance(last, Conv) and last.b.constant is not None:
                coef *= last.b.constant
                out.pop()
                changed = True
            elif len(out) >= 2:
                prev = out[-2]
                if isinstance(prev, Mult) and isinstance(last, Mult):
                    out[-2:] = [Mult(_merged(prev.a, last.a))]
                    changed = True
                elif isinstance(prev, Conv) and isinstance(last, Conv):
                    out[-2:] = [Conv(_merged(prev.b, last.b))]
                    changed = True
                elif isinstance(prev, Flip) and isinstance(last, Flip):
                    out[-2:] = []
                    changed = True
                elif isinstance(prev, Flip) and isinstance(last, Mult):
                    out[-2:] = [Mult(last.a.reflected()), prev]
                    changed = True
                elif isinstance(prev, Flip) and isinstance(last, Conv):
                    out[-2:] = [Conv(last.b.reflected()), prev]
                    changed = True
            if out and isinstance(out[-1], (Mult, Conv)):
                s = out[-1].a if isinstance(out[-1], Mult) else out[-1].b
                if s.is_zero():
                    return None
    if coef == 0:
        return None
    return coef, tuple(out)


_INDICATOR = re.compile(r"chi\[[^,\]]+,[^)\]]+\)")


def _merged(a, b):
    if a.name == b.name and a.var == b.var and _INDICATOR.fullmatch(a.name):
        return a  # indicators are idempotent
    s = a * b
    if s.constant is None and s.is_zero():
        return constant(0.0, var=a.var)
    return s


def expand(e):
    """Expand into monomials ``[(coef, (factor, ...)), ...]``.

    Scalars are collected into the coefficient, neighbouring multiplications
    (and convolutions) are merged, flips are moved to the right past
    multiplications and convolutions, and zero monomials are dropped.
    Returns None when the expansion would exceed an internal size cap.
    """
    mons = _expand(e)
    if mons is None:
        return None
    acc = {}
    order = []
    for coef, word in mons:
        norm = _normalize_word(coef, word)
        if norm is None:
            continue
        c, w = norm
        if w not in acc:
            acc[w] = 0j
            order.append(w)
        acc[w] += c
    return [(acc[w], w) for w in order if acc[w] != 0]


def _expand(e):
    if isinstance(e, Identity):
        return [(1.0 + 0j, ())]
    if isinstance(e, Scalar):
        return [(e.c, ())] if e.c != 0 else []
    if isinstance(e, (Mult, Conv, Flip, FiniteRank, SmoothKernel)):
        return [(1.0 + 0j, (e,))]
    if isinstance(e, Scale):
        inner = _expand(e.inner)
        return None if inner is None else [(e.c * c, w) for c, w in inner]
    if isinstance(e, Sum):
        out = []
        for t in e.terms:
            m = _expand(t)
            if m is None:
                return None
            out += m
        return out
    if isinstance(e, Prod):
        out = [(1.0 + 0j, ())]
        for f in e.factors:
            m = _expand(f)
            if m is None or len(out) * len(m) > _MAX_MONOMIALS:
                return None
            out = [(c1 * c2, w1 + w2) for c1, w1 in out for c2, w2 in m]
            # merge eagerly to keep the expansion small
            merged = {}
            for c, w in out:
                norm = _normalize_word(c, w)
                if norm is None:
                    continue
                merged[norm[1]] = merged.get(norm[1], 0j) + norm[0]
            out = [(c, w) for w, c in merged.items() if c != 0]
        return out
    raise NotInAlgebra(f"cannot expand {type(e).__name__}")


def collect(monomials):
    """Rebuild an expression from monomials."""
    terms = []
    for c, w in monomials:
        if not w:
            terms.append(Scalar(c))
            continue
        body = w[0] if len(w) == 1 else Prod(w)
        terms.append(body if c == 1 else Scale(c, body))
    if not terms:
        return Scalar(0)
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def simplify(e):
    """Normal form of an operator expression (or a Block2x2 snapshot)."""
    if isinstance(e, Single):
        return Single(simplify(e.expr), e.direction)
    if isinstance(e, Block2x2):
        return Block2x2(*(simplify(x) for x in (e.a11, e.a12, e.a21, e.a22)), direction=e.direction)
    mons = expand(e)
    return e if mons is None else collect(mons)


def is_zero(e):
    """True when the expression simplifies to zero."""
    mons = expand(e)
    return mons is not None and not mons


# ---------------------------------------------------------------------------
# text
# ---------------------------------------------------------------------------


def _cfmt(c):
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:g}"
    return f"({c.real:g}{c.imag:+g}i)"


def to_text(e):
    """Readable one-line rendering."""
    if isinstance(e, Single):
        return to_text(e.expr)
    if isinstance(e, Block2x2):
        return "[[" + ", ".join(map(to_text, (e.a11, e.a12))) + "], [" + ", ".join(
            map(to_text, (e.a21, e.a22))) + "]]"
    if isinstance(e, Identity):
        return "I"
    if isinstance(e, Scalar):
        return _cfmt(e.c)
    if isinstance(e, Mult):
        return f'mult("{e.a.name}")'
    if isinstance(e, Conv):
        return f'conv("{e.b.name}")'
    if isinstance(e, Flip):
        return "J"
    if isinstance(e, FiniteRank):
        return "rank" + str(len(e.pairs)) + "(" + "; ".join(f"{u.name} (x) {v.name}" for u, v in e.pairs) + ")"
    if isinstance(e, SmoothKernel):
        return f'kernel("{e.k.name}")'
    if isinstance(e, (Sum, SeqSum)):
        return "(" + " + ".join(to_text(t) for t in e.terms) + ")"
    if isinstance(e, (Prod, SeqProd)):
        return "*".join(to_text(f) for f in e.factors)
    if isinstance(e, (Scale, SeqScale)):
        return f"{_cfmt(e.c)}*{to_text(e.inner)}"
    if isinstance(e, Const):
        return to_text(e.op)
    if isinstance(e, ProjSeq):
        return "P"
    if isinstance(e, LiftPlus):
        return f"liftplus({to_text(e.K)})"
    if isinstance(e, LiftMinus):
        return f"liftminus({to_text(e.K)})"
    if isinstance(e, LiftH):
        return f"lifth({e.t:g}, {to_text(e.K)})"
    if isinstance(e, FiniteSection):
        return f"FS({to_text(e.inner)})"
    return repr(e)
