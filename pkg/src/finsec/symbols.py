"""Scalar functions on the real line with function-class metadata.

A :class:`SymbolSpec` is used both as a coefficient ``a(x)`` of a
multiplication operator and as a Fourier multiplier ``b(xi)`` of a
convolution.  Symbols are usually built from a small expression grammar::

    2 + atan(x)          sgn(x)            chi[0,inf)
    exp(i*1.5*x)         (xi-i)/(xi+i)     sin(ln(1+ln(1+abs(x))))
    1.5 + 0.5*sgn(x-1)   bump(-3, 2)       chi[-1,1)(y)

so that jumps, limits at infinity and the class tag can be derived
mechanically.  Discontinuous primitives (``sgn`` and ``chi``) must act on an
affine function of the variable; their thresholds are the declared jump
points.  Jumps are never detected from samples.

Sampled suprema replace essential suprema throughout; the default density is
64 samples per unit length.
"""

import ast
import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    EmptySet,
    EvalAtJump,
    MissingLimits,
    NoConvergence,
    ParseError,
    UnknownSymbolFunction,
    UnsupportedSymbol,
)

__all__ = [
    "FunctionClass",
    "Jump",
    "SymbolSpec",
    "KernelSpec",
    "ValidationParams",
    "ValidationReport",
    "Cluster",
    "symbol",
    "kernel",
    "constant",
    "indicator",
    "paired",
    "from_callable",
    "oscillation",
    "validate_class",
    "pc_decomposition",
    "accumulation_values",
    "check_invariants",
]

TAGS = (
    "PC",
    "PC_at",
    "SO_at",
    "SO_inf",
    "Linf0",
    "BUC",
    "AP",
    "C_Rbar",
    "C_Rdot",
    "PiecewiseConstant",
)
_PARAM_TAGS = ("PC_at", "SO_at")
_NO_JUMP_TAGS = ("C_Rbar", "C_Rdot", "BUC", "AP", "SO_inf")

# relative size of a jump below which two one-sided values are treated as equal
_JUMP_RTOL = 1e-12
_LIMIT_ZERO = 1e-13


@dataclass(frozen=True)
class FunctionClass:
    """Class tag of a symbol.

    Parameters
    ----------
    tag : str
        One of ``PC, PC_at, SO_at, SO_inf, Linf0, BUC, AP, C_Rbar, C_Rdot,
        PiecewiseConstant``.
    at : float, optional
        The distinguished point for ``PC_at`` and ``SO_at``.
    """

    tag: str
    at: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown function class {self.tag!r}")
        if self.tag in _PARAM_TAGS and self.at is None:
            raise ValueError(f"{self.tag} needs a point")
        if self.tag not in _PARAM_TAGS and self.at is not None:
            raise ValueError(f"{self.tag} takes no point")

    def __str__(self):
        if self.at is None:
            return self.tag
        return f"{self.tag}({_fmt_real(self.at)})"

    @classmethod
    def parse(cls, text):
        """Parse ``"PC"`` or ``"SO_at(1.5)"``."""
        m = re.fullmatch(r"\s*([A-Za-z_]+)\s*(?:\(\s*([^)]*)\s*\))?\s*", text)
        if not m:
            raise ParseError(f"bad function class {text!r}")
        at = None if m.group(2) is None else float(complex(_const_value(m.group(2))).real)
        return cls(m.group(1), at)


@dataclass(frozen=True)
class Jump:
    """A declared jump ``(t, left, right)`` with ``left = f(t-0)``."""

    t: float
    left: complex
    right: complex


def _fmt_real(v):
    return repr(float(v)) if v != int(v) else str(int(v))


def _fmt_complex(c):
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    return repr(c)


# ---------------------------------------------------------------------------
# expression grammar
# ---------------------------------------------------------------------------

_UNKNOWN = object()


def _sgn(u):
    return np.sign(np.real(u)).astype(complex)


_FUNCS = {
    "sgn": _sgn,
    "sign": _sgn,
    "abs": np.abs,
    "atan": np.arctan,
    "arctan": np.arctan,
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "log": np.log,
    "sqrt": np.sqrt,
}
# functions with f(0) = 0, so supports are inherited from the argument
_ZERO_AT_ZERO = {"sgn", "sign", "abs", "atan", "arctan", "tanh", "sin", "sqrt"}


class _Node:
    """Node of a parsed symbol expression."""

    def children(self):
        return ()

    def free_vars(self):
        out = set()
        for c in self.children():
            out |= c.free_vars()
        return out

    def candidates(self):
        out = set()
        for c in self.children():
            out |= c.candidates()
        return out

    def traits(self):
        return frozenset()

    def affine(self, var):
        return None


class _Const(_Node):
    def __init__(self, value):
        self.value = complex(value) if not math.isinf(np.real(value)) else float(np.real(value))

    def ev(self, env, side=0):
        return np.asarray(self.value, dtype=complex) * _ones(env)

    def affine(self, var):
        return (0.0, self.value)

    def limit(self, sign):
        return self.value

    def support(self, var):
        return "empty" if self.value == 0 else None

    def traits(self):
        return frozenset({"ap", "pwc"})


class _Var(_Node):
    def __init__(self, name):
        self.name = name

    def ev(self, env, side=0):
        return np.asarray(env[self.name], dtype=complex)

    def free_vars(self):
        return {self.name}

    def affine(self, var):
        return (1.0, 0.0) if self.name == var else None

    def limit(self, sign):
        return sign * math.inf

    def support(self, var):
        return None


class _Neg(_Node):
    def __init__(self, a):
        self.a = a

    def children(self):
        return (self.a,)

    def ev(self, env, side=0):
        return -self.a.ev(env, side)

    def affine(self, var):
        af = self.a.affine(var)
        return None if af is None else (-af[0], -af[1])

    def limit(self, sign):
        v = self.a.limit(sign)
        return _UNKNOWN if v is _UNKNOWN else -v

    def support(self, var):
        return self.a.support(var)

    def traits(self):
        return self.a.traits()


class _Bin(_Node):
    _ops = {
        "+": lambda a, b: a + b,
        "-": lambda a, b: a - b,
        "*": lambda a, b: a * b,
        "/": lambda a, b: a / b,
        "**": lambda a, b: a**b,
    }

    def __init__(self, op, a, b):
        self.op, self.a, self.b = op, a, b

    def children(self):
        return (self.a, self.b)

    def ev(self, env, side=0):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self._ops[self.op](self.a.ev(env, side), self.b.ev(env, side))

    def affine(self, var):
        fa, fb = self.a.affine(var), self.b.affine(var)
        if fa is None or fb is None:
            return None
        if self.op == "+":
            return (fa[0] + fb[0], fa[1] + fb[1])
        if self.op == "-":
            return (fa[0] - fb[0], fa[1] - fb[1])
        if self.op == "*":
            if fa[0] == 0:
                return (fa[1] * fb[0], fa[1] * fb[1])
            if fb[0] == 0:
                return (fb[1] * fa[0], fb[1] * fa[1])
            return None
        if self.op == "/" and fb[0] == 0 and fb[1] != 0:
            return (fa[0] / fb[1], fa[1] / fb[1])
        return None

    def limit(self, sign):
        la, lb = self.a.limit(sign), self.b.limit(sign)
        if la is _UNKNOWN or lb is _UNKNOWN:
            return _UNKNOWN
        return _ext_arith(self.op, la, lb)

    def support(self, var):
        sa, sb = self.a.support(var), self.b.support(var)
        if self.op in ("+", "-"):
            if sa == "empty":
                return sb
            if sb == "empty":
                return sa
            if sa is None or sb is None:
                return None
            return (min(sa[0], sb[0]), max(sa[1], sb[1]))
        if self.op == "*":
            if sa == "empty" or sb == "empty":
                return "empty"
            if sa is None:
                return sb
            if sb is None:
                return sa
            lo, hi = max(sa[0], sb[0]), min(sa[1], sb[1])
            return "empty" if lo > hi else (lo, hi)
        if self.op == "/":
            return sa
        if self.op == "**":
            fb = self.b.affine(var)
            if fb is not None and fb[0] == 0 and np.real(fb[1]) > 0:
                return sa
        return None

    def traits(self):
        ta, tb = self.a.traits(), self.b.traits()
        out = set()
        if "log" in ta or "log" in tb:
            out.add("log")
        if self.op in ("+", "-", "*"):
            out |= ta & tb & {"ap", "pwc"}
        elif self.op == "/":
            if "pwc" in ta and "pwc" in tb:
                out.add("pwc")
            if "ap" in ta and isinstance(self.b, _Const):
                out.add("ap")
        elif self.op == "**":
            e = self.b.value if isinstance(self.b, _Const) else None
            if e is not None and e.imag == 0 and e.real >= 0 and e.real == int(e.real):
                out |= ta & {"ap", "pwc"}
        return frozenset(out)


def _ext_arith(op, a, b):
    """Arithmetic on limits that may be real infinities; ``_UNKNOWN`` if undefined."""
    try:
        if complex(a).imag == 0 and complex(b).imag == 0:
            a, b = float(np.real(a)), float(np.real(b))
            if op == "/":
                if math.isinf(a) and math.isinf(b):
                    return _UNKNOWN
                if b == 0:
                    return _UNKNOWN
                if math.isinf(b):
                    return 0.0
            if op == "**":
                if math.isinf(a) or math.isinf(b):
                    return _UNKNOWN
            r = _Bin._ops[op](a, b)
        else:
            if any(math.isinf(v) for v in (np.real(a), np.imag(a), np.real(b), np.imag(b))):
                return _UNKNOWN
            if op == "/" and b == 0:
                return _UNKNOWN
            r = _Bin._ops[op](complex(a), complex(b))
    except (ZeroDivisionError, OverflowError, ValueError):
        return _UNKNOWN
    if np.isnan(np.real(r)) or np.isnan(np.imag(r)):
        return _UNKNOWN
    return r


class _Func(_Node):
    def __init__(self, name, a, var):
        self.name, self.a, self.var = name, a, var
        if name in ("sgn", "sign"):
            af = a.affine(var)
            if af is None or np.imag(af[0]) != 0 or np.imag(af[1]) != 0:
                raise ParseError(f"{name}() needs a real affine argument of {var}")
            self._affine = (float(np.real(af[0])), float(np.real(af[1])))

    def children(self):
        return (self.a,)

    def ev(self, env, side=0):
        if self.name in ("sgn", "sign"):
            u = self.a.ev(_nudge(env, self.var, side, self._affine[0]))
        else:
            u = self.a.ev(env, side)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.asarray(_FUNCS[self.name](u), dtype=complex)

    def candidates(self):
        out = set(self.a.candidates())
        if self.name in ("sgn", "sign") and self._affine[0] != 0:
            out.add(-self._affine[1] / self._affine[0])
        return out

    def limit(self, sign):
        v = self.a.limit(sign)
        if v is _UNKNOWN:
            return _UNKNOWN
        re_, im_ = float(np.real(v)), float(np.imag(v))
        infinite = math.isinf(re_) or math.isinf(im_)
        if not infinite:
            with np.errstate(all="ignore"):
                r = complex(_FUNCS[self.name](np.asarray(complex(v))))
            return _UNKNOWN if np.isnan(r.real) or np.isnan(r.imag) else r
        if im_ != 0:
            return _UNKNOWN
        s = 1.0 if re_ > 0 else -1.0
        return {
            "sgn": s,
            "sign": s,
            "abs": math.inf,
            "atan": s * math.pi / 2,
            "arctan": s * math.pi / 2,
            "tanh": s,
            "exp": 0.0 if s < 0 else math.inf,
            "ln": math.inf if s > 0 else _UNKNOWN,
            "log": math.inf if s > 0 else _UNKNOWN,
            "sqrt": math.inf if s > 0 else _UNKNOWN,
        }.get(self.name, _UNKNOWN)

    def support(self, var):
        if self.name in _ZERO_AT_ZERO:
            return self.a.support(var)
        return None

    def traits(self):
        out = set(self.a.traits() & {"log"})
        if self.name in ("ln", "log"):
            out.add("log")
        if self.name in ("sgn", "sign"):
            out.add("pwc")
        af = self.a.affine(self.var)
        if af is not None:
            slope, off = complex(af[0]), complex(af[1])
            if self.name == "exp" and slope.real == 0 and off.real == 0:
                out.add("ap")
            if self.name in ("sin", "cos") and slope.imag == 0 and off.imag == 0:
                out.add("ap")
        if isinstance(self.a, _Const):
            out |= {"ap", "pwc"}
        return frozenset(out)


class _Chi(_Node):
    def __init__(self, lo, hi, a, var):
        self.lo, self.hi, self.a, self.var = float(lo), float(hi), a, var
        if not self.lo < self.hi:
            raise ParseError(f"empty indicator interval [{lo}, {hi})")
        af = a.affine(var)
        if af is None or np.imag(af[0]) != 0 or np.imag(af[1]) != 0:
            raise ParseError(f"chi[...] needs a real affine argument of {var}")
        self._affine = (float(np.real(af[0])), float(np.real(af[1])))

    def children(self):
        return (self.a,)

    def ev(self, env, side=0):
        u = np.real(self.a.ev(_nudge(env, self.var, side, self._affine[0])))
        return ((u >= self.lo) & (u < self.hi)).astype(complex)

    def candidates(self):
        alpha, beta = self._affine
        if alpha == 0:
            return set()
        return {(c - beta) / alpha for c in (self.lo, self.hi) if math.isfinite(c)}

    def limit(self, sign):
        v = self.a.limit(sign)
        if v is _UNKNOWN:
            return _UNKNOWN
        u = float(np.real(v))
        return 1.0 if self.lo <= u < self.hi or (u == math.inf and self.hi == math.inf) else 0.0

    def support(self, var):
        if var != self.var:
            return None
        alpha, beta = self._affine
        if alpha == 0 or not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            return None
        ends = sorted(((self.lo - beta) / alpha, (self.hi - beta) / alpha))
        return (ends[0], ends[1])

    def traits(self):
        return frozenset({"pwc"})


class _Bump(_Node):
    """Smooth bump ``exp(1 - 1/(1 - w^2))`` with ``w = (u - c)/r``, peak value 1."""

    def __init__(self, c, r, a, var):
        self.c, self.r, self.a, self.var = float(c), float(r), a, var
        if not self.r > 0:
            raise ParseError("bump radius must be positive")
        af = a.affine(var)
        if af is None or np.imag(af[0]) != 0 or af[0] == 0:
            raise ParseError(f"bump() needs a real affine argument of {var}")
        self._affine = (float(np.real(af[0])), float(np.real(af[1])))

    def children(self):
        return (self.a,)

    def ev(self, env, side=0):
        w = (np.real(self.a.ev(env)) - self.c) / self.r
        inside = np.abs(w) < 1
        out = np.zeros(np.shape(w), dtype=complex)
        wi = w[inside] if np.ndim(w) else w
        vals = np.exp(1.0 - 1.0 / (1.0 - wi**2))
        if np.ndim(w):
            out[inside] = vals
        elif inside:
            out = np.asarray(vals, dtype=complex)
        return out

    def limit(self, sign):
        return 0.0

    def support(self, var):
        if var != self.var:
            return None
        alpha, beta = self._affine
        ends = sorted(((self.c - self.r - beta) / alpha, (self.c + self.r - beta) / alpha))
        return (ends[0], ends[1])


def _ones(env):
    for v in env.values():
        return np.ones(np.shape(v))
    return np.asarray(1.0)


def _nudge(env, var, side, slope):
    if side == 0 or var not in env:
        return env
    x = np.asarray(env[var], dtype=float)
    eps = 1e-9 * (1.0 + np.abs(x))
    out = dict(env)
    out[var] = x + side * eps
    return out


_CHI_RE = re.compile(r"chi\s*[\[\(]\s*([^,\[\]\(\)]+?)\s*,\s*([^,\[\]\(\)]+?)\s*[\]\)]")


def _preprocess(text):
    return _CHI_RE.sub(r"chi(\1, \2)", text).replace("^", "**")


def _const_value(text):
    node = _parse_node(text, allowed=())[0]
    return node.ev({}).item() if not isinstance(node, _Const) else node.value


def _parse_node(text, allowed=("x", "xi"), default="x"):
    """Parse ``text`` into a node tree; return ``(node, main_var)``."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty symbol expression")
    src = _preprocess(text.strip())
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc.msg}", column=exc.offset) from None
    names = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}
    used = [v for v in allowed if v in names]
    if len(allowed) and set(allowed) == {"x", "xi"} and len(used) > 1:
        raise ParseError(f"symbol {text!r} mixes the variables x and xi")
    main = used[0] if used and set(allowed) == {"x", "xi"} else default
    if set(allowed) != {"x", "xi"}:
        main = default
    conv = _Converter(text, set(allowed), main)
    return conv(tree.body), main


class _Converter:
    def __init__(self, text, allowed, main):
        self.text, self.allowed, self.main = text, allowed, main

    def fail(self, node, msg, exc=ParseError):
        raise exc(f"{msg} in {self.text!r}", column=getattr(node, "col_offset", 0) + 1)

    def const(self, node):
        out = self(node)
        if out.free_vars():
            self.fail(node, "expected a constant")
        return complex(out.ev({}).item()) if not isinstance(out, _Const) else out.value

    def __call__(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                self.fail(node, "unexpected literal")
            return _Const(node.value)
        if isinstance(node, ast.Name):
            if node.id in self.allowed:
                return _Var(node.id)
            special = {"pi": math.pi, "e": math.e, "i": 1j, "inf": math.inf}
            if node.id in special:
                return _Const(special[node.id])
            self.fail(node, f"unknown name {node.id!r}")
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                a = self(node.operand)
                return _Const(-a.value) if isinstance(a, _Const) else _Neg(a)
            if isinstance(node.op, ast.UAdd):
                return self(node.operand)
            self.fail(node, "unsupported unary operator")
        if isinstance(node, ast.BinOp):
            ops = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Pow: "**"}
            op = ops.get(type(node.op))
            if op is None:
                self.fail(node, "unsupported operator")
            return _Bin(op, self(node.left), self(node.right))
        if isinstance(node, ast.Call):
            return self.call(node)
        self.fail(node, "unsupported syntax")

    def call(self, node):
        if node.keywords:
            self.fail(node, "keyword arguments are not allowed")
        func = node.func
        # chi(lo, hi)(u) and bump(c, r)(u) with an explicit argument
        if isinstance(func, ast.Call):
            if len(node.args) != 1:
                self.fail(node, "expected one argument")
            return self.param_call(func, self(node.args[0]))
        if not isinstance(func, ast.Name):
            self.fail(node, "unsupported call")
        if func.id in ("chi", "bump"):
            return self.param_call(node, _Var(self.main))
        if func.id not in _FUNCS:
            self.fail(node, f"unknown function {func.id!r}", UnknownSymbolFunction)
        if len(node.args) != 1:
            self.fail(node, f"{func.id}() takes one argument")
        return _Func(func.id, self(node.args[0]), self.main if self.main in self.allowed else self._var_of(node))

    def _var_of(self, node):
        names = [n.id for n in ast.walk(node) if isinstance(n, ast.Name) and n.id in self.allowed]
        return names[0] if names else self.main

    def param_call(self, node, arg):
        func = node.func
        if not isinstance(func, ast.Name) or func.id not in ("chi", "bump"):
            self.fail(node, "unsupported call", UnknownSymbolFunction)
        if len(node.args) != 2:
            self.fail(node, f"{func.id} takes two parameters")
        p, q = (self.const(a) for a in node.args)
        if np.imag(p) != 0 or np.imag(q) != 0:
            self.fail(node, f"{func.id} parameters must be real")
        var = next(iter(arg.free_vars()), self.main)
        if func.id == "chi":
            return _Chi(np.real(p), np.real(q), arg, var)
        return _Bump(np.real(p), np.real(q), arg, var)


# ---------------------------------------------------------------------------
# symbol specs
# ---------------------------------------------------------------------------


class _NodeEvaluator:
    """Callable ``(x, side=0)`` evaluating a parsed tree in one variable."""

    def __init__(self, node, var):
        self.node, self.var = node, var

    def __call__(self, x, side=0):
        x = np.asarray(x, dtype=float)
        return self.node.ev({self.var: x}, side)


class _Combined:
    """Pointwise combination of two evaluators (or of one evaluator and a scalar)."""

    def __init__(self, op, a, b):
        self.op, self.a, self.b = op, a, b

    def __call__(self, x, side=0):
        a = self.a(x, side) if callable(self.a) else self.a
        b = self.b(x, side) if callable(self.b) else self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(_Bin._ops[self.op](a, b), dtype=complex)


class _Dilated:
    def __init__(self, f, factor):
        self.f, self.factor = f, factor

    def __call__(self, x, side=0):
        s = side if self.factor > 0 else -side
        return self.f(np.asarray(x, dtype=float) / self.factor, s)


class _Wrapped:
    """Adapter for plain callables ``f(x)`` supplied by users."""

    def __init__(self, f):
        self.f = f

    def __call__(self, x, side=0):
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=complex)


@dataclass(frozen=True, eq=True)
class SymbolSpec:
    """A scalar function on the line with class, limits and jumps.

    Parameters
    ----------
    name : str
        Source text or alias; used for display and equality.
    evaluator : callable
        ``evaluator(x, side=0)`` returns complex values.  ``side = -1/+1``
        requests one-sided values at the declared jumps.
    cls : FunctionClass
        Class tag.
    limit_minus, limit_plus : complex or None
        Values at minus and plus infinity, when they exist.
    jumps : tuple of Jump
        Declared jumps, strictly sorted by ``t``.
    multiplier_grade : {"all_p", "p2_only"}
        Declarative multiplier grade.
    var : str
        Name of the variable (``x`` for coefficients, ``xi`` for symbols).
    support : tuple or None
        Bounded hull of the support, when a witness is available.
    traits : frozenset
        Grammar traits (``ap``, ``pwc``, ``log``) used by the classifier.
    constant : complex or None
        The constant value when the symbol has no variable.
    """

    name: str
    evaluator: Callable = field(compare=False, repr=False)
    cls: FunctionClass = FunctionClass("BUC")
    limit_minus: complex | None = None
    limit_plus: complex | None = None
    jumps: tuple = ()
    multiplier_grade: str = "all_p"
    var: str = field(default="x", compare=False)
    support: tuple | None = field(default=None, compare=False, repr=False)
    traits: frozenset = field(default=frozenset(), compare=False, repr=False)
    constant: complex | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        ts = [j.t for j in self.jumps]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("jumps must be strictly sorted")
        for j in self.jumps:
            if j.left == j.right:
                raise ValueError(f"jump at {j.t} has equal one-sided values")
        if self.cls.tag == "Linf0" and not (
            self.limit_minus is not None
            and self.limit_plus is not None
            and abs(self.limit_minus) <= _LIMIT_ZERO
            and abs(self.limit_plus) <= _LIMIT_ZERO
        ):
            raise ValueError("Linf0 symbols have zero limits at infinity")
        if self.cls.tag in _NO_JUMP_TAGS and self.jumps:
            raise ValueError(f"{self.cls.tag} symbols have no jumps")
        if self.multiplier_grade not in ("all_p", "p2_only"):
            raise ValueError("multiplier_grade must be 'all_p' or 'p2_only'")

    # evaluation ---------------------------------------------------------
    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate off the jump set.

        Raises
        ------
        EvalAtJump
            If any requested point is a declared jump.
        """
        arr = np.asarray(x, dtype=float)
        if self.jumps and np.any(np.isin(arr, [j.t for j in self.jumps])):
            raise EvalAtJump(f"{self.name} evaluated at a jump point")
        out = self.evaluator(arr)
        return out.item() if np.ndim(out) == 0 else out

    def eval_unchecked(self, x):
        """Evaluate without the jump check (vectorised, complex array)."""
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=complex)

    def one_sided(self, t, side):
        """Limit of the symbol at ``t`` from the left (``side=-1``) or right."""
        for j in self.jumps:
            if j.t == t:
                return j.left if side < 0 else j.right
        return complex(self.evaluator(np.asarray(float(t)), side))

    @property
    def function_class(self):
        return self.cls

    @property
    def has_limits(self):
        return self.limit_minus is not None and self.limit_plus is not None

    @property
    def jump_points(self):
        return tuple(j.t for j in self.jumps)

    def is_constant(self):
        return self.constant is not None

    def is_zero(self):
        """True when the symbol is identically zero (checked structurally)."""
        if self.constant is not None:
            return self.constant == 0
        if "pwc" in self.traits and self.has_limits:
            return all(abs(v) == 0 for v in self._piece_values())
        return False

    def _piece_values(self):
        """Values on every piece of a piecewise constant symbol."""
        ts = list(self.jump_points)
        vals = [self.limit_minus, self.limit_plus]
        for j in self.jumps:
            vals += [j.left, j.right]
        for a, b in zip(ts, ts[1:]):
            vals.append(complex(self.evaluator(np.asarray(0.5 * (a + b)))))
        if not ts:
            vals.append(complex(self.evaluator(np.asarray(0.5))))
        return vals

    # transformations ------------------------------------------------------
    def dilated(self, factor):
        """The symbol ``x -> f(x / factor)`` for ``factor > 0``."""
        factor = float(factor)
        if factor <= 0:
            raise ValueError("dilation factor must be positive")
        if factor == 1:
            return self
        sup = None if self.support is None else (self.support[0] * factor, self.support[1] * factor)
        return SymbolSpec(
            name=f"({self.name})[{self.var}/{_fmt_real(factor)}]",
            evaluator=_Dilated(self.evaluator, factor),
            cls=_scaled_class(self.cls, factor),
            limit_minus=self.limit_minus,
            limit_plus=self.limit_plus,
            jumps=tuple(Jump(j.t * factor, j.left, j.right) for j in self.jumps),
            multiplier_grade=self.multiplier_grade,
            var=self.var,
            support=sup,
            traits=self.traits,
            constant=self.constant,
        )

    def reflected(self):
        """The symbol ``x -> f(-x)``."""
        sup = None if self.support is None else (-self.support[1], -self.support[0])
        cls = self.cls if self.cls.at is None else FunctionClass(self.cls.tag, -self.cls.at)
        return SymbolSpec(
            name=f"({self.name})[-{self.var}]",
            evaluator=_Dilated(self.evaluator, -1.0),
            cls=cls,
            limit_minus=self.limit_plus,
            limit_plus=self.limit_minus,
            jumps=tuple(Jump(-j.t, j.right, j.left) for j in reversed(self.jumps)),
            multiplier_grade=self.multiplier_grade,
            var=self.var,
            support=sup,
            traits=self.traits,
            constant=self.constant,
        )

    def renamed(self, name):
        """Copy carrying a different display name (alias)."""
        return _replace(self, name=name)

    # arithmetic -----------------------------------------------------------
    def _binary(self, op, other, reverse=False):
        if isinstance(other, SymbolSpec):
            a, b = (other, self) if reverse else (self, other)
            return _combine(op, a, b)
        if isinstance(other, (int, float, complex, np.number)):
            c = constant(other, var=self.var)
            a, b = (c, self) if reverse else (self, c)
            return _combine(op, a, b)
        return NotImplemented

    def __add__(self, other):
        return self._binary("+", other)

    def __radd__(self, other):
        return self._binary("+", other, reverse=True)

    def __sub__(self, other):
        return self._binary("-", other)

    def __rsub__(self, other):
        return self._binary("-", other, reverse=True)

    def __mul__(self, other):
        return self._binary("*", other)

    def __rmul__(self, other):
        return self._binary("*", other, reverse=True)

    def __truediv__(self, other):
        return self._binary("/", other)

    def __neg__(self):
        return _combine("*", constant(-1.0, var=self.var), self)

    def __str__(self):
        return self.name


def _replace(s, **kw):
    data = {f: getattr(s, f) for f in s.__dataclass_fields__}
    data.update(kw)
    return SymbolSpec(**data)


def _scaled_class(cls, factor):
    if cls.at is None:
        return cls
    return FunctionClass(cls.tag, cls.at * factor)


def _combine(op, a, b):
    if a.var != b.var:
        raise ValueError(f"cannot combine symbols in {a.var} and {b.var}")
    name = f"({a.name}){op}({b.name})" if op != "+" else f"{a.name} + {b.name}"
    if a.constant is not None and b.constant is not None:
        return constant(_Bin._ops[op](a.constant, b.constant), var=a.var, name=name)
    ev = _Combined(op, a.evaluator, b.evaluator)
    lm = _combine_limit(op, a.limit_minus, b.limit_minus)
    lp = _combine_limit(op, a.limit_plus, b.limit_plus)
    cands = sorted(set(a.jump_points) | set(b.jump_points))
    jumps = _jumps_from(ev, cands)
    traits = set()
    if op in ("+", "-", "*"):
        traits |= a.traits & b.traits & {"ap", "pwc"}
    if "log" in a.traits or "log" in b.traits:
        traits.add("log")
    traits = frozenset(traits)
    cls = _classify(lm, lp, jumps, traits, name)
    sup = None
    sa, sb = a.support, b.support
    if op == "*":
        if sa is not None and sb is not None:
            sup = (max(sa[0], sb[0]), min(sa[1], sb[1]))
        else:
            sup = sa if sa is not None else sb
        if a.constant == 0 or b.constant == 0:
            sup = (0.0, 0.0)
    elif op in ("+", "-") and sa is not None and sb is not None:
        sup = (min(sa[0], sb[0]), max(sa[1], sb[1]))
    elif op == "/":
        sup = sa
    grade = "all_p" if a.multiplier_grade == b.multiplier_grade == "all_p" else "p2_only"
    return SymbolSpec(name, ev, cls, lm, lp, jumps, _grade_for(cls, grade), a.var, sup, traits)


def _combine_limit(op, x, y):
    if x is None or y is None:
        return None
    if op == "/" and y == 0:
        return None
    return complex(_Bin._ops[op](complex(x), complex(y)))


def _jumps_from(ev, candidates):
    out = []
    for t in sorted(candidates):
        left = complex(ev(np.asarray(float(t)), -1))
        right = complex(ev(np.asarray(float(t)), 1))
        scale = 1.0 + abs(left) + abs(right)
        if abs(left - right) > _JUMP_RTOL * scale:
            out.append(Jump(float(t) + 0.0, left, right))
    return tuple(out)


def _classify(lm, lp, jumps, traits, name=""):
    if lm is not None and lp is not None:
        if abs(lm) <= _LIMIT_ZERO and abs(lp) <= _LIMIT_ZERO:
            return FunctionClass("Linf0")
        if jumps:
            if "pwc" in traits:
                return FunctionClass("PiecewiseConstant")
            if len(jumps) == 1 and abs(lm - lp) <= _LIMIT_ZERO:
                return FunctionClass("PC_at", jumps[0].t)
            return FunctionClass("PC")
        return FunctionClass("C_Rdot") if abs(lm - lp) <= _LIMIT_ZERO else FunctionClass("C_Rbar")
    if jumps:
        raise UnsupportedSymbol(
            f"{name!r} has jumps but no limits at infinity; only piecewise continuous "
            "symbols may jump"
        )
    if "ap" in traits:
        return FunctionClass("AP")
    if "log" in traits:
        return FunctionClass("SO_inf")
    return FunctionClass("BUC")


def _grade_for(cls, grade="all_p"):
    if cls.tag in ("BUC", "SO_inf", "SO_at"):
        return "p2_only"
    return grade


def _numeric_limit(f, sign):
    xs = sign * np.array([1e8, 1e10, 1e12, 1e14])
    with np.errstate(all="ignore"):
        v = np.asarray(f(xs), dtype=complex)
    if not np.all(np.isfinite(v)):
        return None
    ref = v[-1]
    if np.max(np.abs(v - ref)) <= 1e-6 * max(1.0, abs(ref)):
        return _snap(complex(ref))
    return None


def _snap(v):
    """Drop rounding-level real or imaginary parts of a numerically found limit."""
    tiny = 1e-12 * max(1.0, abs(v))
    return complex(0.0 if abs(v.real) < tiny else v.real, 0.0 if abs(v.imag) < tiny else v.imag)


def _limit_of(node, ev, sign):
    v = node.limit(sign)
    if v is _UNKNOWN:
        return _numeric_limit(ev, sign)
    v = complex(v)
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        return None
    return 0j if abs(v) < 1e-15 else v


def _bounded(ev):
    lin = (np.arange(-200 * 64, 200 * 64) + 0.5) / 64 + 1e-7
    tail = np.logspace(2.3, 15, 1200)
    xs = np.concatenate([lin, tail, -tail])
    with np.errstate(all="ignore"):
        v = np.asarray(ev(xs), dtype=complex)
    return bool(np.all(np.isfinite(v)) and np.max(np.abs(v)) < 1e12)


def symbol(text, *, name=None, cls=None, var=None):
    """Parse a symbol expression into a :class:`SymbolSpec`.

    Parameters
    ----------
    text : str
        Expression in one variable (``x`` or ``xi``).
    name : str, optional
        Alias; defaults to the stripped source text.
    cls : FunctionClass or str, optional
        Declared class overriding the derived tag (checked for consistency).
    var : str, optional
        Variable name to use when the expression is constant.

    Returns
    -------
    SymbolSpec

    Raises
    ------
    ParseError, UnknownSymbolFunction
        Malformed text.
    UnsupportedSymbol
        Unbounded symbols or jumps without limits at infinity.

    Examples
    --------
    >>> s = symbol("2 + atan(x)")
    >>> str(s.cls), round(s.limit_plus.real, 6)
    ('C_Rbar', 3.570796)
    """
    node, main = _parse_node(text, default=var or "x")
    if var is not None and main != var:
        raise ParseError(f"symbol {text!r} uses {main}, expected {var}")
    label = name or " ".join(text.split())
    if not node.free_vars():
        c = complex(node.ev({}).item())
        if not np.isfinite(c):
            raise UnsupportedSymbol(f"{text!r} is not finite")
        return constant(c, var=main, name=label)
    ev = _NodeEvaluator(node, main)
    if not _bounded(ev):
        raise UnsupportedSymbol(f"{text!r} is not bounded on the real line")
    lm, lp = _limit_of(node, ev, -1.0), _limit_of(node, ev, 1.0)
    jumps = _jumps_from(ev, node.candidates())
    traits = node.traits()
    derived = _classify(lm, lp, jumps, traits, text)
    if cls is not None:
        cls = FunctionClass.parse(cls) if isinstance(cls, str) else cls
    else:
        cls = derived
    sup = node.support(main)
    sup = (0.0, 0.0) if sup == "empty" else sup
    return SymbolSpec(label, ev, cls, lm, lp, jumps, _grade_for(cls), main, sup, traits)


class _ConstEval:
    def __init__(self, c):
        self.c = complex(c)

    def __call__(self, x, side=0):
        return np.full(np.shape(x), self.c, dtype=complex)


def constant(c, var="x", name=None):
    """The constant symbol ``c``."""
    c = complex(c)
    cls = FunctionClass("Linf0") if c == 0 else FunctionClass("C_Rdot")
    label = name or _fmt_complex(c)
    return SymbolSpec(
        label, _ConstEval(c), cls, c, c, (), "all_p", var, (0.0, 0.0) if c == 0 else None,
        frozenset({"ap", "pwc"}), c,
    )


def indicator(lo, hi, var="x"):
    """Indicator of ``[lo, hi)``; infinite ends are allowed."""
    lo_s = "-inf" if lo == -math.inf else repr(float(lo))
    hi_s = "inf" if hi == math.inf else repr(float(hi))
    return symbol(f"chi[{lo_s},{hi_s})", var=var)


def paired(c_minus, c_plus, var="x"):
    """The symbol ``c_minus * chi_- + c_plus * chi_+`` (jump at 0).

    Reduces to a constant when the two values agree.
    """
    c_minus, c_plus = complex(c_minus), complex(c_plus)
    if c_minus == c_plus:
        return constant(c_minus, var=var)
    text = f"{_fmt_complex(c_minus)}*chi[-inf,0) + {_fmt_complex(c_plus)}*chi[0,inf)"
    return symbol(text, var=var)


class _SteppedEval:
    def __init__(self, f, ts, sides):
        self.f, self.ts, self.sides = f, ts, sides

    def __call__(self, x, side=0):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.f(x), dtype=complex)
        if side != 0 and self.ts:
            idx = np.isin(x, self.ts)
            if np.any(idx):
                vals = np.array([self.sides[t][0 if side < 0 else 1] for t in np.atleast_1d(x)[np.atleast_1d(idx)]])
                out = np.array(out, dtype=complex, copy=True)
                if np.ndim(out):
                    out[idx] = vals
                else:
                    out = np.asarray(vals[0])
        return out


def from_callable(name, f, cls, limit_minus=None, limit_plus=None, jumps=(), var="x",
                  multiplier_grade=None):
    """Wrap a plain vectorised callable with explicitly declared metadata.

    Parameters
    ----------
    name : str
        Label.
    f : callable
        ``f(x)`` on arrays, defined off the jumps.
    cls : FunctionClass or str
    limit_minus, limit_plus : complex, optional
    jumps : sequence of (t, left, right)
    var : str
    multiplier_grade : str, optional
    """
    cls = FunctionClass.parse(cls) if isinstance(cls, str) else cls
    js = tuple(Jump(float(t), complex(l), complex(r)) for t, l, r in sorted(jumps))
    sides = {j.t: (j.left, j.right) for j in js}
    ev = _SteppedEval(f, [j.t for j in js], sides)
    lm = None if limit_minus is None else complex(limit_minus)
    lp = None if limit_plus is None else complex(limit_plus)
    return SymbolSpec(name, ev, cls, lm, lp, js, multiplier_grade or _grade_for(cls), var)


@dataclass(frozen=True)
class KernelSpec:
    """A two-variable kernel ``k(x, y)`` with a bounded support box.

    Parameters
    ----------
    name : str
    evaluator : callable
        ``evaluator(x, y)`` with broadcasting.
    support : tuple
        ``((x_lo, x_hi), (y_lo, y_hi))`` or None when no witness exists.
    """

    name: str
    evaluator: Callable = field(compare=False, repr=False)
    support: tuple | None = field(default=None, compare=False)

    def __call__(self, x, y):
        return self.evaluator(x, y)

    def dilated(self, factor):
        """Kernel of ``Z_n K Z_n^{-1}``: ``k(x/n, y/n) / n``."""
        factor = float(factor)
        sup = None
        if self.support is not None:
            sup = tuple((a * factor, b * factor) for a, b in self.support)
        return KernelSpec(f"({self.name})[/{_fmt_real(factor)}]", _KernelDilated(self.evaluator, factor), sup)


class _KernelEval:
    def __init__(self, node):
        self.node = node

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self.node.ev({"x": x, "y": y})


class _KernelDilated:
    def __init__(self, f, factor):
        self.f, self.factor = f, factor

    def __call__(self, x, y):
        return self.f(np.asarray(x) / self.factor, np.asarray(y) / self.factor) / self.factor


def kernel(text, name=None):
    """Parse a kernel expression in ``x`` and ``y``.

    The support box is derived from ``bump`` and bounded ``chi`` factors,
    e.g. ``"bump(0,1)(x)*bump(0,1)(y)*exp(-(x-y)^2)"``.
    """
    node, _ = _parse_node(text, allowed=("x", "y"), default="x")
    sx, sy = node.support("x"), node.support("y")
    sup = None
    if sx == "empty" or sy == "empty":
        sup = ((0.0, 0.0), (0.0, 0.0))
    elif sx is not None and sy is not None:
        sup = (tuple(sx), tuple(sy))
    return KernelSpec(name or " ".join(text.split()), _KernelEval(node), sup)


# ---------------------------------------------------------------------------
# oscillation and class validation
# ---------------------------------------------------------------------------


def _as_intervals(spec):
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] > 2 or arr.shape[0] == 0:
        raise ValueError("set must be one or two closed intervals (a, b)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("oscillation sets must be bounded")
    return [(min(a, b), max(a, b)) for a, b in arr]


def _samples(intervals, spu, jumps=()):
    density = 2 ** math.ceil(math.log2(spu))
    parts = []
    for a, b in intervals:
        n = int(math.floor((b - a) * density))
        parts.append(a + np.arange(n + 1) / density)
        parts.append(np.array([b]))
    pts = np.concatenate(parts)
    if len(jumps):
        pts = pts[~np.isin(pts, jumps)]
    return pts


def _diameter(v):
    v = np.asarray(v, dtype=complex).ravel()
    if v.size < 2:
        return 0.0
    if np.max(np.abs(v.imag)) == 0:
        return float(np.max(v.real) - np.min(v.real))
    # the farthest pair lies on the convex hull
    pts = np.column_stack([v.real, v.imag])
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear samples: keep them all
    if len(pts) <= 4096:
        w = pts[:, 0] + 1j * pts[:, 1]
        return float(np.max(np.abs(w[:, None] - w[None, :])))
    # many hull vertices (samples on a circle): extremes along a fine fan of
    # directions, exact on the chosen candidates and within cos(pi/1442) overall
    angles = np.linspace(0.0, np.pi, 721, endpoint=False)
    cand = set()
    for chunk in np.array_split(angles, 16):
        proj = np.outer(np.cos(chunk), pts[:, 0]) + np.outer(np.sin(chunk), pts[:, 1])
        cand.update(np.argmax(proj, axis=1).tolist())
        cand.update(np.argmin(proj, axis=1).tolist())
    w = pts[sorted(cand)]
    w = w[:, 0] + 1j * w[:, 1]
    return float(np.max(np.abs(w[:, None] - w[None, :])))


def oscillation(s, intervals, samples_per_unit=64):
    """Sampled oscillation ``sup |f(t) - f(s)|`` over up to two intervals.

    Parameters
    ----------
    s : SymbolSpec
    intervals : (a, b) or sequence of two (a, b)
        Closed bounded intervals.
    samples_per_unit : int
        At least 4.  The sample lattice uses the next power of two, so sample
        sets are nested and the result is nondecreasing in this argument.

    Returns
    -------
    float

    Raises
    ------
    EmptySet
        If the total length is zero.
    """
    if samples_per_unit < 4:
        raise ValueError("samples_per_unit must be at least 4")
    iv = _as_intervals(intervals)
    if sum(b - a for a, b in iv) <= 0:
        raise EmptySet("oscillation over a set of zero length")
    pts = _samples(iv, samples_per_unit, s.jump_points)
    return _diameter(s.eval_unchecked(pts))


@dataclass(frozen=True)
class ValidationParams:
    """Parameters of :func:`validate_class`."""

    x_list: tuple = (10.0, 100.0, 1000.0, 10000.0)
    r_list: tuple = (0.5,)
    tol: float = 0.1
    samples_per_unit: int = 64


@dataclass
class ValidationReport:
    """Outcome of a class check with the measured tables.

    Attributes
    ----------
    passed : bool
    cls : FunctionClass
    rows : list of dict
        One row per measurement (``check``, parameters, ``value``).
    notes : list of str
    """

    passed: bool
    cls: FunctionClass
    rows: list
    notes: list = field(default_factory=list)


def _so_rows(s, params, center=None):
    rows, ok = [], True
    for r in params.r_list:
        traj = []
        for x in params.x_list:
            if center is None:
                iv = [(-x, -r * x), (r * x, x)]
                spu = params.samples_per_unit
            else:
                rad = 1.0 / x
                iv = [(center - rad, center - r * rad), (center + r * rad, center + rad)]
                spu = max(params.samples_per_unit, int(64 / (rad * (1 - r))))
            val = oscillation(s, iv, spu)
            traj.append(val)
            rows.append({"check": "osc", "x": x, "r": r, "value": val})
        # ends below tol without sustained growth; a factor 2 over the earlier
        # peak absorbs phase wobble of the sampled ring
        if not (traj[-1] <= params.tol and traj[-1] <= 2.0 * max(traj[:-1], default=traj[-1])):
            ok = False
    return rows, ok


def _limit_rows(s, params):
    rows, ok = [], True
    for sign, lim in ((-1, s.limit_minus), (1, s.limit_plus)):
        if lim is None:
            rows.append({"check": "limit", "side": sign, "value": math.inf})
            ok = False
            continue
        errs = []
        for x in params.x_list:
            # worst deviation over [x, 2x] on the given side
            pts = sign * _samples([(x, 2 * x)], params.samples_per_unit, ())
            pts = pts[~np.isin(pts, s.jump_points)]
            err = float(np.max(np.abs(s.eval_unchecked(pts) - lim)))
            errs.append(err)
            rows.append({"check": "limit", "side": sign, "x": x, "value": err})
        if not errs[-1] <= params.tol:
            ok = False
    return rows, ok


def _jump_rows(s, params):
    rows, ok = [], True
    deltas = 10.0 ** -np.arange(1, 9)
    for j in s.jumps:
        for side, target in ((-1, j.left), (1, j.right)):
            errs = np.abs(s.eval_unchecked(j.t + side * deltas) - target)
            for d, e in zip(deltas, errs):
                rows.append({"check": "jump", "t": j.t, "side": side, "delta": d, "value": float(e)})
            if not errs[-1] <= params.tol * 1e-3 + 1e-9 * (1 + abs(target)):
                ok = False
    return rows, ok


def validate_class(s, params=None):
    """Check a symbol's declared class against sampled behaviour.

    Parameters
    ----------
    s : SymbolSpec
    params : ValidationParams, optional

    Returns
    -------
    ValidationReport
        Never raises for a mismatch; ``passed`` is False instead.

    Notes
    -----
    ``SO_inf`` passes when, for every ``r``, the oscillation over
    ``[-x, -r x] U [r x, x]`` ends below ``tol`` and at most twice its
    earlier peak.  The first value alone is a poor reference: it depends on
    where the sampled ring sits relative to the extrema of the function.
    ``Linf0`` passes when the sampled tail supremum ends below ``tol``.
    Piecewise continuous tags check one-sided limits at each declared jump
    and at both infinities.  ``AP`` is declarative (grammar membership).
    """
    params = params or ValidationParams()
    tag = s.cls.tag
    notes = []
    if tag == "SO_inf":
        rows, ok = _so_rows(s, params)
        if s.jumps:
            ok = False
            notes.append("declared jumps contradict SO_inf")
        return ValidationReport(ok, s.cls, rows, notes)
    if tag == "SO_at":
        rows, ok = _so_rows(s, params, center=s.cls.at)
        return ValidationReport(ok, s.cls, rows, notes)
    if tag == "AP":
        ok = "ap" in s.traits
        if not ok:
            notes.append("not built from almost periodic generators")
        return ValidationReport(ok, s.cls, [], notes)
    if tag == "BUC":
        ok = not s.jumps
        return ValidationReport(ok, s.cls, [], notes)
    if tag == "Linf0":
        ys = np.logspace(math.log10(min(params.x_list)), 12, 4000)
        fine = _samples([(min(params.x_list), 2 * max(params.x_list))], params.samples_per_unit)
        ys = np.unique(np.concatenate([ys, fine]))
        ys = ys[~np.isin(ys, s.jump_points)]
        vals = np.maximum(np.abs(s.eval_unchecked(ys)), np.abs(s.eval_unchecked(-ys)))
        rows, traj = [], []
        for x in params.x_list:
            sup = float(np.max(vals[ys >= x]))
            traj.append(sup)
            rows.append({"check": "tail_sup", "x": x, "value": sup})
        ok = traj[-1] <= params.tol and all(b <= a for a, b in zip(traj, traj[1:]))
        return ValidationReport(ok, s.cls, rows, notes)
    # piecewise continuous family
    rows, ok = _jump_rows(s, params)
    lrows, lok = _limit_rows(s, params)
    rows += lrows
    ok = ok and lok
    if tag in ("C_Rbar", "C_Rdot") and s.jumps:
        ok = False
        notes.append("continuous classes cannot jump")
    if tag in ("C_Rdot", "PC_at") and s.has_limits and abs(s.limit_minus - s.limit_plus) > params.tol:
        ok = False
        notes.append("limits at -inf and +inf differ")
    if tag == "PC_at" and any(j.t != s.cls.at for j in s.jumps):
        ok = False
        notes.append("jump away from the distinguished point")
    if tag == "PiecewiseConstant" and "pwc" not in s.traits:
        ok = False
        notes.append("not built from piecewise constant generators")
    return ValidationReport(ok, s.cls, rows, notes)


def check_invariants(s):
    """Return a list of violated :class:`SymbolSpec` invariants (empty if none)."""
    bad = []
    if not _bounded(s.evaluator):
        bad.append("unbounded samples")
    for j in s.jumps:
        for side, target in ((-1, j.left), (1, j.right)):
            v = s.eval_unchecked(np.array([j.t + side * 1e-7]))[0]
            if abs(v - target) > 1e-4 * (1 + abs(target)):
                bad.append(f"jump at {j.t} not approached from side {side}")
    return bad


def pc_decomposition(a):
    """Split ``a = c_minus chi_- + c_plus chi_+ + a0`` with ``a0`` in Linf0.

    Parameters
    ----------
    a : SymbolSpec
        Must carry both limits at infinity.

    Returns
    -------
    c_minus, c_plus : complex
    a0 : SymbolSpec
        Class ``Linf0``; defined by subtraction, so the identity is exact.

    Raises
    ------
    MissingLimits
    """
    if not a.has_limits:
        raise MissingLimits(f"{a.name} lacks a limit at infinity")
    cm, cp = complex(a.limit_minus), complex(a.limit_plus)
    chi_m = indicator(-math.inf, 0.0, var=a.var)
    chi_p = indicator(0.0, math.inf, var=a.var)
    a0 = a - cm * chi_m - cp * chi_p
    # limits cancel exactly by construction
    a0 = _replace(a0, limit_minus=0j, limit_plus=0j, cls=FunctionClass("Linf0"),
                  name=f"{a.name} - ({_fmt_complex(cm)})*chi_- - ({_fmt_complex(cp)})*chi_+")
    return cm, cp, a0


@dataclass(frozen=True)
class Cluster:
    """An accumulation value with its index subsequence.

    Attributes
    ----------
    value : complex
        Cluster mean (within ``eps`` of every member).
    indices : tuple of int
        Positions in ``g`` whose samples fall in the cluster.
    annulus_osc : tuple of float
        Oscillation of the symbol over ``[g x0 / 2, 2 g x0]`` along the
        subsequence (log-spaced samples), a diagnostic of slow oscillation.
    """

    value: complex
    indices: tuple
    annulus_osc: tuple


def accumulation_values(a, x0, g, eps):
    """Cluster sampled values ``a(g_n x0)`` into accumulation candidates.

    Parameters
    ----------
    a : SymbolSpec
        Intended for validated ``SO_inf`` coefficients (not re-checked).
    x0 : float
        Nonzero base point.
    g : sequence of float
        Strictly increasing positive prefix of length at least 32.
    eps : float
        Cluster diameter bound (complete linkage).

    Returns
    -------
    list of Cluster
        Clusters with at least four members, largest first.

    Raises
    ------
    NoConvergence
        If no cluster has four members.
    """
    g = np.asarray(g, dtype=float)
    if x0 == 0:
        raise ValueError("x0 must be nonzero")
    if g.ndim != 1 or len(g) < 32:
        raise ValueError("g must be a prefix of length at least 32")
    if np.any(np.diff(g) <= 0):
        raise ValueError("g must be strictly increasing")
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = g * x0
    vals = a.eval_unchecked(pts)
    coords = np.column_stack([vals.real, vals.imag])
    labels = fcluster(linkage(coords, method="complete"), t=eps, criterion="distance")
    out = []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        if len(idx) < 4:
            continue
        value = complex(np.mean(vals[idx]))
        osc = []
        for n in idx:
            ring = pts[n] * np.logspace(-math.log10(2), math.log10(2), 257)
            osc.append(_diameter(a.eval_unchecked(ring)))
        out.append(Cluster(value, tuple(int(i) for i in idx), tuple(osc)))
    if not out:
        raise NoConvergence("every cluster has fewer than 4 members")
    out.sort(key=lambda c: -len(c.indices))
    return out
