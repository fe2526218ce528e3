"""Text grammar for operators and operator sequences.

Expressions use Python operator syntax over a fixed set of constructors::

    FS( mult("2+atan(x)") * conv("sgn(xi)") + hankel("exp(i*xi)") )
    FS(I) + liftplus(-projection("bump(-3,2)"))
    FS(mult(a) * conv("2+atan(xi)"))           # a declared elsewhere

Constructors
------------
``mult(s)``, ``conv(s)``, ``hankel(s)``
    Coefficient (variable ``x``), multiplier and Hankel operator for symbol
    text ``s`` or a declared symbol name.
``rank1(u, v)``, ``projection(u)``, ``gaussian(c, w)``, ``kernel(k)``
    Compact operators; ``gaussian`` is the rank-one projection onto a
    Gaussian of centre ``c`` and width ``w``.
``liftplus(K)``, ``liftminus(K)``, ``lifth(t, K)``, ``FS(A)``
    Sequence constructors.
``I``, ``J``, ``S``, ``P``
    Identity, flip, Cauchy singular integral and the projection sequence.
``i``, ``pi``
    Numeric constants.
"""

import ast
import math

from .errors import ParseError, UnknownSymbolFunction
from .operators import (
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
    ProjSeq,
    Scalar,
    SequenceExpr,
    SmoothKernel,
    cauchy,
    gaussian_pair,
    hankel,
    projection,
)
from .symbols import kernel, symbol

__all__ = ["parse_operator", "CONSTRUCTORS"]

CONSTRUCTORS = (
    "mult", "conv", "hankel", "rank1", "projection", "gaussian", "kernel",
    "liftplus", "liftminus", "lifth", "FS",
)
_ALIASES = {"finite_section": "FS", "fs": "FS", "proj": "projection"}
_NAMES = ("I", "J", "S", "P")


def parse_operator(text, symbols=None, line=None):
    """Parse operator text into an :class:`OperatorExpr` or :class:`SequenceExpr`.

    Parameters
    ----------
    text : str
    symbols : dict, optional
        Named :class:`SymbolSpec` objects usable as bare identifiers.
    line : int, optional
        Line number reported in errors.

    Raises
    ------
    ParseError
        Syntax errors and argument mistakes (with column).
    UnknownSymbolFunction
        Unknown constructor or unknown function inside a symbol string.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"operator syntax: {exc.msg}", line, exc.offset) from None
    return _Builder(symbols or {}, line)(tree.body)


class _Builder:
    def __init__(self, symbols, line):
        self.symbols = symbols
        self.line = line

    def fail(self, node, msg, exc=ParseError):
        raise exc(msg, self.line, getattr(node, "col_offset", -1) + 1)

    def __call__(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return complex(node.value)
        if isinstance(node, ast.Name):
            return self.name(node)
        if isinstance(node, ast.UnaryOp):
            v = self(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return v
        if isinstance(node, ast.BinOp):
            a, b = self(node.left), self(node.right)
            try:
                if isinstance(node.op, ast.Add):
                    return a + b
                if isinstance(node.op, ast.Sub):
                    return a - b
                if isinstance(node.op, ast.Mult):
                    return a * b
                if isinstance(node.op, ast.Div) and isinstance(b, complex):
                    return a * (1.0 / b)
            except TypeError:
                self.fail(node, "operands do not combine")
            self.fail(node, "unsupported operator")
        if isinstance(node, ast.Call):
            return self.call(node)
        self.fail(node, f"unexpected {type(node).__name__}")

    def name(self, node):
        n = node.id
        if n == "I":
            return Identity()
        if n == "J":
            return Flip()
        if n == "S":
            return cauchy()
        if n == "P":
            return ProjSeq()
        if n == "i":
            return 1j
        if n == "pi":
            return complex(math.pi)
        self.fail(node, f"unknown name {n!r}")

    def sym(self, node, var):
        if isinstance(node, ast.Constant) and isinstance(node.value, str):
            try:
                return symbol(node.value, var=var)
            except UnknownSymbolFunction:
                raise
            except ParseError as exc:
                raise ParseError(f"in symbol {node.value!r}: {exc.message}", self.line,
                                 node.col_offset + 1) from None
        if isinstance(node, ast.Name) and node.id in self.symbols:
            s = self.symbols[node.id]
            if isinstance(s, str):
                return symbol(s, var=var, name=node.id)
            return s
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return symbol(repr(node.value), var=var)
        self.fail(node, "expected a quoted symbol or a declared symbol name")

    def op(self, node):
        v = self(node)
        if isinstance(v, complex):
            return Scalar(v)
        if not isinstance(v, OperatorExpr):
            self.fail(node, "expected an operator, got a sequence")
        return v

    def seq(self, node):
        v = self(node)
        if isinstance(v, complex):
            return Const(Scalar(v))
        if isinstance(v, OperatorExpr):
            return Const(v)
        if isinstance(v, SequenceExpr):
            return v
        self.fail(node, "expected a sequence")

    def num(self, node):
        v = self(node)
        if not isinstance(v, complex) or v.imag != 0:
            self.fail(node, "expected a real number")
        return v.real

    def call(self, node):
        if not isinstance(node.func, ast.Name):
            self.fail(node, "constructor must be a plain name")
        fn = _ALIASES.get(node.func.id, node.func.id)
        if fn not in CONSTRUCTORS:
            self.fail(node, f"unknown constructor {node.func.id!r}", UnknownSymbolFunction)
        if node.keywords:
            self.fail(node, "keyword arguments are not supported")
        args = node.args
        arity = {"rank1": 2, "gaussian": 2, "lifth": 2}.get(fn, 1)
        if len(args) != arity:
            self.fail(node, f"{fn} takes {arity} argument(s)")
        try:
            if fn == "mult":
                return Mult(self.sym(args[0], "x"))
            if fn == "conv":
                return Conv(self.sym(args[0], "xi"))
            if fn == "hankel":
                return hankel(self.sym(args[0], "xi"))
            if fn == "rank1":
                return FiniteRank(((self.sym(args[0], "x"), self.sym(args[1], "x")),))
            if fn == "projection":
                return projection(self.sym(args[0], "x"))
            if fn == "gaussian":
                return gaussian_pair(self.num(args[0]), self.num(args[1]))
            if fn == "kernel":
                if not (isinstance(args[0], ast.Constant) and isinstance(args[0].value, str)):
                    self.fail(args[0], "kernel takes a quoted expression")
                return SmoothKernel(kernel(args[0].value))
            if fn == "liftplus":
                return LiftPlus(self.op(args[0]))
            if fn == "liftminus":
                return LiftMinus(self.op(args[0]))
            if fn == "lifth":
                return LiftH(self.num(args[0]), self.op(args[1]))
            if fn == "FS":
                return FiniteSection(self.seq(args[0]))
        except ParseError:
            raise
        except ValueError as exc:
            self.fail(node, f"{fn}: {exc}")

