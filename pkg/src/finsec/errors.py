"""Exception types raised across the package.

Every error derives from :class:`FinsecError`, so callers (the command line
front end in particular) can map any library failure to a single exit code.
Errors that signal a bad argument also derive from :class:`ValueError`.
"""


class FinsecError(Exception):
    """Base class for all package errors."""


class ParseError(FinsecError, ValueError):
    """Malformed symbol, operator or spec-file text.

    Parameters
    ----------
    message : str
        Human readable description.
    line, column : int, optional
        1-based position of the offending token, when known.
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}"
            where += f", column {column})" if column is not None else ")"
        elif column is not None:
            where = f" (column {column})"
        super().__init__(message + where)


class UnknownSymbolFunction(ParseError):
    """A function name outside the symbol grammar."""


class UnsupportedSymbol(FinsecError, ValueError):
    """A symbol that is unbounded or falls outside the supported classes."""


class EvalAtJump(FinsecError, ValueError):
    """Evaluation requested exactly at a declared jump point."""


class EmptySet(FinsecError, ValueError):
    """An oscillation set of zero length."""


class MissingLimits(FinsecError, ValueError):
    """A symbol lacks one of its limits at infinity."""


class NoConvergence(FinsecError):
    """No sampled cluster is populated enough to signal an accumulation value."""


class RichnessRequired(FinsecError):
    """A slowly oscillating coefficient needs an explicit accumulation choice."""


class MissingSOChoice(RichnessRequired, ParseError):
    """A spec file uses a slowly oscillating coefficient without ``so_choice``."""

    def __init__(self, message, line=None, column=None):
        ParseError.__init__(self, message, line, column)


class FlipOutsideStarFramework(FinsecError):
    """An asymmetric direction was requested for a sequence containing the flip."""


class NotInAlgebra(FinsecError, ValueError):
    """A leaf outside the generator table of the sequence algebra."""


class NotFiniteSectionAlgebra(FinsecError, ValueError):
    """A sequence that is not built from finite-section wrappers."""


class SizeOverflow(FinsecError, ValueError):
    """A grid larger than the configured size cap."""


class JumpOnNode(FinsecError, ValueError):
    """A declared jump coincides with a grid or dual-grid node."""


class UnboundedSupport(FinsecError, ValueError):
    """Finite-rank or kernel data without a bounded support witness."""


class WindowTooSmall(FinsecError, ValueError):
    """A finite section that does not fit inside the padded window."""


class OffLattice(FinsecError, ValueError):
    """A shift or dilation that does not map the grid onto itself."""


class SymbolVanishes(FinsecError, ValueError):
    """The symbol curve passes through (or too close to) zero."""


class AmbiguousWinding(FinsecError):
    """The argument increment is not close to a multiple of 2*pi."""


class SingularSection(FinsecError):
    """A finite section that is singular or too ill-conditioned to solve."""
