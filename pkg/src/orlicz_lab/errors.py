"""Exception hierarchy for orlicz_lab."""


class OrliczLabError(Exception):
    """Base class for all errors raised by the package."""


class OracleConstructionError(OrliczLabError):
    """A convex function oracle failed one of its construction probes."""


class NonFiniteNearPoint(OrliczLabError):
    """The function is infinite where a finite neighbourhood was required."""


class PrecisionLoss(OrliczLabError):
    """Difference quotients did not stabilise before the step floor."""


class InfinityTimesZero(OrliczLabError, ArithmeticError):
    """0 * inf was requested in extended non-negative arithmetic."""


class HullDegenerate(OrliczLabError):
    """Support values describe an empty or inconsistent set."""


class DimensionMismatch(OrliczLabError, ValueError):
    pass


class PMinusNotGreaterThanOne(OrliczLabError, ValueError):
    """The lower growth exponent is <= 1, so the dual has no Delta_2 exponents."""


class GridNotClosed(OrliczLabError, ValueError):
    """No pair (r, s) of the grid has its product rs on the grid."""


class AtomMismatch(OrliczLabError, ValueError):
    pass


class SupportNotCovered(OrliczLabError, KeyError):
    """The vector field lacks a value at an atom of a convolution."""


class InvalidProfile(OrliczLabError, ValueError):
    """A Young profile failed validation and cannot be lifted."""


class ParseError(OrliczLabError, ValueError):
    """Malformed profile text.

    Attributes
    ----------
    offset : int
        Byte offset into the source where parsing failed.
    expected : frozenset of str
        Tokens that would have been accepted at ``offset``.
    """

    def __init__(self, message, offset, expected=frozenset(), source=""):
        self.offset = offset
        self.expected = frozenset(expected)
        self.source = source
        exp = ", ".join(sorted(self.expected))
        detail = f"{message} at offset {offset}"
        if exp:
            detail += f" (expected one of: {exp})"
        super().__init__(detail)


class UnknownFunction(ParseError):
    def __init__(self, name, offset, known, source=""):
        self.name = name
        super().__init__(f"unknown function {name!r}", offset, known, source)
