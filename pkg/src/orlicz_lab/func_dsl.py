"""A small expression language for scalar Young profiles V(r).

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := number | 'r' | ident '(' expr (',' expr)* ')' | '(' expr ')'
    ident  := pow | log | log1p | max | min | abs

Numbers are decimal literals with an optional exponent. There is no division,
no unary minus and no ``exp``; the language only has to express the registry
profiles, and anything else should be rejected early.

Profiles are lifted to radial convex functions L(x) = V(norm(x)).
"""

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .convex_core import ConvexFunctionOracle, RadialStructure, radial_selection
from .errors import InvalidProfile, OracleConstructionError, ParseError, UnknownFunction

FUNCTIONS = {
    "pow": 2,
    "log": 1,
    "log1p": 1,
    "max": None,
    "min": None,
    "abs": 1,
}

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


# -- AST -----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    text: str


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


_PREC = {"+": 1, "-": 1, "*": 2}


def unparse(node):
    """Print an AST so that parsing the text gives the same tree back."""
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Var):
        return "r"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(unparse(a) for a in node.args)})"
    prec = _PREC[node.op]
    left = unparse(node.left)
    if isinstance(node.left, BinOp) and _PREC[node.left.op] < prec:
        left = f"({left})"
    right = unparse(node.right)
    # operators are left-associative, so an equal-precedence right child needs parens
    if isinstance(node.right, BinOp) and _PREC[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def evaluate(node, r):
    """Evaluate an AST on an array of radii."""
    if isinstance(node, Num):
        return np.full(np.shape(r), node.value)
    if isinstance(node, Var):
        return np.asarray(r, dtype=float)
    if isinstance(node, BinOp):
        a, b = evaluate(node.left, r), evaluate(node.right, r)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        return a * b
    args = [evaluate(a, r) for a in node.args]
    name = node.name
    if name == "pow":
        return np.power(args[0], args[1])
    if name == "log":
        return np.log(args[0])
    if name == "log1p":
        return np.log1p(args[0])
    if name == "abs":
        return np.abs(args[0])
    if name == "max":
        return np.maximum.reduce(np.broadcast_arrays(*args))
    return np.minimum.reduce(np.broadcast_arrays(*args))


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, src):
        self.src = src
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _offset(self):
        return len(self.src[: self.pos].encode("utf-8"))

    def _fail(self, message, expected):
        raise ParseError(message, self._offset(), expected, self.src)

    def _expect(self, ch):
        if self._peek() != ch:
            found = self._peek() or "end of input"
            self._fail(f"unexpected {found!r}", {repr(ch)})
        self.pos += 1

    def parse(self):
        node = self.expr()
        if self._peek():
            self._fail(f"unexpected {self._peek()!r}", {"'+'", "'-'", "'*'", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self._peek() in ("+", "-") and self._peek():
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self._peek() == "*":
            self.pos += 1
            node = BinOp("*", node, self.factor())
        return node

    def factor(self):
        ch = self._peek()
        start_expected = {"number", "'r'", "function", "'('"}
        if not ch:
            self._fail("unexpected end of input", start_expected)
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self._expect(")")
            return node
        m = _NUMBER.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group()), m.group())
        m = _IDENT.match(self.src, self.pos)
        if m:
            name = m.group()
            if name == "r":
                self.pos = m.end()
                return Var()
            if name not in FUNCTIONS:
                raise UnknownFunction(name, self._offset(), set(FUNCTIONS), self.src)
            self.pos = m.end()
            call_offset = self._offset()
            self._expect("(")
            args = [self.expr()]
            while self._peek() == ",":
                self.pos += 1
                args.append(self.expr())
            self._expect(")")
            arity = FUNCTIONS[name]
            if arity is not None and len(args) != arity:
                raise ParseError(f"{name} takes {arity} argument(s), got {len(args)}",
                                 call_offset, {f"{arity} arguments"}, self.src)
            if arity is None and len(args) < 2:
                raise ParseError(f"{name} needs at least 2 arguments", call_offset,
                                 {"','"}, self.src)
            return Call(name, tuple(args))
        self._fail(f"unexpected {ch!r}", start_expected)


@dataclass(frozen=True)
class YoungProfile:
    """A parsed profile.

    ``claims_convex`` and ``claims_young`` are set once validation passes.
    """

    ast: object
    source: str
    claims_convex: bool = False
    claims_young: bool = False

    def __call__(self, r):
        with np.errstate(all="ignore"):
            return evaluate(self.ast, np.asarray(r, dtype=float))

    def unparse(self):
        return unparse(self.ast)

    def homogeneous_order(self) -> Optional[float]:
        """``p`` when the profile is literally ``pow(r, p)``."""
        a = self.ast
        if (isinstance(a, Call) and a.name == "pow" and isinstance(a.args[0], Var)
                and isinstance(a.args[1], Num)):
            return a.args[1].value
        return None


def parse_young(src):
    """Parse profile text into a :class:`YoungProfile`.

    Raises
    ------
    ParseError
        With the byte offset and the set of tokens expected there.
    UnknownFunction
        For identifiers outside the supported function list.
    """
    if not isinstance(src, str) or not src.strip():
        raise ParseError("empty profile", 0, {"expression"}, src or "")
    return YoungProfile(_Parser(src).parse(), src)


# -- validation ----------------------------------------------------------------


@dataclass
class ValidationReport:
    zero_ok: bool
    value_at_zero: float
    positivity_violations: list = field(default_factory=list)
    monotonicity_violations: list = field(default_factory=list)
    convexity_violations: list = field(default_factory=list)

    @property
    def convex(self):
        return not self.convexity_violations

    @property
    def valid(self):
        return (self.zero_ok and not self.positivity_violations
                and not self.monotonicity_violations and self.convex)


def default_grid():
    return np.linspace(0.0, 10.0, 401)


def validate_profile(profile, grid=None, tol=1e-9):
    """Check V(0) = 0, positivity, monotonicity and midpoint convexity on a grid.

    Convexity is tested on every pair of grid points:
    V((r_i + r_j)/2) <= (V(r_i) + V(r_j))/2 + tol*(1 + |V|). Each violation
    is recorded as a triple ``(r_i, r_j, excess)``.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and start at 0")
    v = profile(grid)
    v0 = float(v[0])
    report = ValidationReport(zero_ok=abs(v0) <= tol, value_at_zero=v0)
    bad = ~(v[1:] > 0)
    report.positivity_violations = [(float(r), float(x)) for r, x in zip(grid[1:][bad], v[1:][bad])]
    dv = np.diff(v)
    bad = ~(dv >= -tol * (1.0 + np.abs(v[1:])))
    report.monotonicity_violations = [
        (float(a), float(b), float(-d)) for a, b, d in zip(grid[:-1][bad], grid[1:][bad], dv[bad])
    ]
    i, j = np.triu_indices(grid.size, k=2)
    mid = profile(0.5 * (grid[i] + grid[j]))
    avg = 0.5 * (v[i] + v[j])
    with np.errstate(invalid="ignore"):
        excess = mid - avg
        bad = ~(excess <= tol * (1.0 + np.abs(avg)))
    report.convexity_violations = [
        (float(a), float(b), float(e)) for a, b, e in zip(grid[i][bad], grid[j][bad], excess[bad])
    ]
    return report


# -- norms -------------------------------------------------------------------


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^n: ``euclidean``, ``ell_p`` (p >= 1), ``ell_inf`` or
    ``weighted_euclidean`` (positive weights)."""

    kind: str = "euclidean"
    p: float = 2.0
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "ell_p", "ell_inf", "weighted_euclidean"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "ell_p" and not self.p >= 1:
            raise ValueError("ell_p needs p >= 1")
        if self.kind == "weighted_euclidean":
            if not self.weights or min(self.weights) <= 0:
                raise ValueError("weights must be positive")

    @classmethod
    def parse(cls, text):
        """Accepts ``euclidean``, ``l2``, ``lp:<p>``, ``ell_p:<p>``, ``linf``,
        ``ell_inf``, ``l1`` and ``weighted:<w1>,<w2>,...``."""
        t = text.strip().lower()
        if t in ("euclidean", "l2", "ell_2"):
            return cls()
        if t in ("linf", "ell_inf", "inf"):
            return cls("ell_inf")
        if t in ("l1", "ell_1"):
            return cls("ell_p", 1.0)
        head, _, rest = t.partition(":")
        if head in ("lp", "ell_p") and rest:
            return cls("ell_p", float(rest))
        if head in ("weighted", "weighted_euclidean") and rest:
            return cls("weighted_euclidean", weights=tuple(float(w) for w in rest.split(",")))
        raise ValueError(f"cannot parse norm {text!r}")

    def describe(self):
        if self.kind == "ell_p":
            return f"ell_p:{self.p:g}"
        if self.kind == "weighted_euclidean":
            return "weighted:" + ",".join(f"{w:g}" for w in self.weights)
        return self.kind

    def _w(self, n):
        w = np.asarray(self.weights, dtype=float)
        if w.size != n:
            raise ValueError(f"norm has {w.size} weights, points have dimension {n}")
        return w

    def norm(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "euclidean":
            return np.linalg.norm(X, axis=-1)
        if self.kind == "ell_inf":
            return np.max(np.abs(X), axis=-1)
        if self.kind == "ell_p":
            return np.linalg.norm(X, ord=self.p, axis=-1) if X.ndim > 1 else \
                float(np.sum(np.abs(X) ** self.p) ** (1.0 / self.p))
        return np.sqrt(np.sum(self._w(X.shape[-1]) * X * X, axis=-1))

    def dual_spec(self):
        if self.kind == "euclidean":
            return self
        if self.kind == "ell_inf":
            return NormSpec("ell_p", 1.0)
        if self.kind == "ell_p":
            if self.p == 1.0:
                return NormSpec("ell_inf")
            return NormSpec("ell_p", self.p / (self.p - 1.0))
        return NormSpec("weighted_euclidean", weights=tuple(1.0 / w for w in self.weights))

    def dual(self, Y):
        return self.dual_spec().norm(Y)

    def subgradient(self, X):
        """A subgradient of the norm at each row; zero at the origin."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        nx = self.norm(X)
        safe = np.where(nx > 0, nx, 1.0)[:, None]
        if self.kind == "euclidean":
            G = X / safe
        elif self.kind == "weighted_euclidean":
            G = self._w(X.shape[1]) * X / safe
        elif self.kind == "ell_inf":
            G = np.zeros_like(X)
            k = np.argmax(np.abs(X), axis=1)
            rows = np.arange(X.shape[0])
            G[rows, k] = np.sign(X[rows, k])
        elif self.p == 1.0:
            G = np.sign(X)
        else:
            G = np.sign(X) * (np.abs(X) / safe) ** (self.p - 1.0)
        G[nx == 0] = 0.0
        return G


# -- lifting -------------------------------------------------------------------


def lift_radial(profile, norm=None, n=1, name=None, grid=None, **oracle_kwargs):
    """Build the oracle L(x) = V(norm(x)) on R^n.

    The profile is validated first unless it already claims to be a Young
    function. ``homogeneity_order`` is set exactly when the profile text is
    ``pow(r, p)``.

    Raises
    ------
    InvalidProfile
        If validation fails or the lifted oracle fails its construction probes.
    """
    if isinstance(profile, str):
        profile = parse_young(profile)
    norm = norm or NormSpec()
    if not profile.claims_young:
        report = validate_profile(profile, grid)
        if not report.valid:
            raise InvalidProfile(_summarise(profile, report))
        profile = replace(profile, claims_convex=True, claims_young=True)
    p = profile.homogeneous_order()
    radial = RadialStructure(profile, norm, profile.source)

    def func(X):
        return profile(norm.norm(X))

    try:
        return ConvexFunctionOracle(
            func=func,
            dim=int(n),
            name=name or profile.source,
            homogeneity_order=p,
            radial=radial,
            subgradient_selection=radial_selection(radial),
            **oracle_kwargs,
        )
    except OracleConstructionError as exc:
        raise InvalidProfile(str(exc)) from exc


def _summarise(profile, report):
    parts = [f"profile {profile.source!r} is not a Young function:"]
    if not report.zero_ok:
        parts.append(f"V(0) = {report.value_at_zero}")
    if report.positivity_violations:
        parts.append(f"V <= 0 at r = {report.positivity_violations[0][0]:g}")
    if report.monotonicity_violations:
        parts.append(f"decreasing near r = {report.monotonicity_violations[0][0]:g}")
    if report.convexity_violations:
        a, b, e = report.convexity_violations[0]
        parts.append(f"midpoint convexity fails for ({a:g}, {b:g}) by {e:.3g}"
                     f" ({len(report.convexity_violations)} pairs)")
    return " ".join(parts)


__all__ = [
    "BinOp", "Call", "Num", "Var", "NormSpec", "ValidationReport", "YoungProfile",
    "evaluate", "lift_radial", "parse_young", "unparse", "validate_profile",
]

_ = math  # noqa
