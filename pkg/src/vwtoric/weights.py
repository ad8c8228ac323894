"""Weight functions on the momentum polytope.

A weight is a small expression tree over ``p1..pl`` (``z`` is accepted as an
alias of ``p1`` in one variable) built from rational literals, ``+ - * /``,
``^`` with a rational exponent, ``exp`` and ``log``.  Gradients and Hessians
come from symbolic differentiation of the tree, evaluated with numpy.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' signed-rational)?
    base   := number | 'p'index | 'z' | '(' expr ')' | ('exp'|'log') '(' expr ')' | '-' base
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    PositivityViolation,
    UnknownVariable,
    ValidationError,
    WeightSyntaxError,
)
from .poly import RationalPoly, as_fraction, format_fraction


# ---------------------------------------------------------------------------
# expression tree
# ---------------------------------------------------------------------------

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: Fraction


@dataclass(frozen=True)
class Var(Node):
    index: int


@dataclass(frozen=True)
class Add(Node):
    terms: Tuple[Node, ...]


@dataclass(frozen=True)
class Mul(Node):
    factors: Tuple[Node, ...]


@dataclass(frozen=True)
class Div(Node):
    num: Node
    den: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: Fraction


@dataclass(frozen=True)
class Exp(Node):
    arg: Node


@dataclass(frozen=True)
class Log(Node):
    arg: Node


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def const(x) -> Const:
    return Const(as_fraction(x))


def add(*terms: Node) -> Node:
    flat: List[Node] = []
    c = Fraction(0)
    for t in terms:
        parts = t.terms if isinstance(t, Add) else (t,)
        for s in parts:
            if isinstance(s, Const):
                c += s.value
            else:
                flat.append(s)
    if c:
        flat.append(Const(c))
    if not flat:
        return ZERO
    return flat[0] if len(flat) == 1 else Add(tuple(flat))


def mul(*factors: Node) -> Node:
    flat: List[Node] = []
    c = Fraction(1)
    for f in factors:
        parts = f.factors if isinstance(f, Mul) else (f,)
        for s in parts:
            if isinstance(s, Const):
                c *= s.value
            else:
                flat.append(s)
    if c == 0:
        return ZERO
    if c != 1:
        flat.insert(0, Const(c))
    if not flat:
        return ONE
    return flat[0] if len(flat) == 1 else Mul(tuple(flat))


def neg(a: Node) -> Node:
    return mul(Const(Fraction(-1)), a)


def div(a: Node, b: Node) -> Node:
    if isinstance(b, Const):
        if b.value == 0:
            raise DomainError("division by the constant zero")
        return mul(Const(1 / b.value), a)
    if a == ZERO:
        return ZERO
    return Div(a, b)


def power(b: Node, e) -> Node:
    e = as_fraction(e)
    if e == 0:
        return ONE
    if e == 1:
        return b
    if isinstance(b, Const) and e.denominator == 1:
        if b.value == 0 and e < 0:
            raise DomainError("zero raised to a negative power")
        return Const(b.value ** int(e))
    if isinstance(b, Pow) and e.denominator == 1 and b.exponent.denominator == 1:
        return power(b.base, b.exponent * e)
    return Pow(b, e)


def diff(node: Node, i: int) -> Node:
    """Symbolic partial derivative with respect to p_{i+1}."""
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.index == i else ZERO
    if isinstance(node, Add):
        return add(*(diff(t, i) for t in node.terms))
    if isinstance(node, Mul):
        terms = []
        for k, f in enumerate(node.factors):
            df = diff(f, i)
            if df != ZERO:
                terms.append(mul(*node.factors[:k], df, *node.factors[k + 1:]))
        return add(*terms)
    if isinstance(node, Div):
        da, db = diff(node.num, i), diff(node.den, i)
        top = add(mul(da, node.den), neg(mul(node.num, db)))
        return div(top, power(node.den, 2))
    if isinstance(node, Pow):
        db = diff(node.base, i)
        if db == ZERO:
            return ZERO
        return mul(Const(node.exponent), power(node.base, node.exponent - 1), db)
    if isinstance(node, Exp):
        return mul(node, diff(node.arg, i))
    if isinstance(node, Log):
        return div(diff(node.arg, i), node.arg)
    raise TypeError(f"unknown node {node!r}")


def _eval(node: Node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full(X.shape[0], float(node.value))
    if isinstance(node, Var):
        return X[:, node.index]
    if isinstance(node, Add):
        out = _eval(node.terms[0], X)
        for t in node.terms[1:]:
            out = out + _eval(t, X)
        return out
    if isinstance(node, Mul):
        out = _eval(node.factors[0], X)
        for f in node.factors[1:]:
            out = out * _eval(f, X)
        return out
    if isinstance(node, Div):
        den = _eval(node.den, X)
        if np.any(den == 0):
            raise DomainError("division by zero")
        return _eval(node.num, X) / den
    if isinstance(node, Pow):
        b = _eval(node.base, X)
        e = node.exponent
        if e.denominator == 1:
            if e < 0 and np.any(b == 0):
                raise DomainError("zero raised to a negative power")
            return b ** float(e) if e < 0 else b ** int(e)
        if np.any(b < 0) or (e < 0 and np.any(b == 0)):
            raise DomainError("negative base with a non-integer exponent")
        return b ** float(e)
    if isinstance(node, Exp):
        return np.exp(_eval(node.arg, X))
    if isinstance(node, Log):
        a = _eval(node.arg, X)
        if np.any(a <= 0):
            raise DomainError("log of a nonpositive value")
        return np.log(a)
    raise TypeError(f"unknown node {node!r}")


def _to_poly(node: Node, nvars: int) -> RationalPoly | None:
    if isinstance(node, Const):
        return RationalPoly.constant(nvars, node.value)
    if isinstance(node, Var):
        return RationalPoly.variable(nvars, node.index)
    if isinstance(node, Add):
        out = RationalPoly(nvars)
        for t in node.terms:
            q = _to_poly(t, nvars)
            if q is None:
                return None
            out = out + q
        return out
    if isinstance(node, Mul):
        out = RationalPoly.constant(nvars, 1)
        for f in node.factors:
            q = _to_poly(f, nvars)
            if q is None:
                return None
            out = out * q
        return out
    if isinstance(node, Div):
        num, den = _to_poly(node.num, nvars), _to_poly(node.den, nvars)
        if num is None or den is None or not den.is_constant() or den.is_zero():
            return None
        return num / den.constant_term()
    if isinstance(node, Pow):
        if node.exponent.denominator != 1 or node.exponent < 0:
            return None
        b = _to_poly(node.base, nvars)
        return None if b is None else b ** int(node.exponent)
    return None


_PREC = {Add: 1, Mul: 2, Div: 2, Pow: 3}


def _fmt(node: Node, names: Sequence[str], parent: int = 0) -> str:
    if isinstance(node, Const):
        s = format_fraction(node.value)
        return f"({s})" if (node.value < 0 or node.value.denominator != 1) and parent else s
    if isinstance(node, Var):
        return names[node.index]
    if isinstance(node, Exp):
        return f"exp({_fmt(node.arg, names)})"
    if isinstance(node, Log):
        return f"log({_fmt(node.arg, names)})"
    if isinstance(node, Add):
        s = " + ".join(_fmt(t, names, 1) for t in node.terms)
    elif isinstance(node, Mul):
        s = "*".join(_fmt(f, names, 2) for f in node.factors)
    elif isinstance(node, Div):
        s = f"{_fmt(node.num, names, 2)}/{_fmt(node.den, names, 3)}"
    elif isinstance(node, Pow):
        s = f"{_fmt(node.base, names, 4)}^({format_fraction(node.exponent)})"
    else:
        raise TypeError(f"unknown node {node!r}")
    return f"({s})" if parent >= _PREC[type(node)] else s


def _walk(node: Node):
    yield node
    if isinstance(node, Add):
        for t in node.terms:
            yield from _walk(t)
    elif isinstance(node, Mul):
        for f in node.factors:
            yield from _walk(f)
    elif isinstance(node, Div):
        yield from _walk(node.num)
        yield from _walk(node.den)
    elif isinstance(node, Pow):
        yield from _walk(node.base)
    elif isinstance(node, (Exp, Log)):
        yield from _walk(node.arg)


# ---------------------------------------------------------------------------
# public wrapper
# ---------------------------------------------------------------------------

class WeightExpr:
    """A weight function of ``dim`` variables with symbolic derivatives.

    Evaluation methods accept a single point (shape ``(dim,)``) or a batch
    ``(N, dim)`` and return matching shapes.
    """

    def __init__(self, node: Node, dim: int, source: dict | None = None):
        self.node = node
        self.dim = dim
        self.source = source
        self._grad: List[Node] | None = None
        self._hess: List[List[Node]] | None = None

    # -- derivatives --------------------------------------------------------
    @property
    def grad_nodes(self) -> List[Node]:
        if self._grad is None:
            self._grad = [diff(self.node, i) for i in range(self.dim)]
        return self._grad

    @property
    def hess_nodes(self) -> List[List[Node]]:
        if self._hess is None:
            g = self.grad_nodes
            self._hess = [[diff(g[i], j) for j in range(self.dim)] for i in range(self.dim)]
        return self._hess

    def _points(self, p):
        X = np.asarray(p, dtype=float)
        single = X.ndim <= 1
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X.reshape(1, -1) if X.shape[0] == self.dim else X.reshape(-1, 1)
            single = X.shape[0] == 1
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"weight has {self.dim} variables, got points of width {X.shape[1]}")
        return X, single

    def __call__(self, p):
        X, single = self._points(p)
        out = _eval(self.node, X)
        return float(out[0]) if single else out

    def grad(self, p):
        X, single = self._points(p)
        out = np.stack([_eval(g, X) for g in self.grad_nodes], axis=-1)
        return out[0] if single else out

    def hess(self, p):
        X, single = self._points(p)
        H = self.hess_nodes
        out = np.stack([np.stack([_eval(H[i][j], X) for j in range(self.dim)], axis=-1)
                        for i in range(self.dim)], axis=-2)
        return out[0] if single else out

    # -- exact path ---------------------------------------------------------
    def as_polynomial(self) -> RationalPoly | None:
        """Exact expanded polynomial, or None when the expression is not polynomial."""
        return _to_poly(self.node, self.dim)

    # -- algebra ------------------------------------------------------------
    def _lift(self, other) -> Node:
        if isinstance(other, WeightExpr):
            if other.dim != self.dim:
                raise DimensionMismatch("weights of different dimensions")
            return other.node
        return const(other)

    def __mul__(self, other):
        return WeightExpr(mul(self.node, self._lift(other)), self.dim)

    __rmul__ = __mul__

    def __add__(self, other):
        return WeightExpr(add(self.node, self._lift(other)), self.dim)

    __radd__ = __add__

    def __sub__(self, other):
        return WeightExpr(add(self.node, neg(self._lift(other))), self.dim)

    def __truediv__(self, other):
        return WeightExpr(div(self.node, self._lift(other)), self.dim)

    def to_string(self) -> str:
        return _fmt(self.node, [f"p{i + 1}" for i in range(self.dim)])

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"WeightExpr({self.to_string()!r}, dim={self.dim})"

    def to_json(self) -> dict:
        return self.source if self.source is not None else {"expr": self.to_string()}

    def is_constant(self) -> bool:
        return isinstance(self.node, Const)

    def rational_power_bases(self) -> List[Tuple[Node, Fraction]]:
        return [(n.base, n.exponent) for n in _walk(self.node)
                if isinstance(n, Pow) and n.exponent.denominator != 1]


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens: List[Tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                break
            if m.group(1) is not None:
                self.tokens.append(("num", m.group(1), m.start(1)))
            elif m.group(2) is not None:
                self.tokens.append(("id", m.group(2), m.start(2)))
            elif m.group(3) is not None:
                self.tokens.append(("op", m.group(3), m.start(3)))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise WeightSyntaxError(f"expected {op!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> Node:
        if not self.tokens:
            raise WeightSyntaxError("empty expression", 0)
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise WeightSyntaxError(f"unexpected {val!r}", pos)
        return node

    def expr(self) -> Node:
        terms = [self.term()]
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else neg(t))
        return add(*terms)

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def factor(self) -> Node:
        b = self.base()
        if self.peek() == ("op", "^", self.peek()[2]):
            self.take()
            b = power(b, self.signed_rational())
        return b

    def signed_rational(self) -> Fraction:
        paren = False
        if self.peek()[:2] == ("op", "("):
            self.take()
            paren = True
        sign = 1
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            if self.take()[1] == "-":
                sign = -sign
        kind, val, pos = self.take()
        if kind != "num":
            raise WeightSyntaxError("expected a rational exponent", pos)
        q = Fraction(val)
        if paren and self.peek()[:2] == ("op", "/"):
            self.take()
            kind, val, pos = self.take()
            if kind != "num":
                raise WeightSyntaxError("expected a denominator", pos)
            d = Fraction(val)
            if d == 0:
                raise WeightSyntaxError("zero denominator in exponent", pos)
            q /= d
        if paren:
            self.expect(")")
        return sign * q

    def base(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "op" and val == "-":
            return neg(self.factor())
        if kind == "id":
            if val in ("exp", "log"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Exp(arg) if val == "exp" else Log(arg)
            if val == "z":
                if self.dim != 1:
                    raise DimensionMismatch("variable 'z' is only available in one variable")
                return Var(0)
            m = re.fullmatch(r"p(\d+)", val)
            if m:
                idx = int(m.group(1))
                if idx < 1 or idx > self.dim:
                    raise DimensionMismatch(f"variable {val} out of range for dimension {self.dim}")
                return Var(idx - 1)
            raise UnknownVariable(f"unknown identifier {val!r} at position {pos}")
        raise WeightSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse_weight(text: str, dim: int) -> WeightExpr:
    """Parse a weight expression in variables p1..p{dim}."""
    node = _Parser(text, dim).parse()
    return WeightExpr(node, dim, {"expr": text})


# ---------------------------------------------------------------------------
# named families
# ---------------------------------------------------------------------------

def _affine_node(xi: Sequence, a) -> Node:
    terms = [mul(const(x), Var(i)) for i, x in enumerate(xi)]
    return add(*terms, const(a))


def constant(c, dim: int) -> WeightExpr:
    return WeightExpr(const(c), dim, {"family": "constant", "c": format_fraction(as_fraction(c))})


def affine(xi: Sequence, a) -> WeightExpr:
    return WeightExpr(_affine_node(xi, a), len(xi),
                      {"family": "affine", "xi": [format_fraction(as_fraction(x)) for x in xi],
                       "a": format_fraction(as_fraction(a))})


def affine_power(xi: Sequence, a, k) -> WeightExpr:
    """``(<xi, p> + a)^k``."""
    return WeightExpr(power(_affine_node(xi, a), k), len(xi),
                      {"family": "affine_power", "xi": [format_fraction(as_fraction(x)) for x in xi],
                       "a": format_fraction(as_fraction(a)), "k": format_fraction(as_fraction(k))})


def exponential(xi: Sequence) -> WeightExpr:
    """``exp(<xi, p>)``."""
    return WeightExpr(Exp(_affine_node(xi, 0)), len(xi),
                      {"family": "exponential", "xi": [format_fraction(as_fraction(x)) for x in xi]})


def product(factors: Sequence[WeightExpr]) -> WeightExpr:
    dim = factors[0].dim
    return WeightExpr(mul(*(f.node for f in factors)), dim,
                      {"family": "product", "factors": [f.to_json() for f in factors]})


def soliton_weights(xi: Sequence) -> Tuple[WeightExpr, WeightExpr]:
    """v = w = exp(<xi, p>)."""
    v = exponential(xi)
    return v, v


def einstein_maxwell_weights(xi: Sequence, a, m: int) -> Tuple[WeightExpr, WeightExpr]:
    """v = (<xi,p>+a)^(1-2m), w = (<xi,p>+a)^(-1-2m)."""
    return affine_power(xi, a, 1 - 2 * m), affine_power(xi, a, -1 - 2 * m)


def sasaki_weights(xi: Sequence, a, m: int) -> Tuple[WeightExpr, WeightExpr]:
    """v = (<xi,p>+a)^(-m-1), w = (<xi,p>+a)^(-m-3)."""
    return affine_power(xi, a, -m - 1), affine_power(xi, a, -m - 3)


@dataclass(frozen=True)
class BaseFactor:
    """One cscK factor of a generalized Calabi base: dimension, scalar curvature, affine data."""

    d: int
    scal: Fraction
    xi: Tuple[Fraction, ...]
    c: Fraction

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"factor dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "scal", as_fraction(self.scal))
        object.__setattr__(self, "xi", tuple(as_fraction(x) for x in self.xi))
        object.__setattr__(self, "c", as_fraction(self.c))


def generalized_calabi_weights(base: Sequence[BaseFactor], head: Tuple[Sequence, object],
                               P=None, dim: int | None = None) -> Tuple[WeightExpr, WeightExpr]:
    """Fiber weights of the generalized Calabi construction.

    v = prod_j L_j^{d_j} and w = L_0 v - sum_j Scal_j v / L_j with
    ``L_j = <xi_j, p> + c_j``.  With ``P`` given, every ``L_j`` must be positive
    at the vertices of P (which suffices since they are affine).
    """
    xi0, c0 = head
    dim = dim if dim is not None else (P.dim if P is not None else len(xi0))
    L = [_affine_node(f.xi, f.c) for f in base]
    if P is not None:
        for j, f in enumerate(base):
            for vert in P.vertices:
                if sum((x * y for x, y in zip(f.xi, vert)), Fraction(0)) + f.c <= 0:
                    raise PositivityViolation(
                        f"base factor {j + 1} is nonpositive at vertex {tuple(map(str, vert))}", j + 1)
    v = mul(*(power(Lj, f.d) for Lj, f in zip(L, base)))
    w_terms = [mul(_affine_node(xi0, c0), v)]
    for j, f in enumerate(base):
        # v / L_j written as a product to stay polynomial
        others = [power(Lk, g.d) for k, (Lk, g) in enumerate(zip(L, base)) if k != j]
        w_terms.append(mul(Const(-f.scal), power(L[j], f.d - 1), *others))
    src = {"base": [{"d": f.d, "scal": format_fraction(f.scal), "xi": [format_fraction(x) for x in f.xi],
                     "c": format_fraction(f.c)} for f in base],
           "head": {"xi": [format_fraction(as_fraction(x)) for x in xi0],
                    "c": format_fraction(as_fraction(c0))}}
    return (WeightExpr(v, dim, {"family": "generalized_calabi_v", **src}),
            WeightExpr(add(*w_terms), dim, {"family": "generalized_calabi_w", **src}))


# ---------------------------------------------------------------------------
# validation on a polytope
# ---------------------------------------------------------------------------

def positivity_grid(P) -> np.ndarray:
    """Vertices plus a dense grid of P (1001 points in 1D, 101^2 in 2D)."""
    lo, hi = (np.array([float(x) for x in b]) for b in P.bounding_box)
    n = {1: 1001, 2: 101}.get(P.dim, 21)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
    keep = np.ones(len(grid), dtype=bool)
    for lab in P.labels:
        keep &= lab.eval_float(grid) >= -1e-12
    return np.vstack([P.vertex_array, grid[keep]])


def check_domain(e: WeightExpr, P) -> None:
    """Rational exponents are only allowed on affine bases positive at every vertex of P."""
    for b, ex in e.rational_power_bases():
        q = _to_poly(b, e.dim)
        if q is None or q.degree() > 1:
            raise DomainError(f"non-integer exponent {ex} on a non-affine base")
        if any(q(vert) <= 0 for vert in P.vertices):
            raise DomainError(f"base of exponent {ex} is not positive on the polytope")


def check_positive(e: WeightExpr, P, name: str = "v") -> float:
    """Minimum of ``e`` over the positivity grid; raises PositivityViolation if <= 0."""
    check_domain(e, P)
    vals = e(positivity_grid(P))
    m = float(np.min(vals))
    if not math.isfinite(m) or m <= 0:
        raise PositivityViolation(f"weight {name} is not positive on the polytope (min {m:.6g})")
    return m


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _rat_list(xs) -> List[Fraction]:
    return [as_fraction(x) for x in xs]


def weight_from_json(data: dict, dim: int) -> WeightExpr:
    """Build a weight from ``{"expr": ...}`` or a ``{"family": ...}`` record."""
    if "expr" in data:
        return parse_weight(data["expr"], dim)
    fam = data.get("family")
    if fam == "constant":
        return constant(data["c"], dim)
    if fam in ("affine", "affine_power", "exponential"):
        xi = _rat_list(data["xi"])
        if len(xi) != dim:
            raise DimensionMismatch(f"xi has length {len(xi)}, expected {dim}")
        if fam == "affine":
            return affine(xi, data["a"])
        if fam == "affine_power":
            return affine_power(xi, data["a"], data["k"])
        return exponential(xi)
    if fam == "product":
        return product([weight_from_json(f, dim) for f in data["factors"]])
    if fam in ("generalized_calabi_v", "generalized_calabi_w"):
        base = [BaseFactor(int(f["d"]), as_fraction(f["scal"]), tuple(_rat_list(f["xi"])), as_fraction(f["c"]))
                for f in data.get("base", [])]
        head = data.get("head", {"xi": [0] * dim, "c": 0})
        v, w = generalized_calabi_weights(base, (_rat_list(head["xi"]), as_fraction(head["c"])), dim=dim)
        return v if fam.endswith("_v") else w
    raise ValidationError(f"unknown weight record {data!r}")
