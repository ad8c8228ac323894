"""Exact multivariate polynomials over Q, plus univariate root counting.

Polynomials are stored sparsely as ``{exponent tuple: Fraction}`` with no
zero coefficients.  Everything here is exact; floats only appear in
:meth:`RationalPoly.eval_float`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

Monomial = Tuple[int, ...]


def as_fraction(x) -> Fraction:
    """Exact conversion of ints, Fractions, decimal / "num/den" strings and floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip()
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {x!r}") from exc
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(float(x))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def format_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


class RationalPoly:
    """Sparse polynomial in ``nvars`` variables with Fraction coefficients."""

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: Dict[Monomial, Fraction] | None = None):
        self.nvars = nvars
        self.coeffs: Dict[Monomial, Fraction] = {}
        if coeffs:
            for mono, c in coeffs.items():
                if len(mono) != nvars:
                    raise ValueError(f"monomial {mono} has wrong length for {nvars} variables")
                c = as_fraction(c)
                if c:
                    self.coeffs[tuple(mono)] = self.coeffs.get(tuple(mono), Fraction(0)) + c
            self.coeffs = {m: c for m, c in self.coeffs.items() if c}

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, nvars: int, c) -> "RationalPoly":
        return cls(nvars, {(0,) * nvars: as_fraction(c)})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "RationalPoly":
        mono = [0] * nvars
        mono[i] = 1
        return cls(nvars, {tuple(mono): Fraction(1)})

    @classmethod
    def affine(cls, coeffs: Sequence, const) -> "RationalPoly":
        """``<coeffs, p> + const``."""
        n = len(coeffs)
        out = {(0,) * n: as_fraction(const)}
        for i, a in enumerate(coeffs):
            mono = [0] * n
            mono[i] = 1
            out[tuple(mono)] = as_fraction(a)
        return cls(n, out)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence) -> "RationalPoly":
        """Univariate polynomial from ascending coefficients."""
        return cls(1, {(i,): as_fraction(c) for i, c in enumerate(coeffs)})

    # -- basic queries ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self.coeffs), default=-1)

    def is_constant(self) -> bool:
        return self.degree() <= 0

    def constant_term(self) -> Fraction:
        return self.coeffs.get((0,) * self.nvars, Fraction(0))

    def univariate_coeffs(self) -> List[Fraction]:
        """Ascending coefficient list (univariate only)."""
        self._require_univariate()
        deg = self.degree()
        out = [Fraction(0)] * (deg + 1)
        for (e,), c in self.coeffs.items():
            out[e] = c
        return out

    def leading_coeff(self) -> Fraction:
        self._require_univariate()
        if self.is_zero():
            return Fraction(0)
        return self.coeffs[(self.degree(),)]

    def _require_univariate(self):
        if self.nvars != 1:
            raise ValueError("operation requires a univariate polynomial")

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "RationalPoly":
        if isinstance(other, RationalPoly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return RationalPoly.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, Fraction(0)) + c
        return RationalPoly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly(self.nvars, {m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.coeffs.items():
            for m2, c2 in other.coeffs.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return RationalPoly(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, RationalPoly):
            if not other.is_constant() or other.is_zero():
                raise ValueError("exact division by a non-constant polynomial; use divmod")
            other = other.constant_term()
        q = as_fraction(other)
        return RationalPoly(self.nvars, {m: c / q for m, c in self.coeffs.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        result = RationalPoly.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, RationalPoly):
            return self.nvars == other.nvars and self.coeffs == other.coeffs
        try:
            return self == RationalPoly.constant(self.nvars, other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.coeffs.items())))

    # -- calculus and substitution -----------------------------------------
    def diff(self, i: int = 0) -> "RationalPoly":
        out = {}
        for m, c in self.coeffs.items():
            if m[i]:
                mm = list(m)
                mm[i] -= 1
                out[tuple(mm)] = c * m[i]
        return RationalPoly(self.nvars, out)

    def antiderivative(self) -> "RationalPoly":
        """Univariate antiderivative vanishing at 0."""
        self._require_univariate()
        return RationalPoly(1, {(e + 1,): c / (e + 1) for (e,), c in self.coeffs.items()})

    def integrate(self, a, b) -> Fraction:
        """Exact univariate integral over [a, b]."""
        prim = self.antiderivative()
        return prim(as_fraction(b)) - prim(as_fraction(a))

    def compose(self, subs: Sequence["RationalPoly"]) -> "RationalPoly":
        """Substitute ``subs[i]`` for variable i (all subs share one variable count)."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        nv = subs[0].nvars
        out = RationalPoly(nv)
        powers: List[Dict[int, RationalPoly]] = [{0: RationalPoly.constant(nv, 1)} for _ in subs]

        def power(i: int, e: int) -> RationalPoly:
            cache = powers[i]
            if e not in cache:
                cache[e] = power(i, e - 1) * subs[i]
            return cache[e]

        for m, c in self.coeffs.items():
            term = RationalPoly.constant(nv, c)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    # -- evaluation ---------------------------------------------------------
    def __call__(self, *point) -> Fraction:
        """Exact evaluation at a rational point (scalar args or one sequence)."""
        if len(point) == 1 and isinstance(point[0], (list, tuple)):
            point = tuple(point[0])
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates, got {len(point)}")
        pt = [as_fraction(x) for x in point]
        total = Fraction(0)
        for m, c in self.coeffs.items():
            term = c
            for x, e in zip(pt, m):
                if e:
                    term *= x**e
            total += term
        return total

    def eval_float(self, points) -> np.ndarray:
        """Vectorized float evaluation; ``points`` has shape (..., nvars)."""
        pts = np.asarray(points, dtype=float)
        if self.nvars == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        out = np.zeros(pts.shape[:-1])
        for m, c in self.coeffs.items():
            term = np.full(pts.shape[:-1], float(c))
            for i, e in enumerate(m):
                if e:
                    term = term * pts[..., i] ** e
            out = out + term
        return out

    # -- univariate division ------------------------------------------------
    def __divmod__(self, other: "RationalPoly"):
        self._require_univariate()
        other._require_univariate()
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = self.univariate_coeffs() if not self.is_zero() else []
        den = other.univariate_coeffs()
        dd = len(den) - 1
        lead = den[-1]
        quot = [Fraction(0)] * max(len(rem) - dd, 0)
        while len(rem) - 1 >= dd and any(rem):
            shift = len(rem) - 1 - dd
            q = rem[-1] / lead
            quot[shift] = q
            for i, d in enumerate(den):
                rem[shift + i] -= q * d
            rem.pop()
            while rem and rem[-1] == 0:
                rem.pop()
        return RationalPoly.from_coeffs(quot), RationalPoly.from_coeffs(rem)

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_quotient(self, other: "RationalPoly") -> "RationalPoly | None":
        """Univariate quotient if ``other`` divides ``self`` exactly, else None."""
        q, r = divmod(self, other)
        return q if r.is_zero() else None

    # -- display ------------------------------------------------------------
    def to_string(self, names: Sequence[str] | None = None, ascending: bool = False) -> str:
        if names is None:
            names = ["z"] if self.nvars == 1 else [f"p{i + 1}" for i in range(self.nvars)]
        if self.is_zero():
            return "0"
        parts = []
        order = sorted(self.coeffs, key=lambda m: (-sum(m), tuple(-e for e in m)))
        if ascending:
            order.reverse()
        for m in order:
            c = self.coeffs[m]
            factors = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, m) if e]
            mag = abs(c)
            if factors:
                body = "*".join(factors)
                text = body if mag == 1 else f"{format_fraction(mag)}*{body}"
            else:
                text = format_fraction(mag)
            parts.append(("-" if c < 0 else "+", text))
        sign, text = parts[0]
        out = ("-" if sign == "-" else "") + text
        for sign, text in parts[1:]:
            out += f" {sign} {text}"
        return out

    def __repr__(self):
        return f"RationalPoly({self.to_string()})"

    def __str__(self):
        return self.to_string()


# ---------------------------------------------------------------------------
# Sturm sequences
# ---------------------------------------------------------------------------

def sturm_sequence(p: RationalPoly) -> List[RationalPoly]:
    """Standard Sturm chain p, p', -rem(p, p'), ...  (exact)."""
    p._require_univariate()
    if p.is_zero():
        raise ValueError("Sturm sequence of the zero polynomial")
    chain = [p, p.diff(0)]
    while not chain[-1].is_zero():
        r = chain[-2] % chain[-1]
        if r.is_zero():
            break
        # normalize to keep coefficient growth down; only the sign matters
        r = -r / abs(r.leading_coeff())
        chain.append(r)
    if chain[-1].is_zero():
        chain.pop()
    return chain


def _sign_changes(values: Iterable[Fraction]) -> int:
    signs = [v > 0 for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_distinct_roots(p: RationalPoly, a, b, chain: List[RationalPoly] | None = None) -> int:
    """Number of distinct real roots of ``p`` in the half-open interval (a, b]."""
    a, b = as_fraction(a), as_fraction(b)
    if a >= b:
        raise ValueError("need a < b")
    chain = chain or sturm_sequence(p)
    return _sign_changes(q(a) for q in chain) - _sign_changes(q(b) for q in chain)


def isolate_roots(p: RationalPoly, a, b, tol=Fraction(1, 2**50)) -> List[Tuple[Fraction, Fraction]]:
    """Disjoint intervals (lo, hi] each holding exactly one distinct root of p in (a, b]."""
    chain = sturm_sequence(p)
    out = []
    stack = [(as_fraction(a), as_fraction(b))]
    while stack:
        lo, hi = stack.pop()
        n = count_distinct_roots(p, lo, hi, chain)
        if n == 0:
            continue
        if n == 1 and hi - lo <= tol:
            out.append((lo, hi))
            continue
        if n == 1:
            # shrink by bisection until tight enough
            while hi - lo > tol:
                mid = (lo + hi) / 2
                if count_distinct_roots(p, lo, mid, chain) == 1:
                    hi = mid
                else:
                    lo = mid
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        stack.append((mid, hi))
        stack.append((lo, mid))
    return sorted(out)


def strip_root(p: RationalPoly, r) -> Tuple[RationalPoly, int]:
    """Divide out (z - r) as often as it divides p; returns (quotient, multiplicity)."""
    factor = RationalPoly.from_coeffs([-as_fraction(r), 1])
    mult = 0
    while not p.is_zero() and p(r) == 0:
        p = p // factor
        mult += 1
    return p, mult
