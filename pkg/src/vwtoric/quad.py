"""Integration over polytopes and their boundaries.

Floating rules: collapsed-coordinate Gauss-Jacobi products on each simplex of
the centroid fan triangulation (``order`` nodes per axis, exact for degree
``2*order - 1`` in each collapsed coordinate).  Exact rules: rational
polynomials pulled back to the reference simplex and integrated monomial by
monomial with ``int t^a = a! / (|a| + d)!``.

The boundary measure on the facet ``L_i = 0`` is the one with
``dL_i ^ dsigma = -dp``; on a facet simplex with edge matrix ``E`` its mass is
``|det[n/|n|^2, E]| / (d-1)!``, which is rational.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.special import roots_jacobi

from .errors import NonFiniteIntegrand
from .geometry import Facet, Point, Polytope, frac_det
from .poly import RationalPoly

DEFAULT_ORDER = 16

Integrand = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def reference_simplex_rule(d: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes (n, d) and weights on {t >= 0, sum t <= 1}; weights sum to 1/d!."""
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    rules = []
    for j in range(d):
        a = d - 1 - j  # weight (1 - s)^a on [0, 1]
        x, w = roots_jacobi(order, a, 0)
        rules.append(((x + 1) / 2, w / 2 ** (a + 1)))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    S = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    T = np.empty_like(S)
    rest = np.ones(len(S))
    for j in range(d):
        T[:, j] = rest * S[:, j]
        rest = rest * (1 - S[:, j])
    return T, W


def _simplex_nodes(simplex: Sequence[Point], order: int, scale: float) -> Tuple[np.ndarray, np.ndarray]:
    d = len(simplex) - 1
    T, W = reference_simplex_rule(d, order)
    s0 = np.array([float(x) for x in simplex[0]])
    if d == 0:
        return s0[None, :], W * scale
    E = np.array([[float(a - b) for a, b in zip(q, simplex[0])] for q in simplex[1:]])  # (d, dim)
    return s0 + T @ E, W * scale


def _edge_matrix(simplex: Sequence[Point]) -> List[List[Fraction]]:
    return [[a - b for a, b in zip(q, simplex[0])] for q in simplex[1:]]


def _interior_scale(simplex: Sequence[Point]) -> Fraction:
    return abs(frac_det(_edge_matrix(simplex)))


def _boundary_scale(simplex: Sequence[Point], normal: Sequence[int]) -> Fraction:
    n2 = sum(x * x for x in normal)
    lift = [Fraction(x, n2) for x in normal]
    return abs(frac_det([lift] + _edge_matrix(simplex)))


def interior_rule(P: Polytope, order: int = DEFAULT_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    key = ("interior_rule", order)
    if key not in P._cache:
        xs, ws = [], []
        for s in P.simplices():
            X, W = _simplex_nodes(s, order, float(_interior_scale(s)))
            xs.append(X)
            ws.append(W)
        P._cache[key] = (np.vstack(xs), np.concatenate(ws))
    return P._cache[key]


def boundary_rule(P: Polytope, order: int = DEFAULT_ORDER,
                  facets: Iterable[Facet] | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for integration against dsigma over the chosen facets (default: all)."""
    facets = tuple(P.facets if facets is None else facets)
    key = ("boundary_rule", order, tuple(f.label_index for f in facets))
    if key not in P._cache:
        xs, ws = [], []
        for f in facets:
            for s in P.facet_simplices(f):
                X, W = _simplex_nodes(s, order, float(_boundary_scale(s, f.normal)))
                xs.append(X)
                ws.append(W)
        if xs:
            P._cache[key] = (np.vstack(xs), np.concatenate(ws))
        else:
            P._cache[key] = (np.zeros((0, P.dim)), np.zeros(0))
    return P._cache[key]


def _apply(g: Integrand, X: np.ndarray, W: np.ndarray) -> float:
    if len(W) == 0:
        return 0.0
    vals = np.asarray(g(X), dtype=float)
    if vals.shape == ():
        vals = np.full(len(W), float(vals))
    bad = ~np.isfinite(vals)
    if bad.any():
        raise NonFiniteIntegrand(tuple(X[np.argmax(bad)]))
    return float(W @ vals)


def integrate_interior(P: Polytope, g: Integrand, order: int = DEFAULT_ORDER) -> float:
    """Integral of ``g`` over P against dp.  ``g`` maps (N, dim) points to (N,) values."""
    X, W = interior_rule(P, order)
    return _apply(g, X, W)


def integrate_boundary(P: Polytope, g: Integrand, order: int = DEFAULT_ORDER,
                       facets: Iterable[Facet] | None = None) -> float:
    """Integral of ``g`` over the boundary of P against dsigma."""
    X, W = boundary_rule(P, order, facets)
    return _apply(g, X, W)


# ---------------------------------------------------------------------------
# exact pipeline
# ---------------------------------------------------------------------------

def _monomial_simplex_integral(alpha: Sequence[int]) -> Fraction:
    d = len(alpha)
    num = 1
    for a in alpha:
        num *= math.factorial(a)
    return Fraction(num, math.factorial(sum(alpha) + d))


def _pullback(q: RationalPoly, simplex: Sequence[Point]) -> RationalPoly:
    d = len(simplex) - 1
    E = _edge_matrix(simplex)
    subs = []
    for i in range(q.nvars):
        coords = [E[j][i] for j in range(d)]
        subs.append(RationalPoly.affine(coords, simplex[0][i]))
    return q.compose(subs)


def _exact_over_simplex(q: RationalPoly, simplex: Sequence[Point], scale: Fraction) -> Fraction:
    if len(simplex) == 1:
        return scale * q(simplex[0])
    pulled = _pullback(q, simplex)
    total = Fraction(0)
    for alpha, c in pulled.coeffs.items():
        total += c * _monomial_simplex_integral(alpha)
    return scale * total


def integrate_exact_poly(P: Polytope, q: RationalPoly) -> Fraction:
    """Exact integral of a rational polynomial over P."""
    return sum((_exact_over_simplex(q, s, _interior_scale(s)) for s in P.simplices()), Fraction(0))


def integrate_exact_boundary(P: Polytope, q: RationalPoly,
                             facets: Iterable[Facet] | None = None) -> Fraction:
    """Exact integral of a rational polynomial over the boundary of P against dsigma."""
    total = Fraction(0)
    for f in (P.facets if facets is None else facets):
        for s in P.facet_simplices(f):
            total += _exact_over_simplex(q, s, _boundary_scale(s, f.normal))
    return total
