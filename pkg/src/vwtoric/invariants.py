"""Toric (v, w)-slope, the polytope Futaki functional and the extremal affine function.

All values are polytope-normalized: the torus volume factor (2*pi)^dim is
dropped unless ``torus_factor=True`` is passed to :func:`futaki`.

Every function has a float pipeline (Gauss rules of ``order`` nodes) and an
exact pipeline (``pipeline="exact"``) that requires polynomial weights and
returns Fractions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from .errors import NonConvexPieces, SingularGram, ValidationError
from .geometry import AffineForm, Polytope, frac_solve, restrict
from .poly import RationalPoly, as_fraction, format_fraction
from .quad import (
    DEFAULT_ORDER,
    integrate_boundary,
    integrate_exact_boundary,
    integrate_exact_poly,
    integrate_interior,
)
from .weights import WeightExpr, affine, check_positive

# relative size below which a float integral of w counts as zero
ZERO_MASS_TOL = 1e-13


@dataclass(frozen=True)
class PLConvex:
    """``f(p) = max_j (<slopes_j, p> + intercepts_j)`` with rational data."""

    pieces: Tuple[Tuple[Tuple[Fraction, ...], Fraction], ...]

    def __post_init__(self):
        if not self.pieces:
            raise ValidationError("a PL function needs at least one piece")
        norm = []
        for vec, lam in self.pieces:
            item = (tuple(as_fraction(x) for x in vec), as_fraction(lam))
            if item not in norm:
                norm.append(item)
        dims = {len(v) for v, _ in norm}
        if len(dims) != 1:
            raise ValidationError("PL pieces have inconsistent dimensions")
        object.__setattr__(self, "pieces", tuple(norm))

    @classmethod
    def affine(cls, vec: Sequence, lam) -> "PLConvex":
        return cls(((tuple(vec), lam),))

    @classmethod
    def from_pairs(cls, pairs) -> "PLConvex":
        return cls(tuple((tuple(v), lam) for v, lam in pairs))

    @property
    def dim(self) -> int:
        return len(self.pieces[0][0])

    @property
    def is_affine(self) -> bool:
        return len(self.pieces) == 1

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        vals = [X @ np.array([float(x) for x in v]) + float(lam) for v, lam in self.pieces]
        return np.max(np.stack(vals), axis=0)

    def exact(self, p: Sequence) -> Fraction:
        p = [as_fraction(x) for x in p]
        return max(sum((a * x for a, x in zip(v, p)), Fraction(0)) + lam for v, lam in self.pieces)

    def piece_poly(self, j: int) -> RationalPoly:
        v, lam = self.pieces[j]
        return RationalPoly.affine(v, lam)

    def piece_weight(self, j: int) -> WeightExpr:
        v, lam = self.pieces[j]
        return affine(v, lam)

    def shifted(self, vec: Sequence, lam) -> "PLConvex":
        """f + (<vec, p> + lam)."""
        vec = [as_fraction(x) for x in vec]
        return PLConvex(tuple((tuple(a + b for a, b in zip(v, vec)), l + as_fraction(lam))
                              for v, l in self.pieces))

    def to_json(self) -> list:
        return [{"slope": [format_fraction(x) for x in v], "intercept": format_fraction(lam)}
                for v, lam in self.pieces]


@dataclass(frozen=True)
class Cell:
    """Region of P where one piece of f is active, with the facets lying on the boundary of P."""

    piece: int
    polytope: Polytope
    boundary_facets: tuple


def pl_cells(P: Polytope, f: PLConvex) -> List[Cell]:
    """Subdivision of P by the creases of f (exact); pieces never active on P are dropped."""
    key = ("pl_cells", f.pieces)
    if key in P._cache:
        return P._cache[key]
    if f.dim != P.dim:
        raise ValidationError(f"PL function has dimension {f.dim}, polytope {P.dim}")
    m = len(P.labels)
    cells = []
    if f.is_affine:
        cells.append(Cell(0, P, P.facets))
    else:
        for j, (vj, lj) in enumerate(f.pieces):
            extra = []
            dead = False
            for i, (vi, li) in enumerate(f.pieces):
                if i == j:
                    continue
                normal = [a - b for a, b in zip(vj, vi)]
                off = lj - li
                if not any(normal):
                    if off < 0:
                        dead = True
                        break
                    continue
                extra.append(AffineForm.from_rational(normal, off))
            if dead:
                continue
            C = restrict(P, extra)
            if C is None:
                continue
            cells.append(Cell(j, C, tuple(fc for fc in C.facets if fc.label_index < m)))
    P._cache[key] = cells
    return cells


def active_pieces(P: Polytope, f: PLConvex) -> PLConvex:
    """Drop pieces that are never active on P."""
    return PLConvex(tuple(f.pieces[c.piece] for c in pl_cells(P, f)))


def check_convex(P: Polytope, f: PLConvex) -> None:
    """Midpoint convexity of f on all pairs of cell vertices (exact)."""
    pts = sorted({v for c in pl_cells(P, f) for v in c.polytope.vertices})
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            mid = tuple((x + y) / 2 for x, y in zip(pts[a], pts[b]))
            if f.exact(mid) > (f.exact(pts[a]) + f.exact(pts[b])) / 2:
                raise NonConvexPieces(f"convexity fails between {pts[a]} and {pts[b]}")


# ---------------------------------------------------------------------------
# slope
# ---------------------------------------------------------------------------

def _require_poly(e: WeightExpr, name: str) -> RationalPoly:
    q = e.as_polynomial()
    if q is None:
        raise ValidationError(f"exact pipeline needs a polynomial weight {name}, got {e}")
    return q


def boundary_mass(P: Polytope, v: WeightExpr, order: int = DEFAULT_ORDER, pipeline: str = "float"):
    if pipeline == "exact":
        return integrate_exact_boundary(P, _require_poly(v, "v"))
    return integrate_boundary(P, v, order)


def interior_mass(P: Polytope, w: WeightExpr, order: int = DEFAULT_ORDER, pipeline: str = "float"):
    if pipeline == "exact":
        return integrate_exact_poly(P, _require_poly(w, "w"))
    return integrate_interior(P, w, order)


def slope(P: Polytope, v: WeightExpr, w: WeightExpr, order: int = DEFAULT_ORDER,
          pipeline: str = "float", check: bool = True):
    """c = 2 * int_{dP} v dsigma / int_P w dp, or 1 when int_P w dp = 0."""
    if check:
        check_positive(v, P, "v")
    num = 2 * boundary_mass(P, v, order, pipeline)
    den = interior_mass(P, w, order, pipeline)
    if pipeline == "exact":
        return Fraction(1) if den == 0 else num / den
    scale = integrate_interior(P, lambda X: np.abs(w(X)), order)
    if abs(den) <= ZERO_MASS_TOL * max(scale, 1e-300):
        return 1.0
    return num / den


# ---------------------------------------------------------------------------
# Futaki functional
# ---------------------------------------------------------------------------

def futaki(P: Polytope, v: WeightExpr, w: WeightExpr, f: PLConvex, c=None,
           order: int = DEFAULT_ORDER, pipeline: str = "float", validate: bool = False,
           torus_factor: bool = False):
    """F(f) = 2 int_{dP} f v dsigma - c int_P f w dp, integrated cell by cell.

    ``c`` defaults to :func:`slope`.  With ``validate`` the PL input is checked
    for convexity first.
    """
    if validate:
        check_convex(P, f)
    if c is None:
        c = slope(P, v, w, order, pipeline)
    cells = pl_cells(P, f)
    if pipeline == "exact":
        vq, wq = _require_poly(v, "v"), _require_poly(w, "w")
        c = as_fraction(c)
        total = Fraction(0)
        for cell in cells:
            fj = f.piece_poly(cell.piece)
            total += 2 * integrate_exact_boundary(cell.polytope, fj * vq, cell.boundary_facets)
            total -= c * integrate_exact_poly(cell.polytope, fj * wq)
    else:
        c = float(c)
        total = 0.0
        for cell in cells:
            vec, lam = f.pieces[cell.piece]
            a = np.array([float(x) for x in vec])
            fj = lambda X, a=a, lam=float(lam): X @ a + lam  # noqa: E731
            total += 2 * integrate_boundary(cell.polytope, lambda X: fj(X) * v(X), order,
                                            cell.boundary_facets)
            total -= c * integrate_interior(cell.polytope, lambda X: fj(X) * w(X), order)
    if torus_factor:
        total = total * (2 * math.pi) ** P.dim
    return total


# ---------------------------------------------------------------------------
# extremal affine function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremalAffine:
    """w_ext(p) = <xi, p> + c together with solve diagnostics."""

    xi: Tuple
    c: object
    gram_condition: float
    residual: float
    exact: bool = False

    def as_weight(self) -> WeightExpr:
        return affine(self.xi, self.c)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ np.array([float(x) for x in self.xi]) + float(self.c)

    def to_json(self) -> dict:
        if self.exact:
            return {"xi": [format_fraction(x) for x in self.xi], "c": format_fraction(self.c),
                    "gram_condition": self.gram_condition, "residual": self.residual}
        return {"xi": [float(x) for x in self.xi], "c": float(self.c),
                "gram_condition": self.gram_condition, "residual": self.residual}


def _basis(dim: int):
    return [lambda X: np.ones(len(X))] + [lambda X, i=i: X[:, i] for i in range(dim)]


def w_ext_system(P: Polytope, v: WeightExpr, w: WeightExpr, order: int = DEFAULT_ORDER,
                 pipeline: str = "float"):
    """Gram matrix G_ab = int e_a e_b w dp and right side b_a = 2 int_{dP} e_a v dsigma."""
    n = P.dim + 1
    if pipeline == "exact":
        vq, wq = _require_poly(v, "v"), _require_poly(w, "w")
        e = [RationalPoly.constant(P.dim, 1)] + [RationalPoly.variable(P.dim, i) for i in range(P.dim)]
        G = [[integrate_exact_poly(P, e[a] * e[b] * wq) for b in range(n)] for a in range(n)]
        rhs = [2 * integrate_exact_boundary(P, e[a] * vq) for a in range(n)]
        return G, rhs
    e = _basis(P.dim)
    G = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            G[a, b] = G[b, a] = integrate_interior(P, lambda X: e[a](X) * e[b](X) * w(X), order)
    rhs = np.array([2 * integrate_boundary(P, lambda X: e[a](X) * v(X), order) for a in range(n)])
    return G, rhs


def solve_w_ext(P: Polytope, v: WeightExpr, w: WeightExpr, order: int = DEFAULT_ORDER,
                pipeline: str = "float", check: bool = True) -> ExtremalAffine:
    """L^2_w projection onto affine functions; makes the slope of (v, w * w_ext) equal to 1."""
    if check:
        check_positive(w, P, "w")
    G, rhs = w_ext_system(P, v, w, order, pipeline)
    if pipeline == "exact":
        x = frac_solve(G, rhs)
        if x is None:
            raise SingularGram("Gram matrix is singular")
        Gf = np.array([[float(g) for g in row] for row in G])
        residual = max(abs(sum(G[a][b] * x[b] for b in range(len(x))) - rhs[a]) for a in range(len(x)))
        return ExtremalAffine(tuple(x[1:]), x[0], float(np.linalg.cond(Gf)), float(residual), exact=True)
    cond = float(np.linalg.cond(G))
    if not math.isfinite(cond) or cond > 1e14:
        raise SingularGram(f"Gram matrix is numerically singular (cond {cond:.3g})")
    x = np.linalg.solve(G, rhs)
    residual = float(np.max(np.abs(G @ x - rhs)))
    return ExtremalAffine(tuple(float(t) for t in x[1:]), float(x[0]), cond, residual)


def relative_futaki(P: Polytope, v: WeightExpr, w: WeightExpr, f: PLConvex,
                    order: int = DEFAULT_ORDER, pipeline: str = "float", wext: ExtremalAffine | None = None):
    """Futaki functional of (v, w * w_ext) with slope 1; vanishes on affine f."""
    wext = wext or solve_w_ext(P, v, w, order, pipeline)
    return futaki(P, v, w * wext.as_weight(), f, 1, order, pipeline)


# ---------------------------------------------------------------------------
# destabilizer scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanGrid:
    """Simple-crease family ``max(<a, p> + b, 0)``.

    Either explicit ``offsets`` (used for every direction) or ``n_offsets``
    evenly spaced rational offsets strictly inside the range where the crease
    meets P.
    """

    directions: Tuple[Tuple[Fraction, ...], ...]
    offsets: Tuple[Fraction, ...] = ()
    n_offsets: int = 0

    @classmethod
    def lattice(cls, dim: int, max_coeff: int = 1, n_offsets: int = 9) -> "ScanGrid":
        """All primitive integer directions with entries in [-max_coeff, max_coeff]."""
        import itertools

        dirs = []
        for vec in itertools.product(range(-max_coeff, max_coeff + 1), repeat=dim):
            if any(vec) and math.gcd(*[abs(x) for x in vec]) == 1:
                dirs.append(tuple(Fraction(x) for x in vec))
        return cls(tuple(dirs), (), n_offsets)

    def candidates(self, P: Polytope) -> List[Tuple[Tuple[Fraction, ...], Fraction]]:
        out = []
        for a in self.directions:
            vals = [sum((x * y for x, y in zip(a, vert)), Fraction(0)) for vert in P.vertices]
            lo, hi = min(vals), max(vals)
            if self.offsets:
                offs = self.offsets
            else:
                n = self.n_offsets
                offs = [-(lo + (hi - lo) * Fraction(i, n + 1)) for i in range(1, n + 1)]
            for b in offs:
                # crease must cut the interior: the affine function changes sign strictly
                if lo + b < 0 < hi + b:
                    out.append((a, b))
        return out


@dataclass(frozen=True)
class ScanResult:
    direction: Tuple[Fraction, ...]
    offset: Fraction
    value: float

    @property
    def function(self) -> PLConvex:
        return PLConvex(((self.direction, self.offset), (tuple(Fraction(0) for _ in self.direction), Fraction(0))))

    def to_json(self) -> dict:
        return {"direction": [format_fraction(x) for x in self.direction],
                "offset": format_fraction(self.offset), "value": self.value}


def scan_destabilizers(P: Polytope, v: WeightExpr, w: WeightExpr, grid: ScanGrid,
                       order: int = DEFAULT_ORDER, threads: int = 1) -> List[ScanResult]:
    """Futaki values over the single-crease family, ascending by value.

    A minimum below ``-tolerance`` marks a destabilizer candidate.
    """
    cands = grid.candidates(P)
    if not cands:
        return []
    c = slope(P, v, w, order)

    def run(ab):
        a, b = ab
        zero = tuple(Fraction(0) for _ in a)
        return ScanResult(a, b, float(futaki(P, v, w, PLConvex(((a, b), (zero, Fraction(0)))), c, order)))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, cands))
    else:
        results = [run(ab) for ab in cands]
    order_idx = sorted(range(len(results)), key=lambda i: (results[i].value, i))
    return [results[i] for i in order_idx]
