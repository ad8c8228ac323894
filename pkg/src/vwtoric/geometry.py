"""Labelled rational polytopes, facets with their boundary measure, lattice points.

A polytope is given by affine forms ``L_i(p) = <n_i, p> + c_i >= 0`` with
primitive integer normals.  Vertices and facet incidences are computed in
exact rational arithmetic.  The boundary measure on the facet ``L_i = 0`` is
Euclidean measure divided by ``|n_i|``, so that ``dL_i ^ dsigma = -dp``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, EmptyInterior, NonPrimitiveNormal, UnboundedRegion
from .poly import as_fraction, format_fraction

Point = Tuple[Fraction, ...]


# ---------------------------------------------------------------------------
# exact linear algebra on small Fraction matrices
# ---------------------------------------------------------------------------

def _row_reduce(rows: List[List[Fraction]]) -> Tuple[List[List[Fraction]], List[int]]:
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        lead = m[r][c]
        m[r] = [x / lead for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def frac_solve(A: Sequence[Sequence], b: Sequence) -> List[Fraction] | None:
    """Solve the square system A x = b exactly; None if singular."""
    n = len(A)
    aug = [[as_fraction(x) for x in row] + [as_fraction(bi)] for row, bi in zip(A, b)]
    red, pivots = _row_reduce(aug)
    if pivots[:n] != list(range(n)):
        return None
    return [red[i][n] for i in range(n)]


def frac_det(A: Sequence[Sequence]) -> Fraction:
    m = [[as_fraction(x) for x in row] for row in A]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for i in range(c + 1, n):
            if m[i][c]:
                f = m[i][c] / m[c][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return det


def affine_rank(points: Sequence[Point]) -> int:
    """Dimension of the affine hull (-1 for no points)."""
    if not points:
        return -1
    base = points[0]
    diffs = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    if not diffs:
        return 0
    _, pivots = _row_reduce(diffs)
    return len(pivots)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineForm:
    """``L(p) = <normal, p> + offset`` with a primitive integer normal."""

    normal: Tuple[int, ...]
    offset: Fraction

    def __post_init__(self):
        normal = tuple(int(x) for x in self.normal)
        if any(n != x for n, x in zip(normal, self.normal)):
            raise NonPrimitiveNormal(f"normal {self.normal} is not integral")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", as_fraction(self.offset))
        if not any(normal):
            raise NonPrimitiveNormal("zero normal")
        if reduce(math.gcd, (abs(x) for x in normal)) != 1:
            raise NonPrimitiveNormal(f"normal {normal} is not primitive")

    @property
    def dim(self) -> int:
        return len(self.normal)

    def __call__(self, p: Sequence) -> Fraction:
        return sum((n * as_fraction(x) for n, x in zip(self.normal, p)), Fraction(0)) + self.offset

    def eval_float(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ np.asarray(self.normal, dtype=float) + float(self.offset)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(n * n for n in self.normal))

    @classmethod
    def from_rational(cls, normal: Sequence, offset) -> "AffineForm":
        """Rescale a rational form by a positive factor to a primitive integer normal."""
        fr = [as_fraction(x) for x in normal]
        if not any(fr):
            raise NonPrimitiveNormal("zero normal")
        lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (x.denominator for x in fr), 1)
        ints = [int(x * lcm) for x in fr]
        g = reduce(math.gcd, (abs(x) for x in ints))
        scale = Fraction(lcm, g)
        return cls(tuple(x // g for x in ints), as_fraction(offset) * scale)

    def to_json(self) -> dict:
        return {"normal": list(self.normal), "offset": format_fraction(self.offset)}


@dataclass(frozen=True)
class Facet:
    label_index: int
    vertex_indices: Tuple[int, ...]
    normal: Tuple[int, ...]
    density: float


@dataclass(frozen=True)
class PointLocation:
    kind: str  # "interior" | "boundary" | "outside"
    facets: Tuple[int, ...] = ()


@dataclass(frozen=True)
class LatticePointSet:
    k: int
    points: np.ndarray  # (N, dim) int array, lexicographic

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Bounded full-dimensional polytope ``{p : L_i(p) >= 0}``.

    Build with :func:`polytope_from_halfspaces`.  ``vertices`` are exact.
    """

    dim: int
    labels: Tuple[AffineForm, ...]
    vertices: Tuple[Point, ...]
    incidence: Tuple[FrozenSet[int], ...]  # per label: vertices on L_i = 0
    facets: Tuple[Facet, ...]
    _cache: Dict = field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def vertex_array(self) -> np.ndarray:
        return np.array([[float(x) for x in v] for v in self.vertices])

    @cached_property
    def centroid(self) -> Point:
        n = len(self.vertices)
        return tuple(sum((v[i] for v in self.vertices), Fraction(0)) / n for i in range(self.dim))

    @cached_property
    def bounding_box(self) -> Tuple[Point, Point]:
        lo = tuple(min(v[i] for v in self.vertices) for i in range(self.dim))
        hi = tuple(max(v[i] for v in self.vertices) for i in range(self.dim))
        return lo, hi

    def facet_labels(self) -> List[int]:
        return [f.label_index for f in self.facets]

    def to_json(self) -> dict:
        return {"dim": self.dim, "labels": [lab.to_json() for lab in self.labels]}

    # -- face lattice / triangulation --------------------------------------
    def subfaces(self, face: FrozenSet[int], face_dim: int) -> List[FrozenSet[int]]:
        """Faces of dimension ``face_dim - 1`` contained in ``face``."""
        seen = set()
        out = []
        for f in self.facets:
            sub = face & self.incidence[f.label_index]
            if sub == face or sub in seen or not sub:
                continue
            if affine_rank([self.vertices[i] for i in sorted(sub)]) == face_dim - 1:
                seen.add(sub)
                out.append(sub)
        return sorted(out, key=sorted)

    def triangulate_face(self, face: FrozenSet[int], face_dim: int) -> List[Tuple[Point, ...]]:
        """Fan triangulation from the centroid, recursively over subfaces."""
        verts = [self.vertices[i] for i in sorted(face)]
        if face_dim == 0:
            return [(verts[0],)]
        if len(verts) == face_dim + 1:
            return [tuple(verts)]
        apex = tuple(sum((v[i] for v in verts), Fraction(0)) / len(verts) for i in range(self.dim))
        out = []
        for sub in self.subfaces(face, face_dim):
            for simplex in self.triangulate_face(sub, face_dim - 1):
                out.append((apex,) + simplex)
        return out

    def simplices(self) -> List[Tuple[Point, ...]]:
        """Simplicial decomposition of P (cached)."""
        if "simplices" not in self._cache:
            full = frozenset(range(len(self.vertices)))
            self._cache["simplices"] = self.triangulate_face(full, self.dim)
        return self._cache["simplices"]

    def facet_simplices(self, facet: Facet) -> List[Tuple[Point, ...]]:
        key = ("facet", facet.label_index)
        if key not in self._cache:
            face = self.incidence[facet.label_index]
            self._cache[key] = self.triangulate_face(face, self.dim - 1)
        return self._cache[key]

    def facet_measure(self, facet: Facet) -> float:
        """Euclidean (dim-1)-measure of a facet (1 for a point)."""
        total = 0.0
        for s in self.facet_simplices(facet):
            if len(s) == 1:
                return 1.0
            E = np.array([[float(a - b) for a, b in zip(q, s[0])] for q in s[1:]])
            gram = E @ E.T
            total += math.sqrt(max(np.linalg.det(gram), 0.0)) / math.factorial(len(s) - 1)
        return total

    @cached_property
    def inradius(self) -> float:
        """Radius of the largest inscribed ball (Chebyshev center LP)."""
        A = np.array([[-n for n in lab.normal] + [lab.norm] for lab in self.labels], dtype=float)
        b = np.array([float(lab.offset) for lab in self.labels])
        res = linprog(np.r_[np.zeros(self.dim), -1.0], A_ub=A, b_ub=b,
                      bounds=[(None, None)] * self.dim + [(0, None)], method="highs")
        return float(res.x[-1])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_bounded(labels: Sequence[AffineForm], dim: int) -> None:
    A = -np.array([lab.normal for lab in labels], dtype=float)
    b = np.array([float(lab.offset) for lab in labels])
    for i in range(dim):
        for sgn in (1.0, -1.0):
            c = np.zeros(dim)
            c[i] = sgn
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * dim, method="highs")
            if res.status == 3:
                raise UnboundedRegion("half-space intersection is unbounded")
            if res.status == 2:
                raise EmptyInterior("half-space intersection is empty")


def polytope_from_halfspaces(labels: Sequence[AffineForm], *, check_bounded: bool = True) -> Polytope:
    """Build a polytope from inward affine forms; vertices exact.

    Raises UnboundedRegion, EmptyInterior, NonPrimitiveNormal.
    """
    labels = tuple(labels)
    if not labels:
        raise EmptyInterior("no labels")
    dim = labels[0].dim
    if any(lab.dim != dim for lab in labels):
        raise DimensionMismatch("labels have inconsistent dimensions")
    if len(labels) < dim + 1:
        raise UnboundedRegion(f"need at least {dim + 1} labels in dimension {dim}")
    if check_bounded:
        _check_bounded(labels, dim)

    verts: List[Point] = []
    seen = set()
    for combo in itertools.combinations(range(len(labels)), dim):
        A = [labels[i].normal for i in combo]
        b = [-labels[i].offset for i in combo]
        x = frac_solve(A, b)
        if x is None:
            continue
        x = tuple(x)
        if x in seen:
            continue
        if all(lab(x) >= 0 for lab in labels):
            seen.add(x)
            verts.append(x)
    verts.sort()
    if affine_rank(verts) < dim:
        raise EmptyInterior("polytope is not full-dimensional")

    incidence = tuple(frozenset(j for j, v in enumerate(verts) if lab(v) == 0) for lab in labels)
    facets = []
    used = set()
    for i, lab in enumerate(labels):
        vs = incidence[i]
        if not vs or vs in used:
            continue
        if affine_rank([verts[j] for j in sorted(vs)]) == dim - 1:
            used.add(vs)
            facets.append(Facet(i, tuple(sorted(vs)), lab.normal, 1.0 / lab.norm))
    return Polytope(dim, labels, tuple(verts), incidence, tuple(facets))


def lattice_points(P: Polytope, k: int) -> LatticePointSet:
    """Integer points of the dilate kP, lexicographically ordered (exact membership)."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError("dilation k must be a positive integer")
    k = int(k)
    lo, hi = P.bounding_box
    ranges = [range(math.ceil(k * a), math.floor(k * b) + 1) for a, b in zip(lo, hi)]
    grid = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, P.dim)
    keep = np.ones(len(grid), dtype=bool)
    for lab in P.labels:
        # <n, lam> + k*offset >= 0, cleared of denominators
        den = lab.offset.denominator
        lhs = grid @ (np.asarray(lab.normal, dtype=np.int64) * den) + k * lab.offset.numerator
        keep &= lhs >= 0
    return LatticePointSet(k, grid[keep])


def contains(P: Polytope, p: Sequence) -> PointLocation:
    """Classify a rational point as interior, boundary (with facet labels) or outside."""
    if len(p) != P.dim:
        raise DimensionMismatch(f"point has dimension {len(p)}, polytope has {P.dim}")
    vals = [lab(p) for lab in P.labels]
    if any(v < 0 for v in vals):
        return PointLocation("outside")
    on = tuple(i for i, v in enumerate(vals) if v == 0)
    if on:
        return PointLocation("boundary", on)
    return PointLocation("interior")


# ---------------------------------------------------------------------------
# convenience constructors and JSON
# ---------------------------------------------------------------------------

def interval(a, b) -> Polytope:
    """[a, b] with labels p - a >= 0, b - p >= 0."""
    a, b = as_fraction(a), as_fraction(b)
    return polytope_from_halfspaces([AffineForm((1,), -a), AffineForm((-1,), b)])


def box(lo: Sequence, hi: Sequence) -> Polytope:
    labels = []
    n = len(lo)
    for i, (a, b) in enumerate(zip(lo, hi)):
        e = [0] * n
        e[i] = 1
        labels.append(AffineForm(tuple(e), -as_fraction(a)))
        labels.append(AffineForm(tuple(-x for x in e), as_fraction(b)))
    return polytope_from_halfspaces(labels)


def standard_simplex(dim: int) -> Polytope:
    labels = []
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        labels.append(AffineForm(tuple(e), 0))
    labels.append(AffineForm(tuple([-1] * dim), 1))
    return polytope_from_halfspaces(labels)


def polytope_from_json(data: dict) -> Polytope:
    dim = int(data["dim"])
    labels = []
    for lab in data["labels"]:
        normal = tuple(lab["normal"])
        if len(normal) != dim:
            raise DimensionMismatch(f"label normal {normal} does not have dimension {dim}")
        labels.append(AffineForm(normal, as_fraction(lab["offset"])))
    return polytope_from_halfspaces(labels)


def restrict(P: Polytope, extra: Sequence[AffineForm]) -> Polytope | None:
    """P cut by extra half-spaces; None if the result has empty interior.

    The labels of P keep their indices, so facets on the boundary of P are
    those with ``label_index < len(P.labels)``.
    """
    try:
        return polytope_from_halfspaces(tuple(P.labels) + tuple(extra), check_bounded=False)
    except EmptyInterior:
        return None
