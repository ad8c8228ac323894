"""Toric test configurations from PL-convex functions and their lattice-sum weights.

For ``Q = {(p, t) : p in P, 0 <= t <= R - f(p)}`` the v-weight at level k is
``W_v(k) = sum_{lam in kP cap Z^n} (R - f)(lam/k) v(lam/k)``.  Fitting
``W_v(k) = a0 k^n + a1 k^(n-1) + ...`` gives the coefficients entering the
Donaldson-Futaki invariant ``DF = a_v1 - (c/4) a_w0``.

The boundary term of the lattice-sum expansion sits at order k^(n-1):
on [0, 1] one has ``sum_{lam=0}^k 1 = k + 1 = k * |P| + (1/2) * sigma(dP)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import List, Sequence, Tuple

import numpy as np

from .errors import CapViolation, InsufficientSamples
from .geometry import AffineForm, Polytope, frac_solve, lattice_points, polytope_from_halfspaces
from .invariants import PLConvex, futaki, pl_cells, slope
from .poly import as_fraction, format_fraction
from .quad import DEFAULT_ORDER
from .weights import WeightExpr

DISCREPANCY_NOTE = (
    "DF = a_v1 - (c/4) a_w0 with the fitted coefficients equals F^P(R - f)/4 = -F^P(f)/4, "
    "since F^P(1) = 0; a proportionality constant of +4 between DF and F^P(f) is also quoted "
    "for this identity. The ratio reported here is measured, not assumed."
)


@dataclass(frozen=True)
class ToricTestConfig:
    base: Polytope
    f: PLConvex
    R: Fraction
    Q: Polytope

    def height(self, X: np.ndarray) -> np.ndarray:
        return float(self.R) - self.f(X)


def build_config(P: Polytope, f: PLConvex, R) -> ToricTestConfig:
    """Lift P to Q with bottom facet t >= 0 and top facets t <= R - f_j(p)."""
    R = as_fraction(R)
    for vert in P.vertices:
        if f.exact(vert) > R:
            raise CapViolation(f"f = {f.exact(vert)} exceeds R = {R} at vertex {tuple(map(str, vert))}")
    dim = P.dim
    labels = [AffineForm(lab.normal + (0,), lab.offset) for lab in P.labels]
    labels.append(AffineForm((0,) * dim + (1,), 0))
    for v, lam in f.pieces:
        labels.append(AffineForm.from_rational([-x for x in v] + [-1], R - lam))
    Q = polytope_from_halfspaces(labels)
    return ToricTestConfig(P, f, R, Q)


def _profile(cfg: ToricTestConfig, v: WeightExpr, pts: np.ndarray, k: int, exact: bool):
    if exact:
        vq = v.as_polynomial()
        total = Fraction(0)
        for lam in pts:
            p = [Fraction(int(x), k) for x in lam]
            total += (cfg.R - cfg.f.exact(p)) * vq(p)
        return total
    X = pts.astype(float) / k
    return float(np.sum(cfg.height(X) * v(X)))


def weight_sum(cfg: ToricTestConfig, v: WeightExpr, k: int, exact: bool | None = None):
    """Exact Fraction when v is polynomial (and ``exact`` is not False), float otherwise."""
    if exact is None:
        exact = v.as_polynomial() is not None
    pts = lattice_points(cfg.base, k).points
    return _profile(cfg, v, pts, k, exact)


@dataclass(frozen=True)
class ExpansionFit:
    a0: object
    a1: object
    corrections: Tuple  # coefficients of k^(n-2), k^(n-3), ...
    residual: float  # size of the sub-leading remainder, in units of k^(n-2)
    lstsq_residual: float
    exact: bool

    def to_json(self) -> dict:
        fmt = format_fraction if self.exact else float
        return {"a0": fmt(self.a0), "a1": fmt(self.a1),
                "corrections": [fmt(c) for c in self.corrections],
                "residual": self.residual, "lstsq_residual": self.lstsq_residual}


def fit_expansion(series: Sequence[Tuple[int, object]], n: int, n_corrections: int | None = None) -> ExpansionFit:
    """Fit W(k) = a0 k^n + a1 k^(n-1) + sum_j b_j k^(n-j).

    Exact series (all Fractions) are interpolated exactly with
    ``len(series) - 2`` correction terms; float series use least squares
    with two correction terms.
    """
    ks = sorted({int(k) for k, _ in series})
    if len(ks) < 4:
        raise InsufficientSamples(f"need at least 4 distinct k, got {len(ks)}")
    data = dict((int(k), W) for k, W in series)
    exact = all(isinstance(data[k], (int, Fraction)) for k in ks)
    if exact:
        m = len(ks) - 2 if n_corrections is None else n_corrections
        if m + 2 != len(ks):
            raise ValueError("exact fit needs exactly len(series) - 2 correction terms")
        A = [[Fraction(k) ** (n - j) for j in range(m + 2)] for k in ks]
        x = frac_solve(A, [as_fraction(data[k]) for k in ks])
        corr = tuple(x[2:])
        res = math.sqrt(sum(float(b) ** 2 for b in corr))
        return ExpansionFit(x[0], x[1], corr, res, 0.0, True)
    m = 2 if n_corrections is None else n_corrections
    m = min(m, len(ks) - 2)
    A = np.array([[float(k) ** (n - j) for j in range(m + 2)] for k in ks])
    y = np.array([float(data[k]) for k in ks])
    # column scaling keeps the Vandermonde-type system well conditioned
    scale = np.max(np.abs(A), axis=0)
    x, *_ = np.linalg.lstsq(A / scale, y, rcond=None)
    x = x / scale
    corr = tuple(float(b) for b in x[2:])
    res = math.sqrt(sum(b * b for b in corr))
    lres = float(np.linalg.norm(A @ x - y))
    return ExpansionFit(float(x[0]), float(x[1]), corr, res, lres, False)


def crease_denominator(cfg: ToricTestConfig) -> int:
    """Least common denominator of the vertex coordinates of the crease subdivision."""
    dens = [x.denominator for c in pl_cells(cfg.base, cfg.f) for vert in c.polytope.vertices for x in vert]
    return reduce(lambda a, b: a * b // math.gcd(a, b), dens, 1)


def default_klist(cfg: ToricTestConfig, n_samples: int = 4) -> List[int]:
    L = crease_denominator(cfg)
    return [L * 8 * (i + 1) for i in range(n_samples)]


@dataclass(frozen=True)
class DFRecord:
    a_v0: object
    a_v1: object
    a_w0: object
    c: object
    DF: object
    F_P: object
    ratio: object
    klist: Tuple[int, ...]
    fit_v: ExpansionFit
    fit_w: ExpansionFit
    pipeline: str
    note: str = DISCREPANCY_NOTE

    def to_json(self) -> dict:
        exact = self.pipeline == "exact"

        def fmt(x):
            if x is None:
                return None
            return format_fraction(x) if exact else float(x)

        return {"a_v0": fmt(self.a_v0), "a_v1": fmt(self.a_v1), "a_w0": fmt(self.a_w0),
                "c": fmt(self.c), "DF": fmt(self.DF), "F_P": fmt(self.F_P), "ratio": fmt(self.ratio),
                "klist": list(self.klist), "fit_v": self.fit_v.to_json(), "fit_w": self.fit_w.to_json(),
                "pipeline": self.pipeline, "note": self.note}


def donaldson_futaki(cfg: ToricTestConfig, v: WeightExpr, w: WeightExpr, klist: Sequence[int] | None = None,
                     order: int = DEFAULT_ORDER, pipeline: str | None = None) -> DFRecord:
    """DF from fitted lattice-sum coefficients next to the polytope functional F^P(f)."""
    polynomial = v.as_polynomial() is not None and w.as_polynomial() is not None
    if pipeline is None:
        pipeline = "exact" if polynomial else "float"
    exact = pipeline == "exact"
    if klist is None:
        n_samples = 4
        if polynomial:
            deg = max(v.as_polynomial().degree(), w.as_polynomial().degree()) + 1
            n_samples = max(4, deg + cfg.base.dim + 1)
        klist = default_klist(cfg, n_samples)
    klist = tuple(sorted(set(int(k) for k in klist)))
    n = cfg.base.dim
    sv = [(k, weight_sum(cfg, v, k, exact)) for k in klist]
    sw = [(k, weight_sum(cfg, w, k, exact)) for k in klist]
    # for polynomial weights W(k) is a polynomial in k on multiples of the crease
    # denominator, so both pipelines fit the same full-order model
    m = len(klist) - 2 if polynomial else None
    fit_v = fit_expansion(sv, n, m)
    fit_w = fit_expansion(sw, n, m)
    c = slope(cfg.base, v, w, order, pipeline)
    DF = fit_v.a1 - c / 4 * fit_w.a0
    F_P = futaki(cfg.base, v, w, cfg.f, c, order, pipeline)
    ratio = None if F_P == 0 else DF / F_P
    return DFRecord(fit_v.a0, fit_v.a1, fit_w.a0, c, DF, F_P, ratio, klist, fit_v, fit_w, pipeline)
