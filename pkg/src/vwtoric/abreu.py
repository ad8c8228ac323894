"""Symplectic potentials and the weighted scalar curvature -sum_ij (v H_ij)_{,ij}.

Only Guillemin potentials ``u0 = 1/2 sum_j L_j log L_j`` are handled in
closed form.  A smooth correction added to u0 switches ``scal_v`` to
fourth-order central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple

import numpy as np

from .errors import EvaluationOnBoundary, TooCloseToBoundary, ValidationError
from .geometry import AffineForm, Polytope, polytope_from_halfspaces
from .poly import as_fraction
from .quad import DEFAULT_ORDER, integrate_boundary, integrate_interior
from .weights import WeightExpr, positivity_grid

DEFAULT_EPSILONS = (Fraction(1, 100), Fraction(1, 200), Fraction(1, 400))


class SymplecticPotential:
    """Guillemin potential of a labelled polytope, optionally plus a smooth correction."""

    def __init__(self, P: Polytope, correction: WeightExpr | None = None):
        self.P = P
        self.correction = correction
        self._N = np.array([lab.normal for lab in P.labels], dtype=float)  # (m, dim)
        self._c = np.array([float(lab.offset) for lab in P.labels])

    @property
    def kind(self) -> str:
        return "guillemin" if self.correction is None else "guillemin_plus"

    def _labels(self, X: np.ndarray) -> np.ndarray:
        L = X @ self._N.T + self._c
        if np.any(L <= 0):
            raise EvaluationOnBoundary("symplectic potential evaluated on or outside the boundary")
        return L

    @staticmethod
    def _batch(p) -> Tuple[np.ndarray, bool]:
        X = np.asarray(p, dtype=float)
        if X.ndim <= 1:
            return X.reshape(1, -1), True
        return X, False

    def u(self, p):
        X, single = self._batch(p)
        L = self._labels(X)
        out = 0.5 * np.sum(L * np.log(L), axis=1)
        if self.correction is not None:
            out = out + self.correction(X)
        return float(out[0]) if single else out

    def G(self, p):
        """Hessian of u."""
        X, single = self._batch(p)
        L = self._labels(X)
        outer = np.einsum("ja,jb->jab", self._N, self._N)
        out = 0.5 * np.einsum("nj,jab->nab", 1.0 / L, outer)
        if self.correction is not None:
            out = out + self.correction.hess(X).reshape(out.shape)
        return out[0] if single else out

    def H(self, p):
        """Inverse Hessian of u."""
        G = self.G(p)
        return np.linalg.inv(G)

    def H_derivatives(self, X: np.ndarray):
        """H, dH[k], d2H[k, l] for the pure Guillemin potential, batch (N, dim)."""
        if self.correction is not None:
            raise ValueError("closed-form derivatives only exist for the pure Guillemin potential")
        L = self._labels(X)
        N = self._N
        outer = np.einsum("ja,jb->jab", N, N)
        G = 0.5 * np.einsum("nj,jab->nab", 1.0 / L, outer)
        dG = -0.5 * np.einsum("nj,jk,jab->nkab", 1.0 / L**2, N, outer)
        d2G = np.einsum("nj,jk,jl,jab->nklab", 1.0 / L**3, N, N, outer)
        H = np.linalg.inv(G)
        dH = -np.einsum("nab,nkbc,ncd->nkad", H, dG, H)
        d2H = (-np.einsum("nlab,nkbc,ncd->nklad", dH, dG, H)
               - np.einsum("nab,nklbc,ncd->nklad", H, d2G, H)
               - np.einsum("nab,nkbc,nlcd->nklad", H, dG, dH))
        return H, dH, d2H

    def is_positive_definite(self, X: np.ndarray) -> bool:
        eig = np.linalg.eigvalsh(self.G(X))
        return bool(np.all(eig > 0))


def guillemin_potential(P: Polytope, correction: WeightExpr | None = None) -> SymplecticPotential:
    """u = 1/2 sum_j L_j log L_j (+ correction, checked for strict convexity on a grid)."""
    u = SymplecticPotential(P, correction)
    if correction is not None:
        grid = positivity_grid(P)
        inner = grid[np.all(grid @ u._N.T + u._c > 1e-9, axis=1)]
        if len(inner) and not u.is_positive_definite(inner):
            raise ValidationError("corrected potential is not strictly convex on the polytope")
    return u


def _distance_to_boundary(P: Polytope, X: np.ndarray) -> np.ndarray:
    N = np.array([lab.normal for lab in P.labels], dtype=float)
    c = np.array([float(lab.offset) for lab in P.labels])
    return np.min((X @ N.T + c) / np.linalg.norm(N, axis=1), axis=1)


def _scal_analytic(u: SymplecticPotential, v: WeightExpr, X: np.ndarray) -> np.ndarray:
    H, dH, d2H = u.H_derivatives(X)
    vv = v(X)
    g = v.grad(X).reshape(len(X), -1)
    h = v.hess(X).reshape(len(X), X.shape[1], X.shape[1])
    # sum_ij d_i d_j (v H_ij)
    total = np.einsum("nij,nij->n", h, H)
    total += 2 * np.einsum("ni,njij->n", g, dH)  # v_i dH_ij/dp_j, symmetric twice
    total += vv * np.einsum("nijij->n", d2H)
    return -total


def _mixed_fd(F, x: np.ndarray, i: int, j: int, h: float) -> np.ndarray:
    """Fourth-order central difference for d_i d_j F at x (batch)."""
    def at(a, b):
        y = x.copy()
        y[:, i] += a * h
        y[:, j] += b * h
        return F(y)

    if i == j:
        return (-at(2, 0) + 16 * at(1, 0) - 30 * F(x) + 16 * at(-1, 0) - at(-2, 0)) / (12 * h * h)
    s1 = at(1, -2) + at(2, -1) + at(-2, 1) + at(-1, 2)
    s2 = at(-1, -2) + at(-2, -1) + at(1, 2) + at(2, 1)
    s3 = at(2, -2) + at(-2, 2) - at(-2, -2) - at(2, 2)
    s4 = at(-1, -1) + at(1, 1) - at(1, -1) - at(-1, 1)
    return (8 * s1 - 8 * s2 - s3 + 64 * s4) / (144 * h * h)


def _scal_fd(u: SymplecticPotential, v: WeightExpr, X: np.ndarray, h: float) -> np.ndarray:
    dim = X.shape[1]
    total = np.zeros(len(X))
    for i in range(dim):
        for j in range(dim):
            F = lambda Y, i=i, j=j: v(Y).reshape(len(Y)) * u.H(Y)[:, i, j]  # noqa: E731
            total += _mixed_fd(F, X, i, j, h)
    return -total


def scal_v(u: SymplecticPotential, v: WeightExpr, p, method: str = "auto"):
    """Weighted scalar curvature at interior point(s).

    ``method`` is "analytic" (pure Guillemin only), "fd" or "auto".  The
    finite-difference step is 1e-3 times the inradius of P.
    """
    X, single = SymplecticPotential._batch(p)
    if method == "auto":
        method = "analytic" if u.correction is None else "fd"
    dist = _distance_to_boundary(u.P, X)
    if method == "analytic":
        if np.any(dist <= 0):
            raise EvaluationOnBoundary("scal_v needs interior points")
        out = _scal_analytic(u, v, X)
    elif method == "fd":
        h = 1e-3 * u.P.inradius
        if np.any(dist < 2 * math.sqrt(X.shape[1]) * h):
            raise TooCloseToBoundary(f"points closer than the stencil width {2 * h:.3g} to the boundary")
        out = _scal_fd(u, v, X, h)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# integration-by-parts identity
# ---------------------------------------------------------------------------

def shrink(P: Polytope, eps) -> Polytope:
    """P_eps = {L_i >= eps}."""
    eps = as_fraction(eps)
    return polytope_from_halfspaces([AffineForm(lab.normal, lab.offset - eps) for lab in P.labels],
                                    check_bounded=False)


def richardson(values: Sequence[float]) -> float:
    """Extrapolate D(eps), D(eps/2), D(eps/4) to eps = 0 assuming D = a + b eps + c eps^2."""
    d1, d2, d4 = values
    return (8 * d4 - 6 * d2 + d1) / 3


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    futaki_term: float
    hessian_term: float
    residual: float
    lhs_sequence: Tuple[float, ...]
    hessian_sequence: Tuple[float, ...]


def check_futaki_identity(P: Polytope, u: SymplecticPotential, v: WeightExpr, w: WeightExpr,
                          f: WeightExpr, c, order: int = DEFAULT_ORDER,
                          epsilons: Sequence = DEFAULT_EPSILONS) -> IdentityCheck:
    """Compare int (Scal_v - c w) f dp with F(f) - int (sum_ij H_ij f_ij) v dp.

    Both interior integrals are taken over shrunk polytopes and extrapolated
    to the full polytope; the Futaki term uses the exact boundary of P.
    """
    c = float(c)
    dim = P.dim
    lhs_seq, hess_seq = [], []
    for eps in epsilons:
        Pe = shrink(P, eps)

        def lhs_integrand(X):
            return (scal_v(u, v, X) - c * w(X)) * f(X)

        def hess_integrand(X):
            H = u.H(X) if u.correction is not None else u.H_derivatives(X)[0]
            fh = f.hess(X).reshape(len(X), dim, dim)
            return np.einsum("nij,nij->n", H, fh) * v(X)

        lhs_seq.append(integrate_interior(Pe, lhs_integrand, order))
        hess_seq.append(integrate_interior(Pe, hess_integrand, order))
    lhs = richardson(lhs_seq)
    hterm = richardson(hess_seq)
    fut = 2 * integrate_boundary(P, lambda X: f(X) * v(X), order) - c * integrate_interior(
        P, lambda X: f(X) * w(X), order)
    rhs = fut - hterm
    return IdentityCheck(lhs, rhs, fut, hterm, abs(lhs - rhs), tuple(lhs_seq), tuple(hess_seq))


def scal_integral(P: Polytope, u: SymplecticPotential, v: WeightExpr, eps, order: int = DEFAULT_ORDER) -> float:
    """int_{P_eps} Scal_v dp (tends to 2 int_{dP} v dsigma)."""
    return integrate_interior(shrink(P, eps), lambda X: scal_v(u, v, X), order)
