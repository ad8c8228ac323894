"""Admissible P^1-bundles: the extremal profile Theta on [-1, 1] and the Futaki function.

With ``u = prod_j (xi_j z + c_j)^{d_j}`` and
``S = v u sum_j Scal_j / (xi_j z + c_j)``, the profile solves

    (v u Theta)'' = S - w (A1 z + A2) u,   Theta(+-1) = 0,  Theta'(+-1) = -+2.

Integrating once and twice against the boundary data fixes (A1, A2) through a
2x2 moment system; phi = v u Theta then follows by double integration.

Polynomial v, w go through exact rational arithmetic.  Other weights use
Chebyshev interpolation on 513 nodes, with Gauss-Legendre quadrature as an
independent path for the Futaki function.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre
from scipy.optimize import brentq

from .errors import PositivityViolation, SingularSystem, ValidationError, Z0OutOfRange
from .geometry import frac_solve, interval
from .poly import RationalPoly, as_fraction, count_distinct_roots, format_fraction, isolate_roots, strip_root
from .weights import BaseFactor, WeightExpr, check_positive, constant

CHEB_DEGREE = 512  # 513 nodes
SCAN_POINTS = 2001
GL_NODES = 64

Z = RationalPoly.variable(1, 0)
ONE = RationalPoly.constant(1, 1)


def z0_grid() -> np.ndarray:
    """The 99 interior points of linspace(-1, 1, 101)."""
    return np.linspace(-1, 1, 101)[1:-1]


def _factor(obj) -> BaseFactor:
    if isinstance(obj, BaseFactor):
        return obj
    if isinstance(obj, dict):
        return BaseFactor(obj["d"], obj["scal"], (obj["xi"],), obj["c"])
    d, scal, xi, c = obj
    return BaseFactor(d, scal, (xi,), c)


@dataclass(frozen=True)
class AdmissibleData:
    factors: Tuple[BaseFactor, ...]
    v: WeightExpr
    w: WeightExpr

    def __post_init__(self):
        facs = tuple(_factor(f) for f in self.factors)
        object.__setattr__(self, "factors", facs)
        for j, f in enumerate(facs):
            if len(f.xi) != 1:
                raise PositivityViolation(f"factor {j}: xi must be a single rational", j)
            if not f.c > abs(f.xi[0]):
                raise PositivityViolation(f"factor {j}: need c > |xi|, got xi={f.xi[0]}, c={f.c}", j)
        I = interval(-1, 1)
        check_positive(self.v, I, "v")
        check_positive(self.w, I, "w")

    @classmethod
    def round_sphere(cls) -> "AdmissibleData":
        return cls((), constant(1, 1), constant(1, 1))

    @property
    def polynomial(self) -> bool:
        return self.v.as_polynomial() is not None and self.w.as_polynomial() is not None

    def linear(self, j: int) -> RationalPoly:
        f = self.factors[j]
        return RationalPoly.from_coeffs([f.c, f.xi[0]])

    def scal_poly(self) -> RationalPoly:
        """u * sum_j Scal_j / (xi_j z + c_j), a polynomial."""
        out = RationalPoly.constant(1, 0)
        for j, f in enumerate(self.factors):
            rest = ONE
            for k, g in enumerate(self.factors):
                rest = rest * self.linear(k) ** (g.d - (1 if k == j else 0))
            out = out + rest * f.scal
        return out

    def to_json(self) -> dict:
        return {"factors": [{"d": f.d, "scal": format_fraction(f.scal), "xi": format_fraction(f.xi[0]),
                             "c": format_fraction(f.c)} for f in self.factors],
                "v": self.v.to_json(), "w": self.w.to_json()}


def u_poly(data: AdmissibleData) -> RationalPoly:
    u = ONE
    for j, f in enumerate(data.factors):
        u = u * data.linear(j) ** f.d
    return u


def _ev(e: WeightExpr, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return np.asarray(e(z.reshape(-1, 1)), dtype=float).reshape(z.shape)


def _use_exact(data: AdmissibleData, pipeline: str) -> bool:
    if pipeline == "exact":
        if not data.polynomial:
            raise ValidationError("exact pipeline needs polynomial v and w")
        return True
    if pipeline == "float":
        return False
    return data.polynomial


class _Numeric:
    """Float callables for v u, S and w u on [-1, 1]."""

    def __init__(self, data: AdmissibleData):
        self.data = data
        self.u = u_poly(data)
        self.su = data.scal_poly()

    @staticmethod
    def _poly(q: RationalPoly, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.asarray(q.eval_float(z.reshape(-1, 1)), dtype=float).reshape(z.shape)

    def vu(self, z):
        return _ev(self.data.v, z) * self._poly(self.u, z)

    def S(self, z):
        return _ev(self.data.v, z) * self._poly(self.su, z)

    def wu(self, z):
        return _ev(self.data.w, z) * self._poly(self.u, z)


def _cheb(fn) -> np.ndarray:
    return C.chebinterpolate(fn, CHEB_DEGREE)


def _cheb_integral(coef: np.ndarray) -> float:
    return float(C.chebval(1.0, C.chebint(coef, lbnd=-1)))


def _exact_parts(data: AdmissibleData):
    V, W = data.v.as_polynomial(), data.w.as_polynomial()
    u = u_poly(data)
    return V * u, V * data.scal_poly(), W * u


def solve_w_ext_ode(data: AdmissibleData, pipeline: str = "auto") -> Tuple:
    """(A1, A2) of w_ext = A1 z + A2; Fractions on the exact path."""
    if _use_exact(data, pipeline):
        vu, S, wu = _exact_parts(data)
        m, p = Fraction(-1), Fraction(1)
        A = [[(Z * wu).integrate(m, p), wu.integrate(m, p)],
             [((ONE - Z) * Z * wu).integrate(m, p), ((ONE - Z) * wu).integrate(m, p)]]
        b = [S.integrate(m, p) + 2 * (vu(p) + vu(m)),
             ((ONE - Z) * S).integrate(m, p) + 4 * vu(m)]
        x = frac_solve(A, b)
        if x is None:
            raise SingularSystem("moment system for (A1, A2) is singular")
        return x[0], x[1]
    nm = _Numeric(data)
    wu = _cheb(nm.wu)
    S = _cheb(nm.S)
    t = np.array([0.0, 1.0])
    omt = np.array([1.0, -1.0])
    A = np.array([[_cheb_integral(C.chebmul(t, wu)), _cheb_integral(wu)],
                  [_cheb_integral(C.chebmul(C.chebmul(omt, t), wu)), _cheb_integral(C.chebmul(omt, wu))]])
    vu_m, vu_p = nm.vu(-1.0)[0], nm.vu(1.0)[0]
    b = np.array([_cheb_integral(S) + 2 * (vu_p + vu_m), _cheb_integral(C.chebmul(omt, S)) + 4 * vu_m])
    if abs(np.linalg.det(A)) < 1e-14 * np.abs(A).max() ** 2:
        raise SingularSystem("moment system for (A1, A2) is singular")
    A1, A2 = np.linalg.solve(A, b)
    return float(A1), float(A2)


@dataclass(frozen=True)
class ThetaSolution:
    """phi = v u Theta, exact (RationalPoly) or as a Chebyshev series."""

    data: AdmissibleData
    A1: object
    A2: object
    exact: bool
    phi_poly: RationalPoly | None
    phi_cheb: np.ndarray | None
    residuals: Tuple[float, float, float, float]  # phi(-1), phi(1), phi'(-1) - 2vu(-1), phi'(1) + 2vu(1)

    def phi(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.exact:
            return np.asarray(self.phi_poly.eval_float(z.reshape(-1, 1)), dtype=float).reshape(z.shape)
        return C.chebval(z, self.phi_cheb)

    def dphi(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.exact:
            return np.asarray(self.phi_poly.diff(0).eval_float(z.reshape(-1, 1)), dtype=float).reshape(z.shape)
        return C.chebval(z, C.chebder(self.phi_cheb))

    def vu(self, z) -> np.ndarray:
        return _Numeric(self.data).vu(z)

    def theta(self, z) -> np.ndarray:
        return self.phi(z) / self.vu(z)

    def theta_poly(self) -> RationalPoly | None:
        """Theta as an exact polynomial when v u divides phi."""
        if not self.exact:
            return None
        vu = self.data.v.as_polynomial() * u_poly(self.data)
        return self.phi_poly.exact_quotient(vu)

    def phi_coeffs(self, tol: float = 1e-13) -> List:
        """Monomial coefficients of phi, lowest degree first."""
        if self.exact:
            return self.phi_poly.univariate_coeffs()
        c = np.array(self.phi_cheb)
        keep = np.nonzero(np.abs(c) > tol * np.abs(c).max())[0]
        c = c[: keep[-1] + 1] if len(keep) else c[:1]
        return [float(x) for x in C.cheb2poly(c)]

    def max_residual(self) -> float:
        return max(abs(float(r)) for r in self.residuals)

    def to_json(self) -> dict:
        fmt = format_fraction if self.exact else float
        out = {"A1": fmt(self.A1), "A2": fmt(self.A2), "exact": self.exact,
               "phi_coeffs": [fmt(c) for c in self.phi_coeffs()],
               "boundary_residuals": [float(r) for r in self.residuals]}
        th = self.theta_poly()
        if th is not None:
            out["theta"] = th.to_string(["z"], ascending=True)
        if self.exact:
            out["phi"] = self.phi_poly.to_string(["z"], ascending=True)
        return out

    @classmethod
    def from_polynomial(cls, phi: RationalPoly, data: AdmissibleData | None = None) -> "ThetaSolution":
        """Wrap a given phi (e.g. a synthetic control) without solving anything."""
        data = data or AdmissibleData.round_sphere()
        vu = data.v.as_polynomial() * u_poly(data)
        res = _exact_residuals(phi, vu)
        return cls(data, None, None, True, phi, None, res)


def _exact_residuals(phi: RationalPoly, vu: RationalPoly) -> Tuple[float, ...]:
    d = phi.diff(0)
    m, p = Fraction(-1), Fraction(1)
    return (phi(m), phi(p), d(m) - 2 * vu(m), d(p) + 2 * vu(p))


def solve_theta(data: AdmissibleData, A1=None, A2=None, pipeline: str = "auto") -> ThetaSolution:
    """phi(z) = 2 v u(-1) (z + 1) + int_{-1}^z (z - t) [S - w (A1 t + A2) u](t) dt."""
    exact = _use_exact(data, pipeline)
    if A1 is None or A2 is None:
        A1, A2 = solve_w_ext_ode(data, "exact" if exact else "float")
    if exact:
        A1, A2 = as_fraction(A1), as_fraction(A2)
        vu, S, wu = _exact_parts(data)
        g = S - wu * (Z * A1 + A2)
        m = Fraction(-1)
        G1 = g.antiderivative()
        G1 = G1 - G1(m)
        G2 = G1.antiderivative()
        G2 = G2 - G2(m)
        phi = G2 + (Z + 1) * (2 * vu(m))
        return ThetaSolution(data, A1, A2, True, phi, None, _exact_residuals(phi, vu))
    A1, A2 = float(A1), float(A2)
    nm = _Numeric(data)
    g = _cheb(lambda z: nm.S(z) - nm.wu(z) * (A1 * z + A2))
    G2 = C.chebint(g, m=2, lbnd=-1)
    vu_m, vu_p = nm.vu(-1.0)[0], nm.vu(1.0)[0]
    phi = C.chebadd(G2, 2 * vu_m * np.array([1.0, 1.0]))
    dphi = C.chebder(phi)
    res = (float(C.chebval(-1.0, phi)), float(C.chebval(1.0, phi)),
           float(C.chebval(-1.0, dphi) - 2 * vu_m), float(C.chebval(1.0, dphi) + 2 * vu_p))
    return ThetaSolution(data, A1, A2, False, None, phi, res)


# ---------------------------------------------------------------------------
# positivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PositivityVerdict:
    kind: str  # "PositiveOnOpenInterval" or "NonpositiveAt"
    points: Tuple[float, ...]
    margin: float
    method: str  # "sturm" or "scan"

    @property
    def positive(self) -> bool:
        return self.kind == "PositiveOnOpenInterval"

    def to_json(self) -> dict:
        return {"kind": self.kind, "points": list(self.points), "margin": self.margin, "method": self.method}


def _margin(sol: ThetaSolution) -> float:
    z = np.linspace(-1, 1, SCAN_POINTS)[1:-1]
    return float(np.min(sol.theta(z)))


def check_positivity(sol: ThetaSolution) -> PositivityVerdict:
    """Is Theta > 0 on (-1, 1)?  Exact Sturm count on phi, or a sign scan."""
    margin = _margin(sol)
    if sol.exact:
        q = sol.phi_poly
        if q.is_zero():
            return PositivityVerdict("NonpositiveAt", (0.0,), margin, "sturm")
        q, a = strip_root(q, 1)
        q, _ = strip_root(q, -1)
        # q does not vanish at +-1, so (-1, 1] and (-1, 1) hold the same roots;
        # (z - 1)^a contributes the sign (-1)^a on the open interval
        if count_distinct_roots(q, -1, 1) == 0:
            if q(0) * (-1) ** a > 0:
                return PositivityVerdict("PositiveOnOpenInterval", (), margin, "sturm")
            return PositivityVerdict("NonpositiveAt", (0.0,), margin, "sturm")
        pts = tuple(float((lo + hi) / 2) for lo, hi in isolate_roots(q, -1, 1))
        return PositivityVerdict("NonpositiveAt", pts, margin, "sturm")
    z = np.linspace(-1, 1, SCAN_POINTS)[1:-1]
    th = sol.theta(z)
    pts = []
    for i in range(len(z) - 1):
        if th[i] == 0:
            pts.append(float(z[i]))
        elif th[i] * th[i + 1] < 0:
            pts.append(float(brentq(lambda x: float(sol.phi(x)[0]), z[i], z[i + 1], xtol=1e-15)))
    if th[-1] == 0:
        pts.append(float(z[-1]))
    if not pts and np.any(th < 0):
        pts.append(float(z[np.argmin(th)]))
    if pts:
        return PositivityVerdict("NonpositiveAt", tuple(pts), margin, "scan")
    return PositivityVerdict("PositiveOnOpenInterval", (), margin, "scan")


# ---------------------------------------------------------------------------
# Futaki function
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gl_rule(n: int):
    return legendre.leggauss(n)


def _gl(fn, a: float, b: float) -> float:
    x, wt = _gl_rule(GL_NODES)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    return float(0.5 * (b - a) * np.dot(wt, fn(t)))


def futaki_z0(data: AdmissibleData, A1, A2, z0, pipeline: str = "auto"):
    """F(z0) = 2[f(1) vu(1) + f(-1) vu(-1)] + int f g with f = max(z + 1 - z0, 1).

    Computed by direct quadrature split at z0, independently of phi.
    """
    if not -1 < float(z0) < 1:
        raise Z0OutOfRange(f"z0 = {z0} is not in (-1, 1)")
    if _use_exact(data, pipeline):
        z0 = as_fraction(z0)
        A1, A2 = as_fraction(A1), as_fraction(A2)
        vu, S, wu = _exact_parts(data)
        g = S - wu * (Z * A1 + A2)
        m, p = Fraction(-1), Fraction(1)
        bdry = 2 * ((2 - z0) * vu(p) + vu(m))
        return bdry + g.integrate(m, z0) + ((Z + 1 - z0) * g).integrate(z0, p)
    z0, A1, A2 = float(z0), float(A1), float(A2)
    nm = _Numeric(data)

    def g(t):
        return nm.S(t) - nm.wu(t) * (A1 * t + A2)

    bdry = 2 * ((2 - z0) * nm.vu(1.0)[0] + nm.vu(-1.0)[0])
    return bdry + _gl(g, -1.0, z0) + _gl(lambda t: (t + 1 - z0) * g(t), z0, 1.0)


def normalization_residual(data: AdmissibleData, A1, A2) -> float:
    """|2[vu(1) + vu(-1)] + int S - int w w_ext u|, the statement c_{v, w w_ext} = 1."""
    nm = _Numeric(data)
    lhs = 2 * (nm.vu(1.0)[0] + nm.vu(-1.0)[0]) + _gl(nm.S, -1.0, 1.0)
    rhs = _gl(lambda t: nm.wu(t) * (float(A1) * t + float(A2)), -1.0, 1.0)
    return abs(lhs - rhs)


def bundle_slope(data: AdmissibleData, pipeline: str = "auto"):
    """c = (2[vu]_boundary + int S) / int w u, for the non-extremal profile equation."""
    if _use_exact(data, pipeline):
        vu, S, wu = _exact_parts(data)
        m, p = Fraction(-1), Fraction(1)
        return (2 * (vu(p) + vu(m)) + S.integrate(m, p)) / wu.integrate(m, p)
    nm = _Numeric(data)
    return (2 * (nm.vu(1.0)[0] + nm.vu(-1.0)[0]) + _gl(nm.S, -1.0, 1.0)) / _gl(nm.wu, -1.0, 1.0)


@dataclass(frozen=True)
class StabilityReport:
    solution: ThetaSolution
    positivity: PositivityVerdict
    z0: Tuple[float, ...]
    F: Tuple[float, ...]
    theta_values: Tuple[float, ...]
    identity_residual: float
    normalization_residual: float

    @property
    def verdict(self) -> str:
        return "exists" if self.positivity.positive else "obstructed"

    @property
    def verdict_text(self) -> str:
        if self.positivity.positive:
            return "extremal metric exists (Theta > 0 on (-1, 1))"
        pts = ", ".join(f"{p:.6g}" for p in self.positivity.points)
        return f"K-semistability obstruction violated (Theta changes sign; destabilizing z0 near {pts})"

    def to_json(self) -> dict:
        return {"solution": self.solution.to_json(), "positivity": self.positivity.to_json(),
                "verdict": self.verdict, "verdict_text": self.verdict_text,
                "z0": list(self.z0), "F": list(self.F), "theta": list(self.theta_values),
                "identity_residual": self.identity_residual,
                "normalization_residual": self.normalization_residual}


def stability_report(data: AdmissibleData, pipeline: str = "auto", grid: Sequence[float] | None = None) -> StabilityReport:
    sol = solve_theta(data, pipeline=pipeline)
    verdict = check_positivity(sol)
    zs = z0_grid() if grid is None else np.asarray(grid, dtype=float)
    # the Futaki curve is always sampled in floats; exact evaluation is available via futaki_z0
    F = np.array([float(futaki_z0(data, sol.A1, sol.A2, z, "float")) for z in zs])
    vut = sol.phi(zs)
    return StabilityReport(sol, verdict, tuple(float(z) for z in zs), tuple(float(x) for x in F),
                           tuple(float(x) for x in sol.theta(zs)), float(np.max(np.abs(F - vut))),
                           normalization_residual(data, sol.A1, sol.A2))
