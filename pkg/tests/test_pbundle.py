from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from vwtoric.errors import PositivityViolation, ValidationError, Z0OutOfRange
from vwtoric.pbundle import (AdmissibleData, ThetaSolution, bundle_slope, check_positivity, futaki_z0,
                             normalization_residual, solve_theta, solve_w_ext_ode, stability_report, u_poly,
                             z0_grid)
from vwtoric.poly import RationalPoly
from vwtoric.weights import constant, einstein_maxwell_weights, parse_weight, sasaki_weights

ONE = constant(1, 1)
Z = RationalPoly.variable(1, 0)
SPHERE = AdmissibleData.round_sphere()
HIRZ = AdmissibleData([(1, 4, 1, 2)], ONE, ONE)


def em_data():
    v, w = einstein_maxwell_weights((1,), 2, 2)
    return AdmissibleData((), v, w)


def test_u_poly():
    assert u_poly(SPHERE) == RationalPoly.constant(1, 1)
    assert u_poly(HIRZ) == Z + 2
    assert u_poly(AdmissibleData([(2, 1, 1, 2)], ONE, ONE)) == Z * Z + 4 * Z + 4


def test_invalid_data():
    with pytest.raises(PositivityViolation) as info:
        AdmissibleData([(1, 1, 0, 1), (1, 1, 2, 2)], ONE, ONE)
    assert info.value.index == 1
    with pytest.raises(PositivityViolation):
        AdmissibleData((), parse_weight("z", 1), ONE)
    with pytest.raises(ValidationError):
        solve_theta(em_data(), pipeline="exact")


def test_round_sphere():
    assert solve_w_ext_ode(SPHERE) == (0, 2)
    sol = solve_theta(SPHERE)
    assert sol.phi_coeffs() == [1, 0, -1]
    assert sol.theta_poly() == 1 - Z * Z
    num = solve_theta(SPHERE, pipeline="float")
    assert np.allclose(num.phi_coeffs(), [1, 0, -1], atol=1e-12)
    assert num.A1 == pytest.approx(0, abs=1e-12) and num.A2 == pytest.approx(2, abs=1e-12)
    assert futaki_z0(SPHERE, 0, 2, 0) == 1
    assert futaki_z0(SPHERE, 0, 2, Fraction(9, 10)) == Fraction(19, 100)
    assert futaki_z0(SPHERE, 0, 2, -0.9, "float") == pytest.approx(0.19, abs=1e-12)


def test_hirzebruch_exact_and_numeric():
    A1, A2 = solve_w_ext_ode(HIRZ)
    assert isinstance(A1, Fraction)
    B1, B2 = solve_w_ext_ode(HIRZ, "float")
    assert abs(B1 - float(A1)) <= 1e-12 and abs(B2 - float(A2)) <= 1e-12
    sol = solve_theta(HIRZ)
    assert sol.phi_poly.degree() == 4
    assert all(r == 0 for r in sol.residuals)
    num = solve_theta(HIRZ, pipeline="float")
    ex = [float(c) for c in sol.phi_coeffs()]
    assert np.allclose(num.phi_coeffs(), ex, rtol=1e-12, atol=1e-12 * max(map(abs, ex)))
    assert check_positivity(sol).kind == "PositiveOnOpenInterval"
    assert check_positivity(num).kind == "PositiveOnOpenInterval"


def test_exact_solution_satisfies_ode():
    data = AdmissibleData([(2, 3, Fraction(1, 2), 1), (1, -2, -1, 3)], parse_weight("z + 3", 1),
                          parse_weight("z^2 + 1", 1))
    sol = solve_theta(data)
    V, W = data.v.as_polynomial(), data.w.as_polynomial()
    u = u_poly(data)
    S = V * data.scal_poly()
    g = S - W * (Z * sol.A1 + sol.A2) * u
    assert sol.phi_poly.diff(0).diff(0) == g
    vu = V * u
    assert sol.phi_poly(1) == 0 and sol.phi_poly(-1) == 0
    assert sol.phi_poly.diff(0)(-1) == 2 * vu(-1)
    assert sol.phi_poly.diff(0)(1) == -2 * vu(1)
    # S really is v u sum Scal_j / L_j
    z = 0.3
    direct = data.v(z) * float(u(Fraction(3, 10))) * (3 / (0.5 * z + 1) - 2 / (-z + 3))
    assert float(S(Fraction(3, 10))) == pytest.approx(direct)


def test_numeric_phi_against_scipy_double_integral():
    data = em_data()
    sol = solve_theta(data)
    A1, A2 = sol.A1, sol.A2
    v = lambda t: (t + 2) ** -3  # noqa: E731
    w = lambda t: (t + 2) ** -5  # noqa: E731
    g = lambda t: -w(t) * (A1 * t + A2)  # noqa: E731
    for z in (-0.7, 0.0, 0.55):
        ref = 2 * v(-1) * (z + 1) + integrate.quad(lambda t: (z - t) * g(t), -1, z, epsabs=1e-14)[0]
        assert sol.phi(z)[0] == pytest.approx(ref, rel=1e-11, abs=1e-13)
    assert sol.max_residual() <= 1e-10


def test_positivity_controls():
    syn = ThetaSolution.from_polynomial(Z * Z - Fraction(1, 4))
    verdict = check_positivity(syn)
    assert verdict.kind == "NonpositiveAt"
    assert sorted(verdict.points) == pytest.approx([-0.5, 0.5], abs=1e-12)
    sphere = check_positivity(solve_theta(SPHERE))
    assert sphere.positive and sphere.margin == pytest.approx(1 - 0.999 ** 2)
    touch = ThetaSolution.from_polynomial((1 - Z * Z) * Z * Z)
    assert check_positivity(touch).points == pytest.approx((0.0,), abs=1e-12)


def test_large_negative_scal_recorded():
    data = AdmissibleData([(1, -50, 1, 2)], ONE, ONE)
    rep = stability_report(data)
    num = check_positivity(solve_theta(data, pipeline="float"))
    # the Sturm verdict is the reference; the scan must agree with it
    assert num.kind == rep.positivity.kind
    assert rep.identity_residual <= 1e-9


@pytest.mark.parametrize("data", [SPHERE, HIRZ, "em"], ids=["sphere", "hirzebruch", "einstein-maxwell"])
def test_futaki_identity_on_grid(data):
    data = em_data() if data == "em" else data
    rep = stability_report(data)
    assert len(rep.z0) == 99
    assert rep.identity_residual <= 1e-9
    assert rep.normalization_residual <= 1e-10
    assert rep.verdict == "exists"


def test_z0_range():
    with pytest.raises(Z0OutOfRange):
        futaki_z0(SPHERE, 0, 2, 1)
    assert len(z0_grid()) == 99


def test_symmetry():
    data = AdmissibleData([(2, 3, 0, 1)], parse_weight("z^2 + 1", 1), parse_weight("2 - z^2", 1))
    sol = solve_theta(data)
    assert sol.A1 == 0
    assert all(c == 0 for c in sol.phi_coeffs()[1::2])


def test_bundle_slope():
    assert bundle_slope(SPHERE) == 2
    assert bundle_slope(HIRZ) == pytest.approx(float(bundle_slope(HIRZ, "float")), rel=1e-13)


factor = st.tuples(st.integers(1, 3), st.fractions(-6, 6, max_denominator=4),
                   st.fractions(-1, 1, max_denominator=4), st.fractions(Fraction(1, 4), 3, max_denominator=4))
weights = st.sampled_from(["1", "z + 2", "z^2 + 1", "3 - z"])


@given(st.lists(factor, max_size=2), weights, weights)
def test_random_admissible_data(facs, vs, ws):
    facs = [(d, s, xi, abs(xi) + c) for d, s, xi, c in facs]
    data = AdmissibleData(facs, parse_weight(vs, 1), parse_weight(ws, 1))
    ex = solve_theta(data)
    fl = solve_theta(data, pipeline="float")
    assert fl.max_residual() <= 1e-10
    assert abs(fl.A1 - float(ex.A1)) <= 1e-11 * max(1, abs(float(ex.A1)))
    zs = np.linspace(-0.95, 0.95, 7)
    scale = max(1.0, float(np.max(np.abs(ex.phi(zs)))))
    assert np.allclose(fl.phi(zs), ex.phi(zs), atol=1e-11 * scale)
    for z in (-0.5, 0.1, 0.8):
        F = futaki_z0(data, fl.A1, fl.A2, z, "float")
        assert abs(F - ex.phi(z)[0]) <= 1e-9 * scale
    assert normalization_residual(data, ex.A1, ex.A2) <= 1e-10 * scale
    assert check_positivity(ex).kind == check_positivity(fl).kind


def test_sasaki_weights_numeric_path():
    v, w = sasaki_weights((1,), 3, 1)
    rep = stability_report(AdmissibleData([(1, 2, Fraction(1, 2), 1)], v, w))
    assert rep.identity_residual <= 1e-9
    assert rep.solution.max_residual() <= 1e-10
