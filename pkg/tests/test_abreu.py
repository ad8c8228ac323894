import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vwtoric.abreu import (check_futaki_identity, guillemin_potential, richardson, scal_integral, scal_v,
                           shrink)
from vwtoric.errors import EvaluationOnBoundary, TooCloseToBoundary, ValidationError
from vwtoric.geometry import box, interval, polytope_from_json, standard_simplex
from vwtoric.invariants import slope
from vwtoric.quad import integrate_boundary
from vwtoric.weights import constant, parse_weight

TRAPEZOID = polytope_from_json({"dim": 2, "labels": [
    {"normal": [0, 1], "offset": "0"}, {"normal": [1, 0], "offset": "0"},
    {"normal": [0, -1], "offset": "1"}, {"normal": [-1, -1], "offset": "2"}]})


def test_interval_constant_scal():
    u = guillemin_potential(interval(-1, 1))
    X = np.linspace(-0.9, 0.9, 19).reshape(-1, 1)
    assert np.max(np.abs(scal_v(u, constant(1, 1), X, "analytic") - 2)) <= 1e-10
    assert np.max(np.abs(scal_v(u, constant(1, 1), X, "fd") - 2)) <= 1e-4


def test_weighted_interval_closed_form():
    # H = 1 - p^2, so -((p + 2)(1 - p^2))'' = 6p + 4
    u = guillemin_potential(interval(-1, 1))
    X = np.linspace(-0.8, 0.8, 9).reshape(-1, 1)
    assert np.allclose(scal_v(u, parse_weight("p1 + 2", 1), X), 6 * X[:, 0] + 4, atol=1e-10)


def test_square_and_simplex_are_csc():
    X = np.array([[0.3, 0.4], [-0.5, 0.5], [0.8, -0.1]])
    u = guillemin_potential(box((-1, -1), (1, 1)))
    assert np.allclose(scal_v(u, constant(1, 2), X), 4, atol=1e-10)
    assert np.allclose(scal_v(u, constant(1, 2), X, "fd"), 4, atol=1e-4)
    # on [0, 1] each factor has H = 2p(1 - p), contributing 4
    u = guillemin_potential(box((0, 0), (1, 1)))
    assert np.allclose(scal_v(u, constant(1, 2), np.abs(X)), 8, atol=1e-10)
    # Fubini-Study: constant scalar curvature equal to the slope 2*3/(1/2)
    S = standard_simplex(2)
    Y = np.array([[0.2, 0.3], [0.1, 0.1], [0.45, 0.45]])
    val = scal_v(guillemin_potential(S), constant(1, 2), Y)
    assert np.allclose(val, 12, atol=1e-9)
    assert slope(S, constant(1, 2), constant(1, 2)) == pytest.approx(12)


@given(st.floats(0.1, 0.9), st.floats(0.1, 0.45), st.sampled_from(["1", "p1 + 2*p2 + 1", "exp(p1 - p2)"]))
def test_analytic_matches_fd(a, b, vs):
    u = guillemin_potential(TRAPEZOID)
    p = np.array([a, b])
    v = parse_weight(vs, 2)
    assert scal_v(u, v, p, "analytic") == pytest.approx(scal_v(u, v, p, "fd"), rel=1e-5, abs=1e-5)


def test_corrected_potential():
    P = interval(-1, 1)
    u = guillemin_potential(P, parse_weight("p1^2/4", 1))
    # u'' = 1/(1 - p^2) + 1/2, H = 2(1 - p^2)/(3 - p^2)
    X = np.array([[0.0], [0.5]])
    p = X[:, 0]
    H = lambda t: 2 * (1 - t ** 2) / (3 - t ** 2)  # noqa: E731
    h = 1e-4
    ref = -(H(p + h) - 2 * H(p) + H(p - h)) / h ** 2
    assert np.allclose(scal_v(u, constant(1, 1), X), ref, atol=1e-5)
    with pytest.raises(ValueError):
        scal_v(u, constant(1, 1), X, "analytic")
    with pytest.raises(ValidationError):
        guillemin_potential(P, parse_weight("-2*p1^2", 1))


def test_boundary_errors():
    u = guillemin_potential(interval(-1, 1))
    with pytest.raises(EvaluationOnBoundary):
        scal_v(u, constant(1, 1), np.array([1.0]))
    with pytest.raises(TooCloseToBoundary):
        scal_v(u, constant(1, 1), np.array([0.9999]), "fd")


def test_richardson_exact_on_quadratics():
    D = lambda e: 3 - 2 * e + 5 * e * e  # noqa: E731
    assert richardson([D(0.01), D(0.005), D(0.0025)]) == pytest.approx(3, abs=1e-13)


def test_scal_integral_tends_to_boundary_mass():
    P = box((0, 0), (1, 1))
    u = guillemin_potential(P)
    v = parse_weight("1 + p1*p2", 2)
    seq = [scal_integral(P, u, v, e) for e in (0.01, 0.005, 0.0025)]
    target = 2 * integrate_boundary(P, v)
    assert richardson(seq) == pytest.approx(target, rel=1e-6)
    assert shrink(P, 0.25).vertices[0] in {(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)}


def test_integration_by_parts_identity():
    P = interval(-1, 1)
    u = guillemin_potential(P)
    one = constant(1, 1)
    chk = check_futaki_identity(P, u, one, one, parse_weight("p1^2", 1), 2)
    assert chk.residual <= 1e-6
    v = parse_weight("p1 + 2", 1)
    chk = check_futaki_identity(P, u, v, one, parse_weight("exp(p1)", 1), 1)
    assert chk.residual <= 1e-5


def test_identity_2d():
    P = box((0, 0), (1, 1))
    u = guillemin_potential(P)
    v, w = parse_weight("1 + p1", 2), constant(1, 2)
    chk = check_futaki_identity(P, u, v, w, parse_weight("p1^2 + p1*p2", 2), slope(P, v, w), order=10)
    assert chk.residual <= 1e-5
