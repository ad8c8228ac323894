import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from vwtoric.errors import NonFiniteIntegrand
from vwtoric.geometry import box, interval, polytope_from_json, standard_simplex
from vwtoric.poly import RationalPoly
from vwtoric.quad import (integrate_boundary, integrate_exact_boundary, integrate_exact_poly, integrate_interior,
                          reference_simplex_rule)


def test_reference_rule_weights():
    for d in (1, 2, 3):
        T, W = reference_simplex_rule(d, 6)
        assert W.sum() == pytest.approx(1 / math.factorial(d))
        assert np.all(T >= 0) and np.all(T.sum(axis=1) <= 1)


def test_hand_values():
    one = lambda X: np.ones(len(X))  # noqa: E731
    assert integrate_interior(interval(-1, 1), one) == pytest.approx(2)
    assert integrate_boundary(interval(-1, 1), one) == pytest.approx(2)
    assert integrate_boundary(box((0, 0), (1, 1)), one) == pytest.approx(4)
    assert integrate_boundary(standard_simplex(2), one) == pytest.approx(3)
    assert integrate_interior(box((0, 0), (1, 1)), lambda X: X[:, 0] * X[:, 1]) == pytest.approx(0.25)


def test_exact_hand_values():
    z = RationalPoly.variable(1, 0)
    assert integrate_exact_poly(interval(0, 2), (z + 2) ** 3) == Fraction(4 ** 4 - 2 ** 4, 4)
    assert integrate_exact_boundary(standard_simplex(2), RationalPoly.constant(2, 1)) == 3
    x, y = RationalPoly.variable(2, 0), RationalPoly.variable(2, 1)
    # hypotenuse: int over x in [0,1] of x*(1-x) with unit sigma-density per dx
    S = standard_simplex(2)
    diag = [f for f in S.facets if f.normal == (-1, -1)]
    assert integrate_exact_boundary(S, x * y, diag) == Fraction(1, 6)


@given(st.integers(0, 4), st.integers(0, 4),
       st.fractions(min_value=-2, max_value=0, max_denominator=4),
       st.fractions(min_value=Fraction(1, 4), max_value=2, max_denominator=4))
def test_monomials_on_boxes(a, b, lo, hi):
    P = box((lo, lo), (hi, hi))
    x, y = RationalPoly.variable(2, 0), RationalPoly.variable(2, 1)
    one_d = lambda k: (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)  # noqa: E731
    expected = one_d(a) * one_d(b)
    assert integrate_exact_poly(P, x ** a * y ** b) == expected
    got = integrate_interior(P, lambda X: X[:, 0] ** a * X[:, 1] ** b, order=6)
    assert got == pytest.approx(float(expected), rel=1e-12, abs=1e-12)


def test_smooth_integrand_against_scipy():
    P = polytope_from_json({"dim": 2, "labels": [
        {"normal": [1, 0], "offset": "0"}, {"normal": [0, 1], "offset": "0"}, {"normal": [-1, -2], "offset": "2"}]})
    g = lambda X: np.exp(X[:, 0] - X[:, 1]) / (1 + X[:, 0] ** 2)  # noqa: E731
    ref, _ = integrate.dblquad(lambda yy, xx: math.exp(xx - yy) / (1 + xx * xx), 0, 2, 0, lambda xx: 1 - xx / 2,
                               epsabs=1e-13, epsrel=1e-13)
    assert integrate_interior(P, g) == pytest.approx(ref, rel=1e-12)


def test_boundary_against_parametrization():
    # edge from (2,0) to (0,1) has normal (-1,-2); sigma-density 1/sqrt(5) per Euclidean length
    P = polytope_from_json({"dim": 2, "labels": [
        {"normal": [1, 0], "offset": "0"}, {"normal": [0, 1], "offset": "0"}, {"normal": [-1, -2], "offset": "2"}]})
    g = lambda X: np.cos(X[:, 0]) + X[:, 1]  # noqa: E731
    edge = [f for f in P.facets if f.normal == (-1, -2)]
    ref, _ = integrate.quad(lambda t: (math.cos(2 - 2 * t) + t) * math.sqrt(5) / math.sqrt(5), 0, 1)
    assert integrate_boundary(P, g, facets=edge) == pytest.approx(ref, rel=1e-12)


def test_exact_and_float_agree_3d():
    P = standard_simplex(3)
    x, y, z = (RationalPoly.variable(3, i) for i in range(3))
    q = x * x * y + 3 * z - y * z * z + 1
    ex = integrate_exact_poly(P, q)
    fl = integrate_interior(P, lambda X: X[:, 0] ** 2 * X[:, 1] + 3 * X[:, 2] - X[:, 1] * X[:, 2] ** 2 + 1)
    assert fl == pytest.approx(float(ex), rel=1e-13)
    exb = integrate_exact_boundary(P, q)
    flb = integrate_boundary(P, lambda X: X[:, 0] ** 2 * X[:, 1] + 3 * X[:, 2] - X[:, 1] * X[:, 2] ** 2 + 1)
    assert flb == pytest.approx(float(exb), rel=1e-13)


def test_non_finite_integrand():
    with pytest.raises(NonFiniteIntegrand):
        with np.errstate(divide="ignore"):
            integrate_interior(interval(-1, 1), lambda X: 1 / (X[:, 0] - X[:, 0]))
