import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from yoccoz.errors import InvalidArgument, UnsupportedConfiguration
from yoccoz.poly import (Polynomial, critical_points, equipotential_curve, evaluate, green_array,
                         green_function)
from yoccoz.rays import repelling_fixed_points

from oracles import green_chebyshev

CHEB = Polynomial.quadratic(-2)


@given(st.floats(2.5, 10.0), st.floats(0, 2 * math.pi))
def test_green_matches_chebyshev(r, t):
    z = cmath.rect(r, t)
    assert abs(green_function(CHEB, z).value - green_chebyshev(z)) < 1e-9


def test_green_array_vectorised():
    z = np.array([3.0, 4j, -5 + 1j, 0.1])
    g, esc = green_array(CHEB, z)
    assert g[-1] == 0.0 and esc[-1] == -1
    for w, v in zip(z[:3], g[:3]):
        assert v == pytest.approx(green_chebyshev(w), abs=1e-12)


def test_green_functional_equation():
    p = Polynomial.quadratic(0.3 + 0.5j)
    z = np.array([2 + 1j, -3.0, 1.5j])
    g, _ = green_array(p, z)
    gf, _ = green_array(p, evaluate(p, z))
    assert np.allclose(gf, 2 * g, rtol=1e-12)


def test_filled_julia_point_has_zero_potential():
    pot = green_function(Polynomial.quadratic(-1), 0j)
    assert pot.value == 0.0 and not pot.escaping


def test_equipotential_level():
    curve = equipotential_curve(CHEB, 0.5, samples=64)
    g, _ = green_array(CHEB, curve)
    assert np.allclose(g, 0.5, atol=1e-8)


def test_quadratic_critical_point():
    p = Polynomial.quadratic(-1.5)
    (z, mult), = p.critical_points
    assert z == 0 and mult == 2
    assert p.b == 1 and p.degree == 2


def test_cubic_critical_points():
    p = Polynomial((1, 0, -3, 0.5))
    zs = sorted(z.real for z, _ in p.critical_points)
    assert zs == pytest.approx([-1, 1], abs=1e-12)
    assert [z for z, _ in critical_points(p)] == [z for z, _ in p.critical_points]


def test_json_round_trip_keeps_exact_string():
    p = Polynomial.quadratic("-1.7548776662466927")
    q = Polynomial.from_json(json.dumps(p.to_json()))
    assert q == p and q.exact[-1] == "-1.7548776662466927"


def test_degree_field_checked():
    with pytest.raises(InvalidArgument):
        Polynomial.from_json({"degree": 3, "coeffs": [[1, 0], [0, 0], [-1, 0]]})


@pytest.mark.parametrize("coeffs", [(1, 0), (2, 0, 1), (1, 1, 0)])
def test_normal_form_enforced(coeffs):
    with pytest.raises(InvalidArgument):
        Polynomial(coeffs)


def test_attracting_fixed_point_refused():
    with pytest.raises(UnsupportedConfiguration):
        repelling_fixed_points(Polynomial.quadratic(0.1))
