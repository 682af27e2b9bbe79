import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from freebound.errors import DomainViolation, QuadratureError, RootNotBracketed
from freebound.numerics import (GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, SignedPolynomial,
                                bisect_monotone, hypergeom_2f1_terminating, positive_root,
                                quad, quad_to_infinity)


def test_kronrod_rule_exact_for_degree_31():
    for k in range(32):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.dot(KRONROD_WEIGHTS, NODES ** k) == pytest.approx(exact, abs=1e-14)


def test_embedded_gauss_rule_matches_legendre():
    nodes, weights = np.polynomial.legendre.leggauss(10)
    mask = GAUSS_WEIGHTS > 0
    np.testing.assert_allclose(np.sort(NODES[mask]), np.sort(nodes), atol=1e-15)
    np.testing.assert_allclose(GAUSS_WEIGHTS[mask], weights[np.argsort(nodes)], atol=1e-15)


@pytest.mark.parametrize("f, a, b", [
    (lambda y: np.sin(y) * np.exp(-y), 0.0, 10.0),
    (lambda y: 1.0 / (1.0 + 25.0 * y ** 2), -1.0, 1.0),
    (lambda y: np.sqrt(y), 0.0, 2.0),
    (lambda y: y ** -0.38, 0.0, 1.0),
    (lambda y: np.log(y), 0.0, 1.0),
])
def test_quad_matches_scipy(f, a, b):
    ref, _ = integrate.quad(lambda t: float(f(np.array([t]))[0]), a, b, epsabs=1e-13,
                            epsrel=1e-13, limit=500)
    res = quad(f, a, b, tol=1e-11)
    assert res.value == pytest.approx(ref, abs=1e-10)
    assert res.abs_error_estimate <= 1e-11


def test_quad_points_and_degenerate_limits():
    f = lambda y: np.abs(y - 0.3)
    assert quad(f, 0.0, 1.0, points=[0.3]).value == pytest.approx(0.045 + 0.245, abs=1e-13)
    assert quad(np.cos, 1.0, 1.0).value == 0.0
    with pytest.raises(DomainViolation):
        quad(np.cos, 1.0, 0.0)


def test_quad_budget_exhaustion_reports_partial_value():
    with pytest.raises(QuadratureError) as info:
        quad(lambda y: np.sin(1.0 / y), 1e-6, 1.0, tol=1e-15, max_intervals=20)
    assert math.isfinite(info.value.value)


@pytest.mark.parametrize("f, a, hint, exact", [
    (lambda z: z ** -2.0, 1.0, "polynomial", 1.0),
    (lambda z: 1.0 / (1.0 + z * z), 0.0, "polynomial", math.pi / 2),
    (lambda z: np.exp(-z), 0.0, "exponential", 1.0),
    (lambda z: z * np.exp(-3.0 * z), 1.0, "exponential", 4.0 * math.exp(-3.0) / 9.0),
])
def test_quad_to_infinity(f, a, hint, exact):
    assert quad_to_infinity(f, a, tol=1e-11, decay_hint=hint).value == pytest.approx(exact, abs=1e-10)


def test_quad_to_infinity_detects_growth():
    with pytest.raises(QuadratureError):
        quad_to_infinity(lambda z: np.exp(0.1 * z), 0.0, decay_hint="exponential")


@given(st.floats(1e-6, 1e6), st.floats(0.2, 3.0))
@settings(max_examples=60, deadline=None)
def test_bisect_monotone_recovers_power_root(root, power):
    got = bisect_monotone(lambda c: c ** power - root ** power, 1.0)
    assert got == pytest.approx(root, rel=1e-11)


def test_bisect_monotone_decreasing_and_unbracketed():
    assert bisect_monotone(lambda c: 1.0 / c - 0.25, 1.0) == pytest.approx(4.0, rel=1e-12)
    with pytest.raises(RootNotBracketed):
        bisect_monotone(lambda c: 1.0 + c, 1.0, max_doublings=10)


@given(st.integers(0, 9), st.floats(0.1, 20.0), st.floats(0.1, 20.0), st.floats(-5.0, 1.0))
@settings(max_examples=100, deadline=None)
def test_terminating_2f1_matches_scipy(m, b, c, z):
    ref = special.hyp2f1(-m, b, c, z)
    assert hypergeom_2f1_terminating(m, b, c, z) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_2f1_two_term_closed_form():
    # F(-1, b; c; z) = 1 - (b/c) z
    assert hypergeom_2f1_terminating(1, 3.0, 4.0, -2.0) == pytest.approx(1.0 + 1.5)
    with pytest.raises(DomainViolation):
        hypergeom_2f1_terminating(1.5, 1.0, 1.0, 0.5)


@st.composite
def single_change_polys(draw):
    deg = draw(st.integers(1, 8))
    c0 = -draw(st.floats(0.01, 10.0))
    rest = [draw(st.floats(0.0, 10.0)) for _ in range(deg - 1)]
    lead = draw(st.floats(0.01, 10.0))
    return SignedPolynomial([c0] + rest + [lead])


@given(single_change_polys())
@settings(max_examples=150, deadline=None)
def test_positive_root_is_a_sign_change(poly):
    assert poly.sign_changes() == 1
    t = positive_root(poly)
    assert t > 0
    assert poly(t * (1 - 1e-9)) <= 0 <= poly(t * (1 + 1e-9))


def test_positive_root_rejects_multiple_sign_changes():
    with pytest.raises(DomainViolation):
        positive_root(SignedPolynomial([1.0, -3.0, 1.0]))


def test_positive_root_against_numpy_roots():
    poly = SignedPolynomial([-2.0, 0.5, 0.0, 1.0])
    roots = np.roots(poly.coefficients[::-1])
    real_pos = [r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0]
    assert positive_root(poly) == pytest.approx(real_pos[0], rel=1e-12)
