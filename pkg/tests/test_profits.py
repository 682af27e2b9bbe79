import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freebound import CES, CobbDouglas, profit_from_dict
from freebound.errors import DomainViolation
from freebound.profits import ProfitModel

unit = st.floats(0.05, 0.95)
pos = st.floats(1e-3, 1e3)


def test_reference_values():
    assert CobbDouglas(0.5, 0.5).marginal(1.0, 1.0) == pytest.approx(0.5)
    assert CobbDouglas(0.5, 0.5).profit(4.0, 1.0) == pytest.approx(2.0)
    assert CES(2).marginal(3.0, 3.0) == pytest.approx(2.0)
    assert CES(3).profit(1.0, 1.0) == pytest.approx(8.0)
    assert CES(2).kappa == 1.0 and CobbDouglas(0.3, 0.4).kappa == 0.0


@given(unit, unit, pos, pos)
@settings(max_examples=100, deadline=None)
def test_cd_marginal_is_capacity_derivative(a, b, x, c):
    p = CobbDouglas(a, b)
    h = 1e-6 * c
    fd = (p.profit(x, c + h) - p.profit(x, c - h)) / (2 * h)
    assert p.marginal(x, c) == pytest.approx(fd, rel=1e-6)


@given(st.integers(2, 8), pos, pos)
@settings(max_examples=100, deadline=None)
def test_ces_marginal_is_capacity_derivative(n, x, c):
    p = CES(n)
    h = 1e-6 * c
    fd = (p.profit(x, c + h) - p.profit(x, c - h)) / (2 * h)
    assert p.marginal(x, c) == pytest.approx(fd, rel=1e-5)


@given(st.one_of(st.builds(CobbDouglas, unit, unit), st.builds(CES, st.integers(2, 8))),
       pos, pos)
@settings(max_examples=150, deadline=None)
def test_marginal_monotonicity_and_inverse(p, x, c):
    v = float(p.marginal(x, c))
    assert p.marginal(x, 2 * c) < v
    assert p.marginal(2 * x, c) >= v
    if v > p.kappa * (1 + 1e-9):
        assert p.inverse_marginal(x, v) == pytest.approx(c, rel=1e-8)


@given(st.one_of(st.builds(CobbDouglas, unit, unit), st.builds(CES, st.integers(2, 8))),
       pos, pos)
@settings(max_examples=100, deadline=None)
def test_separable_terms_reconstruct_marginal(p, x, c):
    total = sum(a * x ** e * c ** q for a, e, q in p.separable_terms())
    assert total == pytest.approx(float(p.marginal(x, c)), rel=1e-12)


def test_generic_inverse_by_bisection():
    class Wrapped(ProfitModel):
        kappa = 0.0

        def marginal(self, x, c):
            return CobbDouglas(0.5, 0.5).marginal(x, c)

    w = Wrapped()
    assert w.inverse_marginal(1.0, 0.25) == pytest.approx(
        CobbDouglas(0.5, 0.5).inverse_marginal(1.0, 0.25), rel=1e-11)


def test_saturation_limit():
    assert CES(3).marginal(1.0, 1e12) == pytest.approx(1.0, rel=1e-3)
    assert CobbDouglas(0.5, 0.5).marginal(1.0, 1e12) < 1e-5


def test_domain_errors():
    with pytest.raises(DomainViolation):
        CobbDouglas(1.0, 0.5)
    with pytest.raises(DomainViolation):
        CES(1)
    with pytest.raises(DomainViolation):
        CES(2).marginal(1.0, 0.0)
    with pytest.raises(DomainViolation):
        CES(2).inverse_marginal(1.0, 0.9)
    with pytest.raises(DomainViolation):
        profit_from_dict({"kind": "leontief"})


def test_dict_round_trip():
    for p in (CobbDouglas(0.3, 0.6), CES(4)):
        assert profit_from_dict(p.to_dict()) == p


@given(st.integers(2, 8), pos, st.floats(1.01, 50.0))
@settings(max_examples=60, deadline=None)
def test_ces_closed_inverse_matches_bisection(n, x, v):
    p = CES(n)
    assert p.inverse_marginal(x, v) == pytest.approx(ProfitModel.inverse_marginal(p, x, v), rel=1e-9)


def test_zero_state_limits():
    assert CES(3).marginal(0.0, 1.0) == 1.0
    assert CobbDouglas(0.5, 0.5).marginal(0.0, 1.0) == 0.0
