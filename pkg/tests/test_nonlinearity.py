import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from pmelab.nonlinearity import (
    PorousNonlinearity,
    RegularizedNonlinearity,
    inverse_bounds,
    kirchhoff_upsilon,
    mccann_defect,
    potential_psi,
    regularize,
    validate_hypotheses,
)


def mixed_law():
    # rho^2 + rho^3 / 3 is power-type with m = 2 only locally; use m = 2.5 on [0, 10].
    return PorousNonlinearity(lambda r: r ** 2 + r ** 3, lambda r: 2 * r + 3 * r ** 2, m=2.5, c0=0.1, c1=10.0)


def test_power_law_basics():
    P = PorousNonlinearity.power(3.0, 2.0)
    assert P.value(2.0) == 16.0
    assert P.derivative(2.0) == 24.0
    assert P.inverse(16.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        PorousNonlinearity.power(1.0)
    with pytest.raises(ValueError):
        PorousNonlinearity(lambda r: r, lambda r: 1 + 0 * r, m=2.0, c0=2.0, c1=1.0)


def test_inverse_by_root_finding_and_bounds():
    P = mixed_law()
    v = np.array([0.0, 0.5, 3.0, 100.0])
    x = P.inverse(v)
    assert np.allclose(P.value(x), v, rtol=1e-13, atol=1e-15)
    lo, hi = inverse_bounds(PorousNonlinearity.power(2.0), 4.0)
    assert lo == hi == pytest.approx(2.0)


def test_regularized_law_pieces():
    P = PorousNonlinearity.power(2.0)
    Pe = regularize(P, 0.1)
    assert isinstance(Pe, RegularizedNonlinearity)
    assert Pe.rho_cut == 10.0
    assert Pe.value(2.0) == pytest.approx(4.2)
    assert Pe.derivative(2.0) == pytest.approx(4.1)
    # Frozen slope beyond 1/eps, continuous value.
    assert Pe.derivative(20.0) == pytest.approx(Pe.tail_slope) == pytest.approx(20.1)
    assert Pe.value(10.0 + 1e-9) == pytest.approx(Pe.value(10.0), abs=1e-6)
    assert Pe.value(-1.0) == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        regularize(P, 0.0)


def test_psi_matches_quadrature():
    for P in (PorousNonlinearity.power(2.5, 0.7), mixed_law(), regularize(PorousNonlinearity.power(2.0), 0.5)):
        for rho in (0.3, 1.7, 4.0):
            ref = integrate.quad(lambda s: float(P.value(s)), 0, rho, epsabs=1e-13, limit=200)[0]
            assert potential_psi(P, rho) == pytest.approx(ref, rel=1e-9)


def test_upsilon_matches_quadrature():
    for P in (PorousNonlinearity.power(3.0), regularize(PorousNonlinearity.power(2.0), 0.5)):
        for rho in (0.5, 3.0):
            ref = integrate.quad(lambda s: float(np.sqrt(P.derivative(s))), 0, rho, epsabs=1e-13, limit=200)[0]
            assert kirchhoff_upsilon(P, rho) == pytest.approx(ref, rel=1e-8)


def test_mccann_defect_power_law():
    # For rho^m: defect = (m - 1 + 1/n) rho^m.
    P = PorousNonlinearity.power(2.0)
    assert mccann_defect(P, 2.0, 3) == pytest.approx((1 + 1 / 3) * 4)


def test_validate_hypotheses_power_and_failures():
    rep = validate_hypotheses(PorousNonlinearity.power(2.0), 3)
    assert rep.passed
    assert rep.fitted_c0 == pytest.approx(1.0) and rep.fitted_c1 == pytest.approx(1.0)
    # Declared constants that are too tight fail the power-type check.
    tight = PorousNonlinearity(lambda r: r ** 2 + r ** 3, lambda r: 2 * r + 3 * r ** 2, m=2.0, c0=1.0, c1=1.0)
    assert not validate_hypotheses(tight, 3)["power_bounds"].passed
    # A decreasing law fails monotonicity.
    bad = PorousNonlinearity(lambda r: -r ** 2, lambda r: -2 * r, m=2.0)
    assert not validate_hypotheses(bad, 2)["monotone"].passed


def test_regularized_law_keeps_hypotheses():
    Pe = regularize(PorousNonlinearity.power(2.0), 0.2)
    rho = np.linspace(0, 30, 3001)
    assert np.all(np.diff(Pe.value(rho)) > 0)
    assert np.all(mccann_defect(Pe, rho, 3) >= -1e-12)


@settings(max_examples=50, deadline=None)
@given(m=st.floats(1.05, 4.0), coeff=st.floats(0.1, 5.0), v=st.floats(0.0, 1e3))
def test_power_inverse_roundtrip(m, coeff, v):
    P = PorousNonlinearity.power(m, coeff)
    assert P.value(P.inverse(v)) == pytest.approx(v, rel=1e-10, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(m=st.floats(1.05, 4.0), eps=st.floats(1e-4, 1.0), a=st.floats(0.0, 50.0), b=st.floats(0.0, 50.0))
def test_regularized_is_monotone_and_psi_convex(m, eps, a, b):
    Pe = regularize(PorousNonlinearity.power(m), eps)
    lo, hi = min(a, b), max(a, b)
    assert Pe.value(hi) >= Pe.value(lo)
    mid = 0.5 * (lo + hi)
    assert potential_psi(Pe, mid) <= 0.5 * (potential_psi(Pe, lo) + potential_psi(Pe, hi)) + 1e-9 * (1 + potential_psi(Pe, hi))
