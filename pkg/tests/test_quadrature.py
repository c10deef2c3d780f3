import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint

from spectra.quadrature import (
    GAUSS_W,
    KRONROD_W,
    NODES,
    QuadratureError,
    integrate,
    integrate_complex,
)


def test_rule_exactness():
    for deg in range(23):
        exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert abs(np.sum(KRONROD_W * NODES**deg) - exact) < 1e-14
        if deg <= 13:
            assert abs(np.sum(GAUSS_W * NODES**deg) - exact) < 1e-14
    assert abs(np.sum(GAUSS_W * NODES**14) - 2 / 15) > 1e-8


def test_vector_valued():
    r = integrate(lambda x: np.stack([np.sin(x), x**2]), 0, math.pi)
    np.testing.assert_allclose(r.value, [2.0, math.pi**3 / 3], rtol=1e-12)
    assert r.error <= 1e-10


def test_near_pole_with_breakpoint():
    eta = 1e-4
    f = lambda x: eta / (x**2 + eta**2)
    r = integrate(f, -1, 1, tol=1e-10, breakpoints=[0.0])
    assert r.value[0] == pytest.approx(2 * math.atan(1 / eta), rel=1e-9)


def test_complex():
    z = 0.3 + 0.01j
    r = integrate_complex(lambda x: 1 / (x - z), -2, 2, tol=1e-11, breakpoints=[0.3])
    ref, _ = sint.quad(lambda x: 1 / (x - z), -2, 2, complex_func=True, points=[0.3], limit=500)
    assert abs(r.value[0] - ref) < 1e-9


def test_nonconvergence_reports_gap():
    with pytest.raises(QuadratureError, match="last iterate gap"):
        integrate(lambda x: 1 / np.sqrt(np.abs(x)), -1, 1, panels=3, max_panels=50, tol=1e-14)


def test_bad_interval():
    with pytest.raises(ValueError):
        integrate(np.sin, 1, 1)


@settings(max_examples=50, deadline=None)
@given(
    coeffs=st.lists(st.floats(-5, 5), min_size=1, max_size=8),
    a=st.floats(-3, 0),
    w=st.floats(0.1, 4),
)
def test_polynomials_exact(coeffs, a, w):
    b = a + w
    p = np.polynomial.Polynomial(coeffs)
    exact = p.integ()(b) - p.integ()(a)
    r = integrate(p, a, b, panels=1)
    assert abs(r.value[0] - exact) <= 1e-11 * max(1.0, abs(exact), np.abs(coeffs).sum() * 4**8)
