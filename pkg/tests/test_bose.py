import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hylcycles.bose import bose, bose_g, bose_g_expansion, zeta_value
from hylcycles.errors import ConvergenceError, DivergenceError, DomainError

from oracles import bose_em, zeta_em


def mp_g(n, u):
    return float(mpmath.polylog(n, mpmath.exp(u)).real)


@pytest.mark.parametrize("s", [0.5, 1.5, 2.0, 2.5, 3.5, 7.0, 70.0, 0.0, -0.5, -1.0, -2.0, -3.5, -20.5])
def test_zeta_matches_mpmath(s):
    ref = float(mpmath.zeta(s))
    assert zeta_value(s) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_zeta_em_oracle_agrees():
    for s in (1.5, 2.5, 3.5):
        assert zeta_value(s) == pytest.approx(zeta_em(s), rel=1e-12)


def test_zeta_pole():
    with pytest.raises(DomainError):
        zeta_value(1.0)


def test_zeta_trivial_zeros_exact():
    assert zeta_value(-2.0) == 0.0
    assert zeta_value(-10.0) == 0.0


@pytest.mark.parametrize("n", [0.5, 1.0, 1.5, 2.0, 2.5, 3.5])
@pytest.mark.parametrize("u", [-1e-4, -0.01, -0.3, -0.7, -2.0, -10.0])
def test_bose_matches_em_oracle(n, u):
    assert bose(n, u) == pytest.approx(bose_em(n, u)[0], rel=1e-10)


@pytest.mark.parametrize("n", [-2.0, -1.0, -0.5, 0.0, 1.0, 2.5, 4.0])
@pytest.mark.parametrize("u", [-0.05, -0.5, -1.5, -5.0])
def test_series_and_expansion_match_mpmath(n, u):
    ref = mp_g(n, u)
    assert bose_g(n, u) == pytest.approx(ref, rel=1e-11)
    assert bose_g_expansion(n, u) == pytest.approx(ref, rel=1e-10)


def test_expansion_positive_u_is_real_part():
    for n in (0.5, 1.5, 2.0, 2.5):
        u = 0.3
        ref = float(mpmath.polylog(n, mpmath.exp(u)).real)
        assert bose_g_expansion(n, u) == pytest.approx(ref, rel=1e-10)


def test_u_zero_gives_zeta():
    assert bose_g(2.5, 0.0) == pytest.approx(float(mpmath.zeta(2.5)), rel=1e-13)
    assert bose(1.5, 0.0) == zeta_value(1.5)


@pytest.mark.parametrize("n", [1.0, 0.5, -1.0])
def test_divergence_at_zero(n):
    with pytest.raises(DivergenceError, match="diverge"):
        bose_g(n, 0.0)


def test_divergence_positive_u():
    with pytest.raises(DivergenceError):
        bose_g(2.0, 0.1)
    with pytest.raises(DivergenceError):
        bose(2.0, 1e-9)


def test_expansion_domain():
    with pytest.raises(DomainError):
        bose_g_expansion(1.5, 0.0)
    with pytest.raises(DomainError):
        bose_g_expansion(1.5, -7.0)


def test_series_term_cap_reports_nonconvergence():
    with pytest.raises(ConvergenceError):
        bose_g(0.5, -1e-6, max_terms=1000)


def test_deep_negative_relative_accuracy():
    # tiny values keep full relative precision
    assert bose_g(2.0, -50.0) / math.exp(-50.0) == pytest.approx(1.0 + 2.0**-2 * math.exp(-50.0), rel=1e-14)
    assert bose(1.5, -30.0) / math.exp(-30.0) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(
    n=st.floats(min_value=-1.5, max_value=4.0),
    u=st.floats(min_value=-6.0, max_value=-1e-3),
)
def test_derivative_recurrence(n, u):
    """d/du g(n, u) = g(n-1, u)."""
    h = 1e-5 * max(1.0, abs(u))
    h = min(h, abs(u) / 4)
    fd = (bose(n, u + h) - bose(n, u - h)) / (2 * h)
    assert fd == pytest.approx(bose(n - 1.0, u), rel=1e-5)


@settings(max_examples=60, deadline=None)
@given(
    n=st.floats(min_value=-1.0, max_value=4.0),
    u1=st.floats(min_value=-8.0, max_value=-1e-4),
    u2=st.floats(min_value=-8.0, max_value=-1e-4),
)
def test_monotone_in_u(n, u1, u2):
    lo, hi = sorted((u1, u2))
    assert bose(n, lo) <= bose(n, hi) * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(
    n1=st.floats(min_value=-1.0, max_value=4.0),
    n2=st.floats(min_value=-1.0, max_value=4.0),
    u=st.floats(min_value=-8.0, max_value=-1e-3),
)
def test_decreasing_in_order(n1, n2, u):
    lo, hi = sorted((n1, n2))
    assert bose(hi, u) <= bose(lo, u) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.floats(min_value=0.2, max_value=4.0), u=st.floats(min_value=-2.0, max_value=-0.05))
def test_two_routes_agree(n, u):
    a = bose_g(n, u)
    b = bose_g_expansion(n, u)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_dispatcher_switch_is_seamless():
    for n in (0.5, 1.5, 2.5):
        left = bose(n, np.nextafter(-0.5, -1))
        right = bose(n, np.nextafter(-0.5, 0))
        assert left == pytest.approx(right, rel=1e-12)
