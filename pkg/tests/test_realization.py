import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, linalg

from spectral_det import nystrom, realization as rz
from spectral_det.errors import DomainError, PoleError, StabilityError


def test_scalar_response():
    assert rz.impulse_response(rz.scalar_system(), 2.0) == pytest.approx(math.exp(-2), rel=1e-14)


def test_rational_first_order():
    s = rz.rational_realization([(-1.0, 1)])
    assert rz.impulse_response(s, 1.0).real == pytest.approx(0.5, abs=1e-8)


def test_indicator_profile():
    ind = lambda u: (np.asarray(u) < 1).astype(float)
    s = rz.DiagonalRealization(ind, ind, support=1.0)
    assert rz.impulse_response(s, 1.0).real == pytest.approx(1 - math.exp(-1), abs=1e-10)


def test_nonpositive_time():
    with pytest.raises(DomainError):
        rz.impulse_response(rz.scalar_system(), 0.0)


@pytest.mark.parametrize("poles,t,want", [
    ([(-1.0, 2)], 1e-3, 1 / 1.001 ** 2),
    ([(-1.0, 1), (-2.0, 1)], 1.0, 5 / 6),
    ([(-1.0, 3)], 2.0, 1 / 27),
])
def test_rational_closed_forms(poles, t, want):
    got = rz.impulse_response(rz.rational_realization(poles), t).real
    assert got == pytest.approx(want, rel=1e-7)


def test_rational_stability():
    with pytest.raises(StabilityError):
        rz.rational_realization([(0.5, 1)])


def test_unstable_matrix():
    with pytest.raises(StabilityError):
        rz.MatrixRealization([[-1.0]], [1.0], [1.0])


def test_direct_sum_scalar():
    s = rz.direct_sum(rz.scalar_system(), rz.scalar_system())
    t = np.array([0.3, 1.0, 4.0])
    assert np.allclose(rz.impulse_response(s, t), 2 * np.exp(-t), rtol=1e-13)


def test_direct_sum_zero_summand():
    s1 = rz.scalar_system(2.0, 1.0, 3.0)
    s = rz.direct_sum(s1, rz.scalar_system(b=0.0))
    t = np.linspace(0.1, 5, 7)
    assert np.allclose(rz.impulse_response(s, t), rz.impulse_response(s1, t), rtol=1e-14)


def test_direct_sum_rational():
    s = rz.direct_sum(rz.rational_realization([(-1.0, 1)]), rz.rational_realization([(-2.0, 1)]))
    ref = rz.rational_realization([(-1.0, 1), (-2.0, 1)])
    t = np.logspace(-1, 1.3, 50)
    assert np.allclose(rz.impulse_response(s, t), rz.impulse_response(ref, t), rtol=0, atol=1e-12)


def test_direct_sum_mixed():
    with pytest.raises(TypeError):
        rz.direct_sum(rz.scalar_system(), rz.rational_realization([(-1.0, 1)]))


def test_darboux_scalar():
    s = rz.darboux_shift(rz.scalar_system(), 3.0)
    assert complex(s.B[0, 0]) == pytest.approx(2.0, abs=1e-14)


def test_darboux_limits():
    s = rz.scalar_system()
    assert rz.darboux_shift(s, rz.INFINITY) is s
    assert complex(rz.darboux_shift(s, 0.0).B[0, 0]) == pytest.approx(-1.0, abs=1e-14)


def test_darboux_pole():
    with pytest.raises(PoleError):
        rz.darboux_shift(rz.scalar_system(), 1.0)


def test_darboux_round_trip():
    rng = np.random.default_rng(3)
    A = np.diag([1.0, 2.0, 3.5]) + 0.1 * rng.standard_normal((3, 3))
    s = rz.MatrixRealization(A, rng.standard_normal(3), rng.standard_normal(3))
    zeta = 1.7 + 0.4j
    t = rz.darboux_shift(s, zeta)
    I = np.eye(3)
    back = (zeta * I - A) @ linalg.solve(zeta * I + A, t.B)
    assert np.allclose(back, s.B, rtol=0, atol=1e-12)


def test_hat_system_response():
    s = rz.scalar_system()
    h = rz.hat_system(s, s, 1.0)
    t = 0.7
    got = h.C @ linalg.expm(-t * h.A) @ h.B
    e = math.exp(-t)
    assert np.allclose(got, [[0, e], [-e, 0]], atol=1e-14)


def test_hat_system_lambda_zero():
    s = rz.scalar_system()
    h = rz.hat_system(s, s, 0.0)
    assert np.allclose((h.C @ h.B)[0, 1], 0)


def test_hat_system_det_against_nystrom():
    from spectral_det import statecalc
    s = rz.scalar_system()
    x = 0.4
    d_hat = statecalc.tau(rz.hat_system(s, s, 1.0), x)
    rule = nystrom.build_rule(64, "rational", 1.0)
    G = nystrom.discretize_kernel(lambda a, b: np.exp(-(a + b + 2 * x)), rule).M
    d_ny = np.linalg.det(np.eye(len(G)) + G.T @ G)
    assert abs(d_hat - d_ny) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.integers(0, 10_000))
def test_semigroup(t, s, seed):
    rng = np.random.default_rng(seed)
    # Gershgorin keeps the spectrum in Re > 0.6
    A = np.diag(rng.uniform(1, 3, 3)) + 0.1 * rng.uniform(-1, 1, (3, 3))
    sys = rz.MatrixRealization(A, rng.standard_normal(3), rng.standard_normal(3))
    lhs = rz.impulse_response(sys, t + s)
    rhs = (sys.C @ linalg.expm(-t * A) @ linalg.expm(-s * A) @ sys.B)[0, 0]
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@pytest.mark.parametrize("a,r", [(-1.0, 1), (-0.5, 2), (-2.0 + 1.0j, 1), (-1.5, 3)])
def test_rational_matches_closed_form(a, r):
    s = rz.rational_realization([(a, r)])
    t = np.linspace(0.1, 20, 40)
    got = rz.impulse_response(s, t)
    assert np.allclose(got, 1 / (t - a) ** r, rtol=1e-8, atol=1e-10)


def test_diagonal_response_against_quad():
    s = rz.DiagonalRealization(lambda u: np.exp(-u), lambda u: np.exp(-u))
    for t in (0.5, 2.0):
        ref = integrate.quad(lambda u: np.exp(-(t + 2) * u), 0, np.inf)[0]
        assert rz.impulse_response(s, t).real == pytest.approx(ref, rel=1e-9)
