import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from spectral_det import airy, nystrom as ny, schrod as sd
from spectral_det.errors import DivergenceError, DomainError, GridError, UnsupportedError

FREE = sd.free_potential()
SOL = sd.soliton_potential()


def soliton_green(x, lam):
    k = math.sqrt(-lam)
    return (k * k - math.tanh(x) ** 2) / (2 * k * (k * k - 1))


def test_free_cosine_and_exponential():
    tr = sd.solve_schrodinger(FREE, 1.0, 0.0, math.pi, [1.0, 0.0])
    assert abs(tr.y[0, -1] + 1) < 1e-9
    tr = sd.solve_schrodinger(FREE, -1.0, 0.0, 1.0, [1.0, 1.0])
    assert abs(tr.y[0, -1] - math.e) < 1e-8


def test_soliton_bound_state_is_even():
    x0 = 10.0
    init = [math.exp(-x0), -math.exp(-x0)]
    tr = sd.solve_schrodinger(SOL, -1.0, 0.0, x0, init, reverse=True)
    psi, dpsi = tr.y[:, -1]
    assert abs(dpsi / psi) < 1e-6


def test_reverse_needs_ordered_interval():
    with pytest.raises(DomainError):
        sd.solve_schrodinger(FREE, 1.0, 1.0, 0.0, [1.0, 0.0])


def test_free_weyl_solution_profile():
    wp = sd.weyl_solutions(FREE, -4.0, np.array([0.0, 1.0, 2.0]))
    vals = wp.plus(np.array([0.0, 1.0, 2.0]))[0]
    assert np.allclose(vals[1:] / vals[:-1], math.exp(-2), rtol=1e-8)


def test_weyl_needs_decay():
    grow = sd.Potential(lambda x: 0.0, decay=False)
    with pytest.raises(UnsupportedError):
        sd.weyl_solutions(grow, -1.0)


def test_wronskian_constant():
    xs = np.linspace(-3, 3, 13)
    for lam in (-4.0, 2.0 + 1.0j):
        wp = sd.weyl_solutions(SOL, lam, xs)
        W = sd.wronskian(wp.plus(xs), wp.minus(xs))
        assert np.ptp(np.abs(W)) / np.abs(W).max() < 1e-8


def test_free_green():
    assert sd.green_diag_ode(FREE, 0.3, -1.0) == pytest.approx(0.5, abs=1e-9)
    assert sd.green_diag_ode(FREE, 0.3, -4.0) == pytest.approx(0.25, abs=1e-9)


@pytest.mark.parametrize("lam", [-25.0, -4.0, -1.5])
def test_soliton_green_closed_form(lam):
    for x in (0.0, 0.7, 2.0):
        assert sd.green_diag_ode(SOL, x, lam) == pytest.approx(soliton_green(x, lam), rel=1e-8)


def test_cutoff_variation_is_harmless():
    g1 = sd.green_diag_ode(SOL, 0.5, -9.0)
    g2 = sd.green_diag_ode(SOL, 0.5, -9.0, X=sd.cutoff(SOL, -9.0) + 5)
    assert abs(g1 - g2) < 1e-10


def test_xi_free():
    for lam in (0.5, 1.0, 2.0):
        assert abs(sd.xi(FREE, 1.0, lam) - 0.5) < 1e-4
    assert abs(sd.xi(FREE, 1.0, -1.0)) < 1e-4


def test_xi_soliton_jump():
    lo, hi = sd.xi(SOL, 0.0, -1.0 - 1e-3), sd.xi(SOL, 0.0, -1.0 + 1e-3)
    assert abs((hi - lo) - 1) < 1e-3


@settings(max_examples=15, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 8))
def test_xi_in_unit_interval(x, lam):
    v = sd.xi(FREE, x, lam)
    assert 0 <= v <= 1
    g = sd.green_diag_ode(FREE, x, complex(lam, 1e-6))
    if abs(g.real) < 1e-8 * abs(g):
        assert abs(v - 0.5) < 1e-6


def test_bound_states():
    assert np.allclose(sd.bound_states(SOL, -3.0, n=30), [-1.0], atol=1e-9)
    assert sd.bound_states(FREE, -3.0, n=30).size == 0


def test_kodaira():
    for x in (-1.0, 0.0, 1.5):
        Xi = sd.kodaira(SOL, x, -3.0 + 0.5j)
        assert abs(np.linalg.det(Xi) + 1) < 1e-8
        assert Xi[0, 0] == pytest.approx(2 * sd.green_diag_ode(SOL, x, -3.0 + 0.5j), rel=1e-10)


def test_kodaira_measure_psd():
    for inc in sd.kodaira_measure(SOL, 0.3, np.linspace(0.1, 3, 8)):
        H = 0.5 * (inc + inc.conj().T)
        assert np.linalg.eigvalsh(H).min() > -1e-8


def test_free_kodaira_density_increases():
    incs = sd.kodaira_measure(FREE, 0.0, np.linspace(0.5, 4, 8))
    d = [inc[1, 1].real for inc in incs]
    assert np.all(np.diff(d) > 0)


def test_weyl_m():
    assert sd.weyl_m_identity_check(FREE, 0.0, 1j) < 1e-7
    assert sd.weyl_m_identity_check(SOL, 0.5, -2.0 + 1.0j) < 1e-6
    mp, mm = sd.weyl_m(FREE, 0.0, -4.0 + 0j + 1e-12j)
    assert mp == pytest.approx(-2, abs=1e-8) and mm == pytest.approx(-2, abs=1e-8)


def test_airy_against_scipy():
    xs = np.array([-20.0, -7.5, -3.0, 0.0, 1.0, 5.4, 5.6, 12.0])
    ai, aip = airy.airy_ai(xs)
    ref = special.airy(xs)
    assert np.allclose(ai, ref[0], rtol=5e-8, atol=1e-300)
    assert np.allclose(aip, ref[1], rtol=5e-8, atol=1e-300)


def test_airy_kernel_from_canonical_system():
    cs = sd.airy_system()
    x, y = np.array([0.3, 1.2, 2.0]), np.array([0.9, 0.1, 2.0])
    assert np.allclose(sd.hamiltonian_kernel(cs, 0.0, x, y), airy.airy_kernel(x, y), rtol=1e-12)


def test_airy_canonical_solve_agrees():
    tr = sd.canonical_solve(sd.airy_system(), 0.0, (0.0, 2.0))
    assert np.allclose(tr.y[:, -1], airy.airy_ai(2.0), rtol=1e-9)


def test_free_rotation_diagonal_finite():
    cs = sd.schrodinger_canonical()
    v = sd.hamiltonian_kernel(cs, 2.0, 0.7, 0.7)
    assert np.isfinite(v)


def test_airy_determinant():
    d = sd.airy_determinant(0.0, 41)
    assert abs(d - 0.9694) < 2e-4
    assert abs(d - sd.airy_determinant(0.0, 81)) < 2e-4


def test_schrodinger_embedding():
    cs = sd.schrodinger_canonical(SOL)
    tr = sd.canonical_solve(cs, -0.5, (0.0, 1.5))
    ref = sd.solve_schrodinger(SOL, -0.5, 0.0, 1.5, [1.0, 0.0]).y[:, -1]
    # Psi = (f, -f')
    assert np.allclose(tr.y[:, -1], [ref[0], -ref[1]], rtol=1e-8)


def test_canonical_validation():
    with pytest.raises(DomainError):
        sd.CanonicalSystem(lambda x: np.eye(2), lambda x: -np.eye(2))
    with pytest.raises(DomainError):
        sd.CanonicalSystem(lambda x: np.array([[0, 1.0], [0, 0]]), lambda x: np.eye(2))


def test_phase_derivative_free():
    cs = sd.schrodinger_canonical()
    for k in (0.5, 1.0, 2.0):
        assert sd.phase_derivative_check(cs, 1.0, k) < 1e-6


def test_phase_flat_without_omega1():
    cs = sd.CanonicalSystem(lambda x: np.diag([1.0, 1.0]), lambda x: np.zeros((2, 2)))
    pd = sd.debranges_phase(cs, 1.0, np.linspace(0.5, 3, 6))
    assert np.ptp(pd.phase) < 1e-12
    assert sd.phase_derivative_check(cs, 1.0, 1.0) < 1e-9


def test_winding_synthetic():
    R = 1e3
    grid = np.linspace(-R, R, 4001)
    pd = sd.phase_from_E(lambda z: z + 1j, grid)
    assert sd.winding_number(pd.theta) == 1
    # refinement keeps the count
    pd2 = sd.phase_from_E(lambda z: z + 1j, np.linspace(-R, R, 16001))
    assert sd.winding_number(pd2.theta) == 1


def test_phase_grid_errors():
    with pytest.raises(GridError):
        sd.phase_from_E(lambda z: z + 1j, [1.0, 0.0])
    with pytest.raises(GridError):
        # the phase step stays at or above pi/2 after one halving
        sd.phase_from_E(lambda z: np.exp(1.5j * np.pi * z), [0.0, 1.0], max_refine=1)


def test_lambda_kernel_free():
    cs = sd.schrodinger_canonical()
    lam, nu = 1.0 + 1.0j, 2.0 + 0.5j
    want = 1j / (np.sqrt(lam) - np.conj(np.sqrt(nu)))
    assert abs(sd.lambda_kernel(cs, lam, nu) - want) < 1e-8
    assert abs(sd.lambda_kernel(cs, nu, lam) - np.conj(sd.lambda_kernel(cs, lam, nu))) < 1e-8


def test_lambda_boundary_matches_integral():
    cs = sd.schrodinger_canonical()
    lam, nu = 1.0 + 1.0j, 2.0 + 0.5j
    assert abs(sd.lambda_boundary(cs, lam, nu) - sd.lambda_kernel(cs, lam, nu)) < 1e-8


def test_lambda_kernel_truncation_detected():
    cs = sd.schrodinger_canonical()
    with pytest.raises(DivergenceError):
        sd.lambda_kernel(cs, 1.0 + 0.01j, 1.0 + 0.01j, X=5.0)


def test_drach_free():
    lam = -4.0
    res = sd.drach_check(FREE, lam, np.linspace(-2, 2, 81))
    assert res.ode_residual < 1e-10
    assert res.solution_residual < 1e-5


def test_drach_soliton():
    res = sd.drach_check(SOL, -9.0, np.linspace(-3, 3, 241))
    assert res.ode_residual < 1e-5
    assert res.mu2_spread < 1e-6
    assert res.mu2 == pytest.approx(0.25, abs=1e-8)


def test_drach_grid_checks():
    with pytest.raises(GridError):
        sd.drach_check(FREE, -1.0, np.linspace(0, 1, 5))
    with pytest.raises(GridError):
        sd.drach_check(FREE, -1.0, np.r_[np.linspace(0, 1, 10), 1.5])
