import numpy as np
import pytest

from corner_flow import geometry as geo
from corner_flow.coefficients import (GasState, GridGeometry, MapGeometry, a_dot, a_matrix, alpha_coeffs,
                                      boundary_coeffs, check_lemma21, potential_gradient, slip_candidate,
                                      sound_speed_sq, static_candidate)
from corner_flow.errors import PreconditionViolated, VacuumReached

GAS = GasState()


def test_background_state():
    assert GAS.rho0 == 1.0 and GAS.c0sq == 1.0
    g = GasState(1.4, 0.5)
    assert g.c0sq == pytest.approx(1.2)


def test_a_matrix_at_rest_is_the_wave_operator():
    a = a_matrix(0.0, (0.0, 0.0), GAS)
    assert np.array_equal(a, np.diag([1.0, -1.0, -1.0]))


def test_vacuum_detection():
    with pytest.raises(VacuumReached):
        sound_speed_sq(np.array([3.0]), (0.0, 0.0), GAS)


def test_a_dot_against_finite_differences():
    # Phi(t, x) = 0.1 t x1 + 0.05 t^2 x2 + 0.02 t^2, evaluated at x = (0.3, 0.4)
    def parts(t):
        dt = 0.1 * 0.3 + 0.1 * t * 0.4 + 0.04 * t
        grad = (0.1 * t, 0.05 * t**2)
        return dt, grad
    t, step = 0.7, 1e-6
    dt, grad = parts(t)
    dtt = 0.1 * 0.4 + 0.04
    grad_t = (0.1, 0.1 * t)
    fd = (a_matrix(*parts(t + step), GAS) - a_matrix(*parts(t - step), GAS)) / (2 * step)
    assert np.allclose(a_dot(dt, grad, dtt, grad_t, GAS), fd, atol=1e-8)


def test_flat_walls_give_alpha_equal_a():
    dom = geo.CornerDomain.flat()
    d = (np.array(0.01), np.array(0.02), np.array(-0.03))
    alpha, lower = alpha_coeffs(dom, GAS, (0.4, 0.5), d)
    assert np.allclose(alpha, a_matrix(0.01, (0.02, -0.03), GAS), atol=1e-15)
    assert np.allclose(lower, 0.0)


def test_lower_order_coefficients_are_hessian_contractions(curved):
    z1, z2 = 0.3, 0.35
    mg = MapGeometry.at(curved, np.array(z1), np.array(z2))
    _, lower = alpha_coeffs(curved, GAS, (z1, z2), (0.0, 0.0, 0.0), mg)
    # at rest a = diag(1, -1, -1), so alpha_k = -Laplacian(z_k)
    h = mg.hess
    assert lower[0] == 0.0
    assert lower[1] == pytest.approx(-(h[0, 0, 0] + h[0, 1, 1]), abs=1e-14)
    assert lower[2] == pytest.approx(-(h[1, 0, 0] + h[1, 1, 1]), abs=1e-14)


def test_boundary_coefficients_flat():
    b1, b2 = boundary_coeffs(geo.CornerDomain.flat(), np.linspace(0, 1, 5))
    assert np.allclose(b1, -1.0) and np.allclose(b2, 0.0)


def test_lemma21_holds_for_curved_walls(curved):
    rep = check_lemma21(curved, GAS, slip_candidate(curved))
    assert rep.passed
    assert max(rep.gamma2_alpha02, rep.gamma2_alpha12, rep.gamma1_conormal) <= 1e-10


def test_lemma21_static_candidate_is_exact(curved):
    rep = check_lemma21(curved, GAS, static_candidate(0.3))
    assert rep.gamma1_conormal <= 1e-15 and rep.gamma2_alpha12 == 0.0


def test_lemma21_rejects_non_slip_candidate(curved):
    bad = lambda z0, z1, z2: 0.01 * z2 + 0 * z0 * z1  # noqa: E731
    with pytest.raises(PreconditionViolated) as info:
        check_lemma21(curved, GAS, bad)
    assert info.value.boundary == "gamma2"


def test_slip_candidate_satisfies_oblique_condition(curved):
    cand = slip_candidate(curved)
    z2 = np.linspace(0.0, 0.9, 10)
    z = (np.zeros_like(z2), np.zeros_like(z2), z2)
    d = potential_gradient(cand, z, 1e-3)
    b1, b2 = boundary_coeffs(curved, z2)
    assert np.max(np.abs(b1 * d[1] + b2 * d[2])) <= 1e-10


def test_grid_geometry_flat_shortcut():
    z = np.linspace(0, 1, 5)
    gg = GridGeometry.build(geo.CornerDomain.flat(), z, z)
    assert np.array_equal(gg.mg.ghat[2, 3], np.eye(3))
    assert np.array_equal(gg.ratio, np.zeros(5))
