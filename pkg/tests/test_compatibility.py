import numpy as np
import pytest

from corner_flow import compatibility as cp
from corner_flow import linear_solver as ls
from corner_flow.coefficients import GasState, GridGeometry
from corner_flow.geometry import CornerDomain


def _jet(values, shape=(3, 3)):
    return cp.InitialJet([np.full(shape, v) for v in values], 0.1)


def test_taylor_psi_constant_and_linear_jets():
    t = np.array([0.0, 0.5, 2.0])
    assert np.allclose(cp.taylor_psi(_jet((1, 0, 0, 0)), t), 1.0)
    lin = cp.taylor_psi(_jet((0, 1, 0, 0)), t)
    assert np.allclose(lin[:, 1, 1], t)
    assert np.allclose(cp.taylor_psi(_jet((0, 1, 0, 0)), t, deriv=1), 1.0)


def test_taylor_psi_cubic():
    t = np.array([0.3])
    val = cp.taylor_psi(_jet((1, 2, 3, 4)), t)[0, 0, 0]
    assert val == pytest.approx(1 + 2 * 0.3 + 1.5 * 0.09 + 4 / 6 * 0.027)


def test_jet_of_a_rest_state_is_zero():
    g = ls.Grid.build(0.1, 0.5, 1.0, 1.0)
    geom = GridGeometry.build(CornerDomain.flat(), g.z1, g.z2)
    z = np.zeros((g.nx, g.ny))
    jet = cp.build_jet(z, z, geom, GasState(), g.h)
    assert not np.any(jet[2]) and not np.any(jet[3])
    assert cp.check_compatibility(jet, geom).max_residual == 0.0


def test_jet_matches_the_wave_equation_on_flat_walls():
    g = ls.Grid.build(1 / 32, 0.5, 1.0, 1.0)
    phi0, _, _ = ls.cosine_oracle(g, (1, 1), amplitude=1e-3)
    geom = GridGeometry.build(CornerDomain.flat(), g.z1, g.z2)
    jet = cp.build_jet(phi0, np.zeros_like(phi0), geom, GasState(), g.h)
    # small amplitude: phi_tt ~ Laplacian(phi0) = -2 pi^2 phi0
    assert np.allclose(jet[2], -2 * np.pi**2 * phi0, atol=1e-3 * 2e-3 * np.pi**2 + 1e-6)


def _cosine_residual(h):
    g = ls.Grid.build(h, 0.5, 1.0, 1.0)
    phi0, _, _ = ls.cosine_oracle(g, (1, 2), amplitude=1e-3)
    geom = GridGeometry.build(CornerDomain.flat(), g.z1, g.z2)
    jet = cp.build_jet(phi0, np.zeros_like(phi0), geom, GasState(), g.h)
    return cp.check_compatibility(jet, geom), jet, geom


def test_compatibility_residuals_are_truncation_only():
    # the cosine data are exactly compatible; what remains is one-sided truncation,
    # third order here because odd normal derivatives of the mode vanish on the walls
    coarse, jet, geom = _cosine_residual(1 / 32)
    fine, _, _ = _cosine_residual(1 / 64)
    assert 7.0 < coarse.max_residual / fine.max_residual < 9.0
    assert "k0=0,k2=2" in coarse.to_dict()["gamma1"]
    with pytest.raises(ValueError):
        cp.check_compatibility(jet, geom, order=3)
