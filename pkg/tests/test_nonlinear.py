import numpy as np
import pytest

from corner_flow import linear_solver as ls
from corner_flow import nonlinear as nl
from corner_flow.compatibility import build_jet
from corner_flow.errors import NoConvergence
from corner_flow.scenario import from_dict


def _scenario(amplitude=1e-3, eps=1e-3, h=0.0625, T=0.5, m_max=12):
    cfg = {"mode": "nonlinear",
           "walls": {"wall1": {"epsilon": eps, "poly_coeffs": [1.0], "cutoff_radius": 4.0},
                     "wall2": {"epsilon": eps, "poly_coeffs": [0.5], "cutoff_radius": 4.0}},
           "data": {"bumps": [{"center": [0.3, 0.2], "radius": 0.5, "amplitude": amplitude}]},
           "grid": {"h": h, "T": T, "eta": [4.0]},
           "iteration": {"m_max": m_max, "tol_h1": 1e-13}}
    return from_dict(cfg)


@pytest.fixture(scope="module")
def small_run():
    scn = _scenario()
    g, geom, phi0, phi1 = nl.prepare(scn)
    res = nl.iterate(geom, scn.gas, g, phi0, phi1, m_max=scn.m_max, tol_h1=scn.tol_h1)
    return scn, g, geom, phi0, phi1, res


def test_geometric_trace_has_exact_sigma_hat():
    tr = nl.IterationTrace([1.0, 0.5, 0.25, 0.125], [1.0] * 4, [0] * 4, 0.0)
    assert tr.sigma_hat == pytest.approx(0.5, abs=1e-15)
    assert nl.contraction_ratio(tr) == pytest.approx(0.5, abs=1e-15)
    assert np.isnan(nl.contraction_ratio(nl.IterationTrace([1.0, 0.1])))
    assert tr.to_csv().splitlines()[0] == "m,diff_h1,ratio,high_norm,sweeps"


def test_boundedness_check():
    tr = nl.IterationTrace([1.0, 0.1], [2.0, 2.5])
    assert nl.boundedness_check(tr, 3.0)
    assert not nl.boundedness_check(tr, 2.2)


def test_zero_data_stops_after_one_solve():
    scn = from_dict({"mode": "nonlinear", "grid": {"h": 0.125, "T": 0.5, "eta": [4.0]}})
    g, geom, phi0, phi1 = nl.prepare(scn)
    res = nl.iterate(geom, scn.gas, g, phi0, phi1)
    assert res.converged and len(res.trace.diff_h1) == 1
    assert not np.any(res.Phi)


def test_iteration_contracts(small_run):
    *_, res = small_run
    assert res.converged
    sig = res.trace.sigma_hat
    assert 0.0 < sig < 0.1
    assert all(r < 0.5 for r in res.trace.ratios)


def test_fixed_point_is_stable_under_one_more_solve(small_run):
    scn, g, geom, phi0, phi1, res = small_run
    again = nl.iterate(geom, scn.gas, g, phi0, phi1, m_max=1, tol_h1=1.0, start=res.phi)
    assert again.trace.diff_h1[0] <= 1e-12


def test_lift_carries_the_initial_data(small_run):
    scn, g, geom, phi0, phi1, res = small_run
    assert np.array_equal(res.Phi[0], phi0 + res.phi[0])
    assert not np.any(res.phi[0])
    assert np.allclose(res.psi[0], phi0)


def test_frozen_forcing_matches_direct_stencils(small_run):
    scn, g, geom, phi0, phi1, _ = small_run
    psi_ext = nl.lift(build_jet(phi0, phi1, geom, scn.gas, g.h), g)
    fr = nl.assemble_frozen(geom, scn.gas, g, np.zeros(g.shape), psi_ext)
    p, n = fr.problem, 3
    psi = psi_ext[1:-1]
    # recompute -L_h psi at one level from the building blocks
    U = [ls.padded(psi_ext[n + k], p.ratio) for k in range(3)]
    dtt = (psi_ext[n + 2] - 2 * psi_ext[n + 1] + psi_ext[n]) / g.dt**2
    Lpsi = dtt + ls.mixed_time(p, n, U[2] - U[0], g.h) / g.dt + ls.spatial_operator(p, n, U[1], g.h)
    D0, D1, D2 = nl.space_time_gradient(psi, p.ratio, g, before=psi_ext[0])
    low = fr.lower[n, ..., 1] * D1[n] + fr.lower[n, ..., 2] * D2[n]
    assert np.allclose(p.f[n], -Lpsi - low, rtol=0, atol=1e-14)


def test_frozen_deviation_scales_with_amplitude():
    devs = []
    for amp in (1e-3, 2e-3):
        scn = _scenario(amplitude=amp, eps=0.0)
        g, geom, phi0, phi1 = nl.prepare(scn)
        psi_ext = nl.lift(build_jet(phi0, phi1, geom, scn.gas, g.h), g)
        devs.append(nl.assemble_frozen(geom, scn.gas, g, np.zeros(g.shape), psi_ext).problem.delta)
    assert devs[1] / devs[0] == pytest.approx(2.0, rel=0.05)


def test_no_convergence_carries_trace():
    scn = _scenario()
    g, geom, phi0, phi1 = nl.prepare(scn)
    with pytest.raises(NoConvergence) as info:
        nl.iterate(geom, scn.gas, g, phi0, phi1, m_max=2, tol_h1=1e-30)
    assert len(info.value.trace.diff_h1) == 2


def test_linear_residual_vanishes_on_exact_wave():
    g = ls.Grid.build(1 / 32, 0.5, 1.0, 1.0)
    _, _, exact = ls.cosine_oracle(g, (1, 1))
    # np.gradient truncation only
    assert nl.linear_residual(exact, 1.0, g) <= 0.05


def test_corner_gradient_of_neumann_mode_is_zero():
    g = ls.Grid.build(0.1, 0.5, 1.0, 1.0)
    _, _, exact = ls.cosine_oracle(g, (1, 1))
    assert nl.corner_gradient(exact, np.zeros(g.ny), g.h) == 0.0
