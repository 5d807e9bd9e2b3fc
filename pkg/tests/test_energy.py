import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corner_flow import energy as en
from corner_flow import linear_solver as ls
from corner_flow.errors import NotHyperbolic, OrderUnavailable

RAT = np.diag([1.0, -1.0, -1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_h0_is_coercive_near_background(xi, d1, d2):
    Q = en.select_multiplier(-1.0, -1.0)
    r = RAT + np.array([[0, d1, d2], [d1, d2, d1], [d2, d1, -d1]])
    xi = np.array(xi)
    bound = Q.positivity_constant(0.05)
    assert bound > 0
    assert en.h0(Q, r, xi) >= bound * xi @ xi - 1e-12


def test_h0_for_background_is_the_energy_density():
    Q = en.select_multiplier(-1.0, -1.0)
    xi = np.array([0.3, -1.2, 0.7])
    assert en.h0(Q, RAT, xi) == pytest.approx(xi @ xi)


def test_h1_vanishes_when_r01_and_q1_vanish():
    # with Q = (1, 0, 0) and r01 = 0 the flux through z1 = 0 is carried by xi1 alone
    Q = en.select_multiplier(-1.0, -1.0)
    xi = np.array([0.4, 0.0, 0.9])
    assert en.h1(Q, RAT, xi) == 0.0


def test_multiplier_minors():
    Q = en.MultiplierQ(1.0, 0.2, -0.1, -1.0, -2.0)
    assert all(m > 0 for m in Q.minors)
    assert np.all(np.linalg.eigvalsh(Q.matrix) > 0)
    with pytest.raises(NotHyperbolic):
        en.MultiplierQ(1.0, 2.0, 0.0)
    with pytest.raises(NotHyperbolic):
        en.select_multiplier(1.0, -1.0)


def test_multi_indices_count():
    for k in range(5):
        assert len(en.multi_indices(k)) == (k + 1) * (k + 2) // 2


def test_weighted_sq_against_closed_form():
    g = ls.Grid.build(0.05, 1.0, 1.0, 1.0, cfl=0.25)
    eta = 3.0
    u = np.ones(g.shape)
    exact = (1 - np.exp(-2 * eta)) / (2 * eta)
    assert en.weighted_sq(u, g, eta) == pytest.approx(exact, rel=2 * (eta * g.dt) ** 2)


def test_norm_relation_constant_field():
    g = ls.Grid.build(0.1, 0.5, 1.0, 1.0)
    lhs, rhs = en.norm_relation(np.ones(g.shape), g, 2.0, 1)
    # d0 of e^{-eta z0} adds eta^2 times the L2 part
    assert lhs == pytest.approx(5.0 * rhs, rel=2e-2)


def test_estimate_on_a_solution():
    g = ls.Grid.build(1 / 16, 0.5, 1.0, 1.0)
    phi0, phi1, _ = ls.cosine_oracle(g, (1, 1))
    p = ls.LinearIBVP.background_problem(g, phi0=phi0, phi1=phi1)
    sol = ls.solve(p, g)
    reps = en.weighted_norms(sol, p, g, max_order=2, eta=[4.0, 8.0, 16.0])
    for r in reps:
        assert all(np.diff(r.lhs) >= 0) and all(x > 0 for x in r.rhs)
        assert r.to_csv().startswith("eta,order")
    diag = en.check_estimate(reps, window=slice(None))
    assert not diag.vacuous
    assert set(diag.constants) == {0, 1, 2}


def test_vacuous_estimate_for_zero_solution():
    g = ls.Grid.build(0.1, 0.5, 1.0, 1.0)
    p = ls.LinearIBVP.background_problem(g)
    reps = en.weighted_norms(np.zeros(g.shape), p, g, max_order=1, eta=[2.0, 4.0])
    diag = en.check_estimate(reps)
    assert diag.vacuous and diag.passed


def test_order_unavailable():
    g = ls.Grid.build(0.25, 0.5, 1.0, 1.0)
    p = ls.LinearIBVP.background_problem(g)
    with pytest.raises(OrderUnavailable):
        en.weighted_norms(np.zeros(g.shape), p, g, max_order=5)
    with pytest.raises(OrderUnavailable):
        en.weighted_norms(np.zeros(g.shape), p, g, max_order=4)
