import numpy as np
import pytest

from aggdyn.dynamics import SimParams, Trajectory, simulate, step
from aggdyn.equilibrium import (classify_equilibrium, kkt_residual, lagrangian_value,
                                lyapunov_report, lyapunov_value)
from aggdyn.errors import DimensionMismatchError
from aggdyn.fixtures import G1_GAE, G1_GNE, G2_EQ, random_certified_game
from aggdyn.game import cost_value
from aggdyn.state import SystemState


def test_g2_kkt_zero(g2):
    assert kkt_residual(g2, G2_EQ).norm <= 1e-12


def test_g1_gae_point(g1):
    assert kkt_residual(g1, G1_GAE, "gae").norm <= 1e-12
    r = kkt_residual(g1, G1_GAE, "gne")
    assert r.norm == pytest.approx(np.hypot(1 / 12, 7 / 12), rel=1e-12)


def test_constructed_interior_point_has_zero_residual(g1):
    # x_i = d_i - C sigma with sigma = avg(x), m = 0, interior
    assert kkt_residual(g1, SystemState([1 / 3, 7 / 3], [4 / 3], [])).norm <= 1e-15


def test_residual_components(g2):
    r = kkt_residual(g2, SystemState([2.0, 1.0], [0.0], [-0.5]))
    assert r.primal_feas == pytest.approx(1.0)
    assert r.dual_feas == pytest.approx(0.5)
    assert r.complementarity == pytest.approx(0.5)
    assert r.consensus == pytest.approx(1.5)
    assert all(v >= 0 for v in r.stationarity)
    d = r.to_dict()
    assert d["norm"] == pytest.approx(r.norm)


def test_dimension_mismatch(g2):
    with pytest.raises(DimensionMismatchError):
        kkt_residual(g2, SystemState([1.0], [1.0], [1.0]))


def test_lagrangian(g2):
    assert lagrangian_value(g2, 0, [1.0, 1.0], [1.0]) == pytest.approx(-1.5)
    x = np.array([0.3, 1.2])
    assert lagrangian_value(g2, 1, x, [0.0]) == pytest.approx(cost_value(g2, 1, x[1:], g2.average(x)))
    assert lagrangian_value(g2, 0, [0.5, 1.5], [3.0]) == lagrangian_value(g2, 0, [0.5, 1.5], [9.0])
    with pytest.raises(IndexError):
        lagrangian_value(g2, 2, x, [0.0])


def test_classification(g1, g2):
    a = classify_equilibrium(g1, G1_GAE, 1e-8)
    assert a.is_vgae and not a.is_vgne
    b = classify_equilibrium(g1, G1_GNE, 1e-8)
    assert b.is_vgne and not b.is_vgae
    c = classify_equilibrium(g2, G2_EQ, 1e-8)
    assert c.is_vgae and c.is_vgne
    assert set(c.to_dict()) == {"is_vgae", "is_vgne", "gae_residual", "gne_residual", "tol"}
    with pytest.raises(ValueError):
        classify_equilibrium(g2, G2_EQ, 0.0)


def test_lyapunov_value_examples():
    ref = SystemState([0.0, 0.0], [0.0], [0.0])
    assert lyapunov_value(ref, ref) == 0.0
    s = SystemState([1.0, 0.0], [0.0], [2.0])
    assert lyapunov_value(s, ref) == pytest.approx(2.5)
    s3 = SystemState([3.0, 0.0], [0.0], [6.0])
    assert lyapunov_value(s3, ref) == pytest.approx(9 * 2.5)
    with pytest.raises(DimensionMismatchError):
        lyapunov_value(SystemState([1.0], [0.0], [0.0]), ref)


@pytest.mark.parametrize("fixture,ref", [("g1", G1_GAE), ("g2", G2_EQ)])
def test_lyapunov_nonincreasing(fixture, ref, request):
    game = request.getfixturevalue(fixture)
    s0 = SystemState(np.zeros(2), [0.0], np.zeros(game.constraint_dim))
    traj = simulate(game, s0, SimParams(step_h=0.01, t_max=100, record_every=1, stop_tol=1e-9))
    rep = lyapunov_report(game, traj, ref)
    assert rep.monotone_within <= 1e-6 * rep.values[0]
    assert traj.lyapunov_values == rep.values


def test_lyapunov_euler_increase_is_second_order(g2):
    # Starting at x = x* with lam != lam*, the skew dual block gives no decrease
    # and a projected-Euler step adds at most h^2 |F_ext(z) - F_ext(z*)|^2 / 2.
    from aggdyn.operators import extended_operator_stacked

    s0 = SystemState([1.0, 1.0], [1.0], [0.0])
    for h in (0.01, 0.005):
        traj = simulate(g2, s0, SimParams(step_h=h, t_max=50, record_every=1, stop_tol=1e-9))
        rep = lyapunov_report(g2, traj, G2_EQ)
        bound = 0.5 * h ** 2 * np.sum(extended_operator_stacked(g2, s0.stacked()) ** 2)
        assert 0 < rep.monotone_within <= bound * (1 + 1e-9)


def test_lyapunov_constant_and_reversed(g2):
    const = Trajectory([G2_EQ] * 3, [0.0] * 3, "tol_reached", "gae", 0.01)
    rep = lyapunov_report(g2, const, G2_EQ)
    assert rep.values == [0.0] * 3 and rep.max_increase == 0.0
    traj = simulate(g2, params=SimParams(t_max=30, stop_tol=1e-12))
    rev = Trajectory(traj.states[::-1], traj.kkt_norms[::-1], "t_max", "gae", 0.01)
    fwd = lyapunov_report(g2, traj, G2_EQ)
    back = lyapunov_report(g2, rev, G2_EQ)
    assert back.monotone_within == pytest.approx(-np.diff(fwd.values).min())
    assert back.monotone_within > 0


def test_lyapunov_rejects_non_equilibrium(g2):
    traj = Trajectory([G2_EQ], [0.0], "tol_reached", "gae", 0.01)
    with pytest.raises(ValueError):
        lyapunov_report(g2, traj, SystemState([0.0, 0.0], [0.0], [0.0]))


@pytest.mark.parametrize("seed", range(5))
def test_small_residual_implies_fixed_point(seed):
    from aggdyn.oracle import OracleParams, solve_vi

    game = random_certified_game(seed)
    s, _ = solve_vi(game, "gae", OracleParams(tol=1e-13, max_iters=500_000))
    r = kkt_residual(game, s).norm
    assert r <= 1e-11
    moved = np.linalg.norm(step(game, s, 1.0).stacked() - s.stacked())
    assert moved <= max(1e-10, 10 * r) * (1 + np.linalg.norm(s.stacked()))


@pytest.mark.parametrize("fixture", ["g1", "g2"])
def test_gae_gne_separation(fixture, request):
    game = request.getfixturevalue(fixture)
    a = simulate(game, params=SimParams(stop_tol=1e-8)).final
    b = simulate(game, params=SimParams(stop_tol=1e-8, mode="gne")).final
    d = np.linalg.norm(a.x - b.x)
    if fixture == "g1":
        assert d >= 0.01
    else:
        assert d <= 1e-6
    for s in (a, b):
        if s.lam.size:
            assert abs(s.lam @ game.coupling_value(s.x)) <= 1e-7
