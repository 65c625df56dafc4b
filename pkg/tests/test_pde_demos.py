import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from asdvar.convex_core import Box, Power, WholeSpace
from asdvar.evolution import FlowProblem, TimeGrid, continuum_gap, flow_lagrangian, time_boundary
from asdvar.linops import triplet_residual
from asdvar.pde_demos import (Grid1D, build_sbp_derivative, demo_heat_flow, demo_implicit_transport,
                              demo_obstacle_flow, demo_porous_media, demo_transport_stationary,
                              dirichlet_laplacian, heat_energy, hminus1_metric, spectral_heat)


# -- SBP operator ----------------------------------------------------------------


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128])
def test_sbp_identity_exact(n):
    g = Grid1D(n)
    sbp = build_sbp_derivative(g)
    assert sbp.sbp_residual() <= 1e-13
    assert np.allclose(sbp.D.A @ np.ones(n), 0.0, atol=1e-12)
    assert np.allclose(sbp.D.A @ g.x, 1.0, atol=1e-12)
    assert g.weights.sum() == pytest.approx(1.0)


def test_sbp_triplet_and_small_grid():
    sbp = build_sbp_derivative(Grid1D(8))
    assert triplet_residual(sbp.triplet()) <= 1e-12
    with pytest.raises(ValueError):
        build_sbp_derivative(Grid1D(2))


# -- stationary transport --------------------------------------------------------


def test_transport_linear_first_order():
    errs = []
    for n in (16, 32, 64):
        g = Grid1D(n)
        rep = demo_transport_stationary(g)
        assert rep.certified and rep.gap <= 1e-8
        assert rep.check_results["dirichlet_datum"] <= 1e-8
        err = np.abs(rep.minimizer - np.exp(-g.x)).max()
        assert err <= 2 * g.h
        errs.append(err)
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.6 <= r <= 2.4 for r in ratios)


def test_transport_zero_data():
    rep = demo_transport_stationary(Grid1D(9), u0=0.0)
    assert np.abs(rep.minimizer).max() <= 1e-12
    assert abs(rep.gap) <= 1e-10


@pytest.mark.parametrize("scheme,power", [("upwind", 1), ("midpoint", 2)])
def test_transport_cubic_vs_ivp(scheme, power):
    # -u' - u - u^3 = -2 with u(0) = 1/2 (u = 1 would be an equilibrium)
    g = Grid1D(33)
    rep = demo_transport_stationary(g, j=Power(4.0, 1.0, 1), f=-2.0, u0=0.5, scheme=scheme)
    ref = solve_ivp(lambda x, u: 2.0 - u - u ** 3, (0.0, 1.0), [0.5], t_eval=g.x, rtol=1e-12, atol=1e-12)
    assert rep.certified
    # observed 0.245 h (upwind) and 0.1415 h^2 (midpoint)
    assert np.abs(rep.minimizer - ref.y[0]).max() <= 0.3 * g.h ** power


def test_transport_rejects_bad_input():
    with pytest.raises(ValueError):
        demo_transport_stationary(Grid1D(9), a0=0.0)
    with pytest.raises(ValueError):
        demo_transport_stationary(Grid1D(9), scheme="spectral")


# -- implicit transport ----------------------------------------------------------


def test_implicit_transport():
    g = Grid1D(64)
    rep = demo_implicit_transport(g)
    assert rep.certified and rep.gap <= 1e-8
    assert rep.minimizer[0] == pytest.approx(0.0, abs=1e-10)
    assert np.abs(rep.minimizer - (np.exp(-g.x) - 1)).max() <= 2 * g.h
    assert rep.check_results["fenchel_density"] <= g.h


# -- heat / p-Laplacian ----------------------------------------------------------


@pytest.fixture(scope="module")
def eig17():
    g = Grid1D(17)
    lam, V = np.linalg.eigh(dirichlet_laplacian(g))
    return g, lam[0], V[:, 0] * np.sign(V[0, 0])


def test_heat_eigen_decay(eig17):
    g, lam1, v = eig17
    for N in (20, 40):
        tg = TimeGrid(0.5, N)
        path, rep = demo_heat_flow(g, 1, 0.0, v, tg)
        exact = np.array([np.exp(-lam1 * t) * v for t in tg.nodes])
        assert rep.certified
        # observed 6.6e-4 at dt=0.025 and 1.6e-4 at dt=0.0125
        assert np.abs(path.values - exact).max() <= tg.dt + g.h ** 2


def test_heat_zero_path():
    g = Grid1D(9)
    path, rep = demo_heat_flow(g, 1, 0.0, np.zeros(9), TimeGrid(0.5, 10))
    assert np.abs(path.values).max() <= 1e-12


def test_plaplacian_monotone_norm(eig17):
    g, _, v = eig17
    path, rep = demo_heat_flow(g, 3, 0.0, 0.5 * v, TimeGrid(0.2, 10))
    norms = np.linalg.norm(path.values, axis=1)
    assert rep.certified
    assert np.all(np.diff(norms) < 0)


def test_heat_rejects_small_p():
    with pytest.raises(ValueError):
        demo_heat_flow(Grid1D(9), 0.5, 0.0, np.zeros(9), TimeGrid(1.0, 4))


def test_heat_continuum_gap_refines():
    # the discrete gap is exactly zero, so refinement is measured on the continuum gap
    gaps = []
    for n, N in ((9, 10), (17, 20), (33, 40)):
        g = Grid1D(n)
        u0 = np.sin(np.pi * g.x)
        path, _ = demo_heat_flow(g, 1, 0.0, u0, TimeGrid(0.1, N))
        G = g.h * np.eye(n - 2)
        fp = FlowProblem(flow_lagrangian(heat_energy(g, 1), None, None, 0.0, G, dim=n - 2),
                         time_boundary(u0[1:-1], G), 0.0, G)
        gaps.append(continuum_gap(path, fp))
    assert all(a / b >= 1.4 for a, b in zip(gaps, gaps[1:]))


# -- porous media ----------------------------------------------------------------


def test_porous_linear_matches_spectral():
    g = Grid1D(17)
    tg = TimeGrid(0.1, 20)
    u0 = np.sin(np.pi * g.x)
    path, rep = demo_porous_media(g, 1, 0.0, u0, tg)
    e = path.values - spectral_heat(g, u0, tg).values
    G = hminus1_metric(g)
    dist = np.sqrt(np.einsum("ki,ij,kj->k", e, G, e)).max()
    assert rep.certified
    assert dist <= 3 * (tg.dt + g.h ** 2)


def test_porous_quadratic_vs_oracle():
    g = Grid1D(17)
    tg = TimeGrid(0.1, 10)
    path, rep = demo_porous_media(g, 2, 0.0, 0.5 * np.sin(np.pi * g.x), tg)
    assert rep.certified
    assert rep.check_results["oracle_distance"] <= tg.dt


def test_porous_zero_and_bad_m():
    g = Grid1D(9)
    path, _ = demo_porous_media(g, 2, 0.0, np.zeros(9), TimeGrid(0.1, 5))
    assert np.abs(path.values).max() <= 1e-12
    with pytest.raises(ValueError):
        demo_porous_media(g, 0.5, 0.0, np.zeros(9), TimeGrid(0.1, 5))


# -- obstacle flow ---------------------------------------------------------------


def test_obstacle_whole_space_is_linear_flow():
    A = np.array([[1.0, 0.5], [-0.5, 2.0]])
    tg = TimeGrid(1.0, 100)
    path, rep = demo_obstacle_flow(A, WholeSpace(2), None, [1.0, -1.0], tg)
    assert rep.certified
    assert np.abs(path.final - expm(-A) @ [1.0, -1.0]).max() <= tg.dt


def test_obstacle_sticks_at_lower_bound():
    tg = TimeGrid(3.0, 60)
    path, rep = demo_obstacle_flow(np.eye(1), Box(1.0, 2.0, 1), None, [2.0], tg)
    assert rep.certified
    assert rep.check_results["in_K"] <= 1e-8
    assert rep.check_results["vi_slack"] <= 3 * tg.dt
    # free decay 2 e^{-t} reaches 1 at t = ln 2
    late = path.grid.midpoints > np.log(2.0) + 0.2
    assert np.abs(path.midpoints[late, 0] - 1.0).max() <= 1e-8
    # nodes interpolate the cells and alternate around 1 (observed amplitude 7.0e-3)
    assert np.abs(path.values[1:][late, 0] - 1.0).max() <= tg.dt
    assert rep.check_results["oracle_distance"] <= 3 * tg.dt


def test_obstacle_leaves_boundary():
    tg = TimeGrid(0.5, 50)
    path, rep = demo_obstacle_flow(np.eye(1), Box(1.0, 2.0, 1), [3.0], [1.0], tg)
    assert rep.certified and rep.check_results["in_K"] <= 1e-8
    # x' = 3 - x from 1 stays inside (1, 2) up to t = 0.5
    exact = 3.0 - 2.0 * np.exp(-path.t)
    assert np.abs(path.values[:, 0] - exact).max() <= tg.dt
    assert path.final[0] > 1.5


def test_obstacle_rejects_outside_start():
    with pytest.raises(ValueError):
        demo_obstacle_flow(np.eye(1), Box(1.0, 2.0, 1), None, [0.0], TimeGrid(1.0, 4))
