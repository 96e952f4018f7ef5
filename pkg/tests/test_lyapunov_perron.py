import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skmanifold.lyapunov_perron import (
    LPConfig,
    LPConvergenceError,
    ManifoldSample,
    auto_T_back,
    base_grid,
    cell_node,
    graph_lipschitz_estimate,
    lp_solve_heat,
    lp_solve_wave,
    manifold_distance,
    manifold_point_heat,
    matched_wave_base,
)
from skmanifold.ou import build_path
from skmanifold.spectral import Nonlinearity, QSpectrum, apply_nonlinearity
from skmanifold.wave_operator import gap_check, low_coordinates, norm_E


@pytest.fixture(scope="module")
def path():
    return build_path(42, QSpectrum.power_law(16), 1e-3, -11.0, 0.5, nu=1e-4)


@given(st.integers(-10_000, 10_000), st.sampled_from([2, 4, 8]))
def test_cell_node_contains_fine_step(g, m):
    mid = (g + 0.5) / m
    assert abs(mid - cell_node(g, m)) <= 0.5


def test_base_grid():
    g = base_grid(2, 1.0, 5)
    assert g.shape == (13, 2)
    assert np.all(np.linalg.norm(g, axis=1) <= 1.0 + 1e-12)
    g3 = base_grid(3, 0.5, 3)
    assert g3.shape[1] == 3 and np.all(g3[:, 2] == 0.0)


def test_auto_T_back():
    r = gap_check(2, L_f=0.5)
    f = Nonlinearity.sine(0.5)
    assert auto_T_back(r, f, 1e-10) == pytest.approx(math.log(10 * 0.5 * math.sqrt(math.pi) / 1e-10) / 2.5)


def test_graph_lipschitz_estimate():
    bases = base_grid(2, 1.0, 3)
    sols = [SimpleNamespace(graph_value=np.r_[0.0, 0.0, 0.7 * b[0] - 0.2 * b[1]]) for b in bases]
    est = graph_lipschitz_estimate(ManifoldSample(bases, sols, 0, 1.0))
    # pair slopes of a linear map never exceed its norm and reach 0.7 along the first axis
    assert 0.7 - 1e-12 <= est <= math.hypot(0.7, 0.2)
    with pytest.raises(ValueError):
        ManifoldSample(np.array([[2.0, 0.0]]), sols[:1], 0, 1.0)


def test_linear_flow_gives_flat_graph(path):
    sol = lp_solve_heat([0.3, -0.1], path, Nonlinearity.zero(), LPConfig(T_back=3.0))
    np.testing.assert_array_equal(sol.graph_value, 0.0)
    np.testing.assert_allclose(sol.point[:2], [0.3, -0.1])
    # the backward trajectory is the exact low-mode decay
    t = sol.trajectory.times
    np.testing.assert_allclose(sol.trajectory.u[:, 0], 0.3 * np.exp(-t), rtol=1e-12)


def test_heat_solver_contracts(path):
    f = Nonlinearity.sine(0.5)
    sol = lp_solve_heat([0.3, 0.0], path, f, LPConfig())
    assert sol.final_residual <= 1e-10
    assert sol.contraction_estimate <= sol.gap.gap_value + 0.1
    assert sol.weighted_norm <= sol.tempered_bound
    assert np.linalg.norm(sol.graph_value) > 0
    u0, u_t = manifold_point_heat(sol, path, f)
    expected = -np.arange(1, 17) ** 2 * u0 + apply_nonlinearity(u0, path.at(0.0), f)
    np.testing.assert_allclose(u_t, expected)


def test_wave_solver_contracts(path):
    f = Nonlinearity.sine(0.5)
    sol = lp_solve_wave([0.3, 0.0], path, 1e-4, f, LPConfig())
    assert sol.final_residual <= 1e-10
    assert sol.contraction_estimate <= sol.gap.gap_value + 0.1
    assert sol.weighted_norm <= sol.tempered_bound
    np.testing.assert_allclose(low_coordinates(sol.point)[0], [0.3, 0.0], atol=1e-12)


def test_solver_errors(path):
    f = Nonlinearity.sine(1.0)
    with pytest.raises(ValueError):
        lp_solve_heat([0.1], path, f, LPConfig(N=1))
    with pytest.raises(LPConvergenceError):
        lp_solve_heat([0.3, 0.0], path, Nonlinearity.sine(0.5), LPConfig(max_iters=2, T_back=2.0))
    with pytest.raises(ValueError):
        lp_solve_wave([0.3, 0.0], path, 0.05, Nonlinearity.sine(0.5), LPConfig())
    with pytest.raises(ValueError):
        LPConfig(substeps=3)


def test_matched_base():
    u0 = np.array([0.2, -0.1, 0.05, 0.0])
    u_t = np.array([1.0, 0.5, 0.0, 0.0])
    U, xi = matched_wave_base(u0, u_t, 1e-3, 2)
    np.testing.assert_allclose(U.v, 0.5 * u0 + 1e-3 * u_t)
    assert xi.shape == (2,) and norm_E(U) > 0


def test_matched_distance_refinement():
    nu = 1e-3
    p = build_path(42, QSpectrum.power_law(16), 1e-3, -22.0, 0.0, nu=nu)
    f = Nonlinearity.sine(0.5)
    cfg = LPConfig()
    d = manifold_distance([0.3, 0.0], p, nu, f, cfg)
    T = max(d["heat"].T_back, d["wave"].T_back)
    ref = manifold_distance([0.3, 0.0], p, nu, f, cfg.refined(T))
    assert d["dist_E"] == pytest.approx(ref["dist_E"], rel=0.1)
    assert d["dist_L2"] == pytest.approx(ref["dist_L2"], rel=0.1)
    assert 0 < d["dist_L2"] < 1e-3
