import numpy as np
import pytest
from hypothesis import given, strategies as st

from logitmfg.errors import CflViolation, NonnegativityLost, NotConverged, ShapeMismatch, UndefinedDeformedExp
from logitmfg.gld import (GldConfig, gld_step, gld_transition_kernel, solve_gld_stationary,
                          stationarity_defect)
from logitmfg.grid import PopulationSpec, init_density, make_grid
from logitmfg.tsallis import TsallisParams
from logitmfg.utility import FishingParams, constant_utility, eval_utility_grid, fishing_utility

from conftest import classical_logit_kernel, naive_transport

FISH = TsallisParams(0.8, 0.01)


def test_kernel_constant_utility_is_one():
    g = make_grid(6, 1, 1.0)
    assert np.allclose(gld_transition_kernel(np.full(6, 0.3), FISH, g), 1.0, atol=0)


def test_kernel_three_cells_classical():
    eta = 0.2
    g = make_grid(3, 1, 1.0)
    K = gld_transition_kernel(np.array([0.0, eta, 2 * eta]), TsallisParams(1.0, eta), g)
    col = np.array([1, np.e, np.e**2]) / ((1 + np.e + np.e**2) / 3)
    for l in range(3):
        assert np.allclose(K[:, l], col, rtol=1e-14)


@given(seed=st.integers(0, 1000), q=st.sampled_from([0.5, 0.8, 1.0, 1.2]))
def test_kernel_columns_normalized(seed, q):
    g = make_grid(10, 1, 1.0)
    v = np.random.default_rng(seed).uniform(0, 0.01, 10)
    K = gld_transition_kernel(v, TsallisParams(q, 0.05), g)
    assert np.allclose(K.sum(axis=0) * g.dx, 1.0, atol=1e-13)
    assert np.all(K.sum(axis=0) >= 0)


def test_kernel_domain_error():
    g = make_grid(4, 1, 1.0)
    with pytest.raises(UndefinedDeformedExp):
        gld_transition_kernel(np.array([0, 0, 0, 1.0]), TsallisParams(1.5, 0.01), g)
    with pytest.raises(ShapeMismatch):
        gld_transition_kernel(np.zeros(3), FISH, g)


def test_step_constant_uniform_fixed_point():
    g = make_grid(8, 100, 1.0)
    pops = PopulationSpec((0.7, 0.3))
    mu = init_density(g, pops)
    out = gld_step(mu, np.full_like(mu, 0.4), FISH, g, pops)
    assert np.allclose(out, mu, atol=1e-16)


def test_step_matches_loop_oracle_fishing():
    g = make_grid(8, 960, 240.0)
    pops = PopulationSpec((0.7, 0.3))
    mu = init_density(g, pops, "tilted")
    u = eval_utility_grid(fishing_utility(FishingParams()), mu, g)
    out = gld_step(mu, u, FISH, g, pops)
    for i in range(2):
        ref = naive_transport(mu[i], u[i], 0.8, 0.01, g.dt, g.dx)
        assert np.max(np.abs(out[i] - ref)) <= 1e-14


@given(seed=st.integers(0, 10_000))
def test_classical_step_matches_softmax_logit(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(10, 50, 1.0)
    eta = 0.1
    u = rng.uniform(-0.5, 0.5, 10)
    mu = rng.random(10)
    mu /= mu.sum()
    out = gld_step(mu, u, TsallisParams(1.0, eta), g)
    K = classical_logit_kernel(u, eta, g.dx)
    ref = mu + g.dt * (K @ mu * g.dx - (K.sum(axis=0) * g.dx) * mu)
    assert np.max(np.abs(out - ref)) <= 1e-12


@given(seed=st.integers(0, 10_000), q=st.sampled_from([0.5, 0.8, 1.0, 1.1]))
def test_step_conserves_mass(seed, q):
    rng = np.random.default_rng(seed)
    g = make_grid(16, 10, 1.0)
    mu = rng.random((2, 16))
    mu /= mu.sum()
    u = rng.uniform(0, 0.002, (2, 16))
    out = gld_step(mu, u, TsallisParams(q, 0.05), g)
    assert np.allclose(out.sum(axis=1), mu.sum(axis=1), atol=1e-13, rtol=0)


def test_step_negativity_detected():
    g = make_grid(4, 1, 50.0)  # dt = 50
    mu = np.array([0.1, 0.2, 0.3, 0.4])
    with pytest.raises(NonnegativityLost):
        gld_step(mu, np.array([0.0, 0.0, 0.0, 1.0]), TsallisParams(1.0, 0.1), g)


def test_constant_utility_reaches_uniform():
    g = make_grid(20, 200, 10.0)
    pops = PopulationSpec((0.6, 0.4))
    rng = np.random.default_rng(5)
    mu0 = rng.random((2, 20))
    mu0 *= pops.as_array()[:, None] / mu0.sum(axis=1, keepdims=True)
    cfg = GldConfig(FISH, g, pops, constant_utility(0.2, 2))
    res = solve_gld_stationary(cfg, mu0)
    assert np.max(np.abs(res.density - pops.as_array()[:, None])) < 1e-8


def test_stationary_fishing_small_and_defect():
    g = make_grid(30, 30 * 120, 240.0)
    pops = PopulationSpec((0.7, 0.3))
    model = fishing_utility(FishingParams())
    cfg = GldConfig(FISH, g, pops, model, stride=50)
    res = solve_gld_stationary(cfg, init_density(g, pops, "tilted"))
    assert res.converged and res.residual < 1e-10
    assert np.allclose(res.mu.sum(axis=1), [0.7, 0.3], atol=1e-13)
    # inflow minus outflow vanishes at the stationary point (density units per unit time)
    assert np.max(np.abs(stationarity_defect(res.mu, model, FISH, g))) < 10 * 1e-10 / g.dt
    traj = res.trajectory_array()
    assert traj.shape[0] == 2 and traj.shape[1] == len(res.times)
    assert res.times[-1] == pytest.approx(res.steps * g.dt)


def test_not_converged_carries_residual():
    g = make_grid(10, 10, 1.0)
    pops = PopulationSpec((0.7, 0.3))
    cfg = GldConfig(FISH, g, pops, fishing_utility(FishingParams()), max_steps=3)
    with pytest.raises(NotConverged) as ei:
        solve_gld_stationary(cfg, init_density(g, pops, "tilted"))
    assert ei.value.residual > 0 and ei.value.result.steps == 3


def test_strict_cfl_aborts_without_guarantee():
    g = make_grid(10, 10, 1.0)
    pops = PopulationSpec((0.7, 0.3))
    cfg = GldConfig(FISH, g, pops, fishing_utility(FishingParams()), strict_cfl=True)
    with pytest.raises(CflViolation):
        solve_gld_stationary(cfg, init_density(g, pops))


def test_config_validation():
    g = make_grid(10, 10, 1.0)
    pops = PopulationSpec((0.7, 0.3))
    with pytest.raises(ValueError):
        GldConfig(FISH, g, pops, fishing_utility(FishingParams()), stationary_tol=0.0)
    with pytest.raises(ValueError):
        GldConfig(FISH, g, pops, constant_utility(0.0, 1))
