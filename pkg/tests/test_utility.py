import numpy as np
import pytest
from hypothesis import given, strategies as st

from logitmfg.errors import EvaluationError, UnsupportedModel, UtilityBoundExceeded
from logitmfg.grid import PopulationSpec, init_density, make_grid
from logitmfg.utility import (FishingParams, TourismParams, UtilityModel, constant_utility,
                              eval_utility_grid, fishing_utility, ordered_sum, potential_value,
                              smooth_indicator, tourism_utility, utility_bound_L)

G20 = make_grid(20, 1, 1.0)


def _random_masses(rng, masses, n):
    w = rng.random((len(masses), n)) ** 4
    return w / w.sum(axis=1, keepdims=True) * np.asarray(masses)[:, None]


def test_ordered_sum():
    a = np.array([[1e16, 1.0, -1e16]])
    assert ordered_sum(a)[0] == ((1e16 + 1.0) - 1e16)
    assert ordered_sum(np.zeros((2, 0))).shape == (2,)


def test_constant_utility():
    m = constant_utility(0.5, 2)
    u = eval_utility_grid(m, init_density(G20, PopulationSpec((0.5, 0.5))), G20)
    assert np.all(u == 0.5) and m.nonnegative and utility_bound_L(m) == 0.5


def test_fishing_uniform_closed_form():
    # uniform masses: sum_l x_l mu_l = m_i / 2, so the mean arrival is 1/2
    m = fishing_utility(FishingParams())
    u = eval_utility_grid(m, init_density(G20, PopulationSpec((0.7, 0.3))), G20)
    x = G20.centers
    f2 = 1 + 0.1 * 0.7 / 0.3
    assert np.allclose(u[0], np.sqrt(x) - x, atol=1e-15)
    assert np.allclose(u[1], np.sqrt(x) - f2 * x, atol=1e-15)
    assert m.bound == pytest.approx(1 + 2 * f2)
    assert not m.potential_authoritative


def test_tourism_uniform_closed_form():
    m = tourism_utility(TourismParams())
    u = eval_utility_grid(m, init_density(G20, PopulationSpec((0.8, 0.2))), G20)
    x = G20.centers
    over = (x > 0.65).mean()  # 7 of 20 centers lie above the threshold
    assert over == 0.35
    ind = (x < 0.65).astype(float)
    assert np.allclose(u[0], ind / 1.35 - 0.01 * x, atol=1e-12)
    assert np.allclose(u[1], ind / 1.35 - 0.1 * x, atol=1e-12)
    assert m.regularity > 1e5


def test_smooth_indicator():
    assert smooth_indicator(0.65, 0.65, 1e-3) == 0.5
    assert smooth_indicator(0.0, 0.65, 1e-6) == 1.0
    with pytest.raises(ValueError):
        smooth_indicator(0.0, 0.65, 0.0)


@pytest.mark.parametrize("make,masses", [(lambda: fishing_utility(FishingParams()), (0.7, 0.3)),
                                         (lambda: fishing_utility(FishingParams(masses=(0.9, 0.1))), (0.9, 0.1)),
                                         (lambda: tourism_utility(TourismParams()), (0.8, 0.2)),
                                         (lambda: tourism_utility(TourismParams(epsilon=1.0)), (0.8, 0.2))])
def test_bound_holds_on_random_states(make, masses):
    rng = np.random.default_rng(7)
    m = make()
    batch = np.stack([_random_masses(rng, masses, G20.n_x) for _ in range(1000)])
    u = eval_utility_grid(m, batch, G20)  # raises UtilityBoundExceeded on violation
    assert u.shape == batch.shape
    assert np.abs(u).max() <= m.bound


def test_batched_equals_single():
    rng = np.random.default_rng(1)
    m = fishing_utility(FishingParams())
    batch = np.stack([_random_masses(rng, (0.7, 0.3), 20) for _ in range(5)])
    u = m.evaluate(batch, G20)
    for b in range(5):
        assert np.array_equal(u[b], m.evaluate(batch[b], G20))


def test_bound_violation_and_errors():
    m = UtilityModel(1, lambda x: x, lambda x, agg: 5.0 + 0 * x * agg[..., None], bound=1.0)
    mu = init_density(G20, PopulationSpec((1.0,)))
    with pytest.raises(UtilityBoundExceeded):
        eval_utility_grid(m, mu, G20)
    assert eval_utility_grid(m, mu, G20, check=False).max() == 5.0
    with pytest.raises(EvaluationError):
        m.evaluate(np.ones((2, 20)), G20)
    bad = UtilityModel(1, lambda x: x, lambda x, agg: np.log(-1.0 - x) + agg[..., None], bound=1.0)
    with pytest.raises(EvaluationError), np.errstate(invalid="ignore"):
        eval_utility_grid(bad, mu, G20)
    with pytest.raises(UnsupportedModel):
        potential_value(constant_utility(0.0), mu, G20)


@given(st.floats(0.1, 1.0))
def test_tourism_potential_gradient(eps):
    # the potential's first variation in mu_i matches U_i up to a per-type constant,
    # which is invisible under mass conservation
    m = tourism_utility(TourismParams(epsilon=eps))
    mu = init_density(G20, PopulationSpec((0.8, 0.2)))
    u = m.evaluate(mu, G20)
    h = 1e-6

    def fd(i, l):
        d = np.zeros_like(mu)
        d[i, l] = h
        return (potential_value(m, mu + d, G20) - potential_value(m, mu - d, G20)) / (2 * h)

    for i, (a, b) in ((0, (3, 15)), (1, (0, 19))):
        assert fd(i, a) - fd(i, b) == pytest.approx(u[i, a] - u[i, b], abs=1e-6)
