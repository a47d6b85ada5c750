import numpy as np
import pytest

from logitmfg.config import RunConfig
from logitmfg.errors import IncompatibleResolution
from logitmfg.experiments import (DeltaSweepReport, compare_quantities, convergence_study,
                                  delta_sweep, loglog_fit, mass_fraction, mass_swap_ratio,
                                  normalized_shapes, scenario_sweep, stationary_density)

SMALL = RunConfig(n_x=12, n_t=2880, max_steps=200_000)


def test_self_comparison_is_zero():
    p = stationary_density(SMALL)
    errs = compare_quantities({"p1": p[0]}, {"p1": p[0]})
    assert errs["p1"] == (0.0, 0.0)


def test_convergence_report_shape_and_norm_order():
    rep = convergence_study(SMALL, "gld", (6, 12), 24, coarse_nt_per_cell=120)
    assert set(rep.quantities) == {"p1", "p2"}
    for m, qty, mx, av in rep.rows():
        assert 0 <= av <= mx
    # the resolution equal to the reference is not exact because its time step differs,
    # but the stationary state does not depend on the time step
    assert rep.errors[(12, "p1")][0] < rep.errors[(6, "p1")][0]
    with pytest.raises(IncompatibleResolution):
        convergence_study(SMALL, "gld", (5,), 12)


def test_loglog_fit_on_reference_distances():
    # least squares on the reference first-type distances
    s, _ = loglog_fit([1, 5, 10, 25, 50, 100], [1.68, 0.443, 0.231, 0.0949, 0.0478, 0.0240])
    assert s == pytest.approx(-0.9277, abs=1e-4)
    assert loglog_fit([1.0], [0.3]) is None


def test_single_delta_has_no_slope():
    rep = delta_sweep(SMALL, [2.0])
    assert rep.slope is None and rep.distances.shape == (1, 2)
    with pytest.raises(ValueError):
        DeltaSweepReport((2.0, 1.0), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        delta_sweep(SMALL, [0.0])


def test_delta_sweep_distance_decreases():
    rep = delta_sweep(SMALL, [1.0, 5.0, 10.0])  # dt = 1/12 stays below 1/(1 + delta)
    d = rep.distances[:, 0]
    assert d[0] > d[1] > d[2]
    assert rep.slope < 0


def test_mass_swap_ratio_helper():
    a = np.array([[4.0, 8.0, 0.0], [1.0, 2.0, 3.0]])
    b = np.array([[1.0, 2.0, 5.0], [4.0, 8.0, 12.0]])
    med, spread = mass_swap_ratio(a, b)
    assert med == (4.0, 0.25) and spread == (0.0, 0.0)


def test_fishing_legal_increase_pushes_type2_down():
    cfg = RunConfig(n_x=50, max_steps=1_000_000)
    rep = scenario_sweep(cfg, "m1", [0.5, 0.7, 0.9], "gld", mass_swap=False)
    x = cfg.grid().centers
    means = [float((p[1] * x).sum() / p[1].sum()) for p in rep.densities.values()]
    assert means[0] > means[1] > means[2]
    assert mass_fraction(rep.densities["m1=0.9"], x, hi=0.25)[1] >= 0.9


def test_helpers():
    d = np.array([[1.0, 3.0], [2.0, 2.0]])
    assert np.allclose(normalized_shapes(d, 0.5), [[0.5, 1.5], [1.0, 1.0]])
    assert np.allclose(mass_fraction(d, np.array([0.25, 0.75]), lo=0.5), [0.75, 0.5])
