import math

import mpmath
import numpy as np
import pytest

from behavdist.brownian import (
    ParticleDistribution,
    absorbed_bm_kernel,
    bm_delta1,
    gbm_lower_bound,
    hitting_cdf,
    simulate_absorbed,
)


def quad_hitting_cdf(x, t):
    mpmath.mp.dps = 30
    lo = mpmath.mpf(x) / mpmath.sqrt(t)
    return float(mpmath.sqrt(2 / mpmath.pi) * mpmath.quad(lambda s: mpmath.exp(-s * s / 2), [lo, mpmath.inf]))


@pytest.mark.parametrize("x,t", [(1.0, 4.0), (0.3, 0.1), (2.0, 0.5), (0.05, 10.0), (1.0, 13.3)])
def test_hitting_cdf_against_quadrature(x, t):
    assert hitting_cdf(x, t) == pytest.approx(quad_hitting_cdf(x, t), abs=1e-10)


def test_hitting_cdf_edges():
    assert hitting_cdf(0.0, 1.0) == 1.0
    assert hitting_cdf(1.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        hitting_cdf(-1.0, 1.0)


def test_particle_distribution_validation():
    ParticleDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.5]), "monte_carlo", 0, 2)
    with pytest.raises(ValueError):
        ParticleDistribution(np.array([0.0, 1.5]), np.array([0.5, 0.5]), "monte_carlo")
    with pytest.raises(ValueError):
        ParticleDistribution(np.array([0.0]), np.array([0.5]), "monte_carlo")
    d = ParticleDistribution.dirac(0.3)
    assert d.mean() == 0.3 and d.standard_error() == 0.0


@pytest.mark.parametrize("x,t", [(0.25, 0.2), (0.5, 1.0), (0.8, 0.05)])
def test_absorbed_motion_is_a_martingale(x, t):
    p = absorbed_bm_kernel(x, t, 40_000, seed=3)
    assert abs(p.mean() - x) <= 3 * p.standard_error()
    assert np.all((p.positions >= 0) & (p.positions <= 1))


def test_short_time_absorption_matches_single_barrier():
    # far from the upper barrier, absorption at 0 is the one-sided hitting law
    x, t, n = 0.1, 0.01, 100_000
    p = absorbed_bm_kernel(x, t, n, seed=11, step=1e-4)
    want = hitting_cdf(x, t)
    se = math.sqrt(want * (1 - want) / n)
    assert abs(p.mass_at(0.0) - want) <= 4 * se


def test_long_time_exit_probabilities():
    p = absorbed_bm_kernel(0.3, 30.0, 20_000, seed=5)
    assert p.mass_at(0.0) + p.mass_at(1.0) == pytest.approx(1.0)
    se = math.sqrt(0.3 * 0.7 / 20_000)
    assert abs(p.mass_at(1.0) - 0.3) <= 4 * se


def test_snapshots_share_paths_and_boundaries_are_fixed():
    snaps = simulate_absorbed(0.5, [0.0, 0.5, 1.0], 5_000, seed=1)
    assert snaps[0].mean() == pytest.approx(0.5, abs=1e-12)
    assert snaps[2].mass_at(0.0) >= snaps[1].mass_at(0.0)
    assert all(s.source == "exact_atom" for s in simulate_absorbed(1.0, [0.0, 2.0], 10, 0))


@pytest.mark.parametrize("x", [0.25, 0.5, 0.75])
def test_distance_from_zero(x):
    res = bm_delta1(0.0, x, 0.9, n_samples=20_000, seed=42)
    # the sup over noisy terms may pick a t > 0 term, but only within its error
    assert abs(res.value - x) <= 3 * res.standard_error + 1e-15
    assert res.terms[0] == (0.0, x, 0.0)
    for t, v, se in res.terms:
        assert abs(v - 0.9**t * x) <= 3 * se + 1e-15


def test_equal_states_and_determinism():
    assert bm_delta1(0.3, 0.3, 0.9, n_samples=100).value == 0.0
    a = bm_delta1(0.2, 0.7, 0.9, n_samples=2_000, seed=9).to_dict()
    b = bm_delta1(0.2, 0.7, 0.9, n_samples=2_000, seed=9).to_dict()
    assert a == b
    with pytest.raises(ValueError):
        bm_delta1(0.2, 1.2, 0.9)
    with pytest.raises(ValueError):
        bm_delta1(0.2, 0.3, 1.0)


def test_geometric_lower_bound():
    x = math.exp(-1.0)
    bound, t_star = gbm_lower_bound(x, 0.99)
    assert bound > x + 0.1
    assert bound >= 0.99**4 * hitting_cdf(1.0, 4.0)
    assert 5.0 < t_star < 30.0
    assert gbm_lower_bound(1.0, 0.99) == (1.0, 0.0)
