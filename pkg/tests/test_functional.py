import math

import numpy as np
import pytest

from behavdist.core import DiscountSpec, Model, PseudometricTable, ThetaPolynomial, kernel_at, obs_metric
from behavdist.functional import (
    PairObjective,
    SupStrategy,
    apply_functional,
    discounted_transport,
    evaluate_functional,
    functional_jacobian,
    golden_section_max,
    sup_over_time,
)
from behavdist.models import toy_model
from oracles import random_model, random_table_above, transport_oracle


def test_first_step_on_toy_matches_hand_calculation():
    # x vs y from the observable metric: theta (1 - theta)(1 - r), maximal at theta = 1/2
    for r in (0.2, 0.5, 0.8):
        model = toy_model(r)
        disc = DiscountSpec.default_for(model)
        m = obs_metric(model)
        res = sup_over_time(model, disc, m, 1, 2)
        assert res.value == pytest.approx((1 - r) / 4, abs=1e-12)
        assert res.argmax_theta == pytest.approx(0.5, abs=1e-6)


def test_constant_observable_gives_zero():
    model = toy_model(0.5)
    disc = DiscountSpec.default_for(model)
    out = apply_functional(model, disc, PseudometricTable.zeros(5))
    assert np.all(out.entries == 0.0)


def test_same_state_is_zero(toy05):
    model, disc = toy05
    assert sup_over_time(model, disc, obs_metric(model), 3, 3).value == 0.0


def test_reported_value_is_attained_and_beats_a_coarse_grid(rng):
    strat = SupStrategy()
    coarse = np.linspace(0.0, 1.0, 129)[1:]  # a subset of the default grid
    for _ in range(10):
        model = random_model(rng, int(rng.integers(2, 5)))
        disc = DiscountSpec(float(rng.uniform(0.2, 0.95)), model.rate)
        m = random_table_above(rng, obs_metric(model))
        for x, y in m.pairs():
            res = sup_over_time(model, disc, m, x, y, strat)
            th = res.argmax_theta
            at_arg = th**disc.beta * transport_oracle(
                m.entries, kernel_at(model, x, th), kernel_at(model, y, th)
            )
            assert res.value == pytest.approx(min(at_arg, 1.0), abs=1e-9)
            grid_best = max(
                t**disc.beta
                * transport_oracle(m.entries, kernel_at(model, x, t), kernel_at(model, y, t))
                for t in coarse
            )
            assert res.value >= grid_best - 1e-9


def test_vectorised_objective_agrees_with_simplex(rng):
    model = random_model(rng, 5, degree=3)
    disc = DiscountSpec(0.6, model.rate)
    m = random_table_above(rng, obs_metric(model))
    f = PairObjective(model, disc, m, 0, 3)
    thetas = np.linspace(0.01, 1.0, 37)
    ref = [discounted_transport(model, disc, m, 0, 3, t) for t in thetas]
    assert np.allclose(f(thetas), ref, atol=1e-12)


def test_functional_is_expansive_and_monotone(rng):
    for _ in range(10):
        model = random_model(rng, int(rng.integers(2, 5)))
        disc = DiscountSpec(float(rng.uniform(0.2, 0.95)), model.rate)
        m1 = random_table_above(rng, obs_metric(model))
        m2 = random_table_above(rng, m1)
        f1, f2 = apply_functional(model, disc, m1), apply_functional(model, disc, m2)
        assert np.all(f1.entries >= m1.entries - 1e-9)
        assert np.all(f2.entries >= f1.entries - 1e-8)


def test_discrete_step_mode_uses_one_transition():
    half = ThetaPolynomial((0.5,))
    one = ThetaPolynomial((1.0,))
    kernel = (((0, half), (1, half)), ((1, one),), ((2, one),))
    model = Model(("a", "b", "c"), np.array([1.0, 0.0, 0.0]), 1.0, kernel, identity_at_zero=False)
    disc = DiscountSpec.default_for(model)
    strat = SupStrategy("discrete_step", fixed_theta=math.exp(-1.0))
    m = obs_metric(model)
    out = apply_functional(model, disc, m, strat)
    # a -> {a, b} half/half against the point mass on c: W = 0.5 * |1 - 0| = 0.5
    assert out[0, 2] == pytest.approx(math.exp(-1.0) * 0.5)
    assert out[1, 2] == 0.0


def test_strategy_validation():
    with pytest.raises(ValueError):
        SupStrategy("nope")
    with pytest.raises(ValueError):
        SupStrategy("discrete_step")
    with pytest.raises(ValueError):
        SupStrategy(grid_points=1)
    g = SupStrategy(grid_points=5).grid()
    assert g[0] == 1e-12 and g[-1] == 1.0


def test_golden_section_finds_interior_maximum():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, 80)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert golden_section_max(lambda t: t, 0.0, 1.0, 0) == (1.0, 1.0)


def test_jacobian_matches_finite_differences(rng):
    model = random_model(rng, 4)
    disc = DiscountSpec(0.7, model.rate)
    m = random_table_above(rng, obs_metric(model))
    res = evaluate_functional(model, disc, m)
    J = functional_jacobian(model, disc, m, res.argmax_theta)
    pairs = m.pairs()
    eps = 1e-7
    for k, (x, y) in enumerate(pairs):
        th = float(res.argmax_theta[x, y])
        base = discounted_transport(model, disc, m, x, y, th)
        for q, (i, j) in enumerate(pairs):
            bumped = m.entries.copy()
            bumped[i, j] += eps
            bumped[j, i] += eps
            up = th**disc.beta * transport_oracle(bumped, kernel_at(model, x, th), kernel_at(model, y, th))
            bumped[i, j] -= 2 * eps
            bumped[j, i] -= 2 * eps
            down = th**disc.beta * transport_oracle(bumped, kernel_at(model, x, th), kernel_at(model, y, th))
            # one element of the generalised gradient lies between the one-sided slopes
            lo, hi = sorted(((base - down) / eps, (up - base) / eps))
            if base < 1.0:
                assert lo - 1e-4 <= J[k, q] <= hi + 1e-4
