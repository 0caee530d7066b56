import math

import numpy as np
import pytest

from lineage_lab.functional import GridPath, cost_profile
from lineage_lab.simulation import (
    Always,
    Never,
    Tube,
    Window,
    estimate_mean_count,
    initial_profile,
    simulate_spine,
)
from lineage_lab.utils.sentinel import NEG_INF


def test_spine_at_time_zero(constant_scenario, rng):
    spine = simulate_spine(constant_scenario, 100, 0.0, 0.3, rng)
    assert spine.path.times.size == 1
    assert spine.path.values[0] == 0.3
    assert spine.weight_exponent == 0.0


def test_spine_weight_is_exact_for_constant_growth(constant_scenario, rng):
    for _ in range(50):
        spine = simulate_spine(constant_scenario, 100, 0.7, 0.0, rng)
        assert spine.weight_exponent == pytest.approx(0.7, rel=1e-12)
        assert spine.path.t_end == pytest.approx(0.7)


def test_spine_jump_count_is_poisson(constant_scenario, rng):
    paths = [simulate_spine(constant_scenario, 100, 1.0, 0.0, rng).path for _ in range(10_000)]
    jumps = np.array([np.count_nonzero(np.diff(path.values)) for path in paths])
    expected = 0.5 * math.log(100)
    assert abs(jumps.mean() - expected) <= 3 * math.sqrt(expected / jumps.size)


def test_spine_weight_never_exceeds_growth_bound(valley_scenario, rng):
    bound = valley_scenario.bounds.r_bar
    for x0 in np.linspace(-3, 3, 200):
        spine = simulate_spine(valley_scenario, 100, 1.0, float(x0), rng)
        assert spine.weight_exponent <= bound * 1.0 + 1e-12


def test_spine_arguments(constant_scenario, rng):
    with pytest.raises(ValueError):
        simulate_spine(constant_scenario, 1, 1.0, 0.0, rng)
    with pytest.raises(ValueError):
        simulate_spine(constant_scenario, 100, -1.0, 0.0, rng)


def test_predicates():
    path = GridPath(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.4, 0.4]), "piecewise_constant")
    assert Always()(path)
    assert not Never()(path)
    assert Window(0.5, 0.2)(path)
    assert not Window(0.0, 0.2)(path)
    assert Tube(GridPath.constant(0.0, 0.0, 1.0), 0.5)(path)
    assert not Tube(GridPath.constant(0.0, 0.0, 1.0), 0.3)(path)
    assert Window(0.0, 0.5).spec == "window(x=0,delta=0.5)"
    with pytest.raises(ValueError):
        Window(0.0, 0.0)
    with pytest.raises(ValueError):
        Tube(GridPath.constant(0.0, 0.0, 1.0), -1.0)


def test_total_count_is_exact_for_constant_growth(constant_scenario, rng):
    result = estimate_mean_count(constant_scenario, 100, 1.0, Always(), 200, rng)
    expected = 100.0 * initial_profile(constant_scenario, 100).mass
    assert result.estimate == pytest.approx(expected, rel=1e-9)
    assert result.std_error == pytest.approx(0.0, abs=1e-6 * expected)
    assert result.log_estimate == pytest.approx(math.log(expected) / math.log(100))
    assert result.hits == 200
    assert not result.degenerate


def test_empty_predicate_is_degenerate(constant_scenario, rng):
    result = estimate_mean_count(constant_scenario, 100, 1.0, Never(), 10, rng)
    assert result.degenerate
    assert (result.estimate, result.std_error) == (0.0, 0.0)
    assert result.log_estimate is NEG_INF


def test_needs_two_spines(constant_scenario, rng):
    with pytest.raises(ValueError):
        estimate_mean_count(constant_scenario, 100, 1.0, Always(), 1, rng)


def test_stay_put_tube_matches_path_cost(constant_scenario, rng):
    flat = GridPath.constant(0.0, 0.0, 1.0)
    cost = cost_profile(constant_scenario, flat).terminal_cost
    result = estimate_mean_count(constant_scenario, 1000, 1.0, Tube(flat, 0.5), 2000, rng)
    assert cost == pytest.approx(2.0)
    assert result.log_estimate == pytest.approx(cost, abs=0.3)


@pytest.mark.slow
def test_far_side_of_valley_is_reached_without_state_constraint(valley_scenario, rng):
    # the initial population at x = 2 is below one individual, yet the expectation is not
    result = estimate_mean_count(valley_scenario, 100, 1.0, Window(2.0, 0.5), 10_000, rng)
    assert not result.degenerate
    assert -0.3 <= result.log_estimate <= 0.5


@pytest.mark.slow
def test_expectation_sees_far_side_of_valley_at_final_time(valley_scenario, rng):
    result = estimate_mean_count(valley_scenario, 1000, 1.5, Window(2.0, 0.3), 100_000, rng)
    assert not result.degenerate
    assert result.log_estimate >= 0.1
