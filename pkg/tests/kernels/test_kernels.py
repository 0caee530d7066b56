"""Tests for the mutation kernels and their factory."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from lineage_lab.kernels import (
    GaussianKernel,
    KernelConvergenceError,
    KernelDomainError,
    KernelSaturationError,
    TabulatedKernel,
    TwoSidedExponentialKernel,
    create_mutation_kernel,
)


@pytest.fixture
def gaussian():
    return GaussianKernel(sigma=1.0)


def test_gaussian_matches_closed_form(gaussian):
    alpha = np.linspace(-5.0, 5.0, 1000)
    h, h_prime, h_second = gaussian.h_value(alpha)
    moment = np.exp(alpha**2 / 2)
    np.testing.assert_allclose(h, moment - 1.0, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(h_prime, alpha * moment, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(h_second, (1.0 + alpha**2) * moment, rtol=1e-10)


def test_gaussian_quadrature_agrees_with_closed_form(gaussian):
    for alpha in (0.0, 0.5, 1.0, 2.0):
        closed = gaussian.h_value(alpha)
        np.testing.assert_allclose(gaussian.quadrature_moments(alpha), closed, rtol=1e-8, atol=1e-12)


def test_h_value_scalar_and_origin(gaussian):
    h, h_prime, h_second = gaussian.h_value(0.0)
    assert h == 0.0
    assert h_prime == 0.0
    assert h_second == pytest.approx(1.0)
    assert isinstance(h, float)


def test_h_is_even_and_h_prime_odd(gaussian):
    alpha = np.linspace(0.0, 6.0, 101)
    h_pos, hp_pos, hs_pos = gaussian.h_value(alpha)
    h_neg, hp_neg, hs_neg = gaussian.h_value(-alpha)
    np.testing.assert_array_equal(h_pos, h_neg)
    np.testing.assert_array_equal(hp_pos, -hp_neg)
    np.testing.assert_array_equal(hs_pos, hs_neg)


def test_h_prime_inverse_round_trip(gaussian):
    alpha = np.linspace(-5.0, 5.0, 1000)
    _, h_prime, _ = gaussian.h_value(alpha)
    np.testing.assert_allclose(gaussian.h_prime_inverse(h_prime), alpha, atol=1e-8)
    assert gaussian.h_prime_inverse(0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-8.0, max_value=8.0, allow_nan=False))
def test_h_prime_inverse_inverts_h_prime(alpha):
    kernel = GaussianKernel(sigma=1.0)
    _, h_prime, _ = kernel.h_value(alpha)
    assert kernel.h_prime_inverse(h_prime) == pytest.approx(alpha, abs=1e-8)


def test_alpha_outside_domain_raises(gaussian):
    with pytest.raises(KernelDomainError):
        gaussian.h_value(25.0)
    with pytest.raises(KernelDomainError):
        gaussian.h_value(np.array([0.0, -21.0]))


def test_h_prime_inverse_saturates(gaussian):
    with pytest.raises(KernelSaturationError):
        gaussian.h_prime_inverse(1e100)


def test_h_prime_inverse_reports_bracket_on_failure():
    kernel = GaussianKernel(sigma=1.0, newton_max_iter=1)
    with pytest.raises(KernelConvergenceError) as info:
        kernel.h_prime_inverse(np.array([50.0]))
    lo, hi = info.value.bracket
    assert np.all(lo <= hi)


def test_lagrangian_matches_brute_force_legendre(gaussian):
    rng = np.random.default_rng(7)
    grid = np.arange(-10.0, 10.0 + 1e-9, 1e-4)
    h_grid = np.expm1(grid**2 / 2)
    for p, v in zip(rng.uniform(0.2, 2.0, 200), rng.uniform(-5.0, 5.0, 200)):
        brute = float(np.max(grid * v - p * h_grid))
        value, alpha_star = gaussian.lagrangian(p, v)
        assert value == pytest.approx(brute, abs=1e-5)
        assert alpha_star * v >= 0


def test_lagrangian_vanishes_at_rest_and_is_nonnegative(gaussian):
    value, alpha_star = gaussian.lagrangian(0.5, 0.0)
    assert value == 0.0
    assert alpha_star == 0.0
    values, _ = gaussian.lagrangian(np.full(50, 0.5), np.linspace(-4, 4, 50))
    assert np.all(values >= 0)


def test_fenchel_young_inequality(gaussian):
    rng = np.random.default_rng(11)
    n = 10_000
    p = rng.uniform(0.1, 2.0, n)
    v = rng.uniform(-5.0, 5.0, n)
    alpha = rng.uniform(-5.0, 5.0, n)
    l_value, _ = gaussian.lagrangian(p, v)
    h, _, _ = gaussian.h_value(alpha)
    excess = alpha * v - p * h - l_value
    scale = 1.0 + np.abs(alpha * v) + p * h + l_value
    assert np.all(excess <= 1e-12 * scale)


def test_lagrangian_requires_positive_rate(gaussian):
    with pytest.raises(ValueError):
        gaussian.lagrangian(0.0, 1.0)


def test_two_sided_exponential_moments():
    kernel = TwoSidedExponentialKernel(lam=4.0)
    for alpha in (0.5, 1.5, 3.0):
        def integrand(y):
            return np.expm1(alpha * y) * 2.0 * np.exp(-4.0 * abs(y))

        numeric = quad(integrand, -np.inf, 0.0, epsabs=1e-13)[0] + quad(integrand, 0.0, np.inf, epsabs=1e-13)[0]
        h, _, _ = kernel.h_value(alpha)
        assert h == pytest.approx(numeric, rel=1e-8)
    assert kernel.alpha_max == pytest.approx(3.8)


def test_two_sided_exponential_rejects_alpha_max_beyond_lambda():
    with pytest.raises(ValueError):
        TwoSidedExponentialKernel(lam=4.0, alpha_max=4.0)
    with pytest.raises(ValueError):
        TwoSidedExponentialKernel(lam=0.5)


def test_tabulated_gaussian_table_is_close_to_gaussian(gaussian):
    y = np.linspace(-8.0, 8.0, 801)
    table = list(zip(y, np.exp(-(y**2) / 2) / np.sqrt(2 * np.pi)))
    kernel = TabulatedKernel(table, alpha_max=5.0)
    assert kernel.truncated
    for alpha in (0.5, 1.0, 2.0):
        assert kernel.h_value(alpha)[0] == pytest.approx(gaussian.h_value(alpha)[0], rel=1e-3)
    samples = kernel.sample_jumps(np.random.default_rng(3), 20_000)
    assert abs(np.mean(samples)) < 0.05
    assert np.var(samples) == pytest.approx(1.0, rel=0.05)


def test_tabulated_kernel_is_symmetrized():
    kernel = TabulatedKernel([(-1.0, 0.2), (0.0, 1.0), (2.0, 0.0)], alpha_max=3.0)
    h_pos, hp_pos, _ = kernel.h_value(1.0)
    h_neg, hp_neg, _ = kernel.h_value(-1.0)
    assert h_pos == pytest.approx(h_neg)
    assert hp_pos == pytest.approx(-hp_neg)


@pytest.mark.parametrize(
    "table",
    [
        [(0.0, 1.0)],
        [(1.0, 1.0), (0.0, 1.0)],
        [(-1.0, -0.5), (1.0, 1.0)],
        [(-1.0, 0.0), (1.0, 0.0)],
    ],
)
def test_tabulated_kernel_rejects_bad_tables(table):
    with pytest.raises(ValueError):
        TabulatedKernel(table)


def test_factory_builds_every_kind():
    assert isinstance(create_mutation_kernel("gaussian", {"sigma": 0.5}), GaussianKernel)
    laplace = create_mutation_kernel("laplace", {"lambda": 4.0})
    assert isinstance(laplace, TwoSidedExponentialKernel)
    assert laplace.lam == 4.0
    tabulated = create_mutation_kernel(config={"kind": "table", "nodes": [(-1.0, 0.5), (0.0, 1.0), (1.0, 0.5)]})
    assert isinstance(tabulated, TabulatedKernel)
    assert isinstance(create_mutation_kernel(), GaussianKernel)


def test_factory_passes_numerical_settings():
    kernel = create_mutation_kernel("gaussian", {"alpha_max": 8.0, "newton_tol": 1e-10, "sigma": None})
    assert kernel.alpha_max == 8.0
    assert kernel.newton_tol == 1e-10
    assert kernel.sigma == 1.0


def test_factory_rejects_unknown_kind_and_parameters():
    with pytest.raises(ValueError):
        create_mutation_kernel("cauchy")
    with pytest.raises(ValueError):
        create_mutation_kernel("gaussian", {"lam": 3.0})


def test_describe_lists_parameters(gaussian):
    description = gaussian.describe()
    assert description["kind"] == "gaussian"
    assert description["sigma"] == 1.0
    assert description["alpha_max"] == 20.0
