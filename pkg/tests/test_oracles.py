import math

import numpy as np
import pytest

from conftest import random_stable_matrix
from levyhybrid.errors import DivergentMomentError, InstabilityError
from levyhybrid.measures import (
    AtomLaw,
    CauchyLaw,
    LevyMeasureSpec,
    NormalLaw,
    PolynomialSpec,
)
from levyhybrid.oracles import (
    discounted_jump_sum_expectation,
    mc_estimate,
    prod_exp_expectation,
    stationary_covariance,
    stationary_mean,
)
from levyhybrid.sampling import SeedSpec

F_SQUARE = PolynomialSpec.univariate({2: 1.0})
PM_ONE = LevyMeasureSpec(1.0, AtomLaw((1.0, -1.0), (0.5, 0.5)))
UNIT_JUMPS = LevyMeasureSpec(2.0, AtomLaw((1.0,), (1.0,)))


def test_prod_exp_examples():
    assert prod_exp_expectation(PM_ONE, F_SQUARE, 1.0).value == pytest.approx(math.e)
    assert prod_exp_expectation(LevyMeasureSpec(0.0, CauchyLaw()), F_SQUARE, 3.0).value == 1.0
    assert prod_exp_expectation(PM_ONE, F_SQUARE, 0.0).value == 1.0
    assert prod_exp_expectation(PM_ONE, F_SQUARE, 1.0).formula == "prod_exp"


def test_prod_exp_semigroup_property(rng):
    for _ in range(50):
        t1, t2 = rng.uniform(0.0, 3.0, 2)
        whole = prod_exp_expectation(PM_ONE, F_SQUARE, t1 + t2).value
        split = (
            prod_exp_expectation(PM_ONE, F_SQUARE, t1).value
            * prod_exp_expectation(PM_ONE, F_SQUARE, t2).value
        )
        assert abs(whole - split) <= 1e-12 * max(1.0, whole)


def test_prod_exp_divergent_integrand():
    with pytest.raises(DivergentMomentError):
        prod_exp_expectation(LevyMeasureSpec(1.0, CauchyLaw()), F_SQUARE, 1.0)


def test_prod_exp_monte_carlo_cross_check():
    def functional(path):
        return float(np.prod(1.0 + path.sizes[0] ** 2))

    mean, se = mc_estimate(functional, PM_ONE, 1.0, 20_000, SeedSpec(101))
    assert abs(mean - math.e) <= 3 * se


def test_discounted_examples():
    res = discounted_jump_sum_expectation(UNIT_JUMPS, F_SQUARE, 1.0, 2.0)
    assert res.value == pytest.approx(2.0 * (1.0 - math.exp(-2.0)), abs=1e-12)
    assert res.value == pytest.approx(1.729330, abs=1e-6)
    assert discounted_jump_sum_expectation(UNIT_JUMPS, F_SQUARE, 1.0, 0.0).value == 0.0
    large_alpha = discounted_jump_sum_expectation(
        LevyMeasureSpec(1.0, AtomLaw((1.0,), (1.0,))), F_SQUARE, 1e3, 1.0
    )
    assert large_alpha.value == pytest.approx(1e-3, rel=1e-6)


def test_discounted_monotone_in_t_with_limit():
    values = [
        discounted_jump_sum_expectation(UNIT_JUMPS, F_SQUARE, 1.0, t).value
        for t in (0.5, 1.0, 2.0, 5.0, 20.0)
    ]
    assert all(v1 < v2 for v1, v2 in zip(values, values[1:]))
    assert values[-1] == pytest.approx(2.0, rel=1e-8)  # integral f d(nu) / alpha


def test_discounted_monte_carlo_cross_check():
    def functional(path):
        times, sizes = path.times[0], path.sizes[0]
        return float(np.sum(np.exp(-(2.0 - times)) * sizes**2))

    mean, se = mc_estimate(functional, UNIT_JUMPS, 2.0, 20_000, SeedSpec(102))
    assert abs(mean - 2.0 * (1.0 - math.exp(-2.0))) <= 3 * se


def test_stationary_covariance_examples():
    sigma = stationary_covariance([[-1.0]], [[1.0]], [[0.0]], [LevyMeasureSpec(1.0, NormalLaw(1.0))])
    assert sigma[0, 0] == pytest.approx(0.5, abs=1e-12)
    zero = stationary_covariance([[-1.0]], [[1.0]], [[0.0]], [LevyMeasureSpec(0.0, NormalLaw(1.0))])
    assert zero[0, 0] == pytest.approx(0.0, abs=1e-14)
    ou = stationary_covariance([[-1.0]], np.zeros((1, 0)), [[1.0]], [])
    assert ou[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_stationary_covariance_residual(rng):
    for n in (2, 3, 5):
        a = random_stable_matrix(rng, n)
        b = rng.standard_normal((n, 2))
        c = rng.standard_normal((n, 1))
        specs = [LevyMeasureSpec(1.0, NormalLaw(2.0)), LevyMeasureSpec(0.5, AtomLaw((1.0, -1.0), (0.5, 0.5)))]
        sigma = stationary_covariance(a, b, c, specs)
        m = np.diag([s.rate * s.jump_law.raw_moment(2) for s in specs])
        residual = a @ sigma + sigma @ a.T + b @ m @ b.T + c @ c.T
        assert np.max(np.abs(residual)) <= 1e-10


def test_stationary_covariance_rejects_unstable():
    with pytest.raises(InstabilityError):
        stationary_covariance([[1.0]], [[1.0]], [[0.0]], [PM_ONE])


def test_stationary_mean_nonzero_jump_mean():
    spec = LevyMeasureSpec(2.0, AtomLaw((1.0,), (1.0,)))  # mean-one jumps
    mu = stationary_mean([[-1.0]], [[1.0]], [spec])
    assert mu[0] == pytest.approx(2.0)  # rate * E[J] / |a|


def test_mc_estimate_constant_functional():
    mean, se = mc_estimate(lambda path: 1.0, PM_ONE, 1.0, 100, SeedSpec(1))
    assert mean == 1.0 and se == 0.0


def test_mc_estimate_jump_count_mean():
    spec = LevyMeasureSpec(3.0, AtomLaw((1.0,), (1.0,)))
    mean, se = mc_estimate(lambda p: p.total_jumps, spec, 2.0, 30_000, SeedSpec(55))
    assert abs(mean - 6.0) <= 3 * se


def test_mc_estimate_deterministic():
    spec = LevyMeasureSpec(2.0, NormalLaw(1.0))
    f = lambda p: float(np.sum(np.abs(p.sizes[0])))
    out1 = mc_estimate(f, spec, 1.0, 1000, SeedSpec(77))
    out2 = mc_estimate(f, spec, 1.0, 1000, SeedSpec(77))
    assert out1 == out2
