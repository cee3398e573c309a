import math

import numpy as np
import pytest
import scipy.integrate

from trackqueue import (
    Erlang,
    Exponential,
    LogNormal,
    Pareto,
    RngStream,
    mean_of,
    sample,
    sample_array,
    variance_of,
)

N = 10**6


@pytest.mark.parametrize(
    "spec",
    [
        Exponential(1.0),
        Exponential(2.0),
        LogNormal(1.0, 1.0),
        Erlang(2, 4.0),
        Pareto(1.0, 3.5),
    ],
    ids=str,
)
def test_moments_match_closed_forms(spec):
    rng = RngStream(7, 0).generator()
    draws = sample_array(spec, rng, N)
    se_mean = math.sqrt(variance_of(spec) / N)
    assert abs(draws.mean() - mean_of(spec)) < 3 * se_mean
    # Variance needs a 4th-moment standard error; a loose 5% band is enough
    # at this sample size for every family under test.
    assert abs(draws.var() - variance_of(spec)) < 0.05 * variance_of(spec)


def test_spec_example_means():
    assert mean_of(Exponential(2.0)) == 0.5
    assert mean_of(LogNormal(1.0, 1.0)) == 1.0
    assert mean_of(Erlang(2, 4.0)) == 0.5
    assert mean_of(Pareto(1.0, 3.5)) == pytest.approx(1.4)


def test_exponential_sample_mean_tight():
    rng = RngStream(3, 0).generator()
    assert abs(sample_array(Exponential(1.0), rng, N).mean() - 1.0) < 0.01


def test_erlang_sample_mean_tight():
    rng = RngStream(3, 0).generator()
    assert abs(sample_array(Erlang(2, 4.0), rng, N).mean() - 0.5) < 0.005


def test_pareto_mean_against_quadrature():
    # Independent oracle: numerically integrate x * alpha x_m^a / x^(a+1).
    x_m, alpha = 1.0, 3.5
    mean_quad, err = scipy.integrate.quad(
        lambda x: x * alpha * x_m**alpha / x ** (alpha + 1), x_m, np.inf
    )
    assert err < 1e-8
    assert mean_of(Pareto(x_m, alpha)) == pytest.approx(mean_quad, rel=1e-10)
    rng = RngStream(11, 0).generator()
    draws = sample_array(Pareto(x_m, alpha), rng, N)
    assert abs(draws.mean() - mean_quad) < 0.02


def test_lognormal_mean_parameterization():
    spec = LogNormal(0.5, 1.3)
    assert math.exp(spec.log_location + spec.sigma_log**2 / 2) == pytest.approx(0.5)


def test_exponential_memorylessness():
    rng = RngStream(5, 0).generator()
    x = sample_array(Exponential(1.0), rng, N)
    for s in (0.5, 1.0, 2.0):
        for t in (0.5, 1.0, 2.0):
            lhs = np.mean(x > s + t) / np.mean(x > s)
            rhs = np.mean(x > t)
            assert abs(lhs - rhs) < 0.01


def test_streams_are_reproducible_and_independent():
    a1 = sample_array(Exponential(1.0), RngStream(9, 0).generator(), 10_000)
    a2 = sample_array(Exponential(1.0), RngStream(9, 0).generator(), 10_000)
    b = sample_array(Exponential(1.0), RngStream(9, 1).generator(), 10_000)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert abs(np.corrcoef(a1, b)[0, 1]) < 0.03


def test_scalar_draws_match_vector_draws():
    spec = Erlang(3, 2.0)
    vec = sample_array(spec, RngStream(4, 0).generator(), 5)
    gen = RngStream(4, 0).generator()
    scalars = [sample(spec, gen) for _ in range(5)]
    assert np.allclose(vec, scalars)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: Exponential(0.0),
        lambda: Exponential(-1.0),
        lambda: LogNormal(0.0, 1.0),
        lambda: LogNormal(1.0, 0.0),
        lambda: Erlang(0, 1.0),
        lambda: Erlang(2, 0.0),
        lambda: Pareto(0.0, 3.5),
        lambda: Pareto(1.0, 1.0),
    ],
)
def test_invalid_parameters_rejected_at_construction(bad):
    with pytest.raises(ValueError):
        bad()


def test_pareto_infinite_variance_flagged():
    assert variance_of(Pareto(1.0, 1.5)) == math.inf
