"""Seedable random-variate generation for arrival and service processes.

Four families are supported: exponential, log-normal, Erlang and Pareto.
Each spec is a small frozen dataclass that validates its parameters on
construction; sampling never re-validates.  Streams are built on numpy's
``SeedSequence`` so that (seed, stream_id) pairs are reproducible and
statistically independent of each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

# Conventional stream ids used by the simulator.
ARRIVAL_STREAM = 0
SERVICE_STREAM = 1
PATH_STREAM = 2


@dataclass(frozen=True)
class RngStream:
    """Identity of one reproducible random stream."""

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.seed, self.stream_id)))


@dataclass(frozen=True)
class Exponential:
    """Exponential inter-event times with the given rate (mean 1/rate)."""

    rate: float

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ValueError(f"exponential rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class LogNormal:
    """Log-normal variates parameterized by their mean and log-scale sigma.

    ``mean`` is the mean of the variate itself (not the log-location); the
    log-location is solved so that E[X] = mean for the given ``sigma_log``.
    """

    mean: float
    sigma_log: float

    def __post_init__(self) -> None:
        if not self.mean > 0:
            raise ValueError(f"log-normal mean must be positive, got {self.mean}")
        if not self.sigma_log > 0:
            raise ValueError(f"log-normal sigma must be positive, got {self.sigma_log}")

    @property
    def log_location(self) -> float:
        return math.log(self.mean) - 0.5 * self.sigma_log**2


@dataclass(frozen=True)
class Erlang:
    """Sum of ``stages`` independent exponential stages (mean stages/rate_per_stage)."""

    stages: int
    rate_per_stage: float

    def __post_init__(self) -> None:
        if not (isinstance(self.stages, int) and self.stages >= 1):
            raise ValueError(f"Erlang stage count must be a positive integer, got {self.stages}")
        if not self.rate_per_stage > 0:
            raise ValueError(f"Erlang per-stage rate must be positive, got {self.rate_per_stage}")


@dataclass(frozen=True)
class Pareto:
    """Classic Pareto on [x_min, inf) with tail index alpha > 1 (finite mean)."""

    x_min: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.x_min > 0:
            raise ValueError(f"Pareto x_min must be positive, got {self.x_min}")
        if not self.alpha > 1:
            raise ValueError(f"Pareto alpha must exceed 1 for a finite mean, got {self.alpha}")


DistributionSpec = Union[Exponential, LogNormal, Erlang, Pareto]


def mean_of(spec: DistributionSpec) -> float:
    """Closed-form mean of a distribution spec."""
    if isinstance(spec, Exponential):
        return 1.0 / spec.rate
    if isinstance(spec, LogNormal):
        return spec.mean
    if isinstance(spec, Erlang):
        return spec.stages / spec.rate_per_stage
    if isinstance(spec, Pareto):
        return spec.alpha * spec.x_min / (spec.alpha - 1.0)
    raise TypeError(f"not a distribution spec: {spec!r}")


def variance_of(spec: DistributionSpec) -> float:
    """Closed-form variance; inf for a Pareto with alpha <= 2."""
    if isinstance(spec, Exponential):
        return 1.0 / spec.rate**2
    if isinstance(spec, LogNormal):
        return (math.exp(spec.sigma_log**2) - 1.0) * spec.mean**2
    if isinstance(spec, Erlang):
        return spec.stages / spec.rate_per_stage**2
    if isinstance(spec, Pareto):
        if spec.alpha <= 2:
            return math.inf
        a = spec.alpha
        return a * spec.x_min**2 / ((a - 1.0) ** 2 * (a - 2.0))
    raise TypeError(f"not a distribution spec: {spec!r}")


def rate_of(spec: DistributionSpec) -> float:
    """Nominal event rate, i.e. 1 / mean."""
    return 1.0 / mean_of(spec)


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    """Draw one variate.  Scalar draws and ``sample_array`` consume the
    underlying bit stream identically, so mixing them is reproducible."""
    return float(sample_array(spec, rng, None))


def sample_array(spec: DistributionSpec, rng: np.random.Generator, n: int | None):
    """Draw ``n`` variates (or a scalar for ``n=None``) from the stream."""
    if isinstance(spec, Exponential):
        return rng.exponential(1.0 / spec.rate, n)
    if isinstance(spec, LogNormal):
        return rng.lognormal(spec.log_location, spec.sigma_log, n)
    if isinstance(spec, Erlang):
        return rng.gamma(spec.stages, 1.0 / spec.rate_per_stage, n)
    if isinstance(spec, Pareto):
        # Inverse transform: x_min * (1-U)^(-1/alpha) = x_min * exp(E/alpha).
        return spec.x_min * np.exp(rng.standard_exponential(n) / spec.alpha)
    raise TypeError(f"not a distribution spec: {spec!r}")
