"""Closed-form evaluators for the single-buffer and B-buffer Markov queues,
plus the numeric invariant measure of the heavy-traffic gap-rule recurrence.

All formulas are for Poisson arrivals (rate lam) and exponential service
(rate mu) in a non-preemptive LCFS queue holding up to B buffered packets
plus one in service.  The B-buffer expressions contain removable (mu - lam)
singularities and reject lam == mu; the single-buffer forms are valid there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CRITICAL_RTOL = 1e-9


@dataclass(frozen=True)
class AnalyticParams:
    lam: float
    mu: float
    buffer_size: int = 1

    def __post_init__(self) -> None:
        if not self.lam > 0 or not self.mu > 0:
            raise ValueError("lam and mu must be positive")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")

    @property
    def rho(self) -> float:
        return self.lam / self.mu


def _reject_critical(p: AnalyticParams, what: str) -> None:
    if abs(p.lam - p.mu) <= _CRITICAL_RTOL * p.mu:
        raise ValueError(f"{what} is singular at lam == mu; use lam != mu")


def steady_probs(p: AnalyticParams) -> np.ndarray:
    """Stationary occupancy distribution pi_0..pi_{B+1} (geometric in rho)."""
    rho = p.rho
    weights = np.power(rho, np.arange(p.buffer_size + 2, dtype=np.float64))
    return weights / weights.sum()


def lambda_eff(p: AnalyticParams) -> float:
    """Long-run delivery rate lam * (1 - pi_{B+1}); policy-independent."""
    return p.lam * (1.0 - steady_probs(p)[-1])


def peak_age_keep_old_mm12(p: AnalyticParams) -> float:
    """Average peak age, Keep-Old, single buffer."""
    lam, mu = p.lam, p.mu
    return 1.0 / lam + 3.0 / mu - 2.0 / (lam + mu)


def peak_age_keep_fresh_mm12(p: AnalyticParams) -> float:
    """Average peak age, Keep-Fresh, single buffer."""
    lam, mu = p.lam, p.mu
    return 1.0 / mu + lam / (lam + mu) ** 2 + 1.0 / lam + lam / (mu * (lam + mu))


def second_moment_keep_old_mm12(p: AnalyticParams) -> float:
    """E[Z^2] of delivered inter-generation gaps, Keep-Old, single buffer."""
    return 2.0 / p.mu**2 + 2.0 / p.lam**2


def second_moment_keep_fresh_mm12(p: AnalyticParams) -> float:
    """E[Z^2] of delivered inter-generation gaps, Keep-Fresh, single buffer."""
    lam, mu = p.lam, p.mu
    return 2.0 * (lam**2 + mu**2) / (lam**2 * mu**2) - 2.0 * lam * (2.0 * lam + mu) / (
        lam + mu
    ) ** 4


def re_keep_old_mm12(p: AnalyticParams) -> float:
    """Average reconstruction error, Keep-Old, single buffer."""
    lam, mu = p.lam, p.mu
    return (lam + mu) * (lam**2 + mu**2) / (3.0 * lam * mu * (lam**2 + lam * mu + mu**2))


def re_keep_fresh_mm12(p: AnalyticParams) -> float:
    """Average reconstruction error, Keep-Fresh, single buffer."""
    p1 = AnalyticParams(p.lam, p.mu, 1)
    return lambda_eff(p1) * second_moment_keep_fresh_mm12(p) / 6.0


def _c1(p: AnalyticParams) -> float:
    lam, mu = p.lam, p.mu
    rho_b = p.rho**p.buffer_size
    return 1.0 + lam * mu / (mu**2 - lam**2) - lam**2 * rho_b / (mu**2 - lam**2)


def _c2(p: AnalyticParams) -> float:
    lam, mu = p.lam, p.mu
    rho_b = p.rho**p.buffer_size
    return mu / (mu - lam) - lam * rho_b / (mu - lam)


def peak_age_keep_old_mm1b(p: AnalyticParams) -> float:
    """Average peak age, Keep-Old, buffer size B (lam != mu)."""
    _reject_critical(p, "B-buffer Keep-Old peak age")
    lam, mu = p.lam, p.mu
    rho_b = p.rho**p.buffer_size
    bracket = (
        1.0 / lam
        + (1.0 + lam * mu / (lam + mu) ** 2) / (mu - lam)
        + (2.0 / mu - (1.0 + mu**2 / (lam + mu) ** 2) / (mu - lam)) * rho_b
    )
    return 1.0 / mu + bracket / _c1(p)


def peak_age_keep_fresh_mm1b(p: AnalyticParams) -> float:
    """Average peak age, Keep-Fresh, buffer size B (lam != mu)."""
    _reject_critical(p, "B-buffer Keep-Fresh peak age")
    lam, mu = p.lam, p.mu
    rho_b = p.rho**p.buffer_size
    bracket = (
        1.0 / lam
        + (1.0 + lam * mu / (lam + mu) ** 2) / (mu - lam)
        + (1.0 / mu - (1.0 + lam**2 / (lam + mu) ** 2) / (mu - lam)) * rho_b
    )
    return 1.0 / mu + bracket / _c1(p)


def second_moment_keep_old_mm1b(p: AnalyticParams) -> float:
    """E[Z^2], Keep-Old, buffer size B (lam != mu)."""
    _reject_critical(p, "B-buffer Keep-Old second moment")
    lam, mu = p.lam, p.mu
    rho_b = p.rho**p.buffer_size
    return 2.0 / (_c2(p) * (mu - lam)) * (mu / lam**2 - lam * rho_b / mu**2)


def re_keep_old_mm1b(p: AnalyticParams) -> float:
    """Average reconstruction error, Keep-Old, buffer size B (lam != mu)."""
    return lambda_eff(p) * second_moment_keep_old_mm1b(p) / 6.0


def second_moment_keep_fresh_mm1b(p: AnalyticParams) -> float:
    """E[Z^2], Keep-Fresh, buffer size B (lam != mu)."""
    _reject_critical(p, "B-buffer Keep-Fresh second moment")
    lam, mu = p.lam, p.mu
    rho_b = p.rho**p.buffer_size
    z1 = (
        2.0 * mu**3 * (6.0 * lam**2 + 4.0 * lam * mu + mu**2)
        + 2.0 * lam**3 * (lam**2 + 3.0 * lam * mu + 3.0 * mu**2)
    ) / (lam**2 * mu**2 * (lam + mu) ** 3)
    z2 = 2.0 * mu**2 * (3.0 * lam**2 + 3.0 * lam * mu + mu**2) / (
        lam**3 * (lam + mu) ** 3
    ) + 2.0 / (mu * (lam + mu))
    return (
        2.0 * mu / ((mu - lam) * lam**2)
        + (z1 + z2 - 2.0 * mu**2 / ((mu - lam) * lam**3)) * rho_b
    ) / _c2(p)


def re_keep_fresh_mm1b(p: AnalyticParams) -> float:
    """Average reconstruction error, Keep-Fresh, buffer size B (lam != mu)."""
    return lambda_eff(p) * second_moment_keep_fresh_mm1b(p) / 6.0


def heavy_traffic_peak_age_iaa(mu: float) -> float:
    """Heavy-traffic peak-age limit of the gap rule: (1 + 1 + 0.375)/mu."""
    return 2.375 / mu


def doublings_to_exceed_half(x: float) -> int:
    """Smallest a >= 0 with 2^a * x > 1/2 (capped at 60)."""
    if not 0 < x <= 1:
        raise ValueError(f"x must lie in (0, 1], got {x}")
    a = 0
    while x <= 0.5 and a < 60:
        x *= 2.0
        a += 1
    return a


def cascade_wait(x: float) -> float:
    """Normalized wait left behind by the saturated replacement cascade.

    Within one fully loaded service period (normalized to length 1) the gap
    rule replaces the buffered packet whenever the new arrival's gap exceeds
    the buffered packet's gap to the in-service packet, whose own generation
    time lies ``x`` before the period start.  Arrivals being dense, the
    buffered position jumps b -> 2b + x from 0 until the next jump would pass
    the period end, so the surviving packet sits at (2^J - 1) x and waits

        1 + x - 2^J x,  J = min{j >= 0 : (2^(j+1) - 1) x > 1}.

    J equals ``doublings_to_exceed_half(x / (1 + x))``: the classic doubling
    index, with the threshold shifted to account for the in-service packet's
    own wait.
    """
    if not x > 0:
        raise ValueError(f"wait ratio must be positive, got {x}")
    if x > 1:
        return 1.0  # in-service packet older than a full period: no cascade
    j = doublings_to_exceed_half(x / (1.0 + x))
    return 1.0 + x - 2.0**j * x


@dataclass(frozen=True)
class InvariantMeasure:
    """Stationary law of the heavy-traffic waiting time under the gap rule.

    ``weights`` discretize the density of the buffered packet's waiting time
    measured in units of the mean service time, over (0, upper); its mean is
    the 0.375 constant in the heavy-traffic peak age (1 + 1 + 0.375)/mu.
    """

    bins: int
    upper: float
    weights: np.ndarray
    mean: float
    iterations: int

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) * (self.upper / self.bins)


def invariant_measure(
    bins: int = 2**13,
    tol: float = 1e-10,
    max_iter: int = 10**6,
    upper: float = 14.0,
) -> InvariantMeasure:
    """Iterate the wait-distribution transfer operator to its fixed point.

    In heavy traffic the wait w of each surviving packet obeys
    w' = s * cascade_wait(w / s) with s the (exponential) service duration of
    the period it waits through.  Conditioning on s gives an exact transition
    kernel: a telescoping mixture of shifted exponentials,

        K(w, w') = sum_j exp(-(2^j - 1) w) exp(-w') 1{w' < 2^j w},

    which is iterated on a uniform grid over (0, upper) until the
    total-variation change drops below ``tol``.  Raises RuntimeError when it
    fails to converge within ``max_iter`` sweeps.
    """
    if bins < 2**12:
        raise ValueError("use at least 2^12 bins for a faithful discretization")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not upper > 1:
        raise ValueError("upper must exceed the mean service time")
    h = upper / bins
    edges = np.arange(bins + 1) * h
    centers = edges[:-1] + h / 2
    decay = np.exp(-centers)
    v = np.full(bins, 1.0 / bins)
    for it in range(1, max_iter + 1):
        tail_sum = np.zeros(bins)
        for j in range(61):
            c = 2.0**j - 1.0
            # Cell integrals of exp(-c w) f(w) with f uniform within cells.
            if c == 0.0:
                w = v
            else:
                w = v * (np.exp(-c * edges[:-1]) - np.exp(-c * edges[1:])) / (c * h)
            if j > 1 and w.sum() < 1e-16:
                break
            suffix = np.concatenate((np.cumsum(w[::-1])[::-1], [0.0]))
            t = centers / 2.0**j
            cell = np.minimum((t / h).astype(np.int64), bins - 1)
            b = edges[cell + 1]
            if c == 0.0:
                partial = v[cell] * (b - t) / h
            else:
                partial = v[cell] * (np.exp(-c * t) - np.exp(-c * b)) / (c * h)
            tail_sum += suffix[cell + 1] + partial
        nxt = h * decay * tail_sum
        nxt /= nxt.sum()
        tv = 0.5 * np.abs(nxt - v).sum()
        v = nxt
        if tv < tol:
            return InvariantMeasure(bins, upper, v, float(v @ centers), it)
    raise RuntimeError(f"invariant measure did not converge within {max_iter} iterations")
