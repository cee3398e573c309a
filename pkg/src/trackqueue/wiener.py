"""Standard Wiener path generation, linear-interpolation reconstruction and
Monte Carlo measurement of the reconstruction error.

Paths are sampled exactly at the requested times (independent Gaussian
increments with variance equal to the elapsed time, diffusion coefficient 1,
W(0) = 0).  Reconstruction between two delivered samples is linear
interpolation, which for a Wiener process is the minimum-mean-square-error
estimate given the bracketing values; the deviation on each interval is a
Brownian bridge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SamplePoint:
    t: float
    value: float


@dataclass(frozen=True)
class WienerPath:
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class McError:
    """Trapezoidal squared-deviation integral and its time average."""

    integral: float
    duration: float

    @property
    def error(self) -> float:
        return self.integral / self.duration


def generate_path(times: Sequence[float], rng: np.random.Generator) -> WienerPath:
    """Sample W at the given strictly increasing times (first time >= 0)."""
    t = np.asarray(times, dtype=np.float64)
    if len(t) == 0:
        raise ValueError("need at least one time point")
    if t[0] < 0:
        raise ValueError("times must be non-negative")
    gaps = np.diff(np.concatenate(([0.0], t)))
    if np.any(gaps[1:] <= 0):
        raise ValueError("times must be strictly increasing")
    steps = rng.standard_normal(len(t)) * np.sqrt(gaps)
    if gaps[0] == 0.0:
        steps[0] = 0.0
    return WienerPath(times=t, values=np.cumsum(steps))


def refine_path(path: WienerPath, step: float, rng: np.random.Generator) -> WienerPath:
    """Insert bridge-sampled points so no gap exceeds ``step``.

    Interior points are drawn from the exact conditional law given the
    existing endpoints: a free Wiener path on the refined grid is tilted so
    that it matches the known values at the original times.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    knots = np.concatenate(([0.0], path.times)) if path.times[0] > 0 else path.times
    kvals = np.concatenate(([0.0], path.values)) if path.times[0] > 0 else path.values
    pieces = [np.array([knots[0]])]
    for a, b in zip(knots[:-1], knots[1:]):
        n = int(np.ceil((b - a) / step))
        interior = a + (b - a) * np.arange(1, n) / n
        pieces.append(np.concatenate((interior, [b])))
    grid = np.concatenate(pieces)
    free = np.concatenate(
        ([0.0], rng.standard_normal(len(grid) - 1) * np.sqrt(np.diff(grid)))
    ).cumsum()
    # Tilt each span so the refined path hits the known endpoint values.
    idx = np.searchsorted(knots, grid, side="right") - 1
    idx = np.clip(idx, 0, len(knots) - 2)
    a = knots[idx]
    b = knots[idx + 1]
    frac = (grid - a) / (b - a)
    free_a = free[np.searchsorted(grid, a)]
    free_b = free[np.searchsorted(grid, b)]
    vals = kvals[idx] + (free - free_a) + frac * ((kvals[idx + 1] - kvals[idx]) - (free_b - free_a))
    return WienerPath(times=grid, values=vals)


def lmmse_reconstruct(samples: Sequence[SamplePoint], t) -> np.ndarray | float:
    """Reconstruct W(t) by linear interpolation through the samples, with the
    implicit origin (0, 0).  Raises for t beyond the last sample: the
    estimate is retrospective only."""
    pts = sorted(samples, key=lambda s: s.t)
    times = np.array([s.t for s in pts], dtype=np.float64)
    values = np.array([s.value for s in pts], dtype=np.float64)
    if len(times) == 0:
        raise ValueError("need at least one sample")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if times[0] > 0:
        times = np.concatenate(([0.0], times))
        values = np.concatenate(([0.0], values))
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > times[-1]):
        raise ValueError("reconstruction time outside [0, last sample]")
    out = np.interp(t_arr, times, values)
    return float(out) if np.ndim(t) == 0 else out


def mc_reconstruction_error(path: WienerPath, sample_times: Sequence[float]) -> McError:
    """Trapezoidal integral of the squared deviation between the path and its
    reconstruction from the given sample times, over [0, last sample].

    ``sample_times`` must be a subset of the path grid; the grid itself should
    resolve every inter-sample interval finely (see ``refine_path``).
    """
    st = np.asarray(sample_times, dtype=np.float64)
    if len(st) == 0:
        raise ValueError("need at least one sample time")
    pos = np.searchsorted(path.times, st)
    if np.any(pos >= len(path.times)) or np.any(path.times[pos] != st):
        raise ValueError("sample times must lie on the path grid")
    samples = [SamplePoint(t, v) for t, v in zip(st, path.values[pos])]
    mask = path.times <= st[-1]
    t = path.times[mask]
    dev = path.values[mask] - lmmse_reconstruct(samples, t)
    integral = float(np.trapezoid(dev * dev, t))
    return McError(integral=integral, duration=float(st[-1]))


def mean_integrated_error(
    sample_times: Sequence[float],
    n_paths: int,
    rng: np.random.Generator,
    points_per_interval: int = 200,
) -> float:
    """Monte Carlo mean of the integrated squared reconstruction error for
    fixed sample times, vectorized across paths.

    Each inter-sample interval (origin included) is simulated as increments
    on a uniform sub-grid; the reconstruction is the chord between the
    interval endpoints, so the deviation integral is accumulated per
    interval.
    """
    st = np.asarray(sample_times, dtype=np.float64)
    if st[0] != 0.0:
        st = np.concatenate(([0.0], st))
    total = 0.0
    m = points_per_interval
    for a, b in zip(st[:-1], st[1:]):
        h = (b - a) / m
        incs = rng.standard_normal((n_paths, m)) * np.sqrt(h)
        w = np.cumsum(incs, axis=1)
        frac = np.arange(1, m + 1) / m
        dev = w - frac[None, :] * w[:, -1:]
        dev2 = dev * dev
        # Trapezoid with zero deviation at both interval endpoints.
        integ = h * (dev2[:, :-1].sum(axis=1) + 0.5 * dev2[:, -1])
        total += float(integ.mean())
    return total
