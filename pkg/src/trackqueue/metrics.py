"""Peak-age and reconstruction-error statistics computed from delivery traces.

Peak age: only fresh deliveries (generation time above every earlier
delivered one) reduce the receiver's age; the k-th peak is the age right
before the k-th fresh delivery, i.e. delivery time of fresh packet k minus
generation time of fresh packet k-1.

Reconstruction error: with linear interpolation between delivered samples of
a standard Wiener path, the expected time-averaged squared error is
sum(gap^2)/6 over consecutive delivered generation times, divided by the span
up to the last delivery.  The trace origin (0, or the freshest warmup
delivery) supplies the leading interval.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .simulation import DeliveryTrace


@dataclass(frozen=True)
class AgeSummary:
    avg_peak_age: float
    peak_count: int
    peaks: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ReSummary:
    avg_re: float
    second_moment: float
    lambda_eff_empirical: float


def peak_ages(trace: DeliveryTrace, keep_peaks: bool = False) -> AgeSummary:
    """Average peak age over the fresh deliveries of a trace."""
    fresh = trace.fresh
    gen = trace.gen_times[fresh]
    dlv = trace.delivery_times[fresh]
    if len(gen) < 2:
        raise ValueError("peak age needs at least two fresh deliveries")
    peaks = dlv[1:] - gen[:-1]
    return AgeSummary(
        avg_peak_age=float(peaks.mean()),
        peak_count=len(peaks),
        peaks=peaks if keep_peaks else None,
    )


def _windowed_gens(trace: DeliveryTrace) -> np.ndarray:
    # Sorted generation times inside the measurement window.  Packets
    # generated before the warmup origin but delivered after it (old buffer
    # residents under overload) anchor the window edge and are excluded from
    # interval statistics.
    gen = np.sort(trace.gen_times)
    start = np.searchsorted(gen, trace.origin_gen, side="left")
    return gen[start:]


def reconstruction_error(trace: DeliveryTrace) -> ReSummary:
    """Time-averaged squared reconstruction error implied by the delivered
    generation times (all deliveries count, stale ones included: they carry
    valid samples)."""
    if len(trace) == 0:
        raise ValueError("empty trace: no deliveries to reconstruct from")
    gen = _windowed_gens(trace)
    span = trace.delivery_times[-1] - trace.origin_time
    gaps = np.diff(np.concatenate(([trace.origin_gen], gen)))
    avg_re = float(np.sum(gaps * gaps) / 6.0 / span)
    if len(gen) >= 2:
        inner = gaps[1:]
        second = float(np.mean(inner * inner))
    else:
        second = float("nan")
    return ReSummary(
        avg_re=avg_re,
        second_moment=second,
        lambda_eff_empirical=len(gen) / span,
    )


def second_moment_intervals(trace: DeliveryTrace) -> float:
    """Mean squared gap between consecutive delivered generation times."""
    if len(trace) < 2:
        raise ValueError("need at least two deliveries for interval statistics")
    gaps = np.diff(_windowed_gens(trace))
    return float(np.mean(gaps * gaps))


def delivered_waits(trace: DeliveryTrace) -> np.ndarray:
    """Buffer waiting times of delivered packets that arrived to a busy
    system.  Valid for single-buffer traces, where a buffered packet always
    starts service at its predecessor's departure."""
    gen = trace.gen_times
    dlv = trace.delivery_times
    waits = dlv[:-1] - gen[1:]
    return waits[waits > 0]


def mean_normalized_wait(trace: DeliveryTrace) -> float:
    """Mean buffer waiting time in units of the mean service duration.

    Valid for single-buffer traces.  Under heavy traffic this is the 0.375
    constant of the gap rule's peak age: average peak age decomposes into
    mean wait + own service + inter-departure gap.
    """
    gen = trace.gen_times
    dlv = trace.delivery_times
    if len(gen) < 3:
        raise ValueError("need at least three deliveries")
    waits = np.maximum(dlv[:-1] - gen[1:], 0.0)
    services = dlv[1:] - np.maximum(dlv[:-1], gen[1:])
    return float(waits.mean() / services.mean())
