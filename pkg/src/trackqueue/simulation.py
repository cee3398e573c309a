"""Discrete-event simulation of a single-server, non-preemptive LCFS queue
with a finite buffer and a pluggable packet-dropping policy.

Two engines implement identical dynamics:

* ``event`` -- plain-Python event loop, works with any object exposing
  ``decide(ctx) -> victim`` (custom policies included);
* ``compiled`` -- numba kernel for the built-in policies, used by default
  because the heavy-traffic experiments process billions of arrivals.

Both consume the arrival and service variate streams in the same order, so
for a given config they produce bit-identical traces.

Timing conventions: a departure and an arrival at the same instant are
processed departure first (the arrival sees the post-departure state); the
server always picks the buffered tail next (LCFS); service is never
preempted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np

from .distributions import (
    ARRIVAL_STREAM,
    SERVICE_STREAM,
    DistributionSpec,
    RngStream,
    sample_array,
)
from .policies import DropContext, Policy, PolicyKind

_BUILTIN_KERNEL_CODES = {
    PolicyKind.KEEP_OLD: 0,
    PolicyKind.KEEP_FRESH: 1,
    PolicyKind.INTER_ARRIVAL_AWARE: 2,
    PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE: 2,
}


class PolicyContractError(RuntimeError):
    """A policy returned a victim index outside 1..B+1."""


class Fate(Enum):
    IN_SYSTEM = "in-system"
    DELIVERED = "delivered"
    DROPPED = "dropped"


@dataclass
class PacketRecord:
    """One generated update packet."""

    id: int
    gen_time: float
    delivery_time: Optional[float] = None
    fate: Fate = Fate.IN_SYSTEM


@dataclass
class _Slot:
    # Buffered packet plus the generation time of its most recent predecessor
    # among in-service/buffered/delivered packets (the gap-rule bookkeeping).
    record: PacketRecord
    prior_gen: float


@dataclass
class QueueState:
    """Mutable engine state; exposed mostly for tests and instrumentation."""

    buffer_size: int
    clock: float = 0.0
    in_service: Optional[PacketRecord] = None
    buffer: list[_Slot] = field(default_factory=list)
    latest_delivered_gen: float = -math.inf

    @property
    def occupancy(self) -> int:
        return len(self.buffer) + (self.in_service is not None)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run.

    Exactly one of ``target_deliveries`` / ``horizon_time`` must be set.
    ``warmup_fraction`` of the horizon (or of the delivered-packet target) is
    simulated but excluded from the returned trace.
    """

    arrival: DistributionSpec
    service: DistributionSpec
    buffer_size: int
    policy: Policy
    target_deliveries: Optional[int] = None
    horizon_time: Optional[float] = None
    warmup_fraction: float = 0.05
    seed: int = 0
    engine: str = "auto"

    def __post_init__(self) -> None:
        if self.buffer_size < 1:
            raise ValueError(f"buffer size must be >= 1, got {self.buffer_size}")
        if (self.target_deliveries is None) == (self.horizon_time is None):
            raise ValueError("set exactly one of target_deliveries / horizon_time")
        if self.target_deliveries is not None and self.target_deliveries < 1:
            raise ValueError("target_deliveries must be positive")
        if self.horizon_time is not None and not self.horizon_time > 0:
            raise ValueError("horizon_time must be positive")
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.engine not in ("auto", "event", "compiled"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class DeliveryTrace:
    """Post-warmup deliveries plus whole-run counters.

    ``gen_times``/``delivery_times``/``fresh`` cover retained deliveries in
    delivery order.  ``origin_gen``/``origin_time`` are the generation and
    delivery times of the freshest warmup delivery (0.0 when nothing was
    trimmed); metrics use them as the reconstruction origin so that the
    warmup gap does not leak into interval statistics.  Counters span the
    whole run, warmup included.
    """

    gen_times: np.ndarray
    delivery_times: np.ndarray
    fresh: np.ndarray
    generated_count: int
    dropped_count: int
    delivered_count: int
    in_system_at_end: int
    end_time: float
    origin_gen: float
    origin_time: float
    arrival_occupancy: np.ndarray
    buffer_size: int

    def __len__(self) -> int:
        return len(self.gen_times)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("gen_time,delivery_time,fresh\n")
            for g, d, f in zip(self.gen_times, self.delivery_times, self.fresh):
                fh.write(f"{float(g)!r},{float(d)!r},{int(f)}\n")


def loss_probability(trace: DeliveryTrace) -> float:
    """Fraction of generated packets that were dropped."""
    if trace.generated_count == 0:
        raise ValueError("empty trace: no packets were generated")
    return trace.dropped_count / trace.generated_count


class _Source:
    """Sequential variate source: either an endless (spec, rng) stream or a
    fixed array of scripted values (used by tests and the engine-equivalence
    checks)."""

    def __init__(
        self,
        spec: Optional[DistributionSpec] = None,
        rng: Optional[np.random.Generator] = None,
        values: Optional[Sequence[float]] = None,
    ):
        if values is not None:
            self._it: Optional[Iterator[float]] = iter([float(v) for v in values])
            self._values = np.asarray(values, dtype=np.float64)
            self._pos = 0
        else:
            assert spec is not None and rng is not None
            self._it = None
            self._spec = spec
            self._rng = rng

    @property
    def scripted(self) -> bool:
        return self._it is not None

    def next(self) -> float:
        """Next variate; inf once a scripted source is exhausted."""
        if self._it is None:
            return float(sample_array(self._spec, self._rng, None))
        try:
            return next(self._it)
        except StopIteration:
            return math.inf

    def take(self, n: int) -> np.ndarray:
        """Next chunk of up to ``n`` variates (may be shorter when scripted)."""
        if self._it is None:
            return sample_array(self._spec, self._rng, n)
        chunk = self._values[self._pos : self._pos + n]
        self._pos += len(chunk)
        return chunk


def simulate(
    config: SimConfig,
    policy: Optional[Policy] = None,
    *,
    arrival_values: Optional[Sequence[float]] = None,
    service_values: Optional[Sequence[float]] = None,
) -> DeliveryTrace:
    """Run one simulation and return its delivery trace.

    ``policy`` overrides ``config.policy`` when given.  ``arrival_values`` /
    ``service_values`` inject explicit inter-arrival and service durations in
    place of the seeded streams (deterministic scripts for tests).
    """
    policy = policy if policy is not None else config.policy
    if arrival_values is not None:
        arrivals = _Source(values=arrival_values)
    else:
        arrivals = _Source(config.arrival, RngStream(config.seed, ARRIVAL_STREAM).generator())
    if service_values is not None:
        services = _Source(values=service_values)
    else:
        services = _Source(config.service, RngStream(config.seed, SERVICE_STREAM).generator())

    engine = config.engine
    if engine == "auto":
        builtin = isinstance(policy, Policy) and policy.kind in _BUILTIN_KERNEL_CODES
        engine = "compiled" if builtin else "event"
    if engine == "compiled":
        if not (isinstance(policy, Policy) and policy.kind in _BUILTIN_KERNEL_CODES):
            raise ValueError("compiled engine supports only the built-in policies")
        from ._kernel import run_compiled

        raw = run_compiled(
            arrivals,
            services,
            config.buffer_size,
            _BUILTIN_KERNEL_CODES[policy.kind],
            policy.epsilon,
            _total_target(config),
            config.horizon_time or 0.0,
        )
        return _build_trace(config, *raw)
    return _simulate_event(config, policy, arrivals, services)


def _total_target(config: SimConfig) -> int:
    # Delivered-packet budget including the warmup prefix; 0 means time mode.
    if config.target_deliveries is None:
        return 0
    warm = int(round(config.warmup_fraction * config.target_deliveries))
    return config.target_deliveries + warm


def _simulate_event(
    config: SimConfig, policy, arrivals: _Source, services: _Source
) -> DeliveryTrace:
    B = config.buffer_size
    horizon = config.horizon_time
    target_total = _total_target(config)

    state = QueueState(buffer_size=B)
    buffer = state.buffer
    next_arrival: Optional[float] = None
    dep_time = math.inf
    generated = dropped = delivered = 0
    next_id = 0
    occupancy = np.zeros(B + 2, dtype=np.int64)
    out_gen: list[float] = []
    out_dlv: list[float] = []

    def start_service(record: PacketRecord) -> None:
        nonlocal dep_time
        duration = services.next()
        if math.isinf(duration):
            raise RuntimeError("service variates exhausted while a packet awaited service")
        state.in_service = record
        dep_time = state.clock + duration

    while True:
        if next_arrival is None:
            gap = arrivals.next()
            next_arrival = math.inf if math.isinf(gap) else state.clock + gap
        dep = dep_time if state.in_service is not None else math.inf
        t_next = min(dep, next_arrival)
        if math.isinf(t_next):
            break  # drained: no pending departure and no more arrivals
        if horizon is not None and t_next > horizon:
            state.clock = horizon
            break
        if state.in_service is not None and dep <= next_arrival:
            state.clock = dep
            record = state.in_service
            record.delivery_time = state.clock
            record.fate = Fate.DELIVERED
            out_gen.append(record.gen_time)
            out_dlv.append(state.clock)
            delivered += 1
            if record.gen_time > state.latest_delivered_gen:
                state.latest_delivered_gen = record.gen_time
            state.in_service = None
            dep_time = math.inf
            if target_total and delivered >= target_total:
                break
            if buffer:
                start_service(buffer.pop().record)
        else:
            state.clock = next_arrival
            next_arrival = None
            occupancy[state.occupancy] += 1
            record = PacketRecord(next_id, state.clock)
            next_id += 1
            generated += 1
            if state.in_service is None:
                start_service(record)
            elif len(buffer) < B:
                buffer.append(_Slot(record, _latest_gen(state)))
            else:
                ctx = DropContext(
                    state.in_service.gen_time,
                    tuple(slot.record.gen_time for slot in buffer),
                    record.gen_time,
                    tuple(slot.prior_gen for slot in buffer) + (_latest_gen(state),),
                    getattr(policy, "epsilon", 0.0),
                )
                victim = policy.decide(ctx)
                if not 1 <= victim <= B + 1:
                    raise PolicyContractError(
                        f"policy returned victim {victim}, valid range is 1..{B + 1}"
                    )
                dropped += 1
                if victim <= B:
                    _drop_slot(buffer, victim - 1)
                    buffer.append(_Slot(record, _latest_gen(state)))
                else:
                    record.fate = Fate.DROPPED

    end_time = horizon if horizon is not None else state.clock
    return _build_trace(
        config,
        np.asarray(out_gen, dtype=np.float64),
        np.asarray(out_dlv, dtype=np.float64),
        generated,
        dropped,
        delivered,
        state.occupancy,
        end_time,
        occupancy,
    )


def _latest_gen(state: QueueState) -> float:
    # Most recent generation time present in service/buffer/delivered, i.e.
    # the predecessor of a packet arriving right now.
    latest = state.latest_delivered_gen
    if state.in_service is not None and state.in_service.gen_time > latest:
        latest = state.in_service.gen_time
    if state.buffer and state.buffer[-1].record.gen_time > latest:
        latest = state.buffer[-1].record.gen_time
    return latest


def _drop_slot(buffer: list[_Slot], index: int) -> None:
    victim = buffer[index]
    victim.record.fate = Fate.DROPPED
    # The next-younger buffered packet inherits the victim's predecessor,
    # unless something (in-service or delivered) lies between them in
    # generation order, in which case its stored predecessor already points
    # past the victim.
    if index + 1 < len(buffer) and buffer[index + 1].prior_gen == victim.record.gen_time:
        buffer[index + 1].prior_gen = victim.prior_gen
    del buffer[index]


def _build_trace(
    config: SimConfig,
    gen: np.ndarray,
    dlv: np.ndarray,
    generated: int,
    dropped: int,
    delivered: int,
    in_system: int,
    end_time: float,
    occupancy: np.ndarray,
) -> DeliveryTrace:
    # Freshness is judged against the full delivery history, then warmup
    # deliveries are trimmed off the front.
    if len(gen):
        running = np.maximum.accumulate(gen)
        fresh = np.empty(len(gen), dtype=bool)
        fresh[0] = True
        fresh[1:] = gen[1:] > running[:-1]
    else:
        fresh = np.zeros(0, dtype=bool)

    if config.target_deliveries is not None:
        warm = int(round(config.warmup_fraction * config.target_deliveries))
        warm = min(warm, len(gen))
    else:
        cutoff = config.warmup_fraction * (config.horizon_time or 0.0)
        warm = int(np.searchsorted(dlv, cutoff, side="left"))
    if warm > 0:
        origin_gen = float(np.max(gen[:warm]))
        origin_time = float(dlv[warm - 1])
    else:
        origin_gen = 0.0
        origin_time = 0.0
    return DeliveryTrace(
        gen_times=gen[warm:],
        delivery_times=dlv[warm:],
        fresh=fresh[warm:],
        generated_count=generated,
        dropped_count=dropped,
        delivered_count=delivered,
        in_system_at_end=in_system,
        end_time=end_time,
        origin_gen=origin_gen,
        origin_time=origin_time,
        arrival_occupancy=occupancy,
        buffer_size=config.buffer_size,
    )
