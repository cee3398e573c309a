"""Packet-dropping decision rules applied when an arrival finds the buffer full.

Every rule is a pure function of a :class:`DropContext` snapshot and returns
the 1-based index of the victim packet: ``1..B`` select a buffered packet
(1 = head, B = tail), ``B+1`` selects the newly arrived packet.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class DropContext:
    """Queue snapshot handed to a dropping rule.

    ``buffered_gens`` are the generation times of the buffered packets from
    head to tail (strictly increasing).  ``prior_gens`` holds, for each of the
    B+1 candidates (B buffered packets plus the new arrival), the generation
    time of its most recent predecessor among the in-service, buffered and
    delivered packets.  The in-service generation time may interleave with the
    buffered ones; no rule may assume it is the oldest.
    """

    in_service_gen: float
    buffered_gens: tuple[float, ...]
    new_gen: float
    prior_gens: tuple[float, ...] = ()
    epsilon: float = 0.0


class PolicyKind(Enum):
    KEEP_OLD = "keep-old"
    KEEP_FRESH = "keep-fresh"
    INTER_ARRIVAL_AWARE = "iaa"
    THRESHOLD_INTER_ARRIVAL_AWARE = "th-iaa"


def decide_keep_old(ctx: DropContext) -> int:
    """Always drop the new arrival; buffered packets are never displaced."""
    return len(ctx.buffered_gens) + 1


def decide_keep_fresh(ctx: DropContext) -> int:
    """Drop the buffered tail; the new arrival takes its place."""
    return len(ctx.buffered_gens)


def decide_iaa_single(ctx: DropContext) -> int:
    """Single-buffer gap rule: drop the buffered packet when its gap to the
    in-service packet is (strictly) smaller than the new arrival's gap to it,
    biased by epsilon toward keeping the fresher packet."""
    t_b = ctx.buffered_gens[0]
    if t_b - ctx.in_service_gen < ctx.new_gen - t_b + ctx.epsilon:
        return 1
    return 2


def decide_iaa_general(ctx: DropContext) -> int:
    """General-buffer gap rule: drop the candidate with the smallest gap to
    its most recent predecessor; the new arrival's gap is biased by +epsilon.
    Ties go to the smallest index (oldest candidate)."""
    b = len(ctx.buffered_gens)
    if len(ctx.prior_gens) != b + 1:
        raise ValueError(
            f"prior_gens must cover {b + 1} candidates, got {len(ctx.prior_gens)}"
        )
    victim = 1
    best = ctx.buffered_gens[0] - ctx.prior_gens[0]
    for i in range(1, b):
        gap = ctx.buffered_gens[i] - ctx.prior_gens[i]
        if gap < best:
            best = gap
            victim = i + 1
    if ctx.new_gen - ctx.prior_gens[b] + ctx.epsilon < best:
        victim = b + 1
    return victim


@dataclass(frozen=True)
class Policy:
    """A named dropping policy, optionally carrying a freshness threshold."""

    kind: PolicyKind
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.epsilon > 0 and self.kind not in (
            PolicyKind.INTER_ARRIVAL_AWARE,
            PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE,
        ):
            raise ValueError(f"policy {self.kind.value} takes no epsilon")

    def decide(self, ctx: DropContext) -> int:
        if self.kind is PolicyKind.KEEP_OLD:
            return decide_keep_old(ctx)
        if self.kind is PolicyKind.KEEP_FRESH:
            return decide_keep_fresh(ctx)
        ctx = DropContext(
            ctx.in_service_gen, ctx.buffered_gens, ctx.new_gen, ctx.prior_gens, self.epsilon
        )
        if len(ctx.buffered_gens) == 1:
            return decide_iaa_single(ctx)
        return decide_iaa_general(ctx)

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE:
            return f"th-iaa({self.epsilon:g})"
        return self.kind.value


def keep_old() -> Policy:
    return Policy(PolicyKind.KEEP_OLD)


def keep_fresh() -> Policy:
    return Policy(PolicyKind.KEEP_FRESH)


def inter_arrival_aware() -> Policy:
    return Policy(PolicyKind.INTER_ARRIVAL_AWARE)


def threshold_iaa(epsilon: float) -> Policy:
    return Policy(PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE, epsilon)


def parse_policy(token: str, epsilon: float = 0.0) -> Policy:
    """Parse a config token such as ``keep-old`` or ``th-iaa:0.6``."""
    token = token.strip()
    if ":" in token:
        name, _, arg = token.partition(":")
        return parse_policy(name, float(arg))
    for kind in PolicyKind:
        if kind.value == token:
            if kind is PolicyKind.THRESHOLD_INTER_ARRIVAL_AWARE:
                return Policy(kind, epsilon)
            return Policy(kind)
    raise ValueError(f"unknown policy {token!r}")
