"""
Sender-side congestion control: simplified NewReno.

Slow start and congestion avoidance on new ACKs, duplicate-ACK counting,
multiplicative decrease on triple duplicate ACK and reset to one segment on
timeout. Loss reaction goes through a policy so a sender can skip the window
reduction for losses it attributes to the wireless hop.

All windows are in segments. ``TcpState`` is immutable; every transition
returns a new state.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from app.core.labels import LossLabel

MIN_SSTHRESH = 2


class LossSignal(Enum):
    TRIPLE_DUPACK = "triple_dupack"
    TIMEOUT = "timeout"


class LossPolicy(str, Enum):
    ALWAYS_REDUCE = "always_reduce"
    ORACLE_DISCRIMINATE = "oracle_discriminate"
    MODEL_DISCRIMINATE = "model_discriminate"


@dataclass(frozen=True)
class Ack:
    """Cumulative acknowledgment as seen by the sender."""

    ack_no: int
    is_duplicate: bool = False


@dataclass(frozen=True)
class TcpState:
    cwnd: float
    ssthresh: float
    dup_acks: int = 0
    dupack_threshold: int = 3

    def __post_init__(self):
        if self.cwnd < 1:
            raise ValueError(f"cwnd must be at least one segment, got {self.cwnd}")

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    @property
    def fast_retransmit_due(self) -> bool:
        return self.dup_acks == self.dupack_threshold


def initial_state(init_cwnd: int, init_ssthresh: int, dupack_threshold: int = 3) -> TcpState:
    return TcpState(cwnd=float(init_cwnd), ssthresh=float(init_ssthresh), dupack_threshold=dupack_threshold)


def tcp_on_ack(tcp_state: TcpState, ack: Ack) -> TcpState:
    """Grow the window on a new ACK, or count a duplicate ACK."""
    if ack.is_duplicate:
        return replace(tcp_state, dup_acks=tcp_state.dup_acks + 1)
    if tcp_state.in_slow_start:
        cwnd = tcp_state.cwnd + 1.0
    else:
        cwnd = tcp_state.cwnd + 1.0 / tcp_state.cwnd
    return replace(tcp_state, cwnd=cwnd, dup_acks=0)


def should_reduce(classified_cause: Optional[LossLabel], policy: LossPolicy) -> bool:
    """Whether the policy shrinks the window for a loss with this cause."""
    if policy is LossPolicy.ALWAYS_REDUCE:
        return True
    return classified_cause is not LossLabel.WDROP


def reduced_ssthresh(cwnd: float) -> float:
    return float(max(math.floor(cwnd / 2.0), MIN_SSTHRESH))


def tcp_on_loss(
    tcp_state: TcpState,
    loss_signal: LossSignal,
    classified_cause: Optional[LossLabel],
    policy: LossPolicy,
) -> TcpState:
    """React to a detected loss.

    ``classified_cause`` is None when the cause is unknown; unknown causes
    are treated as congestion.
    """
    if not should_reduce(classified_cause, policy):
        return tcp_state
    ssthresh = reduced_ssthresh(tcp_state.cwnd)
    if loss_signal is LossSignal.TIMEOUT:
        return replace(tcp_state, ssthresh=ssthresh, cwnd=1.0, dup_acks=0)
    return replace(tcp_state, ssthresh=ssthresh, cwnd=ssthresh)


__all__ = [
    "Ack",
    "LossPolicy",
    "LossSignal",
    "TcpState",
    "initial_state",
    "reduced_ssthresh",
    "should_reduce",
    "tcp_on_ack",
    "tcp_on_loss",
]
