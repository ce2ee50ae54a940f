"""
Event-driven simulation of one long TCP flow.

    server --wired_delay--> [bottleneck FIFO, rate] --wireless_delay, channel--> client
    client --------------- lossless ACK path (wireless + wired delay) ------> server

Every transmitted copy of a segment becomes one ``PacketEvent``; its fate is
decided where it dies (bottleneck queue or wireless hop) or set to unDrop when
it reaches the client. ACKs are cumulative and echo the copy they were
triggered by, which is how RTT samples are taken (Karn's rule: a segment
that has been retransmitted gives no sample).
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Dict, List, Optional, Protocol, Set, Tuple

import numpy as np

from app.core.errors import ConfigError
from app.core.features import update_jitter, update_srtt
from app.core.labels import LossLabel
from app.core.settings import SimConfig, validate_config
from app.core.sim.bottleneck import Admission, QueueState, enqueue_bottleneck
from app.core.sim.channel import ChannelOutcome, ChannelState, wireless_transmit
from app.core.sim.tcp import (
    Ack,
    LossPolicy,
    LossSignal,
    TcpState,
    initial_state,
    should_reduce,
    tcp_on_ack,
    tcp_on_loss,
)
from app.core.sim.trace import PacketEvent, PacketTrace, RunStats, TraceSummary
from config import FEATURE_NAMES

logger = logging.getLogger(__name__)


class EventKind(IntEnum):
    ARRIVE_QUEUE = 0
    DEPART = 1
    ARRIVE_CLIENT = 2
    ARRIVE_ACK = 3
    RTO = 4
    SAMPLE = 5


@dataclass(frozen=True)
class LossContext:
    """What the sender knows about a lost segment when it must react."""

    seq: int
    send_time_s: float
    features: Dict[str, float]


class LossClassifier(Protocol):
    def classify(self, context: LossContext) -> LossLabel: ...


@dataclass(slots=True)
class _Copy:
    seq: int
    send_time_s: float
    size_bytes: int
    cwnd: float
    ssthresh: float
    is_retransmission: bool
    features: Tuple[float, float, float]
    fate: Optional[LossLabel] = None
    ack_time_s: Optional[float] = None
    rtt_ms: Optional[float] = None

    def to_event(self) -> PacketEvent:
        return PacketEvent(
            seq=self.seq,
            send_time_s=self.send_time_s,
            size_bytes=self.size_bytes,
            cwnd_at_send_segments=self.cwnd,
            ssthresh_at_send_segments=self.ssthresh,
            fate=self.fate,
            ack_time_s=self.ack_time_s,
            measured_rtt_ms=self.rtt_ms,
            is_retransmission=self.is_retransmission,
        )


@dataclass
class _RttEstimator:
    last_ms: float = 0.0
    srtt_ms: float = 0.0
    jitter_ms: float = 0.0
    samples: int = 0

    def add(self, sample_ms: float) -> None:
        if self.samples >= 1:
            self.jitter_ms = update_jitter(self.jitter_ms, sample_ms, self.last_ms)
        self.srtt_ms = update_srtt(self.srtt_ms if self.samples else None, sample_ms)
        self.last_ms = sample_ms
        self.samples += 1

    def snapshot(self) -> Tuple[float, float, float]:
        return (self.last_ms, self.srtt_ms, self.jitter_ms)


@dataclass
class _Counters:
    loss_events: int = 0
    fast_retransmits: int = 0
    timeouts: int = 0
    reductions: int = 0
    skipped_reductions: int = 0
    acked_bytes: int = 0
    min_cwnd: float = field(default=float("inf"))


def spawn_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent channel and payload RNG streams for one run."""
    channel_seq, payload_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(channel_seq)), np.random.Generator(np.random.PCG64(payload_seq))


class FlowSimulator:
    """One run of the flow. Use ``run()`` once; the instance is not reusable."""

    def __init__(self, config: SimConfig, classifier: Optional[LossClassifier] = None):
        self.config = config
        self.policy = LossPolicy(config.policy.name)
        if self.policy is LossPolicy.MODEL_DISCRIMINATE and classifier is None:
            raise ConfigError("policy model_discriminate needs a loaded classifier (set policy.model_path)")
        self.classifier = classifier

        self.channel_rng, self.payload_rng = spawn_streams(config.seed)
        self.channel = ChannelState(config.channel)
        self.queue = QueueState(capacity=config.queue_capacity_pkts)
        self.tcp: TcpState = initial_state(
            config.init_cwnd_segments, config.init_ssthresh_segments, config.dupack_threshold
        )

        self.now = 0.0
        self._events: List[Tuple[float, int, EventKind, Any]] = []
        self._event_id = 0

        self.wired_s = config.wired_delay_ms / 1000.0
        self.wireless_s = config.wireless_delay_ms / 1000.0
        self.rto_s = config.rto_ms / 1000.0

        self.copies: List[_Copy] = []
        self.latest_copy: Dict[int, int] = {}
        self.sizes: List[int] = []
        self.retransmitted: Set[int] = set()
        self.snd_una = 0
        self.snd_nxt = 0
        self.in_recovery = False
        self.recover = -1
        self.reduced_in_episode = False
        self.rto_generation = 0
        self.rto_armed = False

        self.rcv_nxt = 0
        self.out_of_order: Set[int] = set()

        self.rtt = _RttEstimator()
        self.counters = _Counters()
        self.sending = True
        self.end_time_s = 0.0
        self._last_sample_bytes = 0
        self.throughput_series: List[Tuple[float, float]] = []
        self.cwnd_series: List[Tuple[float, float]] = []

    def schedule(self, t: float, kind: EventKind, payload: Any = None) -> None:
        heapq.heappush(self._events, (t, self._event_id, kind, payload))
        self._event_id += 1

    # -- sender ---------------------------------------------------------

    def _segment_size(self) -> int:
        payload = self.config.payload
        if payload.pattern == "constant":
            return self.config.mss_bytes
        if self.payload_rng.random() < payload.full_fraction:
            return self.config.mss_bytes
        return int(self.payload_rng.integers(payload.min_partial_bytes, self.config.mss_bytes))

    def _transmit(self, seq: int, is_retransmission: bool) -> None:
        copy = _Copy(
            seq=seq,
            send_time_s=self.now,
            size_bytes=self.sizes[seq],
            cwnd=self.tcp.cwnd,
            ssthresh=self.tcp.ssthresh,
            is_retransmission=is_retransmission,
            features=self.rtt.snapshot(),
        )
        index = len(self.copies)
        self.copies.append(copy)
        self.latest_copy[seq] = index
        if is_retransmission:
            self.retransmitted.add(seq)
        self.counters.min_cwnd = min(self.counters.min_cwnd, self.tcp.cwnd)
        self.schedule(self.now + self.wired_s, EventKind.ARRIVE_QUEUE, index)
        if not self.rto_armed:
            self._arm_rto()

    def _window_open(self) -> bool:
        window = min(int(self.tcp.cwnd), self.config.rwnd_segments)
        pipe = (self.snd_nxt - self.snd_una) - self.tcp.dup_acks
        return pipe < window

    def _try_send(self) -> None:
        target = self.config.target_packets
        while self.sending and self._window_open():
            if target is not None and self.snd_nxt >= target:
                break
            self.sizes.append(self._segment_size())
            self._transmit(self.snd_nxt, is_retransmission=False)
            self.snd_nxt += 1

    def _arm_rto(self) -> None:
        self.rto_generation += 1
        self.rto_armed = True
        self.schedule(self.now + self.rto_s, EventKind.RTO, self.rto_generation)

    def _disarm_rto(self) -> None:
        self.rto_generation += 1
        self.rto_armed = False

    def _classify(self, seq: int) -> Optional[LossLabel]:
        """Cause the policy attributes to the loss of ``seq``. None means unknown."""
        if self.policy is LossPolicy.ALWAYS_REDUCE:
            return None
        copy = self.copies[self.latest_copy[seq]]
        if self.policy is LossPolicy.ORACLE_DISCRIMINATE:
            return copy.fate
        rtt_ms, avg_rtt_ms, jitter_ms = copy.features
        values = (copy.send_time_s, float(copy.size_bytes), rtt_ms, avg_rtt_ms, jitter_ms, copy.cwnd)
        context = LossContext(seq=seq, send_time_s=copy.send_time_s, features=dict(zip(FEATURE_NAMES, values)))
        return self.classifier.classify(context)

    def _react(self, signal: LossSignal, seq: int) -> bool:
        """Apply the policy to one detected loss; returns whether the window was reduced."""
        self.counters.loss_events += 1
        cause = self._classify(seq)
        reduce = should_reduce(cause, self.policy)
        self.tcp = tcp_on_loss(self.tcp, signal, cause, self.policy)
        if reduce:
            self.counters.reductions += 1
        else:
            self.counters.skipped_reductions += 1
        logger.debug("t=%.6f %s seq=%d cause=%s reduce=%s cwnd=%.2f", self.now, signal.value, seq, cause, reduce, self.tcp.cwnd)
        return reduce

    def _on_ack(self, ack_no: int, echoed: int) -> None:
        copy = self.copies[echoed]
        if not copy.is_retransmission and copy.ack_time_s is None:
            copy.ack_time_s = self.now
            if copy.seq not in self.retransmitted:
                copy.rtt_ms = (self.now - copy.send_time_s) * 1000.0
                self.rtt.add(copy.rtt_ms)

        if ack_no > self.snd_una:
            self.counters.acked_bytes += sum(self.sizes[self.snd_una:ack_no])
            self.snd_una = ack_no
            if self.in_recovery:
                if ack_no > self.recover:
                    self.in_recovery = False
                    self.tcp = TcpState(self.tcp.cwnd, self.tcp.ssthresh, 0, self.tcp.dupack_threshold)
                else:
                    self.tcp = TcpState(self.tcp.cwnd, self.tcp.ssthresh, 0, self.tcp.dupack_threshold)
                    # partial ACK: next hole; at most one reduction per episode
                    if self.reduced_in_episode:
                        self.counters.loss_events += 1
                    else:
                        self.reduced_in_episode = self._react(LossSignal.TRIPLE_DUPACK, self.snd_una)
                    self._transmit(self.snd_una, is_retransmission=True)
            else:
                self.tcp = tcp_on_ack(self.tcp, Ack(ack_no))
            if self.snd_una < self.snd_nxt:
                self._arm_rto()
            else:
                self._disarm_rto()
            if self.config.target_packets is not None and self.snd_una >= self.config.target_packets:
                self._stop()
                return
        elif ack_no == self.snd_una and self.snd_nxt > self.snd_una:
            self.tcp = tcp_on_ack(self.tcp, Ack(ack_no, is_duplicate=True))
            if not self.in_recovery and self.tcp.fast_retransmit_due:
                self.counters.fast_retransmits += 1
                self.in_recovery = True
                self.recover = self.snd_nxt - 1
                self.reduced_in_episode = self._react(LossSignal.TRIPLE_DUPACK, self.snd_una)
                self._transmit(self.snd_una, is_retransmission=True)
        self._try_send()

    def _on_timeout(self, generation: int) -> None:
        if generation != self.rto_generation or self.snd_una >= self.snd_nxt:
            return
        self.rto_armed = False
        self.counters.timeouts += 1
        self.in_recovery = True
        self.recover = self.snd_nxt - 1
        self.reduced_in_episode = self._react(LossSignal.TIMEOUT, self.snd_una)
        self.tcp = TcpState(self.tcp.cwnd, self.tcp.ssthresh, 0, self.tcp.dupack_threshold)
        self._transmit(self.snd_una, is_retransmission=True)
        self._try_send()

    # -- network --------------------------------------------------------

    def _service_time(self, index: int) -> float:
        return self.copies[index].size_bytes * 8 / (self.config.wired_rate_mbps * 1e6)

    def _on_arrive_queue(self, index: int) -> None:
        if enqueue_bottleneck(self.queue, index) is Admission.QDROP:
            self.copies[index].fate = LossLabel.QDROP
            return
        if self.queue.occupancy == 1:
            self.schedule(self.now + self._service_time(index), EventKind.DEPART)

    def _on_depart(self) -> None:
        index = self.queue.pop()
        if self.queue.occupancy:
            self.schedule(self.now + self._service_time(self.queue.head()), EventKind.DEPART)
        if wireless_transmit(self.channel, index, self.channel_rng) is ChannelOutcome.WDROP:
            self.copies[index].fate = LossLabel.WDROP
            return
        self.schedule(self.now + self.wireless_s, EventKind.ARRIVE_CLIENT, index)

    def _on_arrive_client(self, index: int) -> None:
        copy = self.copies[index]
        copy.fate = LossLabel.UNDROP
        if copy.seq == self.rcv_nxt:
            self.rcv_nxt += 1
            while self.rcv_nxt in self.out_of_order:
                self.out_of_order.remove(self.rcv_nxt)
                self.rcv_nxt += 1
        elif copy.seq > self.rcv_nxt:
            self.out_of_order.add(copy.seq)
        if self.sending:
            self.schedule(self.now + self.wireless_s + self.wired_s, EventKind.ARRIVE_ACK, (self.rcv_nxt, index))

    def _on_sample(self) -> None:
        interval = self.config.sample_interval_s
        delta = self.counters.acked_bytes - self._last_sample_bytes
        self._last_sample_bytes = self.counters.acked_bytes
        self.throughput_series.append((self.now, delta * 8 / interval / 1e6))
        self.cwnd_series.append((self.now, self.tcp.cwnd))
        self.schedule(self.now + interval, EventKind.SAMPLE)

    def _stop(self) -> None:
        self.sending = False
        self.end_time_s = self.now

    # -- loop -----------------------------------------------------------

    def run(self) -> PacketTrace:
        cfg = self.config
        limit = cfg.duration_s if cfg.duration_s is not None else cfg.max_duration_s
        self.schedule(cfg.sample_interval_s, EventKind.SAMPLE)
        self._try_send()

        while self._events:
            t, _, kind, payload = heapq.heappop(self._events)
            if self.sending and t > limit:
                self.now = limit
                self._stop()
            if not self.sending and kind in (EventKind.ARRIVE_ACK, EventKind.RTO, EventKind.SAMPLE):
                continue
            self.now = t
            if kind is EventKind.ARRIVE_QUEUE:
                self._on_arrive_queue(payload)
            elif kind is EventKind.DEPART:
                self._on_depart()
            elif kind is EventKind.ARRIVE_CLIENT:
                self._on_arrive_client(payload)
            elif kind is EventKind.ARRIVE_ACK:
                self._on_ack(*payload)
            elif kind is EventKind.RTO:
                self._on_timeout(payload)
            elif kind is EventKind.SAMPLE:
                self._on_sample()

        return self._build_trace()

    def _build_trace(self) -> PacketTrace:
        events = tuple(copy.to_event() for copy in self.copies)
        counters = self.counters
        duration = self.end_time_s
        stats = RunStats(
            end_time_s=duration,
            acked_bytes=counters.acked_bytes,
            mean_throughput_mbps=counters.acked_bytes * 8 / duration / 1e6 if duration > 0 else 0.0,
            loss_events=counters.loss_events,
            fast_retransmits=counters.fast_retransmits,
            timeouts=counters.timeouts,
            reductions=counters.reductions,
            skipped_reductions=counters.skipped_reductions,
            peak_queue_occupancy=self.queue.peak_occupancy,
            min_cwnd_segments=counters.min_cwnd if self.copies else self.tcp.cwnd,
        )
        return PacketTrace(
            events=events,
            summary=TraceSummary.from_events(events),
            throughput_series=tuple(self.throughput_series),
            cwnd_series=tuple(self.cwnd_series),
            stats=stats,
            config=self.config.model_dump(mode="json"),
        )


def load_policy_classifier(config: SimConfig) -> Optional[LossClassifier]:
    """Load the classifier a model_discriminate config points at."""
    if config.policy.name != LossPolicy.MODEL_DISCRIMINATE.value:
        return None
    if not config.policy.model_path:
        raise ConfigError("policy model_discriminate needs policy.model_path")
    from app.core.ml.model import ModelLossClassifier, load_model

    return ModelLossClassifier(load_model(config.policy.model_path))


def run_simulation(config: SimConfig, classifier: Optional[LossClassifier] = None) -> PacketTrace:
    """Run one flow to completion and return its labeled trace.

    With policy model_discriminate and no ``classifier`` given, the model
    file named by ``policy.model_path`` is loaded before the first event.
    """
    config = validate_config(config)
    if classifier is None:
        classifier = load_policy_classifier(config)
    logger.info(
        "Simulating seed=%d policy=%s rate=%.2fMbps queue=%d base_rtt=%.1fms",
        config.seed,
        config.policy.name,
        config.wired_rate_mbps,
        config.queue_capacity_pkts,
        config.base_rtt_ms(),
    )
    trace = FlowSimulator(config, classifier).run()
    s = trace.summary
    logger.info(
        "Finished at t=%.2fs: %d packets, qDrop %.2f%%, wDrop %.2f%%, %d retransmissions",
        trace.stats.end_time_s,
        s.total_packets,
        s.qdrop_pct,
        s.wdrop_pct,
        s.retransmissions,
    )
    return trace


__all__ = [
    "EventKind",
    "FlowSimulator",
    "LossClassifier",
    "LossContext",
    "load_policy_classifier",
    "run_simulation",
    "spawn_streams",
]
