"""Tests for the wireless channel and the bottleneck queue."""

from collections import deque

import numpy as np

from app.core.settings import ChannelConfig
from app.core.sim.bottleneck import Admission, QueueState, enqueue_bottleneck
from app.core.sim.calibrate import wilson_interval
from app.core.sim.channel import ChannelOutcome, ChannelState, wireless_transmit


def _rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def test_bernoulli_extremes():
    """p_loss=1 always drops, p_loss=0 never does."""
    rng = _rng()
    always = ChannelState(ChannelConfig(variant="bernoulli", p_loss=1.0))
    never = ChannelState(ChannelConfig(variant="bernoulli", p_loss=0.0))
    for i in range(1000):
        assert wireless_transmit(always, i, rng) is ChannelOutcome.WDROP
        assert wireless_transmit(never, i, rng) is ChannelOutcome.DELIVERED


def test_bernoulli_rate_within_wilson_interval():
    """Observed loss over 10^5 packets falls inside the 99% Wilson interval around p."""
    p = 0.01
    state = ChannelState(ChannelConfig(variant="bernoulli", p_loss=p))
    rng = _rng(11)
    n = 100_000
    drops = sum(wireless_transmit(state, i, rng) is ChannelOutcome.WDROP for i in range(n))
    lo, hi = wilson_interval(drops, n)
    assert lo <= p <= hi


def test_gilbert_elliott_stationary_rate():
    """Empirical loss over 10^6 packets is within 0.5 pp of the stationary loss."""
    cfg = ChannelConfig(variant="gilbert_elliott", p_good=0.005, p_bad=0.3, p_g2b=0.01, p_b2g=0.2)
    state = ChannelState(cfg)
    rng = _rng(5)
    n = 1_000_000
    drops = sum(wireless_transmit(state, i, rng) is ChannelOutcome.WDROP for i in range(n))
    assert abs(drops / n - cfg.stationary_loss()) <= 0.005


def test_channel_draws_only_from_its_stream():
    """Same seed gives the same fates regardless of other generators."""
    cfg = ChannelConfig(variant="gilbert_elliott")
    a, b = ChannelState(cfg), ChannelState(cfg)
    ra, rb = _rng(9), _rng(9)
    other = _rng(1)
    for i in range(5000):
        other.random()
        assert wireless_transmit(a, i, ra) is wireless_transmit(b, i, rb)


def test_draws_per_packet():
    """Bernoulli consumes one draw per packet and Gilbert-Elliott exactly two."""
    for variant, per_call in (("bernoulli", 1), ("gilbert_elliott", 2)):
        state = ChannelState(ChannelConfig(variant=variant))
        rng, reference = _rng(3), _rng(3)
        for i in range(100):
            wireless_transmit(state, i, rng)
        reference.random(100 * per_call)
        assert rng.random() == reference.random()


def test_tail_drop_at_capacity():
    """Arrivals are accepted until the queue is full, then dropped."""
    q = QueueState(capacity=3)
    assert [enqueue_bottleneck(q, i) for i in range(5)] == [Admission.ACCEPTED] * 3 + [Admission.QDROP] * 2
    assert q.occupancy == 3
    assert list(q.packets) == [0, 1, 2]


def test_zero_capacity_drops_everything():
    """A zero-length queue drops every arrival."""
    q = QueueState(capacity=0)
    assert all(enqueue_bottleneck(q, i) is Admission.QDROP for i in range(100))
    assert q.occupancy == 0


def test_queue_property_random_traffic():
    """Occupancy never exceeds capacity, drops happen only when full, FIFO is kept."""
    rng = _rng(3)
    for case in range(1000):
        capacity = int(rng.integers(0, 8))
        q = QueueState(capacity=capacity)
        shadow = deque()
        next_id = 0
        for _ in range(40):
            if rng.random() < 0.6:
                full = q.occupancy == capacity
                result = enqueue_bottleneck(q, next_id)
                assert (result is Admission.QDROP) == full
                if result is Admission.ACCEPTED:
                    shadow.append(next_id)
                next_id += 1
            elif q.occupancy:
                assert q.pop() == shadow.popleft()
            assert 0 <= q.occupancy <= capacity
        assert q.peak_occupancy <= capacity
