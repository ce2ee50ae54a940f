"""Wireless hop loss models."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.core.settings import ChannelConfig


class ChannelOutcome(Enum):
    DELIVERED = "delivered"
    WDROP = "wDrop"


@dataclass
class ChannelState:
    """Mutable per-run channel state. ``bad`` is only used by Gilbert-Elliott."""

    config: ChannelConfig
    bad: bool = False


def wireless_transmit(channel_state: ChannelState, packet, rng: np.random.Generator) -> ChannelOutcome:
    """Decide the fate of one packet on the wireless hop.

    Draws come only from ``rng``, the channel's own stream. Gilbert-Elliott
    first advances the Good/Bad state, then draws the loss with the
    probability of the state it landed in. Each call takes exactly one draw
    for Bernoulli and two for Gilbert-Elliott, so runs that share a seed stay
    aligned packet for packet.
    """
    cfg = channel_state.config
    if cfg.variant == "bernoulli":
        lost = rng.random() < cfg.p_loss
    else:
        flip = rng.random()
        if channel_state.bad:
            if flip < cfg.p_b2g:
                channel_state.bad = False
        elif flip < cfg.p_g2b:
            channel_state.bad = True
        p = cfg.p_bad if channel_state.bad else cfg.p_good
        lost = rng.random() < p
    return ChannelOutcome.WDROP if lost else ChannelOutcome.DELIVERED


__all__ = ["ChannelOutcome", "ChannelState", "wireless_transmit"]
