"""Tail-drop FIFO queue in front of the bottleneck link."""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Deque


class Admission(Enum):
    ACCEPTED = "accepted"
    QDROP = "qDrop"


@dataclass
class QueueState:
    """Packets at the bottleneck. Occupancy counts the packet in service."""

    capacity: int
    packets: Deque[Any] = field(default_factory=deque)
    peak_occupancy: int = 0

    @property
    def occupancy(self) -> int:
        return len(self.packets)

    def head(self):
        return self.packets[0]

    def pop(self):
        return self.packets.popleft()


def enqueue_bottleneck(queue_state: QueueState, packet) -> Admission:
    """Admit ``packet`` unless the queue is full (tail drop)."""
    if queue_state.occupancy >= queue_state.capacity:
        return Admission.QDROP
    queue_state.packets.append(packet)
    if queue_state.occupancy > queue_state.peak_occupancy:
        queue_state.peak_occupancy = queue_state.occupancy
    return Admission.ACCEPTED


__all__ = ["Admission", "QueueState", "enqueue_bottleneck"]
