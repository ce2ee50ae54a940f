"""
Packet trace records and the trace file format.

Trace file: newline-delimited JSON, gzip-compressed when the path ends in
``.gz`` or ``.ndz``. The first line is a header object::

    {"format": "lossnet-trace", "version": 1, "columns": [...],
     "summary": {...}, "stats": {...}, "config": {...}}

Every following line is a JSON array whose first element tags the record:

    ["E", seq, send_time_s, size_bytes, cwnd_at_send_segments,
     ssthresh_at_send_segments, fate, ack_time_s, measured_rtt_ms,
     is_retransmission]
    ["T", time_s, mbps]          throughput sample
    ["C", time_s, segments]      congestion-window sample

Absent values are ``null``; floats are written with round-trip precision.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from app.core.errors import InputParseError
from app.core.labels import LossLabel

logger = logging.getLogger(__name__)

TRACE_FORMAT = "lossnet-trace"
TRACE_VERSION = 1
EVENT_COLUMNS = (
    "seq",
    "send_time_s",
    "size_bytes",
    "cwnd_at_send_segments",
    "ssthresh_at_send_segments",
    "fate",
    "ack_time_s",
    "measured_rtt_ms",
    "is_retransmission",
)
COMPRESSED_SUFFIXES = (".gz", ".ndz")

Series = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True, slots=True)
class PacketEvent:
    """One transmitted copy of a segment and its ground-truth fate."""

    seq: int
    send_time_s: float
    size_bytes: int
    cwnd_at_send_segments: float
    ssthresh_at_send_segments: float
    fate: LossLabel
    ack_time_s: Optional[float] = None
    measured_rtt_ms: Optional[float] = None
    is_retransmission: bool = False


@dataclass(frozen=True)
class TraceSummary:
    """Drop tallies over original transmissions."""

    total_packets: int
    qdrop_count: int
    wdrop_count: int
    retransmissions: int

    @property
    def total_drops(self) -> int:
        return self.qdrop_count + self.wdrop_count

    def percent(self, count: int) -> float:
        if self.total_packets == 0:
            return 0.0
        return 100.0 * count / self.total_packets

    @property
    def qdrop_pct(self) -> float:
        return self.percent(self.qdrop_count)

    @property
    def wdrop_pct(self) -> float:
        return self.percent(self.wdrop_count)

    @property
    def total_drop_pct(self) -> float:
        return self.percent(self.total_drops)

    @classmethod
    def from_events(cls, events: Iterable[PacketEvent]) -> "TraceSummary":
        total = qdrop = wdrop = retx = 0
        for ev in events:
            if ev.is_retransmission:
                retx += 1
                continue
            total += 1
            if ev.fate is LossLabel.QDROP:
                qdrop += 1
            elif ev.fate is LossLabel.WDROP:
                wdrop += 1
        return cls(total_packets=total, qdrop_count=qdrop, wdrop_count=wdrop, retransmissions=retx)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class RunStats:
    """Sender-side counters of one run."""

    end_time_s: float = 0.0
    acked_bytes: int = 0
    mean_throughput_mbps: float = 0.0
    loss_events: int = 0
    fast_retransmits: int = 0
    timeouts: int = 0
    reductions: int = 0
    skipped_reductions: int = 0
    peak_queue_occupancy: int = 0
    min_cwnd_segments: float = 1.0


@dataclass(frozen=True)
class PacketTrace:
    """Complete output of one simulation run. Immutable once returned."""

    events: Tuple[PacketEvent, ...]
    summary: TraceSummary
    throughput_series: Series = ()
    cwnd_series: Series = ()
    stats: RunStats = field(default_factory=RunStats)
    config: Dict[str, Any] = field(default_factory=dict)

    def originals(self) -> List[PacketEvent]:
        return [ev for ev in self.events if not ev.is_retransmission]

    def digest(self, include_config: bool = True) -> str:
        """sha256 of the uncompressed serialized trace.

        ``include_config=False`` hashes events, series and counters only, so
        runs that differ in policy name alone compare equal.
        """
        trace = self if include_config else replace(self, config={})
        return hashlib.sha256(dumps_trace(trace).encode("utf-8")).hexdigest()


def _dump_line(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _event_record(ev: PacketEvent) -> list:
    return [
        "E",
        ev.seq,
        ev.send_time_s,
        ev.size_bytes,
        ev.cwnd_at_send_segments,
        ev.ssthresh_at_send_segments,
        ev.fate.value,
        ev.ack_time_s,
        ev.measured_rtt_ms,
        1 if ev.is_retransmission else 0,
    ]


def dumps_trace(trace: PacketTrace) -> str:
    header = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "columns": list(EVENT_COLUMNS),
        "summary": trace.summary.to_dict(),
        "stats": asdict(trace.stats),
        "config": trace.config,
    }
    out = io.StringIO()
    out.write(_dump_line(header) + "\n")
    for ev in trace.events:
        out.write(_dump_line(_event_record(ev)) + "\n")
    for t, v in trace.throughput_series:
        out.write(_dump_line(["T", t, v]) + "\n")
    for t, v in trace.cwnd_series:
        out.write(_dump_line(["C", t, v]) + "\n")
    return out.getvalue()


def is_compressed(path: Path) -> bool:
    return Path(path).suffix in COMPRESSED_SUFFIXES


def save_trace(trace: PacketTrace, path: Path) -> Path:
    """Write a trace file. Gzip output uses mtime 0 so identical traces give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dumps_trace(trace).encode("utf-8")
    if is_compressed(path):
        with open(path, "wb") as raw:
            with gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as gz:
                gz.write(data)
    else:
        path.write_bytes(data)
    logger.info("Wrote trace with %d events to %s", len(trace.events), path)
    return path


def _parse_event(rec: list) -> PacketEvent:
    if len(rec) != len(EVENT_COLUMNS) + 1:
        raise ValueError(f"event record has {len(rec) - 1} fields, expected {len(EVENT_COLUMNS)}")
    _, seq, send, size, cwnd, ssthresh, fate, ack, rtt, retx = rec
    return PacketEvent(
        seq=int(seq),
        send_time_s=float(send),
        size_bytes=int(size),
        cwnd_at_send_segments=float(cwnd),
        ssthresh_at_send_segments=float(ssthresh),
        fate=LossLabel.parse(fate),
        ack_time_s=None if ack is None else float(ack),
        measured_rtt_ms=None if rtt is None else float(rtt),
        is_retransmission=bool(retx),
    )


def loads_trace(data: bytes, source: Optional[Path] = None) -> PacketTrace:
    """Parse serialized trace bytes. Errors carry the byte offset of the bad line."""
    offset = 0
    header = None
    events: List[PacketEvent] = []
    throughput: List[Tuple[float, float]] = []
    cwnd: List[Tuple[float, float]] = []
    for line in data.splitlines(keepends=True):
        line_offset = offset
        offset += len(line)
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if header is None:
                if not isinstance(obj, dict) or obj.get("format") != TRACE_FORMAT:
                    raise ValueError("missing trace header")
                if obj.get("version") != TRACE_VERSION:
                    raise ValueError(f"unsupported trace version {obj.get('version')}")
                header = obj
                continue
            tag = obj[0]
            if tag == "E":
                events.append(_parse_event(obj))
            elif tag == "T":
                throughput.append((float(obj[1]), float(obj[2])))
            elif tag == "C":
                cwnd.append((float(obj[1]), float(obj[2])))
            else:
                raise ValueError(f"unknown record tag {tag!r}")
        except (ValueError, TypeError, IndexError, KeyError) as exc:
            raise InputParseError(f"malformed trace record: {exc}", path=source, offset=line_offset) from None
    if header is None:
        raise InputParseError("empty trace file", path=source, offset=0)
    summary = TraceSummary.from_events(events)
    if summary.to_dict() != header.get("summary"):
        raise InputParseError("trace summary does not match its events", path=source, offset=0)
    try:
        stats = RunStats(**header.get("stats", {}))
    except TypeError as exc:
        raise InputParseError(f"malformed trace stats: {exc}", path=source, offset=0) from None
    return PacketTrace(
        events=tuple(events),
        summary=summary,
        throughput_series=tuple(throughput),
        cwnd_series=tuple(cwnd),
        stats=stats,
        config=header.get("config", {}),
    )


def load_trace(path: Path) -> PacketTrace:
    path = Path(path)
    if not path.exists():
        raise InputParseError("trace not found", path=path)
    raw = path.read_bytes()
    if is_compressed(path):
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise InputParseError(f"cannot decompress trace: {exc}", path=path, offset=0) from None
    return loads_trace(raw, source=path)


def series_rows(series: Sequence[Tuple[float, float]]) -> List[Dict[str, float]]:
    return [{"time_s": t, "value": v} for t, v in series]


__all__ = [
    "EVENT_COLUMNS",
    "PacketEvent",
    "PacketTrace",
    "RunStats",
    "TraceSummary",
    "dumps_trace",
    "load_trace",
    "loads_trace",
    "save_trace",
]
