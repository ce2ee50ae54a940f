"""Tests for feature extraction, estimators and dataset CSV I/O."""

import numpy as np
import pytest

from app.core.errors import InputParseError, NoRttReferenceError, SchemaMismatchError, UsageError
from app.core.features import (
    CSV_COLUMNS,
    Dataset,
    class_summary,
    extract_features,
    load_dataset,
    save_dataset,
    update_jitter,
    update_srtt,
)
from app.core.labels import LossLabel
from app.core.sim.engine import run_simulation
from app.core.sim.trace import PacketEvent, PacketTrace, TraceSummary, load_trace, save_trace


def _trace(fates, rtt_ms=20.0, gap_s=0.05):
    events = []
    for seq, fate in enumerate(fates):
        send = seq * gap_s
        delivered = fate is LossLabel.UNDROP
        events.append(
            PacketEvent(
                seq=seq,
                send_time_s=send,
                size_bytes=1448,
                cwnd_at_send_segments=1.0 + seq,
                ssthresh_at_send_segments=64.0,
                fate=fate,
                ack_time_s=send + rtt_ms / 1000.0 if delivered else None,
                measured_rtt_ms=rtt_ms if delivered else None,
            )
        )
    events = tuple(events)
    return PacketTrace(events=events, summary=TraceSummary.from_events(events))


def test_srtt_examples():
    assert update_srtt(None, 37.0) == 37.0
    assert update_srtt(100.0, 20.0) == 90.0
    srtt = None
    for _ in range(50):
        srtt = update_srtt(srtt, 50.0)
    assert srtt == 50.0


def test_jitter_examples():
    assert update_jitter(0.0, 20.0, 10.0) == 0.625
    jitter = 0.0
    for _ in range(20):
        jitter = update_jitter(jitter, 33.0, 33.0)
    assert jitter == 0.0


def test_jitter_converges_on_alternating_rtts():
    jitter, prev = 0.0, 10.0
    for i in range(2000):
        curr = 20.0 if i % 2 == 0 else 10.0
        jitter = update_jitter(jitter, curr, prev)
        prev = curr
    assert jitter == pytest.approx(10.0, abs=1e-9)


def test_estimator_properties_random():
    """SRTT stays within the sample range and jitter stays non-negative."""
    rng = np.random.default_rng(23)
    for _ in range(1000):
        samples = rng.uniform(1, 100, size=int(rng.integers(1, 40)))
        srtt, jitter = None, 0.0
        for i, s in enumerate(samples):
            if i:
                jitter = update_jitter(jitter, s, samples[i - 1])
            srtt = update_srtt(srtt, s)
            assert samples[: i + 1].min() - 1e-9 <= srtt <= samples[: i + 1].max() + 1e-9
            assert jitter >= 0.0


def test_lossless_trace_rows(lossless_config):
    """N originals give N-1 rows, all unDrop."""
    trace = run_simulation(lossless_config)
    dataset = extract_features(trace)
    assert len(dataset) == trace.summary.total_packets - 1
    assert class_summary(dataset).counts == {"qDrop": 0, "wDrop": 0, "unDrop": len(dataset)}


def test_label_fidelity_one_of_each():
    fates = [LossLabel.UNDROP] * 5 + [LossLabel.QDROP] + [LossLabel.UNDROP] * 3 + [LossLabel.WDROP] + [LossLabel.UNDROP]
    dataset = extract_features(_trace(fates))
    counts = class_summary(dataset).counts
    assert counts["qDrop"] == 1 and counts["wDrop"] == 1
    assert len(dataset) == len(fates) - 1


def test_constant_rtt_fixed_point():
    """Constant RTT: jitter stays 0 and the average equals the last sample."""
    dataset = extract_features(_trace([LossLabel.UNDROP] * 30, rtt_ms=20.0, gap_s=0.05))
    cols = list(dataset.feature_names)
    X = dataset.X
    assert np.all(X[:, cols.index("jitter_ms")] == 0.0)
    assert np.array_equal(X[:, cols.index("avg_rtt_ms")], X[:, cols.index("rtt_ms")])
    assert X[-1, cols.index("rtt_ms")] == 20.0


def test_dropped_packet_carries_last_known_state():
    fates = [LossLabel.UNDROP] * 4 + [LossLabel.WDROP]
    dataset = extract_features(_trace(fates, rtt_ms=20.0, gap_s=0.05))
    row = dataset.rows[-1]
    assert row.label is LossLabel.WDROP
    assert row.rtt_ms == 20.0
    assert row.cwnd_segments == 5.0


def test_rows_start_once_the_first_ack_is_visible():
    """Packets sent before the first ACK lands have no RTT reference and yield no row."""
    dataset = extract_features(_trace([LossLabel.UNDROP] * 12, rtt_ms=75.0, gap_s=0.01))
    assert len(dataset) == 4
    assert dataset.rows[0].timestamp_s == pytest.approx(0.08)
    assert dataset.rows[0].rtt_ms == 75.0
    assert dataset.rows[0].avg_rtt_ms == 75.0


def _window_trace(first_fate):
    """Four segments in the opening window (init cwnd 4), then six more after the ACKs."""
    events = []
    sends = [0.000, 0.001, 0.002, 0.003] + [0.030 + 0.005 * i for i in range(6)]
    for seq, send in enumerate(sends):
        fate = first_fate if seq == 0 else LossLabel.UNDROP
        delivered = fate is LossLabel.UNDROP
        events.append(
            PacketEvent(
                seq=seq,
                send_time_s=send,
                size_bytes=1448,
                cwnd_at_send_segments=4.0,
                ssthresh_at_send_segments=64.0,
                fate=fate,
                ack_time_s=send + 0.02 if delivered else None,
                measured_rtt_ms=20.0 if delivered else None,
            )
        )
    events = tuple(events)
    return PacketTrace(events=events, summary=TraceSummary.from_events(events))


def test_opening_window_with_lost_first_segment_has_no_zero_rtt_rows():
    trace = _window_trace(LossLabel.WDROP)
    dataset = extract_features(trace, warmup=1)
    assert len(dataset) == 6
    assert all(row.rtt_ms == 20.0 and row.avg_rtt_ms == 20.0 for row in dataset.rows)
    assert extract_features(trace, warmup=5).rows[0].timestamp_s == pytest.approx(0.035)
    assert len(extract_features(trace, warmup=5)) == 5


def test_larger_initial_window_never_emits_zero_rtt(small_config):
    trace = run_simulation(small_config.with_overrides(init_cwnd_segments=4))
    dataset = extract_features(trace)
    rtt = dataset.X[:, list(dataset.feature_names).index("rtt_ms")]
    assert np.all(rtt > 0.0)

def test_no_rtt_reference():
    with pytest.raises(NoRttReferenceError, match="no RTT reference"):
        extract_features(_trace([LossLabel.QDROP, LossLabel.WDROP]))


def test_counts_match_trace_over_covered_packets(small_trace):
    """With no warm-up, rows cover exactly the originals sent once the first ACK has landed."""
    dataset = extract_features(small_trace, warmup=0)
    first_ack = min(ev.ack_time_s for ev in small_trace.events if ev.measured_rtt_ms is not None)
    covered = [ev for ev in small_trace.originals() if ev.send_time_s >= first_ack]
    counts = class_summary(dataset).counts
    assert counts["qDrop"] == sum(ev.fate is LossLabel.QDROP for ev in covered)
    assert counts["wDrop"] == sum(ev.fate is LossLabel.WDROP for ev in covered)
    assert len(dataset) == len(covered)


def test_extraction_survives_trace_round_trip(small_trace, tmp_path):
    path = save_trace(small_trace, tmp_path / "t.ndz")
    again = extract_features(load_trace(path))
    first = extract_features(small_trace)
    assert np.array_equal(again.X, first.X)
    assert np.array_equal(again.y, first.y)


def test_class_summary_percentages():
    y = np.array([0] + [1] + [2] * 198)
    summary = class_summary(Dataset(np.zeros((200, 6)), y))
    assert summary.percentages() == {"qDrop": 0.5, "wDrop": 0.5, "unDrop": 99.0}
    assert summary.total_drops == 2


def test_csv_round_trip_is_exact(sim_dataset, tmp_path):
    path = save_dataset(sim_dataset, tmp_path / "d.csv")
    text = path.read_bytes()
    assert text.startswith(",".join(CSV_COLUMNS).encode() + b"\n")
    assert b"\r" not in text
    loaded = load_dataset(path)
    assert np.array_equal(loaded.X, sim_dataset.X)
    assert np.array_equal(loaded.y, sim_dataset.y)
    assert loaded.fingerprint() == sim_dataset.fingerprint()


def test_csv_errors(tmp_path):
    header = ",".join(CSV_COLUMNS)
    bad_number = tmp_path / "bad.csv"
    bad_number.write_text(header + "\n0.1,1448,20,20,0,4,unDrop\n0.2,1448,abc,20,0,4,unDrop\n")
    with pytest.raises(InputParseError, match="line 3"):
        load_dataset(bad_number)

    missing_value = tmp_path / "nan.csv"
    missing_value.write_text(header + "\n0.1,1448,,20,0,4,unDrop\n")
    with pytest.raises(SchemaMismatchError):
        load_dataset(missing_value)

    missing_column = tmp_path / "cols.csv"
    missing_column.write_text("timestamp_s,pkt_size_bytes,rtt_ms,avg_rtt_ms,cwnd_segments,label\n0,1448,1,1,4,unDrop\n")
    with pytest.raises(SchemaMismatchError, match="jitter_ms"):
        load_dataset(missing_column)

    bad_label = tmp_path / "label.csv"
    bad_label.write_text(header + "\n0.1,1448,20,20,0,4,lost\n")
    with pytest.raises(InputParseError, match="unknown label"):
        load_dataset(bad_label)


def test_masking(blob_dataset):
    masked = blob_dataset.without(["rtt", "jitter"])
    assert masked.masked_features == ("rtt_ms", "avg_rtt_ms", "jitter_ms")
    assert masked.active_matrix().shape == (len(blob_dataset), 3)
    assert masked.fingerprint() == blob_dataset.fingerprint()
    with pytest.raises(UsageError):
        blob_dataset.without(["latency"])
    with pytest.raises(UsageError):
        blob_dataset.without(["timestamp", "size", "rtt", "jitter", "cwnd"])
