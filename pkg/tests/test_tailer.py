"""Rotation-safe tailing: ordering, cursors, outage recovery."""

import os
import threading
import time

from iotsentry.zeekio import (
    Cursor,
    NoticeTailer,
    ZeekNotice,
    compose_header,
    compose_notice_line,
    parse_header,
    parse_notice_line,
)


def make_lines(n, start_ts=1700000000.0, ip_base=10):
    return [
        compose_notice_line(ts=start_ts + i, src_ip=f"192.168.1.{ip_base + i}", note="Scan::Port_Scan", msg=f"m{i}")
        for i in range(n)
    ]


def drain(tailer, expect, timeout=5.0):
    out = []
    deadline = time.monotonic() + timeout
    while len(out) < expect and time.monotonic() < deadline:
        out.extend(tailer.poll())
        time.sleep(0.01)
    return out


def offline_parse(content: str):
    """Oracle: parse a whole file's text independently of the tailer."""
    lines = content.splitlines()
    schema = parse_header([l for l in lines if l.startswith("#")])
    records = []
    for i, line in enumerate(lines, 1):
        record = parse_notice_line(line, schema, i)
        if record is not None:
            records.append(record)
    return records


def test_stream_order_matches_file_order(tmp_path):
    path = tmp_path / "notice.log"
    lines = make_lines(5)
    path.write_text(compose_header() + "".join(lines))
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    got = drain(tailer, 5)
    assert len(got) == 5
    oracle = offline_parse(path.read_text())
    assert [r for _, r in got] == oracle
    cursors = [c for c, _ in got]
    assert cursors == sorted(cursors)
    assert all(c.generation == 0 for c in cursors)


def test_incremental_appends(tmp_path):
    path = tmp_path / "notice.log"
    path.write_text(compose_header())
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    assert tailer.poll() == []
    with open(path, "a") as fh:
        fh.write(make_lines(2)[0])
    got = drain(tailer, 1)
    assert len(got) == 1 and isinstance(got[0][1], ZeekNotice)


def test_partial_line_buffered_until_complete(tmp_path):
    path = tmp_path / "notice.log"
    path.write_text(compose_header())
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    line = make_lines(1)[0]
    with open(path, "a") as fh:
        fh.write(line[:10])
        fh.flush()
        assert drain(tailer, 1, timeout=0.1) == []
        fh.write(line[10:])
    got = drain(tailer, 1)
    assert len(got) == 1
    assert got[0][1].raw == line.rstrip("\n")


def test_rotation_increments_generation_and_matches_offline_oracle(tmp_path):
    path = tmp_path / "notice.log"
    seg1 = compose_header() + "".join(make_lines(3, ip_base=10))
    seg2 = compose_header() + "".join(make_lines(2, start_ts=1800000000.0, ip_base=50))
    path.write_text(seg1)
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    first = drain(tailer, 3)
    assert len(first) == 3

    # rotate: replace the file wholesale (new inode, fresh header)
    rotated = tmp_path / "notice.log.new"
    rotated.write_text(seg2)
    os.replace(rotated, path)
    second = drain(tailer, 2)
    assert len(second) == 2

    oracle = offline_parse(seg1) + offline_parse(seg2)
    assert [r for _, r in first + second] == oracle
    assert {c.generation for c, _ in first} == {0}
    assert {c.generation for c, _ in second} == {1}
    assert tailer.stats.rotations == 1


def test_truncation_treated_as_rotation(tmp_path):
    path = tmp_path / "notice.log"
    path.write_text(compose_header() + "".join(make_lines(2)))
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    assert len(drain(tailer, 2)) == 2
    path.write_text(compose_header() + make_lines(1, ip_base=99)[0])
    got = drain(tailer, 1)
    assert len(got) == 1
    assert got[0][0].generation == 1


def test_source_unavailable_surfaced_once_then_recovers(tmp_path):
    path = tmp_path / "missing.log"
    outages = []
    tailer = NoticeTailer(str(path), poll_interval=0.01, on_source_unavailable=outages.append)
    for _ in range(5):
        assert tailer.poll() == []
    assert len(outages) == 1  # surfaced once per outage, not per poll
    assert tailer.stats.outages == 1

    path.write_text(compose_header() + make_lines(1)[0])
    got = drain(tailer, 1)
    assert len(got) == 1


def test_data_before_any_header_quarantines(tmp_path):
    path = tmp_path / "notice.log"
    path.write_text("no header here\n")
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    got = drain(tailer, 1)
    assert len(got) == 1
    assert "preamble" in got[0][1].reason


def test_events_generator_with_stop(tmp_path):
    path = tmp_path / "notice.log"
    path.write_text(compose_header() + "".join(make_lines(3)))
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    stop = threading.Event()
    got = []
    for cursor, record in tailer.events(stop):
        got.append(record)
        if len(got) == 3:
            stop.set()
    assert len(got) == 3


def test_stats_totality(tmp_path):
    path = tmp_path / "notice.log"
    content = compose_header() + make_lines(2)[0] + "garbage\n" + "\n" + make_lines(1, ip_base=77)[0]
    path.write_text(content)
    tailer = NoticeTailer(str(path), poll_interval=0.01)
    drain(tailer, 3)
    stats = tailer.stats
    assert stats.lines == len(content.splitlines())
    assert stats.notices + stats.quarantined + stats.skipped == stats.lines
    assert stats.notices == 2 and stats.quarantined == 1


def test_cursor_ordering():
    assert Cursor(0, 5) < Cursor(1, 1) < Cursor(1, 2)
