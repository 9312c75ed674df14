"""Continuous notice-log tailing with rotation-safe cursors.

One tailer per source; the emitted stream has a single consumer. Records
carry a monotone (generation, line_number) cursor so downstream stages can
deduplicate after an at-least-once replay.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

from ..errors import DuplicateField, MissingFields, SourceUnavailable
from .parser import NoticeSchema, ParseQuarantine, ZeekNotice, parse_header, parse_notice_line

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Cursor:
    generation: int
    line_number: int


@dataclass
class TailerStats:
    lines: int = 0
    notices: int = 0
    quarantined: int = 0
    skipped: int = 0
    rotations: int = 0
    outages: int = 0


@dataclass
class _Generation:
    header_lines: list[str] = field(default_factory=list)
    schema: Optional[NoticeSchema] = None
    header_error: Optional[str] = None


class NoticeTailer:
    """Follow an append-only notice log, emitting parsed records in file order.

    Survives rotation: when the inode changes or the file shrinks, the tailer
    reopens from the start of the new file, re-reads its preamble, and bumps
    the cursor generation. A missing or unreadable source is surfaced once
    via ``on_source_unavailable`` and then retried with bounded backoff.
    """

    def __init__(
        self,
        path: str,
        poll_interval: float = 0.2,
        backoff_max: float = 2.0,
        on_source_unavailable: Callable[[SourceUnavailable], None] | None = None,
    ):
        self.path = str(path)
        self.poll_interval = poll_interval
        self.backoff_max = backoff_max
        self.on_source_unavailable = on_source_unavailable
        self.stats = TailerStats()
        self._generation = 0
        self._line_number = 0
        self._offset = 0
        self._inode: Optional[int] = None
        self._buffer = b""
        self._gen_state = _Generation()
        self._outage_reported = False

    # -- internals ---------------------------------------------------------

    def _report_outage(self, reason: str) -> None:
        if not self._outage_reported:
            self._outage_reported = True
            self.stats.outages += 1
            err = SourceUnavailable(f"{self.path}: {reason}")
            logger.warning("notice source unavailable: %s", err.message)
            if self.on_source_unavailable is not None:
                self.on_source_unavailable(err)

    def _rotate(self) -> None:
        self._generation += 1
        self._line_number = 0
        self._offset = 0
        self._buffer = b""
        self._gen_state = _Generation()
        self.stats.rotations += 1
        logger.info("notice source rotated, generation now %d", self._generation)

    def _consume_header_line(self, line: str) -> None:
        state = self._gen_state
        state.header_lines.append(line)
        if line.startswith("#fields") or state.schema is not None:
            try:
                state.schema = parse_header(state.header_lines)
                state.header_error = None
            except (MissingFields, DuplicateField) as exc:
                state.schema = None
                state.header_error = exc.message

    def _emit(self, line: str) -> Union[ZeekNotice, ParseQuarantine, None]:
        self._line_number += 1
        self.stats.lines += 1
        if not line.strip():
            self.stats.skipped += 1
            return None
        if line.startswith("#"):
            self._consume_header_line(line)
            self.stats.skipped += 1
            return None
        state = self._gen_state
        if state.schema is None:
            reason = state.header_error or "no #fields preamble seen before data"
            self.stats.quarantined += 1
            return ParseQuarantine(self._line_number, line, reason)
        record = parse_notice_line(line, state.schema, self._line_number)
        if record is None:
            self.stats.skipped += 1
        elif isinstance(record, ParseQuarantine):
            self.stats.quarantined += 1
        else:
            self.stats.notices += 1
        return record

    def _read_new_lines(self) -> list[str]:
        try:
            st = os.stat(self.path)
        except OSError as exc:
            self._report_outage(str(exc))
            return []
        if self._outage_reported:
            self._outage_reported = False
            logger.info("notice source %s available again", self.path)
        if self._inode is None:
            self._inode = st.st_ino
        elif st.st_ino != self._inode or st.st_size < self._offset:
            self._inode = st.st_ino
            self._rotate()
        if st.st_size <= self._offset:
            return []
        try:
            with open(self.path, "rb") as fh:
                fh.seek(self._offset)
                chunk = fh.read()
        except OSError as exc:
            self._report_outage(str(exc))
            return []
        # Only consume complete lines; a partially written tail stays buffered.
        data = self._buffer + chunk
        complete, sep, remainder = data.rpartition(b"\n")
        if not sep:
            self._buffer = data
            self._offset += len(chunk)
            return []
        self._buffer = remainder
        self._offset += len(chunk)
        return [raw.decode("utf-8", errors="replace") for raw in complete.split(b"\n")]

    # -- public surface ------------------------------------------------------

    def poll(self) -> list[tuple[Cursor, Union[ZeekNotice, ParseQuarantine]]]:
        """Drain whatever complete lines have appeared since the last poll."""
        out = []
        for line in self._read_new_lines():
            record = self._emit(line)
            if record is not None:
                out.append((Cursor(self._generation, self._line_number), record))
        return out

    def events(
        self, stop: threading.Event
    ) -> Iterator[tuple[Cursor, Union[ZeekNotice, ParseQuarantine]]]:
        """Poll until ``stop`` is set, yielding records in file order."""
        backoff = self.poll_interval
        while not stop.is_set():
            batch = self.poll()
            if batch:
                backoff = self.poll_interval
                for item in batch:
                    yield item
                continue
            stop.wait(backoff)
            if self._outage_reported:
                backoff = min(backoff * 2, self.backoff_max)
            else:
                backoff = self.poll_interval
