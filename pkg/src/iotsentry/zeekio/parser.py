"""Zeek TSV notice-log parsing.

Handles the `#separator` / `#fields` / `#unset_field` / `#empty_field`
preamble directives and positional data lines. Malformed data lines never
raise; they come back as :class:`ParseQuarantine` records so a long-running
tailer survives log corruption.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from ..addrs import is_ipv4
from ..errors import DuplicateField, MissingFields

DEFAULT_SEPARATOR = "\t"
DEFAULT_UNSET = "-"
DEFAULT_EMPTY = "(empty)"

#: Field subset this pipeline consumes, in conventional notice.log order.
STANDARD_NOTICE_FIELDS = (
    "ts",
    "uid",
    "id.orig_h",
    "id.orig_p",
    "id.resp_h",
    "id.resp_p",
    "note",
    "msg",
)

_ESCAPE_RE = re.compile(r"\\x([0-9a-fA-F]{2})")


def _unescape(value: str) -> str:
    return _ESCAPE_RE.sub(lambda m: chr(int(m.group(1), 16)), value)


@dataclass(frozen=True)
class NoticeSchema:
    separator: str = DEFAULT_SEPARATOR
    field_names: tuple[str, ...] = STANDARD_NOTICE_FIELDS
    unset_marker: str = DEFAULT_UNSET
    empty_marker: str = DEFAULT_EMPTY

    def __post_init__(self):
        if not self.field_names:
            raise ValueError("schema needs at least one field")
        if len(set(self.field_names)) != len(self.field_names):
            raise ValueError("schema field names must be unique")
        if len(self.separator) != 1:
            raise ValueError("separator must be a single character")
        if self.separator in self.unset_marker or self.separator in self.empty_marker:
            raise ValueError("separator may not appear in unset/empty markers")

    @property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.field_names)}


@dataclass(frozen=True)
class ZeekNotice:
    ts: float
    src_ip: str
    note: str
    msg: str = ""
    uid: Optional[str] = None
    src_port: Optional[int] = None
    dst_ip: Optional[str] = None
    dst_port: Optional[int] = None
    raw: str = ""


@dataclass(frozen=True)
class ParseQuarantine:
    line_number: int
    raw: str
    reason: str

    def __post_init__(self):
        if not self.reason:
            raise ValueError("quarantine reason must be non-empty")


def parse_header(lines: Sequence[str]) -> NoticeSchema:
    """Build a schema from `#`-prefixed preamble directives.

    `#separator` is space-delimited with a `\\xNN`-escaped value; every other
    directive is delimited by the declared separator. Absent directives fall
    back to the Zeek defaults (TAB, `-`, `(empty)`).
    """
    separator = DEFAULT_SEPARATOR
    unset = DEFAULT_UNSET
    empty = DEFAULT_EMPTY
    fields: tuple[str, ...] | None = None

    for raw in lines:
        line = raw.rstrip("\r\n")
        if not line.startswith("#"):
            continue
        if line.startswith("#separator"):
            value = line[len("#separator") :].strip()
            if value:
                separator = _unescape(value)
            continue
        name, _, rest = line.partition(separator)
        if name == "#unset_field" and rest:
            unset = rest
        elif name == "#empty_field" and rest:
            empty = rest
        elif name == "#fields":
            names = tuple(n for n in rest.split(separator) if n)
            seen = set()
            for n in names:
                if n in seen:
                    raise DuplicateField(f"field {n!r} declared twice")
                seen.add(n)
            fields = names

    if not fields:
        raise MissingFields("preamble has no #fields directive")
    return NoticeSchema(separator=separator, field_names=fields, unset_marker=unset, empty_marker=empty)


def parse_notice_line(
    line: str, schema: NoticeSchema, line_number: int = 0
) -> Union[ZeekNotice, ParseQuarantine, None]:
    """Parse one log line.

    Returns None for directive/blank lines (skip), a ZeekNotice for
    conformant lines, and a ParseQuarantine for anything malformed. Never
    raises on line content.
    """
    text = line.rstrip("\r\n")
    if not text.strip():
        return None
    if text.startswith("#"):
        return None

    parts = text.split(schema.separator)
    names = schema.field_names
    if len(parts) != len(names):
        return ParseQuarantine(
            line_number,
            text,
            f"field count mismatch: got {len(parts)}, schema declares {len(names)}",
        )

    values: dict[str, Optional[str]] = {}
    for name, part in zip(names, parts):
        if part == schema.unset_marker:
            values[name] = None
        elif part == schema.empty_marker:
            values[name] = ""
        else:
            values[name] = part

    if "ts" not in values:
        return ParseQuarantine(line_number, text, "schema lacks required field ts")
    ts_text = values["ts"]
    if not ts_text:
        return ParseQuarantine(line_number, text, "ts is unset")
    try:
        ts = float(ts_text)
    except ValueError:
        return ParseQuarantine(line_number, text, f"unparseable ts {ts_text!r}")
    if ts <= 0:
        return ParseQuarantine(line_number, text, f"non-positive ts {ts_text!r}")

    if "id.orig_h" not in values:
        return ParseQuarantine(line_number, text, "schema lacks required field id.orig_h")
    src_ip = values["id.orig_h"]
    if not src_ip or not is_ipv4(src_ip):
        return ParseQuarantine(line_number, text, f"source address {src_ip!r} is not IPv4")

    if "note" not in values:
        return ParseQuarantine(line_number, text, "schema lacks required field note")
    note = values["note"]
    if not note:
        return ParseQuarantine(line_number, text, "note is empty")

    def port(name: str) -> Optional[int]:
        value = values.get(name)
        if value in (None, ""):
            return None
        p = int(value)  # caller guards ValueError
        if not 0 <= p <= 65535:
            raise ValueError(p)
        return p

    try:
        src_port = port("id.orig_p")
        dst_port = port("id.resp_p")
    except ValueError:
        return ParseQuarantine(line_number, text, "unparseable port field")

    dst_ip = values.get("id.resp_h") or None
    if dst_ip is not None and not is_ipv4(dst_ip):
        return ParseQuarantine(line_number, text, f"destination address {dst_ip!r} is not IPv4")

    return ZeekNotice(
        ts=ts,
        src_ip=src_ip,
        note=note,
        msg=values.get("msg") or "",
        uid=values.get("uid") or None,
        src_port=src_port,
        dst_ip=dst_ip,
        dst_port=dst_port,
        raw=text,
    )


def compose_header(fields: Sequence[str] = STANDARD_NOTICE_FIELDS, path: str = "notice") -> str:
    """Render a TSV preamble for synthetic notice logs."""
    sep = "\t"
    lines = [
        "#separator \\x09",
        sep.join(["#set_separator", ","]),
        sep.join(["#empty_field", DEFAULT_EMPTY]),
        sep.join(["#unset_field", DEFAULT_UNSET]),
        sep.join(["#path", path]),
        sep.join(["#fields", *fields]),
        sep.join(["#types", *["string"] * len(fields)]),
    ]
    return "\n".join(lines) + "\n"


def compose_notice_line(
    ts: float,
    src_ip: str,
    note: str,
    msg: str = "",
    uid: Optional[str] = None,
    src_port: Optional[int] = None,
    dst_ip: Optional[str] = None,
    dst_port: Optional[int] = None,
    fields: Sequence[str] = STANDARD_NOTICE_FIELDS,
) -> str:
    """Render one data line under the standard schema."""
    supplied = {
        "ts": f"{ts:.6f}",
        "uid": uid,
        "id.orig_h": src_ip,
        "id.orig_p": str(src_port) if src_port is not None else None,
        "id.resp_h": dst_ip,
        "id.resp_p": str(dst_port) if dst_port is not None else None,
        "note": note,
        "msg": msg if msg else DEFAULT_EMPTY,
    }
    parts = [supplied.get(name) if supplied.get(name) is not None else DEFAULT_UNSET for name in fields]
    return "\t".join(parts) + "\n"
