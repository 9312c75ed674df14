"""TSV notice parsing: preamble directives, data lines, totality under noise."""

import random

import pytest

from iotsentry.errors import DuplicateField, MissingFields
from iotsentry.zeekio import (
    NoticeSchema,
    ParseQuarantine,
    STANDARD_NOTICE_FIELDS,
    ZeekNotice,
    compose_header,
    compose_notice_line,
    parse_header,
    parse_notice_line,
)

STANDARD_PREAMBLE = compose_header().splitlines()


def test_parse_header_standard():
    schema = parse_header(STANDARD_PREAMBLE)
    assert schema.separator == "\t"
    assert schema.field_names == STANDARD_NOTICE_FIELDS
    assert schema.unset_marker == "-"
    assert schema.empty_marker == "(empty)"


def test_parse_header_programmatic_roundtrip():
    # Oracle: the constructor's own field list comes back in order.
    fields = ("ts", "uid", "id.orig_h", "note", "msg", "extra.col")
    schema = parse_header(compose_header(fields).splitlines())
    assert schema.field_names == fields


def test_parse_header_defaults_for_absent_directives():
    schema = parse_header(["#fields\tts\tid.orig_h\tnote"])
    assert schema.separator == "\t"
    assert schema.unset_marker == "-"
    assert schema.empty_marker == "(empty)"


def test_parse_header_missing_fields():
    preamble = [line for line in STANDARD_PREAMBLE if not line.startswith("#fields")]
    with pytest.raises(MissingFields):
        parse_header(preamble)


def test_parse_header_duplicate_field():
    with pytest.raises(DuplicateField):
        parse_header(["#separator \\x09", "#fields\tts\tuid\tts"])


def test_parse_header_custom_separator():
    schema = parse_header(["#separator \\x7c", "#fields|ts|id.orig_h|note"])
    assert schema.separator == "|"
    assert schema.field_names == ("ts", "id.orig_h", "note")


SCHEMA = parse_header(STANDARD_PREAMBLE)

SQLI_LINE = (
    "1700000000.123456\tCabcde1234567890\t192.168.1.50\t51512\t192.168.1.10\t80"
    "\tHTTP::SQL_Injection_Attacker\tSQLi payload seen"
)


def test_parse_standard_sqli_line_against_positional_oracle():
    # Independent oracle: raw split on the separator, positional lookup.
    parts = SQLI_LINE.split("\t")
    index = {name: i for i, name in enumerate(STANDARD_NOTICE_FIELDS)}
    notice = parse_notice_line(SQLI_LINE, SCHEMA)
    assert isinstance(notice, ZeekNotice)
    assert notice.src_ip == parts[index["id.orig_h"]] == "192.168.1.50"
    assert notice.note == parts[index["note"]] == "HTTP::SQL_Injection_Attacker"
    assert notice.ts == float(parts[index["ts"]])
    assert notice.src_port == int(parts[index["id.orig_p"]])
    assert notice.dst_ip == parts[index["id.resp_h"]]
    assert notice.dst_port == int(parts[index["id.resp_p"]])
    assert notice.msg == parts[index["msg"]]
    assert notice.raw == SQLI_LINE


def test_directive_and_blank_lines_skip():
    assert parse_notice_line("#close 2025-01-01-00-00-00", SCHEMA) is None
    assert parse_notice_line("", SCHEMA) is None
    assert parse_notice_line("   \n", SCHEMA) is None


def test_field_count_mismatch_quarantines():
    record = parse_notice_line("a\tb\tc", SCHEMA, line_number=17)
    assert isinstance(record, ParseQuarantine)
    assert record.line_number == 17
    assert "count" in record.reason


def test_unset_markers_map_to_absent():
    line = "1700000000.5\t-\t192.168.1.2\t-\t-\t-\tScan::Port_Scan\t(empty)"
    notice = parse_notice_line(line, SCHEMA)
    assert notice.uid is None
    assert notice.src_port is None
    assert notice.dst_ip is None
    assert notice.dst_port is None
    assert notice.msg == ""


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("abc\t-\t192.168.1.2\t-\t-\t-\tX::Y\t-", "ts"),
        ("-\t-\t192.168.1.2\t-\t-\t-\tX::Y\t-", "ts"),
        ("0.0\t-\t192.168.1.2\t-\t-\t-\tX::Y\t-", "ts"),
        ("1700.5\t-\tnot-an-ip\t-\t-\t-\tX::Y\t-", "IPv4"),
        ("1700.5\t-\t192.168.1.2\t-\t-\t-\t-\t-", "note"),
        ("1700.5\t-\t192.168.1.2\t99999\t-\t-\tX::Y\t-", "port"),
        ("1700.5\t-\t192.168.1.2\t80x\t-\t-\tX::Y\t-", "port"),
        ("1700.5\t-\t192.168.1.2\t80\t999.9.9.9\t-\tX::Y\t-", "IPv4"),
    ],
)
def test_malformed_lines_quarantine(line, fragment):
    record = parse_notice_line(line, SCHEMA)
    assert isinstance(record, ParseQuarantine)
    assert fragment.lower() in record.reason.lower()


def test_schema_missing_required_column_quarantines_data():
    schema = parse_header(["#fields\tts\tuid\tmsg"])
    record = parse_notice_line("1700.5\tCx\thello", schema)
    assert isinstance(record, ParseQuarantine)
    assert "id.orig_h" in record.reason


def test_compose_roundtrip():
    line = compose_notice_line(
        ts=1700000001.25, src_ip="192.168.1.9", note="Scan::Port_Scan", msg="probe", uid="Cxyz",
        src_port=1234, dst_ip="10.0.0.1", dst_port=80,
    )
    notice = parse_notice_line(line, SCHEMA)
    assert isinstance(notice, ZeekNotice)
    assert (notice.ts, notice.src_ip, notice.note, notice.msg) == (1700000001.25, "192.168.1.9", "Scan::Port_Scan", "probe")
    assert notice.msg == "probe"


def test_compose_empty_msg_roundtrips_to_empty():
    line = compose_notice_line(ts=1700.5, src_ip="192.168.1.9", note="X::Y", msg="")
    notice = parse_notice_line(line, SCHEMA)
    assert notice.msg == ""


def test_parser_never_raises_on_byte_noise():
    # Totality fuzz: arbitrary byte noise decoded as text must parse to one
    # of the three outcomes, never raise.
    rng = random.Random(99)
    outcomes = {ZeekNotice: 0, ParseQuarantine: 0, type(None): 0}
    for i in range(2000):
        length = rng.randrange(0, 120)
        raw = bytes(rng.randrange(256) for _ in range(length))
        line = raw.decode("latin-1")
        record = parse_notice_line(line, SCHEMA, line_number=i)
        outcomes[type(record)] += 1
    assert outcomes[ParseQuarantine] > 0
    assert outcomes[type(None)] > 0


def test_totality_counts_over_mixed_corpus():
    rng = random.Random(5)
    lines = []
    valid = skipped = bad = 0
    for i in range(400):
        kind = rng.randrange(3)
        if kind == 0:
            lines.append(compose_notice_line(ts=1700.0 + i, src_ip="192.168.1.5", note="X::Y"))
            valid += 1
        elif kind == 1:
            lines.append(rng.choice(["# comment\n", "\n", "#close 2025\n"]))
            skipped += 1
        else:
            lines.append("garbage with no tabs %d\n" % i)
            bad += 1
    notices = quarantined = skips = 0
    for i, line in enumerate(lines):
        record = parse_notice_line(line, SCHEMA, i)
        if record is None:
            skips += 1
        elif isinstance(record, ParseQuarantine):
            quarantined += 1
        else:
            notices += 1
    assert notices + quarantined + skips == len(lines)
    assert (notices, quarantined, skips) == (valid, bad, skipped)


def test_schema_invariants():
    with pytest.raises(ValueError):
        NoticeSchema(field_names=())
    with pytest.raises(ValueError):
        NoticeSchema(field_names=("ts", "ts"))
    with pytest.raises(ValueError):
        NoticeSchema(separator="-", unset_marker="-")
