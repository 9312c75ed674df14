"""Synthetic notice-log corpus generation with controlled corruption.

Builds a two-generation corpus (rotation in the middle) where every
injected corrupt line is guaranteed to quarantine and every other data line
parses cleanly, so totality counts can be asserted exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..zeekio import compose_header, compose_notice_line

NOTE_MIX = (
    "HTTP::SQL_Injection_Attacker",
    "Scan::Port_Scan",
    "Weird::bad_HTTP_request",
    "SSL::Invalid_Server_Cert",
    "Intel::Notice",
)

HEADER_LINES = 7  # compose_header emits exactly this many directives


@dataclass
class Corpus:
    segments: list[str]  # file content per generation
    total_lines: int
    valid_count: int
    corrupt_count: int
    directive_count: int


def _corrupt_line(rng: random.Random, i: int) -> str:
    """A data line (not blank, not a directive) that must quarantine."""
    variants = [
        lambda: f"corrupted entry {i} with no separators at all",
        lambda: "\t".join(["not-a-time", "Cuid", "192.168.1.5", "1", "10.0.0.1", "80", "Scan::Port_Scan", "x"]),
        lambda: "\t".join([f"17000000{i:02d}.5", "Cuid", "999.999.1.2", "1", "10.0.0.1", "80", "Scan::Port_Scan", "x"]),
        lambda: "\t".join([f"17000000{i:02d}.5", "Cuid", "192.168.1.5", "80x", "10.0.0.1", "80", "Scan::Port_Scan", "x"]),
        lambda: "\t".join([f"17000000{i:02d}.5", "Cuid", "192.168.1.5"]),
        lambda: "\x00\x01\xfe binary noise %d" % i,
        lambda: "\t".join([f"17000000{i:02d}.5", "Cuid", "192.168.1.5", "1", "10.0.0.1", "80", "-", "msg"]),
    ]
    return rng.choice(variants)()


def generate_corpus(total_lines: int = 500, corruption_rate: float = 0.05, seed: int = 0) -> Corpus:
    rng = random.Random(seed)
    directive_count = 2 * HEADER_LINES
    data_count = total_lines - directive_count
    corrupt_count = round(total_lines * corruption_rate)
    if corrupt_count > data_count:
        raise ValueError("corruption rate leaves no room for valid lines")
    corrupt_positions = set(rng.sample(range(data_count), corrupt_count))

    data_lines = []
    base_ts = 1700000000.0
    for i in range(data_count):
        if i in corrupt_positions:
            data_lines.append(_corrupt_line(rng, i).rstrip("\n") + "\n")
        else:
            data_lines.append(
                compose_notice_line(
                    ts=base_ts + i * 0.25,
                    src_ip=f"192.168.{rng.randrange(1, 5)}.{rng.randrange(2, 250)}",
                    note=rng.choice(NOTE_MIX),
                    msg=f"synthetic event {i}",
                    uid="C%015x" % rng.getrandbits(60),
                    src_port=rng.randrange(1024, 65535),
                    dst_ip="10.0.0.1",
                    dst_port=80,
                )
            )

    split = data_count // 2
    segments = [
        compose_header() + "".join(data_lines[:split]),
        compose_header() + "".join(data_lines[split:]),
    ]
    return Corpus(
        segments=segments,
        total_lines=total_lines,
        valid_count=data_count - corrupt_count,
        corrupt_count=corrupt_count,
        directive_count=directive_count,
    )
