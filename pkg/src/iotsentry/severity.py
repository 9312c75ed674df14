"""Severity taxonomy and the note-pattern classification policy.

The policy is an ordered first-match-wins list of glob patterns over notice
types, plus a default. It ships as a plain-text config file so operators can
override the taxonomy per institution; ``parse_policy``/``render_policy``
round-trip that format.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from typing import Iterable, Sequence


@total_ordering
class Severity(Enum):
    INFO = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3
    CRITICAL = 4

    def __lt__(self, other):
        if not isinstance(other, Severity):
            return NotImplemented
        return self.value < other.value

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Severity":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown severity {text!r}") from None


@dataclass(frozen=True)
class SeverityPolicy:
    rules: tuple[tuple[str, Severity], ...]
    default_severity: Severity = Severity.LOW

    def classify(self, note: str) -> Severity:
        for pattern, severity in self.rules:
            if fnmatch.fnmatchcase(note, pattern):
                return severity
        return self.default_severity


def parse_policy(text: str | Iterable[str]) -> SeverityPolicy:
    """Parse the policy file format.

    One directive per line: ``rule <note-pattern> <severity>`` entries in
    priority order, one ``default <severity>``. Blank lines and ``#``
    comments are ignored.
    """
    if isinstance(text, str):
        lines: Sequence[str] = text.splitlines()
    else:
        lines = list(text)
    rules: list[tuple[str, Severity]] = []
    default = Severity.LOW
    for i, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "rule" and len(parts) == 3:
            rules.append((parts[1], Severity.parse(parts[2])))
        elif parts[0] == "default" and len(parts) == 2:
            default = Severity.parse(parts[1])
        else:
            raise ValueError(f"policy line {i}: cannot parse {line!r}")
    return SeverityPolicy(rules=tuple(rules), default_severity=default)


def render_policy(policy: SeverityPolicy) -> str:
    lines = [f"rule {pattern} {severity.name.lower()}" for pattern, severity in policy.rules]
    lines.append(f"default {policy.default_severity.name.lower()}")
    return "\n".join(lines) + "\n"


DEFAULT_POLICY = SeverityPolicy(
    rules=(
        ("HTTP::SQL_Injection_Attacker", Severity.CRITICAL),
        ("HTTP::SQL_Injection_Victim", Severity.HIGH),
        ("Intel::*", Severity.HIGH),
        ("Scan::*", Severity.MEDIUM),
        ("Weird::*", Severity.LOW),
        ("SSL::*", Severity.LOW),
    ),
    default_severity=Severity.LOW,
)
