"""Latency report assembly and rendering.

One repetition yields the decomposition

    total = ttd + processing + ttb + loss

measured at, respectively: attack start, the detection alert's timestamp,
the block decision, the firewall commit, and the prober-observed loss of
access. The per-operation table reports the six instrumented pipeline legs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from ..clock import PIPELINE_OPS

METRICS = (
    ("ttd", "Detection time (TtD)"),
    ("processing", "Processing time"),
    ("ttb", "Blocking time (TtB)"),
    ("loss", "Loss of access"),
    ("total", "Total response time"),
)

FOOTNOTE = (
    "Per-operation rows cover the full detect-to-commit leg; the processing "
    "metric covers detection to block decision only, so the operation total "
    "and the metric rows are not directly comparable."
)


@dataclass
class RepetitionResult:
    index: int
    blocked: bool
    ttd_seconds: Optional[float] = None
    processing_seconds: Optional[float] = None
    ttb_seconds: Optional[float] = None
    loss_seconds: Optional[float] = None
    total_seconds: Optional[float] = None
    op_timings: dict[str, float] = field(default_factory=dict)
    device_mac: str = ""
    ip_in_allowed: Optional[bool] = None
    ip_in_blocked: Optional[bool] = None
    feedback_complete: bool = False
    end_states: dict[str, int] = field(default_factory=dict)  # device state -> count

    def metric(self, name: str) -> Optional[float]:
        return getattr(self, f"{name}_seconds")


@dataclass
class LatencyReport:
    profile: str
    seed: int
    repetitions: list[RepetitionResult] = field(default_factory=list)
    jitter_bound: float = 0.05
    events: list[tuple[str, str]] = field(default_factory=list)

    def _values(self, name: str) -> list[float]:
        return [r.metric(name) for r in self.repetitions if r.metric(name) is not None]

    def aggregates(self) -> dict[str, tuple[float, float, float]]:
        out = {}
        for name, _ in METRICS:
            values = self._values(name)
            if values:
                out[name] = (sum(values) / len(values), min(values), max(values))
        return out

    def op_aggregates(self) -> dict[str, tuple[float, float, float]]:
        out = {}
        for op in PIPELINE_OPS:
            values = [r.op_timings[op] for r in self.repetitions if op in r.op_timings]
            if values:
                out[op] = (sum(values) / len(values), min(values), max(values))
        return out

    def operation_total(self) -> Optional[float]:
        ops = self.op_aggregates()
        if not ops:
            return None
        return sum(mean for mean, _, _ in ops.values())

    def blocked_count(self) -> int:
        return sum(1 for r in self.repetitions if r.blocked)


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(cell)) for cell in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    lines = ["  ".join(str(cell).ljust(w) for cell, w in zip(header, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def render_report(report: LatencyReport, fmt: str = "table") -> str:
    if fmt == "records":
        return render_records(report)
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")

    head = (
        f"Scenario latency report  profile={report.profile}  "
        f"repetitions={len(report.repetitions)}  seed={report.seed}  "
        f"blocked={report.blocked_count()}/{len(report.repetitions)}"
    )
    aggregates = report.aggregates()
    metric_rows = []
    for name, label in METRICS:
        if name in aggregates:
            mean, lo, hi = aggregates[name]
            metric_rows.append([label, f"{mean:.1f}", f"{lo:.1f}", f"{hi:.1f}"])
    metric_table = _table(["Metric", "Mean (s)", "Min (s)", "Max (s)"], metric_rows)

    ops = report.op_aggregates()
    op_rows = []
    for op in PIPELINE_OPS:
        if op in ops:
            mean, lo, hi = ops[op]
            op_rows.append([op, f"{mean:.3f}", f"{lo:.3f}", f"{hi:.3f}"])
    total = report.operation_total()
    if total is not None:
        op_rows.append(["operation total", f"{total:.3f}", "", ""])
    op_table = _table(["Operation", "Mean (s)", "Min (s)", "Max (s)"], op_rows)

    parts = [head, "", metric_table, "", op_table, ""]
    parts.append(f"Declared measurement jitter bound: {report.jitter_bound:.3f} s")
    parts.append(FOOTNOTE)
    return "\n".join(parts) + "\n"


def render_records(report: LatencyReport) -> str:
    lines = [
        json.dumps(
            {
                "kind": "scenario",
                "profile": report.profile,
                "seed": report.seed,
                "repetitions": len(report.repetitions),
                "blocked": report.blocked_count(),
                "jitter_bound": report.jitter_bound,
            }
        )
    ]
    for name, label in METRICS:
        aggregates = report.aggregates()
        if name in aggregates:
            mean, lo, hi = aggregates[name]
            lines.append(json.dumps({"kind": "metric", "name": name, "label": label, "mean": mean, "min": lo, "max": hi}))
    ops = report.op_aggregates()
    for op in PIPELINE_OPS:
        if op in ops:
            mean, lo, hi = ops[op]
            lines.append(json.dumps({"kind": "operation", "name": op, "mean": mean, "min": lo, "max": hi}))
    total = report.operation_total()
    if total is not None:
        lines.append(json.dumps({"kind": "operation_total", "seconds": total}))
    for r in report.repetitions:
        lines.append(
            json.dumps(
                {
                    "kind": "repetition",
                    "index": r.index,
                    "blocked": r.blocked,
                    "ttd": r.ttd_seconds,
                    "processing": r.processing_seconds,
                    "ttb": r.ttb_seconds,
                    "loss": r.loss_seconds,
                    "total": r.total_seconds,
                    "ops": r.op_timings,
                }
            )
        )
    return "\n".join(lines) + "\n"


def parse_records(text: str) -> list[dict]:
    """Round-trip reader for the records format."""
    return [json.loads(line) for line in text.splitlines() if line.strip()]
