"""Wall-clock helpers and the per-operation instrumentation hook.

The orchestrator's measured pipeline wraps its six externally visible
operations with :meth:`OperationClock.track`. In production the clock is a
no-op; the scenario harness arms it to inject configured delays and to
record per-operation wall times.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager

# Canonical names of the six instrumented pipeline operations, in execution
# order for one detect-and-block cycle.
PIPELINE_OPS = (
    "get_logs",
    "save_incident",
    "process_incidents",
    "get_alias_by_name",
    "add_addresses_to_alias",
    "apply_changes_firewall",
)


def now() -> float:
    """Current UTC time as epoch seconds (float)."""
    return time.time()


class OperationClock:
    """Delay injector and timer for the named pipeline operations.

    Disabled clocks neither sleep nor record, so provisioning traffic and
    ordinary service operation stay unmeasured. ``timings`` accumulates
    (name, seconds) tuples in completion order once armed.
    """

    def __init__(self, delays: dict[str, float] | None = None, enabled: bool = False):
        self.delays = dict(delays or {})
        self.enabled = enabled
        self.timings: list[tuple[str, float]] = []
        self._lock = threading.Lock()

    def arm(self) -> None:
        self.enabled = True

    def disarm(self) -> None:
        self.enabled = False

    @contextmanager
    def track(self, name: str):
        if not self.enabled:
            yield
            return
        start = time.perf_counter()
        delay = self.delays.get(name, 0.0)
        if delay > 0:
            time.sleep(delay)
        yield
        elapsed = time.perf_counter() - start
        with self._lock:
            self.timings.append((name, elapsed))

    def drain_timings(self) -> list[tuple[str, float]]:
        with self._lock:
            out = list(self.timings)
            self.timings.clear()
        return out


#: Shared do-nothing clock used where no instrumentation was supplied.
NULL_CLOCK = OperationClock(enabled=False)
