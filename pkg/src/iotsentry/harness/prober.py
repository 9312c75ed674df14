"""Independent connectivity prober.

Samples the firewall verdict for one source at a fixed interval and records
the instant access is first observed lost (a block verdict following a
pass). Runs on its own thread, deliberately outside the response pipeline,
so the measurement cannot flatter the system under test.
"""

from __future__ import annotations

import threading
import time
from typing import Callable, Optional

from ..clock import now
from ..errors import ProbeTimeout


class ConnectivityProber:
    def __init__(self, verdict: Callable[[], str], interval: float, horizon: float = 60.0):
        if interval <= 0:
            raise ValueError("probe interval must be positive")
        self.verdict = verdict
        self.interval = interval
        self.horizon = horizon
        self.loss_at: Optional[float] = None
        self.saw_pass = False
        self.samples = 0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="prober", daemon=True)

    def start(self) -> "ConnectivityProber":
        self._thread.start()
        return self

    def _run(self) -> None:
        deadline = time.monotonic() + self.horizon
        while not self._stop.is_set() and time.monotonic() < deadline:
            outcome = self.verdict()
            stamp = now()
            self.samples += 1
            if outcome == "pass":
                self.saw_pass = True
            elif outcome == "block" and self.saw_pass:
                self.loss_at = stamp
                return
            self._stop.wait(self.interval)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=self.horizon + 5)

    def result(self, wait: bool = True) -> float:
        """Loss-of-access timestamp; ProbeTimeout when no loss was observed."""
        if wait:
            self._thread.join(timeout=self.horizon + 5)
        if self.loss_at is None:
            raise ProbeTimeout(
                f"no loss of access observed within {self.horizon:.1f}s "
                f"({self.samples} samples, saw_pass={self.saw_pass})"
            )
        return self.loss_at


def probe_connectivity(verdict: Callable[[], str], interval: float, horizon: float = 60.0) -> float:
    """Blocking convenience wrapper; measurement error is bounded by ``interval``."""
    prober = ConnectivityProber(verdict, interval, horizon)
    prober.start()
    return prober.result()
