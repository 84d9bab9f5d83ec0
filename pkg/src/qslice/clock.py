"""Simulated clock shared by every component of one testbed runtime.

Simulated time only advances when a component spends it (device latency,
key-verification steps, paced frame streams).  ``time_scale`` maps simulated
seconds onto wall-clock sleeps so a run can be paced for a demo or compressed
for tests; reported durations are always in unscaled simulated seconds.
"""

from __future__ import annotations

import threading
import time


class SimClock:
    def __init__(self, time_scale: float = 1.0, start_s: float = 0.0):
        if time_scale <= 0:
            raise ValueError("time_scale must be > 0")
        self.time_scale = time_scale
        self._now = float(start_s)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def advance(self, dt_s: float) -> float:
        """Advance simulated time by ``dt_s`` seconds, pacing the wall clock.

        Returns the new simulated time.
        """
        if dt_s < 0:
            raise ValueError("cannot advance the clock backwards")
        if dt_s > 0:
            time.sleep(dt_s * self.time_scale)
        with self._lock:
            self._now += dt_s
            return self._now
