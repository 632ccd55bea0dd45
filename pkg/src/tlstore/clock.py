"""Clocks used for timing transfers: a deterministic virtual clock and a
wall clock.

Simulated devices charge their transfer time to whichever clock the store
was built with.  Under the virtual clock nothing sleeps and elapsed time is
exactly the sum of charged microseconds, which makes benchmark results
reproducible bit-for-bit.
"""

import threading
import time


class VirtualClock:
    """Logical microsecond clock; advances only when charged."""

    def __init__(self):
        self._now_us = 0.0
        self._lock = threading.Lock()

    def now_us(self):
        with self._lock:
            return self._now_us

    def advance_us(self, dt_us):
        if dt_us < 0:
            raise ValueError("clock cannot move backwards")
        with self._lock:
            self._now_us += dt_us
        return dt_us


class WallClock:
    """Real-time clock; charging sleeps for the requested duration."""

    def __init__(self):
        self._origin = time.perf_counter()

    def now_us(self):
        return (time.perf_counter() - self._origin) * 1e6

    def advance_us(self, dt_us):
        if dt_us < 0:
            raise ValueError("clock cannot move backwards")
        if dt_us > 0:
            time.sleep(dt_us / 1e6)
        return dt_us


class RateLimitedDevice:
    """Charges a clock for byte transfers at fixed read/write rates.

    Rates are decimal MB/s, so one byte costs exactly 1/rate microseconds
    and a transfer of n bytes costs fixed_latency_us + n/rate.
    """

    def __init__(self, clock, read_mbps, write_mbps, fixed_latency_us=0.0):
        if read_mbps <= 0 or write_mbps <= 0:
            raise ValueError("device rates must be strictly positive")
        if fixed_latency_us < 0:
            raise ValueError("fixed latency cannot be negative")
        self.clock = clock
        self.read_mbps = read_mbps
        self.write_mbps = write_mbps
        self.fixed_latency_us = fixed_latency_us

    def charge_read(self, nbytes):
        return self.clock.advance_us(
            self.fixed_latency_us + nbytes / self.read_mbps)

    def charge_write(self, nbytes):
        return self.clock.advance_us(
            self.fixed_latency_us + nbytes / self.write_mbps)
