"""Hub time source and timer wheel.

Two implementations share one interface: SimClock is advanced explicitly by
the scenario runner and fires due timers deterministically in (due, order)
order; RealClock runs a scheduler thread against the wall clock. Timer
callbacks run through a runner hook the hub installs, so they always execute
under the hub's serialization lock and never concurrently with command
handling.
"""

from __future__ import annotations

import heapq
import threading
import time
from datetime import datetime, timedelta, timezone
from typing import Callable


class Timer:
    __slots__ = ("fn", "period_ms", "cancelled")

    def __init__(self, fn: Callable[[], None], period_ms: int | None):
        self.fn = fn
        self.period_ms = period_ms
        self.cancelled = False


def _iso(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + ".%03dZ" % (dt.microsecond // 1000)


class BaseClock:
    def __init__(self):
        self._heap: list[tuple[int, int, Timer]] = []
        self._order = 0
        self._runner: Callable[[Callable[[], None]], None] = lambda fn: fn()
        self._lock = threading.Lock()

    def set_runner(self, runner: Callable[[Callable[[], None]], None]) -> None:
        self._runner = runner

    def now_ms(self) -> int:
        raise NotImplementedError

    def iso(self, at_ms: int | None = None) -> str:
        raise NotImplementedError

    def schedule(self, delay_ms: int, fn: Callable[[], None], period_ms: int | None = None) -> Timer:
        if period_ms is not None and period_ms <= 0:
            raise ValueError("period_ms must be positive")
        timer = Timer(fn, period_ms)
        with self._lock:
            self._order += 1
            heapq.heappush(self._heap, (self.now_ms() + max(0, delay_ms), self._order, timer))
        self._kick()
        return timer

    def cancel(self, timer: Timer) -> None:
        timer.cancelled = True

    def _kick(self) -> None:
        pass

    def _pop_due(self, now: int):
        """Pop the earliest timer with due <= now, or None."""
        with self._lock:
            while self._heap:
                due, order, timer = self._heap[0]
                if timer.cancelled:
                    heapq.heappop(self._heap)
                    continue
                if due > now:
                    return None
                heapq.heappop(self._heap)
                if timer.period_ms is not None:
                    self._order += 1
                    heapq.heappush(self._heap, (due + timer.period_ms, self._order, timer))
                return due, timer
            return None

    def _next_due(self) -> int | None:
        with self._lock:
            while self._heap and self._heap[0][2].cancelled:
                heapq.heappop(self._heap)
            return self._heap[0][0] if self._heap else None


class SimClock(BaseClock):
    """Deterministic clock: time moves only via advance_to/advance."""

    EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)

    def __init__(self, start_ms: int = 0):
        super().__init__()
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def iso(self, at_ms: int | None = None) -> str:
        ms = self._now if at_ms is None else at_ms
        return _iso(self.EPOCH + timedelta(milliseconds=ms))

    def advance_to(self, target_ms: int) -> None:
        if target_ms < self._now:
            raise ValueError("simulated time cannot move backwards")
        while True:
            hit = self._pop_due(target_ms)
            if hit is None:
                break
            due, timer = hit
            self._now = max(self._now, due)
            self._runner(timer.fn)
        self._now = target_ms

    def advance(self, delta_ms: int) -> None:
        self.advance_to(self._now + delta_ms)


class RealClock(BaseClock):
    """Wall-clock time; a daemon thread fires timers."""

    def __init__(self):
        super().__init__()
        self._wake = threading.Event()
        self._stopped = False
        self._thread = threading.Thread(target=self._loop, name="hub-timers", daemon=True)
        self._thread.start()

    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def iso(self, at_ms: int | None = None) -> str:
        if at_ms is None:
            dt = datetime.now(timezone.utc)
        else:
            dt = datetime.fromtimestamp(at_ms / 1000, tz=timezone.utc)
        return _iso(dt)

    def stop(self) -> None:
        self._stopped = True
        self._wake.set()

    def _kick(self) -> None:
        self._wake.set()

    def _loop(self) -> None:
        while not self._stopped:
            now = self.now_ms()
            hit = self._pop_due(now)
            if hit is not None:
                _, timer = hit
                if not timer.cancelled:
                    try:
                        self._runner(timer.fn)
                    except Exception:  # noqa: BLE001 - timers must not kill the scheduler
                        pass
                continue
            nxt = self._next_due()
            wait = 0.2 if nxt is None else max(0.0, min(0.2, (nxt - now) / 1000))
            self._wake.wait(timeout=wait)
            self._wake.clear()
