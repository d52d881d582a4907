"""Append-only event log.

Record format, one event per line:

    <seq>\t<iso-8601>\t<kind>\t<subject>\t<key>=<value>...

seq is dense and strictly increasing within one run. Values use the wire
escaping, so a record is always exactly one line. Replaying a log rebuilds
device states and counters without the live hub.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from . import wire
from .errors import CorruptLog

# push topic per event kind; kinds not listed are log-only
TOPICS = {
    "state-changed": "state",
    "occupancy": "state",
    "alert": "alert",
    "armed": "alert",
    "disarmed": "alert",
    "number-set": "alert",
    "sms-dispatch": "alert",
    "image-stored": "alert",
    "geofence-alert": "alert",
    "anomaly": "alert",
    "stream-open": "stream-meta",
    "stream-close": "stream-meta",
}


@dataclass
class Event:
    seq: int
    at: str
    kind: str
    subject: str
    fields: dict[str, str] = field(default_factory=dict)

    def line(self) -> str:
        parts = [str(self.seq), self.at, self.kind, self.subject]
        parts += [f"{k}={wire.escape(str(v))}" for k, v in self.fields.items()]
        return "\t".join(parts)

    @property
    def topic(self) -> str | None:
        return TOPICS.get(self.kind)


def parse_line(line: str) -> Event:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 4:
        raise CorruptLog(f"short record: {line!r}")
    try:
        seq = int(parts[0])
    except ValueError:
        raise CorruptLog(f"bad seq: {parts[0]!r}") from None
    fields = {}
    for part in parts[4:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise CorruptLog(f"bad field {part!r} in seq {seq}")
        fields[key] = wire.unescape(value)
    return Event(seq, parts[1], parts[2], parts[3], fields)


class EventLog:
    """Single-writer append log with an in-memory tail for subscribers."""

    def __init__(self, path: Path | None, clock, tail: int = 2000):
        self._path = path
        self._clock = clock
        self._seq = 0
        self._fh = open(path, "a", encoding="utf-8") if path else None
        self._tail: deque[Event] = deque(maxlen=tail)
        self._lock = threading.Lock()

    @property
    def last_seq(self) -> int:
        return self._seq

    def append(self, kind: str, subject: str, /, **fields) -> Event:
        with self._lock:
            self._seq += 1
            ev = Event(self._seq, self._clock.iso(), kind, subject,
                       {k: str(v) for k, v in fields.items()})
            if self._fh:
                self._fh.write(ev.line() + "\n")
                self._fh.flush()
            self._tail.append(ev)
        return ev

    def tail_events(self, n: int) -> list[Event]:
        with self._lock:
            items = list(self._tail)
        return items[-n:] if n >= 0 else items

    def close(self) -> None:
        with self._lock:
            if self._fh:
                self._fh.close()
                self._fh = None


def read_log(path: Path) -> list[Event]:
    """Parse a log file; seq must be dense from 1."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if raw.endswith("\n"):
                line = raw[:-1]
            else:
                raise CorruptLog("truncated final record")
            events.append(parse_line(line))
    for i, ev in enumerate(events, start=1):
        if ev.seq != i:
            raise CorruptLog(f"seq gap: expected {i}, found {ev.seq}")
    return events


@dataclass
class ReplayState:
    """Final state reconstructed purely from the log."""

    devices: dict[str, str] = field(default_factory=dict)   # "room/label" -> rendered state
    counters: dict[str, int] = field(default_factory=dict)

    def bump(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n


def replay(path: Path) -> ReplayState:
    state = ReplayState()
    by_id: dict[str, str] = {}
    for ev in read_log(path):
        if ev.kind == "device-registered":
            ref = f"{ev.fields['room']}/{ev.fields['label']}"
            by_id[ev.subject] = ref
            state.devices[ref] = ev.fields["state"]
        elif ev.kind == "state-changed":
            ref = by_id.get(ev.subject)
            if ref is None:
                raise CorruptLog(f"state change for unregistered device {ev.subject}")
            state.devices[ref] = ev.fields["new"]
        elif ev.kind == "alert":
            state.bump("alerts")
        elif ev.kind == "geofence-alert":
            state.bump("geofence-alerts")
        elif ev.kind == "occupancy":
            state.counters[f"occupancy:{ev.subject}"] = int(ev.fields["count"])
    return state
