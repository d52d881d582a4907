import threading

import pytest

from homehub.clock import SimClock
from homehub.model import (
    Binary,
    DeviceKind,
    DeviceRegistry,
    Gate,
    GatePhase,
    Level,
)


class EventSink:
    """Collects emitted events as (kind, subject, fields) tuples."""

    def __init__(self):
        self.events = []
        self._lock = threading.Lock()

    def __call__(self, kind, subject, /, **fields):
        with self._lock:
            self.events.append((kind, subject, fields))

    def kinds(self):
        return [k for k, _, _ in self.events]

    def of_kind(self, kind):
        return [(s, f) for k, s, f in self.events if k == kind]


@pytest.fixture
def clock():
    return SimClock()


@pytest.fixture
def sink():
    return EventSink()


@pytest.fixture
def registry(clock, sink):
    return DeviceRegistry(clock, sink)


def six_devices(registry):
    """The standard 6-device binding fixture used by the grammar corpus."""
    d1 = registry.register(DeviceKind.LIGHT, "bedroom", "ceiling", Binary(False))
    d2 = registry.register(DeviceKind.LIGHT, "kitchen", "tube", Binary(False))
    d3 = registry.register(DeviceKind.FAN, "living room", "fan", Level(0))
    d4 = registry.register(DeviceKind.AC, "bedroom", "ac", Level(0))
    d5 = registry.register(DeviceKind.GATE, "yard", "main", Gate(GatePhase.CLOSED))
    d6 = registry.register(DeviceKind.CAMERA, "entrance", "cam", Binary(True))
    return d1, d2, d3, d4, d5, d6


def hub_raw():
    """Full-featured config dict for hub, protocol, api and acceptance tests."""
    return {
        "control": {"bind": "127.0.0.1:0"},
        "http": {"bind": "127.0.0.1:0"},
        "auth": {"owner": "hunter2", "guest": "visitor"},
        "devices": [
            {"kind": "light", "room": "bedroom", "label": "ceiling"},
            {"kind": "light", "room": "kitchen", "label": "tube"},
            {"kind": "light", "room": "study", "label": "desk"},
            {"kind": "fan", "room": "bedroom", "label": "fan", "state": "level=0"},
            {"kind": "tv", "room": "living room", "label": "tv"},
            {"kind": "pump", "room": "roof", "label": "pump"},
            {"kind": "gate", "room": "yard", "label": "main", "state": "closed"},
            {"kind": "camera", "room": "entrance", "label": "cam", "state": "on"},
        ],
        "cameras": [
            {"device": "entrance/cam", "width": 32, "height": 24, "fps": 10},
        ],
        "security": {
            "beams": {"b1": "hall", "b2": "hall"},
            "camera": "entrance/cam",
            "debounce_ms": 2000,
        },
        "occupancy": [
            {"room": "study", "outer": "ob", "inner": "ib",
             "lights": ["study/desk"], "window_ms": 1000},
        ],
        "tank": {"pump": "roof/pump", "low": 30, "high": 90},
        "gates": [{"device": "yard/main", "idle_ms": 10000}],
        "aliases": {"BL": "bedroom/ceiling", "KT": "kitchen/tube"},
        "assets": [{"id": "car", "label": "the car",
                    "lat": 23.78, "lon": 90.40, "radius_m": 500}],
        "desktop": {"width": 1600, "height": 1200, "icons": "default"},
        "phones": [{"id": "sim-phone", "accept": True,
                    "phonebook": {"alice": "+111", "bob": "+222"}}],
        "stream_queue": 8,
    }


def make_hub(tmp_path, raw=None, clock=None):
    from homehub.config import build_config
    from homehub.hub import Hub

    cfg = build_config(raw if raw is not None else hub_raw())
    cfg.data_dir = tmp_path / "data"
    hub = Hub(cfg, clock if clock is not None else SimClock())
    return hub
