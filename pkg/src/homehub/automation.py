"""Rule engines: occupancy lighting, tank hysteresis, auto gate, geofences.

Every rule acts on devices only through DeviceRegistry.apply, so rule
outputs are ordinary state-changed events distinguishable by their cause.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .clock import BaseClock, Timer
from .errors import (
    BadCoordinates,
    BadLevel,
    IllegalVerb,
    UnknownAsset,
    UnknownBeam,
)
from .model import Binary, DeviceRegistry, Gate, GatePhase


class OccupancyZone:
    """Two-beam people counter driving a room's lights.

    A break pairs with a pending break of the other beam at most window_ms
    older; outer-then-inner counts an entry, inner-then-outer an exit. Any
    other break replaces the pending one. Exits at zero are clamped and
    logged as anomalies.
    """

    def __init__(self, room: str, outer: str, inner: str, light_ids: list[str],
                 registry: DeviceRegistry, clock: BaseClock, emit,
                 window_ms: int = 1000):
        self.room = room
        self._outer = outer
        self._inner = inner
        self._lights = list(light_ids)
        self._registry = registry
        self._clock = clock
        self._emit = emit
        self._window_ms = window_ms
        self._pending: tuple[str, int] | None = None
        self.count = 0

    def beams(self) -> tuple[str, str]:
        return self._outer, self._inner

    def on_beam(self, beam_id: str) -> None:
        if beam_id not in (self._outer, self._inner):
            raise UnknownBeam(f"no beam {beam_id} in {self.room}")
        now = self._clock.now_ms()
        pending = self._pending
        if pending is not None and pending[0] != beam_id and now - pending[1] <= self._window_ms:
            self._pending = None
            if pending[0] == self._outer:
                self._set_count(self.count + 1)
            elif self.count == 0:
                self._emit("anomaly", self.room, reason="exit-at-zero")
            else:
                self._set_count(self.count - 1)
        else:
            self._pending = (beam_id, now)

    def _set_count(self, count: int) -> None:
        old, self.count = self.count, count
        self._emit("occupancy", self.room, count=count)
        verb = None
        if old == 0 and count == 1:
            verb = "on"
        elif old == 1 and count == 0:
            verb = "off"
        if verb:
            for light in self._lights:
                self._registry.apply(light, verb, cause=f"occupancy:{self.room}")


class TankController:
    """Bang-bang pump control: on below low, off above high, inert between."""

    def __init__(self, registry: DeviceRegistry, pump_id: str, low: int, high: int):
        if not 0 <= low < high <= 100:
            raise ValueError(f"thresholds must satisfy 0 <= {low} < {high} <= 100")
        self._registry = registry
        self._pump_id = pump_id
        self._low = low
        self._high = high
        self.level: int | None = None

    def on_level(self, level: int) -> None:
        if not 0 <= level <= 100:
            raise BadLevel(f"tank level {level} out of 0..100")
        self.level = level
        pump_on = self._registry.get(self._pump_id).state == Binary(True)
        if level < self._low and not pump_on:
            self._registry.apply(self._pump_id, "on", cause="tank")
        elif level > self._high and pump_on:
            self._registry.apply(self._pump_id, "off", cause="tank")


class GateAutomation:
    """Presence opens the gate; an idle timer closes it after the last
    presence. Presence during closing reverses the travel."""

    def __init__(self, registry: DeviceRegistry, gate_id: str, clock: BaseClock,
                 emit, idle_ms: int = 10000):
        self._registry = registry
        self.gate_id = gate_id
        self._clock = clock
        self._emit = emit
        self._idle_ms = idle_ms
        self._timer: Timer | None = None

    def presence(self) -> None:
        self._emit("presence", self.gate_id)
        self._registry.apply(self.gate_id, "open", cause="gate-auto")
        self._arm_close()

    def _arm_close(self) -> None:
        if self._timer is not None:
            self._clock.cancel(self._timer)
        self._timer = self._clock.schedule(self._idle_ms, self._auto_close)

    def _auto_close(self) -> None:
        self._timer = None
        state = self._registry.get(self.gate_id).state
        if not isinstance(state, Gate):
            return
        if state.phase is GatePhase.OPENING:
            # still travelling open (idle timer shorter than travel); retry
            self._arm_close()
            return
        try:
            self._registry.apply(self.gate_id, "close", cause="gate-auto")
        except IllegalVerb:
            pass


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a 6371 km sphere."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * 6371000.0 * math.asin(math.sqrt(a))


@dataclass
class AssetTrack:
    asset_id: str
    label: str
    center: tuple[float, float]
    radius_m: float
    lat: float
    lon: float
    at_ms: int
    inside: bool


class AssetTracker:
    """Circular geofences over GPS fixes; alerts on leaving, once per exit."""

    def __init__(self, clock: BaseClock, emit,
                 notify: Callable[[str, str], None] | None = None):
        self._clock = clock
        self._emit = emit
        self._notify = notify
        self._assets: dict[str, AssetTrack] = {}

    def add(self, asset_id: str, label: str, lat: float, lon: float,
            radius_m: float) -> None:
        if radius_m <= 0:
            raise ValueError("geofence radius must be positive")
        _check_coords(lat, lon)
        # an asset starts at its fence center until the first fix arrives
        self._assets[asset_id] = AssetTrack(asset_id, label, (lat, lon), radius_m,
                                            lat, lon, self._clock.now_ms(), True)

    def ids(self) -> tuple[str, ...]:
        return tuple(self._assets)

    def locate(self, asset_id: str) -> AssetTrack:
        return self._get(asset_id)

    def on_fix(self, asset_id: str, lat: float, lon: float) -> None:
        track = self._get(asset_id)
        _check_coords(lat, lon)
        distance = haversine_m(track.center[0], track.center[1], lat, lon)
        now_inside = distance <= track.radius_m
        left_fence = track.inside and not now_inside
        track.lat, track.lon, track.at_ms = lat, lon, self._clock.now_ms()
        track.inside = now_inside
        if left_fence:
            self._emit("geofence-alert", asset_id, lat=f"{lat:.6f}",
                       lon=f"{lon:.6f}", distance=f"{distance:.1f}")
            if self._notify:
                body = (f"Asset {track.label} left its zone at "
                        f"{self._clock.iso()} ({distance:.0f} m out)")
                self._notify(asset_id, body)

    def _get(self, asset_id: str) -> AssetTrack:
        try:
            return self._assets[asset_id]
        except KeyError:
            raise UnknownAsset(f"no asset {asset_id}") from None


def _check_coords(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise BadCoordinates(f"bad coordinates ({lat}, {lon})")
