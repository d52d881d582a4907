"""Canonical registry of rooms, devices and device state.

All state transitions flow through DeviceRegistry.apply; everything else
(automation rules, protocol sessions, the panel facade) reads snapshots.
Gates are a small timed automaton: open/close starts travel, a timer lands
the gate in its resting state after the configured travel time.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Union

from .clock import BaseClock, Timer
from .errors import (
    DuplicateName,
    IllegalVerb,
    InvalidStateForKind,
    UnknownDevice,
)


class DeviceKind(str, Enum):
    LIGHT = "light"
    FAN = "fan"
    AC = "ac"
    PUMP = "pump"
    GATE = "gate"
    TV = "tv"
    CAMERA = "camera"


@dataclass(frozen=True)
class Binary:
    on: bool


@dataclass(frozen=True)
class Level:
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= 100:
            raise InvalidStateForKind(f"level {self.value} out of 0..100")


class GatePhase(str, Enum):
    CLOSED = "closed"
    OPENING = "opening"
    OPEN = "open"
    CLOSING = "closing"


@dataclass(frozen=True)
class Gate:
    phase: GatePhase


DeviceState = Union[Binary, Level, Gate]


def render_state(state: DeviceState) -> str:
    if isinstance(state, Binary):
        return "on" if state.on else "off"
    if isinstance(state, Level):
        return f"level={state.value}"
    return state.phase.value


def parse_state(text: str) -> DeviceState:
    text = text.strip()
    if text == "on":
        return Binary(True)
    if text == "off":
        return Binary(False)
    if text.startswith("level="):
        return Level(int(text[6:]))
    try:
        return Gate(GatePhase(text))
    except ValueError:
        raise InvalidStateForKind(f"unknown state {text!r}") from None


# states a kind may hold, and verbs a kind accepts
_STATE_TYPES = {
    DeviceKind.LIGHT: (Binary,),
    DeviceKind.TV: (Binary,),
    DeviceKind.PUMP: (Binary,),
    DeviceKind.CAMERA: (Binary,),
    DeviceKind.FAN: (Binary, Level),
    DeviceKind.AC: (Binary, Level),
    DeviceKind.GATE: (Gate,),
}

def state_fits(kind: DeviceKind, state: DeviceState) -> bool:
    return isinstance(state, _STATE_TYPES[kind])


VERBS_FOR_KIND = {
    DeviceKind.LIGHT: {"on", "off"},
    DeviceKind.TV: {"on", "off"},
    DeviceKind.PUMP: {"on", "off"},
    DeviceKind.FAN: {"on", "off", "set"},
    DeviceKind.AC: {"on", "off", "set"},
    DeviceKind.GATE: {"open", "close"},
    DeviceKind.CAMERA: set(),  # read-only; surveillance owns cameras
}


@dataclass
class Device:
    id: str
    kind: DeviceKind
    room: str
    label: str
    state: DeviceState

    @property
    def ref(self) -> str:
        return f"{self.room}/{self.label}"


@dataclass(frozen=True)
class StateChange:
    device_id: str
    old: DeviceState
    new: DeviceState
    cause: str
    at_ms: int


@dataclass(frozen=True)
class NoOp:
    device_id: str
    state: DeviceState


EmitFn = Callable[..., object]


class DeviceRegistry:
    def __init__(self, clock: BaseClock, emit: EmitFn, gate_travel_ms: int = 3000,
                 lock: threading.RLock | None = None):
        self._clock = clock
        self._emit = emit
        self._gate_travel_ms = gate_travel_ms
        self._lock = lock or threading.RLock()
        self._devices: dict[str, Device] = {}
        self._by_ref: dict[tuple[str, str], str] = {}
        self._gate_timers: dict[str, Timer] = {}
        self._next = 0

    def register(self, kind: DeviceKind, room: str, label: str, initial: DeviceState) -> Device:
        with self._lock:
            if (room, label) in self._by_ref:
                raise DuplicateName(f"{room}/{label} already registered")
            if not isinstance(initial, _STATE_TYPES[kind]):
                raise InvalidStateForKind(
                    f"{kind.value} cannot hold state {render_state(initial)}")
            self._next += 1
            device = Device(f"d{self._next}", kind, room, label, initial)
            self._devices[device.id] = device
            self._by_ref[(room, label)] = device.id
            self._emit("device-registered", device.id, kind=kind.value, room=room,
                       label=label, state=render_state(initial))
            return device

    def get(self, device_id: str) -> Device:
        with self._lock:
            try:
                return self._devices[device_id]
            except KeyError:
                raise UnknownDevice(f"no device {device_id}") from None

    def by_ref(self, room: str, label: str) -> Device | None:
        with self._lock:
            device_id = self._by_ref.get((room, label))
            return self._devices.get(device_id) if device_id else None

    def snapshot(self) -> list[Device]:
        with self._lock:
            return [replace(d) for d in self._devices.values()]

    def apply(self, device_id: str, verb: str, level: int | None = None,
              cause: str = "", channel: str | None = None,
              principal: str | None = None) -> StateChange | NoOp:
        with self._lock:
            device = self.get(device_id)
            if verb not in VERBS_FOR_KIND[device.kind]:
                raise IllegalVerb(f"{device.kind.value} does not accept {verb}")
            new = self._next_state(device, verb, level)
            if new == device.state:
                return NoOp(device.id, device.state)
            old = device.state
            device.state = new
            change = StateChange(device.id, old, new, cause, self._clock.now_ms())
            extra = {}
            if channel is not None:
                extra["channel"] = channel
            if principal is not None:
                extra["principal"] = principal
            self._emit("state-changed", device.id, old=render_state(old),
                       new=render_state(new), cause=cause, **extra)
            return change

    def _next_state(self, device: Device, verb: str, level: int | None) -> DeviceState:
        state = device.state
        if isinstance(state, Binary):
            if verb == "set":
                raise IllegalVerb(f"{device.ref} has no level control")
            return Binary(verb == "on")
        if isinstance(state, Level):
            if verb == "set":
                if level is None:
                    raise IllegalVerb("set needs a level")
                return Level(level)
            if verb == "on":
                return Level(100) if state.value == 0 else state
            return Level(0)
        return self._gate_transition(device, verb)

    def _gate_transition(self, device: Device, verb: str) -> Gate:
        phase = device.state.phase
        if verb == "open":
            if phase in (GatePhase.OPEN, GatePhase.OPENING):
                return device.state
            # closed -> opening, and reopen while closing
            self._start_travel(device, GatePhase.OPEN)
            return Gate(GatePhase.OPENING)
        if phase in (GatePhase.CLOSED, GatePhase.CLOSING):
            return device.state
        if phase is GatePhase.OPENING:
            raise IllegalVerb(f"{device.ref} is opening")
        self._start_travel(device, GatePhase.CLOSED)
        return Gate(GatePhase.CLOSING)

    def _start_travel(self, device: Device, resting: GatePhase) -> None:
        old = self._gate_timers.pop(device.id, None)
        if old is not None:
            self._clock.cancel(old)
        self._gate_timers[device.id] = self._clock.schedule(
            self._gate_travel_ms, lambda: self._arrive(device.id, resting))

    def _arrive(self, device_id: str, resting: GatePhase) -> None:
        with self._lock:
            device = self._devices.get(device_id)
            if device is None or not isinstance(device.state, Gate):
                return
            expected = GatePhase.OPENING if resting is GatePhase.OPEN else GatePhase.CLOSING
            if device.state.phase is not expected:
                return  # reversed mid-travel; a newer timer owns the gate
            old = device.state
            device.state = Gate(resting)
            self._gate_timers.pop(device_id, None)
            self._emit("state-changed", device.id, old=render_state(old),
                       new=render_state(device.state), cause="gate-travel")
