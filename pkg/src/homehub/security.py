"""Intrusion guard: a three-phase automaton over IR break-beams.

Phases: need-number (no SMS destination yet), ready (armed-able), scanning.
A beam break while scanning raises an intrusion alert with three effects,
in event order: the alarm event, the SMS dispatch, the stored camera image.
A debounce window collapses repeated breaks into one alert per episode; the
window is deliberately not reset by disarm/arm, only by the previous alert.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .clock import BaseClock
from .errors import (
    AlreadyScanning,
    BadNumber,
    GatewayDown,
    HubError,
    NotConfigured,
    NotScanning,
    UnknownBeam,
)

PHASE_NEED_NUMBER = "need-number"
PHASE_READY = "ready"
PHASE_SCANNING = "scanning"

ALARM_TEXT = "Someone in the room"

_NUMBER_RE = re.compile(r"\+?[0-9]{6,15}")

# capture() returns (camera-id, path of the stored image relative to data-dir)
CaptureFn = Callable[[], tuple[str, str]]


class OutboxGateway:
    """File-append SMS stub: one line per message, iso TAB to TAB body."""

    def __init__(self, path: Path, clock: BaseClock):
        self._path = Path(path)
        self._clock = clock

    def send(self, to: str, body: str) -> None:
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(f"{self._clock.iso()}\t{to}\t{body}\n")


@dataclass(frozen=True)
class IntrusionAlert:
    at_ms: int
    zone: str
    beam: str
    camera: str | None
    sms_to: str
    sms_status: str          # sent | failed
    image_path: str | None   # relative to data-dir
    alarm_text: str = ALARM_TEXT


class SecuritySystem:
    def __init__(self, clock: BaseClock, emit, gateway, capture: CaptureFn,
                 beams: dict[str, str], debounce_ms: int = 2000):
        self._clock = clock
        self._emit = emit
        self._gateway = gateway
        self._capture = capture
        self._beams = dict(beams)        # beam-id -> zone name
        self._debounce_ms = debounce_ms
        self._last_alert_ms: int | None = None
        self.phase = PHASE_NEED_NUMBER
        self.owner_number: str | None = None
        self.alert_count = 0

    def set_owner_number(self, msisdn: str) -> None:
        if not _NUMBER_RE.fullmatch(msisdn):
            raise BadNumber(f"not a phone number: {msisdn!r}")
        self.owner_number = msisdn
        if self.phase == PHASE_NEED_NUMBER:
            self.phase = PHASE_READY
        self._emit("number-set", "security", number=msisdn)

    def start_scanning(self) -> None:
        if self.phase == PHASE_NEED_NUMBER:
            raise NotConfigured("set the owner number first")
        if self.phase == PHASE_SCANNING:
            raise AlreadyScanning("already scanning")
        self.phase = PHASE_SCANNING
        self._emit("armed", "security")

    def stop_scanning(self) -> None:
        if self.phase != PHASE_SCANNING:
            raise NotScanning("not scanning")
        self.phase = PHASE_READY
        self._emit("disarmed", "security")

    def on_beam(self, beam_id: str, broken: bool = True) -> IntrusionAlert | None:
        zone = self._beams.get(beam_id)
        if zone is None:
            raise UnknownBeam(f"no beam {beam_id}")
        if self.phase != PHASE_SCANNING or not broken:
            return None
        now = self._clock.now_ms()
        if self._last_alert_ms is not None and now - self._last_alert_ms < self._debounce_ms:
            return None
        self._last_alert_ms = now
        self.alert_count += 1
        return self._raise_alert(zone, beam_id, now)

    def _raise_alert(self, zone: str, beam_id: str, now: int) -> IntrusionAlert:
        self._emit("alert", zone, text=ALARM_TEXT, beam=beam_id)

        body = f"Someone entered in secured zone {zone} at {self._clock.iso()}"
        to = self.owner_number or ""
        try:
            self._gateway.send(to, body)
            sms_status = "sent"
        except GatewayDown:
            sms_status = "failed"
        self._emit("sms-dispatch", zone, to=to, status=sms_status)

        camera = image_path = None
        try:
            camera, image_path = self._capture()
            self._emit("image-stored", zone, path=image_path, camera=camera)
        except HubError as err:
            self._emit("image-stored", zone, status="failed", error=err.message)

        return IntrusionAlert(now, zone, beam_id, camera, to, sms_status, image_path)
