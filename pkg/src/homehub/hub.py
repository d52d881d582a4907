"""The daemon core: every subsystem wired to one clock, one lock, one log.

All mutation funnels through self.lock (timer callbacks included, via the
clock runner), which is what makes two simulated runs byte-identical. The
mobile bridge uses its own lock because agent round trips can block; nothing
may call bridge methods while holding the hub lock.
"""

from __future__ import annotations

import threading
from pathlib import Path

from .automation import AssetTracker, GateAutomation, OccupancyZone, TankController
from .clock import BaseClock
from .config import HubConfig
from .desktop import DesktopModel
from .errors import (
    BadCoordinates,
    BadViewport,
    GatewayDown,
    HubError,
    NoFrameYet,
    NotConfigured,
    UnknownBeam,
    UnknownGate,
    UnknownVerb,
)
from .events import Event, EventLog
from .grammar import Command, bind, parse, parse_compact
from .mobile import BridgeSession, LocalAgentLink, MobileBridge, Phone
from .model import DeviceRegistry, parse_state, render_state
from .security import OutboxGateway, SecuritySystem
from .surveillance import CameraDeck, write_pgm

_AUTO = object()

DEVICE_ACTIONS = ("on", "off", "set", "open", "close")


class Hub:
    def __init__(self, config: HubConfig, clock: BaseClock, log_path=_AUTO):
        self.config = config
        self.clock = clock
        self.lock = threading.RLock()
        self._bridge_lock = threading.RLock()
        clock.set_runner(self._run_locked)

        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        if log_path is _AUTO:
            log_path = self.data_dir / "events.log"
        self._subscribers: list = []
        self._logoff_hooks: list = []
        self.counters: dict[str, int] = {}
        self.log = EventLog(log_path, clock)

        self.registry = DeviceRegistry(clock, self._emit,
                                       gate_travel_ms=config.gate_travel_ms,
                                       lock=self.lock)
        self.device_ids: dict[str, str] = {}
        for spec in config.devices:
            device = self.registry.register(spec.kind, spec.room, spec.label,
                                            parse_state(spec.state))
            self.device_ids[spec.ref] = device.id

        self.deck = CameraDeck(clock, self._emit, queue_k=config.stream_queue)
        for cam in config.cameras:
            cam_id = self.device_ids[cam.device]
            self.deck.add(cam_id, cam.width, cam.height, cam.fps)
            period = max(1, round(1000 / cam.fps))
            clock.schedule(period, lambda cid=cam_id: self.deck.tick(cid),
                           period_ms=period)

        self.gateway = OutboxGateway(self.data_dir / "outbox.sms", clock)
        self.security: SecuritySystem | None = None
        self._security_beams = frozenset(config.security_beams)
        if config.security_beams:
            self.security = SecuritySystem(clock, self._emit, self.gateway,
                                           self._capture_intrusion,
                                           dict(config.security_beams),
                                           debounce_ms=config.debounce_ms)
            if config.owner_number:
                self.security.set_owner_number(config.owner_number)

        self._beam_zone: dict[str, OccupancyZone] = {}
        self.zones: list[OccupancyZone] = []
        for z in config.zones:
            lights = [self.device_ids[ref] for ref in z.lights]
            zone = OccupancyZone(z.room, z.outer, z.inner, lights,
                                 self.registry, clock, self._emit,
                                 window_ms=z.window_ms)
            self.zones.append(zone)
            self._beam_zone[z.outer] = zone
            self._beam_zone[z.inner] = zone

        self.tank: TankController | None = None
        if config.tank_pump:
            self.tank = TankController(self.registry,
                                       self.device_ids[config.tank_pump],
                                       config.tank_low, config.tank_high)

        self.gate_autos: dict[str, GateAutomation] = {}
        for g in config.gates:
            self.gate_autos[g.device] = GateAutomation(
                self.registry, self.device_ids[g.device], clock, self._emit,
                idle_ms=g.idle_ms)

        self.assets = AssetTracker(clock, self._emit, notify=self._notify_asset)
        for a in config.assets:
            self.assets.add(a.id, a.label, a.lat, a.lon, a.radius_m)

        self.desktop = DesktopModel(config.desktop_size[0], config.desktop_size[1],
                                    config.desktop_icons, self._emit, clock)

        self.bridge = MobileBridge(self._emit)
        self.phones: dict[str, Phone] = {}
        for p in config.phones:
            phone = Phone(p.id, phonebook=tuple(p.phonebook.items()),
                          auto_accept=p.accept)
            self.phones[p.id] = phone
            self.bridge.register_link(p.id, LocalAgentLink(phone))

    # ---- plumbing ------------------------------------------------------

    def _run_locked(self, fn) -> None:
        with self.lock:
            fn()

    def _emit(self, kind, subject, /, **fields) -> Event:
        with self.lock:
            ev = self.log.append(kind, subject, **fields)
            # mirror of the replay counter rules, so snapshot == replay
            if kind == "alert":
                self.counters["alerts"] = self.counters.get("alerts", 0) + 1
            elif kind == "geofence-alert":
                self.counters["geofence-alerts"] = \
                    self.counters.get("geofence-alerts", 0) + 1
            elif kind == "occupancy":
                self.counters[f"occupancy:{subject}"] = int(fields["count"])
            for fn in list(self._subscribers):
                try:
                    fn(ev)
                except Exception:
                    pass   # a broken subscriber must never block the hub
            return ev

    def subscribe(self, fn) -> None:
        with self.lock:
            self._subscribers.append(fn)

    def unsubscribe(self, fn) -> None:
        with self.lock:
            if fn in self._subscribers:
                self._subscribers.remove(fn)

    def add_logoff_hook(self, fn) -> None:
        with self.lock:
            self._logoff_hooks.append(fn)

    def close(self) -> None:
        self.log.close()

    # ---- security side effects ------------------------------------------

    def _capture_intrusion(self) -> tuple[str, str]:
        cam_id = self.device_ids[self.config.security_camera]
        try:
            frame = self.deck.snapshot(cam_id)
        except NoFrameYet:
            frame = self.deck.tick(cam_id)
        name = f"{self.clock.iso()}-{cam_id}.pgm"
        path = self.data_dir / "intrusions" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(path, frame.width, frame.height, frame.pixels)
        return cam_id, f"intrusions/{name}"

    def _notify_asset(self, asset_id: str, body: str) -> None:
        number = self.security.owner_number if self.security else None
        if not number:
            return
        try:
            self.gateway.send(number, body)
            status = "sent"
        except GatewayDown:
            status = "failed"
        self._emit("sms-dispatch", asset_id, to=number, status=status)

    # ---- command execution ----------------------------------------------

    def bind_text(self, text: str, channel: str, principal: str | None = None) -> Command:
        with self.lock:
            parsed = parse(text, channel)
            return bind(parsed, self.registry.snapshot(),
                        assets=self.assets.ids(), principal=principal)

    def run_text(self, text: str, channel: str, principal: str | None = None) -> list[str]:
        with self.lock:
            return self.execute(self.bind_text(text, channel, principal))

    def execute(self, command: Command) -> list[str]:
        with self.lock:
            payload = self._dispatch(command)
            self._emit("command", command.channel, raw=command.raw,
                       action=command.action, principal=command.principal or "")
            return payload

    def _dispatch(self, command: Command) -> list[str]:
        if command.action in DEVICE_ACTIONS:
            self.registry.apply(command.device_id, command.action,
                                level=command.level, cause="command",
                                channel=command.channel,
                                principal=command.principal)
            device = self.registry.get(command.device_id)
            return [device.room, device.label, render_state(device.state)]
        if command.action == "status":
            if command.device_id is not None:
                device = self.registry.get(command.device_id)
                return [device.room, device.label, render_state(device.state)]
            return self.status_fields()
        if command.action == "start-scanning":
            self._need_security().start_scanning()
            return [self.security.phase]
        if command.action == "stop-scanning":
            self._need_security().stop_scanning()
            return [self.security.phase]
        if command.action == "locate":
            track = self.assets.locate(command.asset)
            return [command.asset, f"{track.lat:.6f}", f"{track.lon:.6f}",
                    self.clock.iso(track.at_ms),
                    "inside" if track.inside else "outside"]
        if command.action == "stream":
            width, height, _fps = self.deck.geometry(command.device_id)
            return ["STREAM", str(width), str(height)]
        raise UnknownVerb(f"no handler for {command.action}")

    def status_fields(self) -> list[str]:
        with self.lock:
            fields = [f"{d.room}/{d.label}={render_state(d.state)}"
                      for d in self.registry.snapshot()]
            if self.security is not None:
                fields.append(f"security={self.security.phase}")
            return fields

    def _need_security(self) -> SecuritySystem:
        if self.security is None:
            raise NotConfigured("no security beams configured")
        return self.security

    # ---- sensor and simulator ingress -------------------------------------

    def beam(self, beam_id: str, broken: bool = True) -> None:
        with self.lock:
            if beam_id in self._security_beams:
                self.security.on_beam(beam_id, broken)
            elif beam_id in self._beam_zone:
                if broken:   # occupancy pairs breaks only; restores are noise
                    self._beam_zone[beam_id].on_beam(beam_id)
            else:
                raise UnknownBeam(f"no beam {beam_id}")

    def tank_level(self, level: int) -> None:
        with self.lock:
            if self.tank is None:
                raise NotConfigured("no tank configured")
            self._emit("tank-level", "tank", level=level)
            self.tank.on_level(level)

    def presence(self, gate_ref: str) -> None:
        with self.lock:
            auto = self.gate_autos.get(gate_ref)
            if auto is None:
                raise UnknownGate(f"no automated gate {gate_ref!r}")
            auto.presence()

    def gps_fix(self, asset_id: str, lat: float, lon: float) -> None:
        with self.lock:
            self.assets.locate(asset_id)   # existence check before logging
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise BadCoordinates(f"bad coordinates ({lat}, {lon})")
            self._emit("gps-fix", asset_id, lat=f"{lat:.6f}", lon=f"{lon:.6f}")
            self.assets.on_fix(asset_id, lat, lon)

    def set_number(self, msisdn: str) -> None:
        with self.lock:
            self._need_security().set_owner_number(msisdn)

    def arm(self) -> str:
        with self.lock:
            sec = self._need_security()
            sec.start_scanning()
            return sec.phase

    def disarm(self) -> str:
        with self.lock:
            sec = self._need_security()
            sec.stop_scanning()
            return sec.phase

    def sms_in(self, from_number: str, body: str) -> str:
        """Inbound SMS carrying a compact command; replied to by SMS."""
        with self.lock:
            self._emit("sms-received", from_number, body=body)
            owner = self.security.owner_number if self.security else None
            if owner is None or from_number != owner:
                reply = "ERR EAUTH unknown sender"
            else:
                try:
                    parsed = parse_compact(body, self.config.aliases)
                    command = bind(parsed, self.registry.snapshot(),
                                   assets=self.assets.ids(), principal="owner")
                    payload = self.execute(command)
                    reply = "OK" + (" " + " ".join(payload) if payload else "")
                except HubError as err:
                    reply = f"ERR {err.code} {err.message}"
            try:
                self.gateway.send(from_number, reply)
                status = "sent"
            except GatewayDown:
                status = "failed"
            self._emit("sms-reply", from_number, status=status, body=reply)
            return reply

    # ---- desktop -----------------------------------------------------------

    def desktop_model(self) -> dict:
        with self.lock:
            return self.desktop.get_desktop()

    def desktop_click(self, xc: int, yc: int, wc: int, hc: int):
        with self.lock:
            if not (0 <= xc < wc and 0 <= yc < hc):
                raise BadViewport(f"click ({xc},{yc}) outside viewport {wc}x{hc}")
            return self.desktop.click(xc, yc, wc, hc)

    def desktop_exec(self, principal: str, line: str) -> str:
        with self.lock:
            return self.desktop.exec_command(principal, line)

    def desktop_power(self, principal: str, action: str) -> str:
        with self.lock:
            result = self.desktop.power(principal, action)
            if action == "logoff":
                for fn in list(self._logoff_hooks):
                    fn()
            return result

    # ---- virtual mobile (bridge lock, never inside the hub lock) -----------

    def register_agent(self, phone_id: str, link) -> None:
        with self._bridge_lock:
            self.bridge.register_link(phone_id, link)

    def pair(self, owner: str, phone_id: str) -> BridgeSession:
        with self._bridge_lock:
            return self.bridge.pair(owner, phone_id)

    def bridge_op(self, owner: str, name: str, args: list[str]) -> list[str]:
        with self._bridge_lock:
            return self.bridge.op(owner, name, args)

    def drop_owner(self, owner: str) -> None:
        with self._bridge_lock:
            self.bridge.drop_owner(owner)

    def sever(self, phone_id: str) -> None:
        with self._bridge_lock:
            self.bridge.sever(phone_id)

    # ---- snapshots ----------------------------------------------------------

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "devices": {d.ref: render_state(d.state)
                            for d in self.registry.snapshot()},
                "counters": dict(self.counters),
            }
