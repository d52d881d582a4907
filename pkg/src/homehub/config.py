"""Hub configuration: YAML file -> validated HubConfig.

Validation errors name the offending key path (e.g. "tank.low") so a bad
config is fixable without reading this module.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .desktop import DEFAULT_ICONS, Icon
from .errors import ConfigError
from .model import DeviceKind, parse_state, state_fits


@dataclass
class DeviceSpec:
    kind: DeviceKind
    room: str
    label: str
    state: str

    @property
    def ref(self) -> str:
        return f"{self.room}/{self.label}"


@dataclass
class CameraSpec:
    device: str          # room/label of a camera device
    width: int
    height: int
    fps: int


@dataclass
class ZoneSpec:
    room: str
    outer: str
    inner: str
    lights: list[str]
    window_ms: int


@dataclass
class GateSpec:
    device: str
    idle_ms: int


@dataclass
class AssetSpec:
    id: str
    label: str
    lat: float
    lon: float
    radius_m: float


@dataclass
class PhoneSpec:
    id: str
    accept: bool
    phonebook: dict[str, str]


@dataclass
class HubConfig:
    control_bind: tuple[str, int] = ("127.0.0.1", 7070)
    http_bind: tuple[str, int] = ("127.0.0.1", 8080)
    tokens: dict[str, str] = field(default_factory=dict)   # token -> principal
    data_dir: Path = Path("./data")
    devices: list[DeviceSpec] = field(default_factory=list)
    cameras: list[CameraSpec] = field(default_factory=list)
    security_beams: dict[str, str] = field(default_factory=dict)
    security_camera: str | None = None
    owner_number: str | None = None
    debounce_ms: int = 2000
    zones: list[ZoneSpec] = field(default_factory=list)
    tank_pump: str | None = None
    tank_low: int = 30
    tank_high: int = 90
    gates: list[GateSpec] = field(default_factory=list)
    gate_travel_ms: int = 3000
    aliases: dict[str, tuple[str, str]] = field(default_factory=dict)
    assets: list[AssetSpec] = field(default_factory=list)
    desktop_size: tuple[int, int] = (1600, 1200)
    desktop_icons: tuple[Icon, ...] = DEFAULT_ICONS
    phones: list[PhoneSpec] = field(default_factory=list)
    stream_queue: int = 8


def _need(mapping, key, path, types):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing")
    value = mapping[key]
    if not isinstance(value, types):
        raise ConfigError(f"{path}.{key}: expected {types}, got {type(value).__name__}")
    return value


def _bind(text, path) -> tuple[str, int]:
    host, sep, port = str(text).rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"{path}: expected host:port, got {text!r}")
    return host, int(port)


def _split_ref(text, path) -> tuple[str, str]:
    room, sep, label = str(text).rpartition("/")
    if not sep or not room or not label:
        raise ConfigError(f"{path}: expected room/label, got {text!r}")
    return room, label


def load_config(path: Path | str) -> HubConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(raw)


def build_config(raw: dict) -> HubConfig:
    cfg = HubConfig()

    if "control" in raw:
        cfg.control_bind = _bind(_need(raw["control"], "bind", "control", str), "control.bind")
    if "http" in raw:
        cfg.http_bind = _bind(_need(raw["http"], "bind", "http", str), "http.bind")

    auth = raw.get("auth", {})
    if not isinstance(auth, dict):
        raise ConfigError("auth: expected a mapping of principal to token")
    for principal, token in auth.items():
        if principal not in ("owner", "guest"):
            raise ConfigError(f"auth.{principal}: principal must be owner or guest")
        cfg.tokens[str(token)] = principal

    if "data_dir" in raw:
        cfg.data_dir = Path(str(raw["data_dir"]))
    env_dir = os.environ.get("HUB_DATA_DIR")
    if env_dir:
        cfg.data_dir = Path(env_dir)

    refs: dict[str, DeviceKind] = {}
    for i, entry in enumerate(raw.get("devices", [])):
        where = f"devices[{i}]"
        kind_text = str(_need(entry, "kind", where, str))
        try:
            kind = DeviceKind(kind_text)
        except ValueError:
            raise ConfigError(f"{where}.kind: unknown kind {kind_text!r}") from None
        room = str(_need(entry, "room", where, str))
        label = str(_need(entry, "label", where, str))
        state = str(entry.get("state", "closed" if kind is DeviceKind.GATE else "off"))
        try:
            parsed = parse_state(state)
        except Exception:
            raise ConfigError(f"{where}.state: bad state {state!r}") from None
        if not state_fits(kind, parsed):
            raise ConfigError(f"{where}.state: {state!r} does not fit a {kind.value}")
        spec = DeviceSpec(kind, room, label, state)
        if spec.ref in refs:
            raise ConfigError(f"{where}: duplicate device {spec.ref}")
        refs[spec.ref] = kind
        cfg.devices.append(spec)

    def check_ref(ref: str, where: str, kind: DeviceKind | None = None) -> str:
        if ref not in refs:
            raise ConfigError(f"{where}: unknown device {ref!r}")
        if kind is not None and refs[ref] is not kind:
            raise ConfigError(f"{where}: {ref} is a {refs[ref].value}, need {kind.value}")
        return ref

    for i, entry in enumerate(raw.get("cameras", [])):
        where = f"cameras[{i}]"
        device = check_ref(str(_need(entry, "device", where, str)), where, DeviceKind.CAMERA)
        width = _need(entry, "width", where, int)
        height = _need(entry, "height", where, int)
        fps = int(entry.get("fps", 10))
        if width * height < 16:
            raise ConfigError(f"{where}: resolution {width}x{height} below pattern size")
        if fps <= 0:
            raise ConfigError(f"{where}.fps: must be positive")
        cfg.cameras.append(CameraSpec(device, width, height, fps))

    camera_refs = {c.device for c in cfg.cameras}
    security = raw.get("security", {})
    if security:
        beams = security.get("beams", {})
        if not isinstance(beams, dict) or not beams:
            raise ConfigError("security.beams: expected beam-id to zone mapping")
        cfg.security_beams = {str(k): str(v) for k, v in beams.items()}
        camera = security.get("camera")
        if camera is None:
            raise ConfigError("security.camera: missing (intrusion captures need one)")
        check_ref(str(camera), "security.camera", DeviceKind.CAMERA)
        if str(camera) not in camera_refs:
            raise ConfigError(f"security.camera: {camera} has no cameras[] entry")
        cfg.security_camera = str(camera)
        cfg.debounce_ms = int(security.get("debounce_ms", 2000))
        if cfg.debounce_ms < 0:
            raise ConfigError("security.debounce_ms: must be >= 0")
        number = security.get("owner_number")
        cfg.owner_number = str(number) if number is not None else None

    seen_beams = set(cfg.security_beams)
    for i, entry in enumerate(raw.get("occupancy", [])):
        where = f"occupancy[{i}]"
        room = str(_need(entry, "room", where, str))
        outer = str(_need(entry, "outer", where, str))
        inner = str(_need(entry, "inner", where, str))
        if outer == inner:
            raise ConfigError(f"{where}: outer and inner must differ")
        for beam in (outer, inner):
            if beam in seen_beams:
                raise ConfigError(f"{where}: beam {beam} already used elsewhere")
            seen_beams.add(beam)
        lights = entry.get("lights", [])
        if not isinstance(lights, list) or not lights:
            raise ConfigError(f"{where}.lights: expected a non-empty list")
        lights = [check_ref(str(ref), f"{where}.lights") for ref in lights]
        window = int(entry.get("window_ms", 1000))
        if window <= 0:
            raise ConfigError(f"{where}.window_ms: must be positive")
        cfg.zones.append(ZoneSpec(room, outer, inner, lights, window))

    tank = raw.get("tank")
    if tank:
        cfg.tank_pump = check_ref(str(_need(tank, "pump", "tank", str)), "tank.pump",
                                  DeviceKind.PUMP)
        cfg.tank_low = int(tank.get("low", 30))
        cfg.tank_high = int(tank.get("high", 90))
        if not 0 <= cfg.tank_low < cfg.tank_high <= 100:
            raise ConfigError(
                f"tank.low/high: need 0 <= low < high <= 100, got {cfg.tank_low}/{cfg.tank_high}")

    if "gate_travel_ms" in raw:
        cfg.gate_travel_ms = int(raw["gate_travel_ms"])
        if cfg.gate_travel_ms <= 0:
            raise ConfigError("gate_travel_ms: must be positive")

    for i, entry in enumerate(raw.get("gates", [])):
        where = f"gates[{i}]"
        device = check_ref(str(_need(entry, "device", where, str)), where, DeviceKind.GATE)
        idle = int(entry.get("idle_ms", 10000))
        if idle <= 0:
            raise ConfigError(f"{where}.idle_ms: must be positive")
        cfg.gates.append(GateSpec(device, idle))

    for code, ref in (raw.get("aliases") or {}).items():
        room, label = _split_ref(ref, f"aliases.{code}")
        check_ref(f"{room}/{label}", f"aliases.{code}")
        cfg.aliases[str(code).upper()] = (room, label)

    for i, entry in enumerate(raw.get("assets", [])):
        where = f"assets[{i}]"
        asset_id = str(_need(entry, "id", where, str))
        lat = float(_need(entry, "lat", where, (int, float)))
        lon = float(_need(entry, "lon", where, (int, float)))
        radius = float(_need(entry, "radius_m", where, (int, float)))
        if radius <= 0:
            raise ConfigError(f"{where}.radius_m: must be positive")
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            raise ConfigError(f"{where}: bad coordinates ({lat}, {lon})")
        cfg.assets.append(AssetSpec(asset_id, str(entry.get("label", asset_id)),
                                    lat, lon, radius))

    desk = raw.get("desktop")
    if desk:
        width = int(desk.get("width", 1600))
        height = int(desk.get("height", 1200))
        cfg.desktop_size = (width, height)
        icons = desk.get("icons", "default")
        if icons != "default":
            if not isinstance(icons, list):
                raise ConfigError("desktop.icons: expected a list or \"default\"")
            built = []
            for i, entry in enumerate(icons):
                where = f"desktop.icons[{i}]"
                built.append(Icon(
                    str(_need(entry, "name", where, str)),
                    int(_need(entry, "x", where, int)),
                    int(_need(entry, "y", where, int)),
                    int(_need(entry, "w", where, int)),
                    int(_need(entry, "h", where, int)),
                    str(entry.get("action", entry["name"])),
                ))
            cfg.desktop_icons = tuple(built)

    for i, entry in enumerate(raw.get("phones", [])):
        where = f"phones[{i}]"
        phone_id = str(_need(entry, "id", where, str))
        book = entry.get("phonebook", {})
        if not isinstance(book, dict):
            raise ConfigError(f"{where}.phonebook: expected name to number mapping")
        cfg.phones.append(PhoneSpec(phone_id, bool(entry.get("accept", True)),
                                    {str(k): str(v) for k, v in book.items()}))

    if "stream_queue" in raw:
        cfg.stream_queue = int(raw["stream_queue"])
        if cfg.stream_queue < 1:
            raise ConfigError("stream_queue: must be >= 1")

    return cfg
