"""Command grammar: text from any channel -> bound commands.

Productions (docs/grammar.md carries the full table):

    turn on  <target>        turn off <target>
    open <target>            close <target>
    set <n> <target>         set <target> <n>
    status [<target>]        locate <asset>
    start scanning           stop scanning
    stream <camera-target>

A target is `[room-words] kind-or-label`. Binding resolves the longest
leading room match first, then an exact label, then the kind name, then
`label kind`. Anything still matching more than one device is an error,
never a guess.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    AmbiguousTarget,
    BadCompactForm,
    BadLevel,
    EmptyInput,
    UnknownAlias,
    UnknownTarget,
    UnknownVerb,
)
from .model import Device, DeviceKind

CHANNELS = ("voice", "local", "sms", "web", "panel", "cli")

# adjacent token pairs folded into one verb token
_FOLDS = {
    ("turn", "on"): "turn-on",
    ("turn", "off"): "turn-off",
    ("start", "scanning"): "start-scanning",
    ("stop", "scanning"): "stop-scanning",
}

# verb token -> (needs target, surface form)
VERBS = {
    "turn-on": (True, "turn on"),
    "turn-off": (True, "turn off"),
    "open": (True, "open"),
    "close": (True, "close"),
    "set": (True, "set"),
    "status": (False, "status"),
    "start-scanning": (False, "start scanning"),
    "stop-scanning": (False, "stop scanning"),
    "stream": (True, "stream"),
    "locate": (True, "locate"),
}

_DEVICE_VERB = {"turn-on": "on", "turn-off": "off", "open": "open",
                "close": "close", "set": "set"}

COMPACT_VERBS = {"ON": "turn-on", "OFF": "turn-off", "OPEN": "open",
                 "CLOSE": "close", "SET": "set", "STATUS": "status",
                 "ARM": "start-scanning", "DISARM": "stop-scanning"}


@dataclass(frozen=True)
class ParsedCommand:
    verb: str
    target: str | None
    raw: str
    channel: str
    level: int | None = None


@dataclass(frozen=True)
class Command:
    action: str                      # device verb, subsystem verb, status
    channel: str
    raw: str
    device_id: str | None = None
    subsystem: str | None = None     # "security" | "hub"
    asset: str | None = None
    level: int | None = None
    principal: str | None = None


def tokenize(text: str) -> list[str]:
    tokens = text.lower().split()
    if not tokens:
        raise EmptyInput("empty command")
    folded: list[str] = []
    i = 0
    while i < len(tokens):
        if i + 1 < len(tokens) and (tokens[i], tokens[i + 1]) in _FOLDS:
            folded.append(_FOLDS[(tokens[i], tokens[i + 1])])
            i += 2
        else:
            folded.append(tokens[i])
            i += 1
    return folded


def parse(text: str, channel: str) -> ParsedCommand:
    tokens = tokenize(text)
    verb = tokens[0]
    if verb not in VERBS:
        raise UnknownVerb(f"unknown verb in {text!r}")
    rest = tokens[1:]
    level = None
    if verb == "set":
        rest, level = _take_level(rest)
    target = " ".join(rest) if rest else None
    return ParsedCommand(verb, target, text, channel, level)


def _take_level(tokens: list[str]) -> tuple[list[str], int]:
    if tokens and tokens[0].isdigit():
        value, rest = int(tokens[0]), tokens[1:]
    elif tokens and tokens[-1].isdigit():
        value, rest = int(tokens[-1]), tokens[:-1]
    else:
        raise BadLevel("set needs a number 0..100")
    if not 0 <= value <= 100:
        raise BadLevel(f"level {value} out of 0..100")
    return rest, value


def parse_compact(body: str, aliases: dict[str, tuple[str, str]]) -> ParsedCommand:
    """Compact SMS form: `<VERB> <TARGET-CODE>`, e.g. "ON L1"."""
    tokens = body.split()
    if not tokens:
        raise EmptyInput("empty sms body")
    verb = COMPACT_VERBS.get(tokens[0].upper())
    if verb is None:
        raise BadCompactForm(f"unknown compact verb {tokens[0]!r}")
    args = tokens[1:]
    level = None
    if verb == "set":
        if len(args) != 2 or not args[1].isdigit():
            raise BadCompactForm("SET needs <code> <level>")
        level = int(args[1])
        if not 0 <= level <= 100:
            raise BadLevel(f"level {level} out of 0..100")
        args = args[:1]
    if verb in ("status", "start-scanning", "stop-scanning"):
        if args:
            raise BadCompactForm(f"{tokens[0]} takes no target")
        return ParsedCommand(verb, None, body, "sms", level)
    if len(args) != 1:
        raise BadCompactForm(f"{tokens[0]} needs exactly one target code")
    code = args[0].upper()
    if code not in aliases:
        raise UnknownAlias(f"unknown alias {code}")
    room, label = aliases[code]
    return ParsedCommand(verb, f"{room} {label}", body, "sms", level)


def bind(parsed: ParsedCommand, devices: list[Device],
         assets: tuple[str, ...] = (), principal: str | None = None) -> Command:
    base = dict(channel=parsed.channel, raw=parsed.raw, level=parsed.level,
                principal=principal)
    if parsed.verb in ("start-scanning", "stop-scanning"):
        return Command(action=parsed.verb, subsystem="security", **base)
    if parsed.verb == "status" and parsed.target is None:
        return Command(action="status", subsystem="hub", **base)
    if parsed.verb == "locate":
        if not parsed.target:
            raise UnknownTarget("locate needs an asset")
        if parsed.target not in assets:
            raise UnknownTarget(f"unknown asset {parsed.target!r}")
        return Command(action="locate", asset=parsed.target, **base)
    if not parsed.target:
        raise UnknownTarget(f"{parsed.verb} needs a target")
    device = _resolve(parsed.target, devices,
                      camera_only=(parsed.verb == "stream"))
    action = _DEVICE_VERB.get(parsed.verb, parsed.verb)
    return Command(action=action, device_id=device.id, **base)


def _resolve(phrase: str, devices: list[Device], camera_only: bool) -> Device:
    tokens = phrase.split()
    pool = [d for d in devices if d.kind is DeviceKind.CAMERA] if camera_only else devices
    room, rest = _split_room(tokens, pool)
    scope = [d for d in pool if d.room == room] if room else pool
    if not rest:
        raise UnknownTarget(f"no device matches {phrase!r}")
    candidates = _match(rest, scope)
    if not candidates:
        raise UnknownTarget(f"no device matches {phrase!r}")
    if len(candidates) > 1:
        raise AmbiguousTarget(sorted(d.ref for d in candidates))
    return candidates[0]


def _split_room(tokens: list[str], devices: list[Device]) -> tuple[str | None, list[str]]:
    rooms = {d.room for d in devices}
    for cut in range(len(tokens) - 1, 0, -1):  # longest prefix wins
        prefix = " ".join(tokens[:cut])
        if prefix in rooms:
            return prefix, tokens[cut:]
    return None, tokens


def _match(rest: list[str], scope: list[Device]) -> list[Device]:
    name = " ".join(rest)
    by_label = [d for d in scope if d.label == name]
    if by_label:
        return by_label
    by_kind = [d for d in scope if d.kind.value == name]
    if by_kind:
        return by_kind
    if len(rest) >= 2:
        label, kind = " ".join(rest[:-1]), rest[-1]
        return [d for d in scope if d.label == label and d.kind.value == kind]
    return []


def render(command: Command, device: Device | None = None) -> str:
    """Canonical text for a bound command; reparsing it binds identically."""
    verb_token = {v: k for k, v in _DEVICE_VERB.items()}.get(command.action, command.action)
    surface = VERBS[verb_token][1]
    if verb_token == "set":
        surface = f"set {command.level}"
    if command.subsystem is not None:
        return surface
    if command.asset is not None:
        return f"{surface} {command.asset}"
    assert device is not None and device.id == command.device_id
    return f"{surface} {device.room} {device.label}"
