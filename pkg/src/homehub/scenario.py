"""Scenario scripts: timestamped simulated sensor and user events.

Line format: `<t-millis> <event-kind> <args...>`, `#` comments, blank lines
ignored. Timestamps are relative to run start and must be non-decreasing.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from .clock import SimClock
from .errors import ConfigError, HubError
from .grammar import CHANNELS
from .hub import Hub

KINDS = ("beam", "tank", "gps", "presence", "cmd", "sms", "number",
         "arm", "disarm", "pair", "op", "sever", "end")

_MIN_ARGS = {"beam": 1, "tank": 1, "gps": 3, "presence": 1, "cmd": 2,
             "sms": 2, "number": 1, "arm": 0, "disarm": 0, "pair": 2,
             "op": 2, "sever": 1, "end": 0}


@dataclass(frozen=True)
class Step:
    t_ms: int
    kind: str
    args: tuple[str, ...]
    line_no: int


def parse_scenario(text: str) -> list[Step]:
    steps: list[Step] = []
    last_t = 0
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if not parts[0].isdigit():
            raise ConfigError(f"scenario line {n}: bad timestamp {parts[0]!r}")
        t = int(parts[0])
        if len(parts) < 2:
            raise ConfigError(f"scenario line {n}: missing event kind")
        kind, args = parts[1], tuple(parts[2:])
        if kind not in KINDS:
            raise ConfigError(f"scenario line {n}: unknown event kind {kind!r}")
        if len(args) < _MIN_ARGS[kind]:
            raise ConfigError(f"scenario line {n}: {kind} needs at least "
                              f"{_MIN_ARGS[kind]} args")
        if kind == "cmd" and args[0] not in CHANNELS:
            raise ConfigError(f"scenario line {n}: unknown channel {args[0]!r}")
        if kind == "beam" and len(args) > 1 and args[1] not in ("broken", "restored"):
            raise ConfigError(f"scenario line {n}: beam state must be "
                              f"broken or restored")
        if t < last_t:
            raise ConfigError(f"scenario line {n}: timestamps must not decrease")
        last_t = t
        steps.append(Step(t, kind, args, n))
    return steps


def load_scenario(path: Path | str) -> list[Step]:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def apply_step(hub: Hub, step: Step) -> None:
    kind, args = step.kind, step.args
    if kind == "beam":
        hub.beam(args[0], broken=(len(args) < 2 or args[1] == "broken"))
    elif kind == "tank":
        hub.tank_level(int(args[0]))
    elif kind == "gps":
        hub.gps_fix(args[0], float(args[1]), float(args[2]))
    elif kind == "presence":
        hub.presence(args[0])
    elif kind == "cmd":
        hub.run_text(" ".join(args[1:]), channel=args[0], principal="owner")
    elif kind == "sms":
        hub.sms_in(args[0], " ".join(args[1:]))
    elif kind == "number":
        hub.set_number(args[0])
    elif kind == "arm":
        hub.arm()
    elif kind == "disarm":
        hub.disarm()
    elif kind == "pair":
        hub.pair(args[0], args[1])
    elif kind == "op":
        hub.bridge_op(args[0], args[1], list(args[2:]))
    elif kind == "sever":
        hub.sever(args[0])
    # "end" is only a timestamp marker


def run_sim(hub: Hub, steps: list[Step]) -> list[tuple[Step, HubError]]:
    """Drive a SimClock hub through the script; time jumps between steps."""
    clock = hub.clock
    assert isinstance(clock, SimClock), "run_sim needs a simulated clock"
    base = clock.now_ms()
    failures: list[tuple[Step, HubError]] = []
    for step in steps:
        clock.advance_to(base + step.t_ms)
        try:
            apply_step(hub, step)
        except HubError as err:
            failures.append((step, err))
    return failures


def run_real(hub: Hub, steps: list[Step],
             stop: threading.Event) -> list[tuple[Step, HubError]]:
    """Wall-clock playback; returns early if stop is set."""
    base = hub.clock.now_ms()
    failures: list[tuple[Step, HubError]] = []
    for step in steps:
        delay_ms = base + step.t_ms - hub.clock.now_ms()
        if delay_ms > 0 and stop.wait(delay_ms / 1000.0):
            break
        if stop.is_set():
            break
        try:
            apply_step(hub, step)
        except HubError as err:
            failures.append((step, err))
    return failures
