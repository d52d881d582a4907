"""Simulated server desktop: icon grid, click mapping, command table, power.

The desktop is a model, not a real OS surface; the interface is shaped so
a real screen/input backend could replace it. Command execution is an
allowlisted simulation on purpose, never a shell.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clock import BaseClock
from .errors import (
    BadViewport,
    ConfigError,
    Denied,
    DesktopUnavailable,
    UnknownCommand,
)


@dataclass(frozen=True)
class Icon:
    name: str
    x: int
    y: int
    w: int
    h: int
    action: str


DEFAULT_ICONS = (
    Icon("Media Player", 40, 40, 96, 96, "media-player"),
    Icon("Browser", 200, 40, 96, 96, "browser"),
    Icon("Documents", 360, 40, 96, 96, "documents"),
    Icon("Task Manager", 40, 200, 96, 96, "task-manager"),
    Icon("Music", 200, 200, 96, 96, "music"),
    Icon("Recycle Bin", 360, 200, 96, 96, "recycle-bin"),
)

_DIR_LISTING = """\
 Directory of C:\\Users\\home

 documents/
 pictures/
 music/
 notes.txt        1,024
 readme.txt         512
        2 File(s)  1,536 bytes"""

_VERSION = "HomeHub Desktop [Version 0.1.0]"


def map_click(xc: int, yc: int, wc: int, hc: int, ws: int, hs: int) -> tuple[int, int]:
    """Scale a client click to server pixels, rounding half away from zero.

    Exact integer arithmetic: for non-negative a, b the expression
    (2*a + b) // (2*b) is floor(a/b + 1/2).
    """
    if wc <= 0 or hc <= 0 or ws <= 0 or hs <= 0:
        raise BadViewport(f"bad viewport {wc}x{hc} -> {ws}x{hs}")
    xs = (2 * xc * ws + wc) // (2 * wc)
    ys = (2 * yc * hs + hc) // (2 * hc)
    return xs, ys


class DesktopModel:
    def __init__(self, width: int, height: int, icons, emit, clock: BaseClock):
        self.width = width
        self.height = height
        self.icons = tuple(icons)
        self._emit = emit
        self._clock = clock
        self.running: set[str] = set()
        self.available = True
        self._validate()

    def _validate(self) -> None:
        boxes = []
        for icon in self.icons:
            if icon.w <= 0 or icon.h <= 0:
                raise ConfigError(f"icon {icon.name}: empty box")
            if not (0 <= icon.x and icon.x + icon.w <= self.width
                    and 0 <= icon.y and icon.y + icon.h <= self.height):
                raise ConfigError(f"icon {icon.name}: box outside {self.width}x{self.height}")
            for other, box in boxes:
                if (icon.x < box.x + box.w and box.x < icon.x + icon.w
                        and icon.y < box.y + box.h and box.y < icon.y + icon.h):
                    raise ConfigError(f"icons {other} and {icon.name} overlap")
            boxes.append((icon.name, icon))

    def _check_up(self) -> None:
        if not self.available:
            raise DesktopUnavailable("desktop is shut down")

    def get_desktop(self) -> dict:
        self._check_up()
        return {
            "width": self.width,
            "height": self.height,
            "icons": [{"name": i.name, "x": i.x, "y": i.y, "w": i.w, "h": i.h}
                      for i in self.icons],
            "running": sorted(self.running),
        }

    def click(self, xc: int, yc: int, wc: int, hc: int) -> tuple[str, str] | None:
        self._check_up()
        xs, ys = map_click(xc, yc, wc, hc, self.width, self.height)
        for icon in self.icons:
            if icon.x <= xs < icon.x + icon.w and icon.y <= ys < icon.y + icon.h:
                return self._toggle(icon)
        return None

    def _toggle(self, icon: Icon) -> tuple[str, str]:
        if icon.name in self.running:
            self.running.discard(icon.name)
            self._emit("app-closed", icon.name)
            return icon.name, "closed"
        self.running.add(icon.name)
        self._emit("app-opened", icon.name)
        return icon.name, "opened"

    def exec_command(self, principal: str, line: str) -> str:
        self._check_up()
        if principal != "owner":
            raise Denied("command execution is owner-only")
        cmd, _, rest = line.strip().partition(" ")
        cmd = cmd.lower()
        if cmd == "echo":
            out = rest
        elif cmd == "dir":
            out = _DIR_LISTING
        elif cmd == "time":
            out = self._clock.iso()
        elif cmd == "ver":
            out = _VERSION
        else:
            raise UnknownCommand(f"not in the command table: {cmd!r}")
        self._emit("exec", "desktop", cmd=line.strip())
        return out

    def power(self, principal: str, action: str) -> str:
        self._check_up()
        if principal != "owner":
            raise Denied("power actions are owner-only")
        if action == "restart":
            self.running.clear()
            self._emit("power", "desktop", action="restart")
            return "restarted"
        if action == "shutdown":
            self.running.clear()
            self.available = False
            self._emit("power", "desktop", action="shutdown")
            return "shut-down"
        if action == "logoff":
            # the hub clears session principals when it sees this marker
            self._emit("power", "desktop", action="logoff")
            return "logged-off"
        raise UnknownCommand(f"unknown power action {action!r}")
