"""The `hub` command: daemon runner plus thin clients for the wire protocol.

    hub run --config hub.yaml [--scenario s.txt] [--sim]
    hub replay data/events.log
    hub cmd "turn on kitchen tube" --token T
    hub watch --topics state,alert --token T
    hub stream d8 --out frames/ --frames 10 --token T
    hub agent --phone pixel --token T

Exit codes: 0 success, 1 remote or runtime error, 2 bad config or usage,
3 bind failure.
"""

from __future__ import annotations

import argparse
import os
import socket
import sys
import threading
from pathlib import Path

from . import wire
from .clock import RealClock, SimClock
from .config import ConfigError, load_config
from .errors import BindFailure, HubError
from .hub import Hub


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hub")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start the hub daemon")
    run.add_argument("--config", required=True)
    run.add_argument("--scenario", help="scripted sensor/command timeline")
    run.add_argument("--sim", action="store_true",
                     help="simulated clock; with --scenario runs offline")
    run.add_argument("--panel", help="directory of built panel assets")
    run.set_defaults(fn=_cmd_run)

    rep = sub.add_parser("replay", help="rebuild final state from a log")
    rep.add_argument("log")
    rep.set_defaults(fn=_cmd_replay)

    for name, helptext in (("cmd", "send one command line"),
                           ("watch", "print pushed events"),
                           ("stream", "save camera frames as PGM files"),
                           ("agent", "attach a phone agent")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--host", default="127.0.0.1")
        p.add_argument("--port", type=int, default=7070)
        p.add_argument("--token", default=os.environ.get("HUB_TOKEN", ""),
                       help="auth token (or HUB_TOKEN env)")
        if name == "cmd":
            p.add_argument("text")
            p.add_argument("--channel", default="cli")
            p.set_defaults(fn=_cmd_cmd)
        elif name == "watch":
            p.add_argument("--topics", default="state,alert,stream-meta")
            p.set_defaults(fn=_cmd_watch)
        elif name == "stream":
            p.add_argument("camera")
            p.add_argument("--out", default=".")
            p.add_argument("--frames", type=int, default=0,
                           help="stop after N frames (0 = until interrupted)")
            p.set_defaults(fn=_cmd_stream)
        else:
            p.add_argument("--phone", required=True)
            p.add_argument("--reject", action="store_true",
                           help="refuse pair requests")
            p.add_argument("--contact", action="append", default=[],
                           metavar="NAME=NUMBER")
            p.set_defaults(fn=_cmd_agent)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 0


# ---- daemon ----------------------------------------------------------------

def _cmd_run(args) -> int:
    from .scenario import load_scenario, run_real, run_sim

    try:
        config = load_config(Path(args.config))
        steps = load_scenario(Path(args.scenario)) if args.scenario else None
    except ConfigError as err:
        print(f"config error: {err.message}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    clock = SimClock() if args.sim else RealClock()
    hub = Hub(config, clock)

    if args.sim and steps is not None:
        # offline deterministic playback: no sockets, just the log
        failures = run_sim(hub, steps)
        for step, err in failures:
            print(f"scenario line {step.line_no}: {err.code} {err.message}",
                  file=sys.stderr)
        _print_state(hub.snapshot())
        hub.close()
        return 0

    from .api import create_app
    from .protocol import ControlServer

    try:
        control = ControlServer(hub, *config.control_bind)
    except BindFailure as err:
        print(f"bind error: {err.message}", file=sys.stderr)
        hub.close()
        return 3

    stop = threading.Event()
    if steps is not None:
        threading.Thread(target=run_real, args=(hub, steps, stop),
                         daemon=True, name="hub-scenario").start()

    import uvicorn

    host, port = config.http_bind
    server = uvicorn.Server(uvicorn.Config(
        create_app(hub, panel_dir=_panel_dir(args)),
        host=host, port=port, log_level="warning"))
    print(f"control on {config.control_bind[0]}:{config.control_bind[1]}, "
          f"http on {host}:{port}", file=sys.stderr)
    code = 0
    try:
        server.run()
        if not server.started:
            print(f"bind error: http {host}:{port} unavailable",
                  file=sys.stderr)
            code = 3
    except SystemExit:
        code = 3
    finally:
        stop.set()
        control.close()
        hub.close()
    return code


def _panel_dir(args) -> Path | None:
    if args.panel:
        return Path(args.panel)
    bundled = Path.cwd() / "frontend" / "dist"
    return bundled if bundled.is_dir() else None


def _print_state(snap: dict) -> None:
    for ref, state in snap["devices"].items():
        print(f"{ref}={state}")
    for key, count in sorted(snap["counters"].items()):
        print(f"{key}={count}")


def _cmd_replay(args) -> int:
    from .events import replay

    path = Path(args.log)
    if not path.is_file():
        print(f"no such log: {path}", file=sys.stderr)
        return 2
    try:
        state = replay(path)
    except HubError as err:
        print(f"corrupt log: {err.message}", file=sys.stderr)
        return 2
    _print_state({"devices": state.devices, "counters": state.counters})
    return 0


# ---- thin wire clients -----------------------------------------------------

class _Client:
    def __init__(self, host: str, port: int, token: str,
                 channel: str | None = None):
        try:
            self.sock = socket.create_connection((host, port), timeout=10)
        except OSError as err:
            raise SystemExit(f"cannot reach {host}:{port}: {err}")
        self.rf = self.sock.makefile("rb")
        auth = f"AUTH {token} {channel}" if channel else f"AUTH {token}"
        ok, payload = self.request(auth)
        if not ok:
            raise SystemExit(f"auth failed: {payload[0]}")

    def send(self, line: str) -> None:
        self.sock.sendall((line + "\n").encode("utf-8"))

    def read_line(self) -> str | None:
        raw = self.rf.readline()
        if not raw:
            return None
        return raw.rstrip(b"\n").decode("utf-8")

    def read_exact(self, n: int) -> bytes:
        data = self.rf.read(n)
        if data is None or len(data) != n:
            raise SystemExit("connection lost mid-frame")
        return data

    def request(self, line: str) -> tuple[bool, list[str]]:
        """Send one request; skip pushes; return (ok, fields-or-error)."""
        self.send(line)
        while True:
            reply = self.read_line()
            if reply is None:
                raise SystemExit("connection closed")
            if reply.startswith("EVT "):
                continue
            if reply == "OK":
                return True, []
            if reply.startswith("OK "):
                return True, wire.split_fields(reply[3:])
            if reply.startswith("ERR "):
                return False, [reply[4:]]
            raise SystemExit(f"unexpected reply: {reply}")


def _cmd_cmd(args) -> int:
    client = _Client(args.host, args.port, args.token, args.channel)
    ok, fields = client.request("CMD " + args.text)
    if not ok:
        print(fields[0], file=sys.stderr)
        return 1
    print("\t".join(fields))
    return 0


def _cmd_watch(args) -> int:
    client = _Client(args.host, args.port, args.token)
    for topic in args.topics.split(","):
        ok, fields = client.request(f"SUB {topic}")
        if not ok:
            print(fields[0], file=sys.stderr)
            return 1
    while True:
        line = client.read_line()
        if line is None:
            return 0
        print(line, flush=True)


def _cmd_stream(args) -> int:
    from .surveillance import write_pgm

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    client = _Client(args.host, args.port, args.token)
    ok, fields = client.request(f"STREAM {args.camera}")
    if not ok:
        print(fields[0], file=sys.stderr)
        return 1
    width, height = int(fields[1]), int(fields[2])
    saved = 0
    try:
        while args.frames <= 0 or saved < args.frames:
            line = client.read_line()
            if line is None:
                return 1
            if not line.startswith("FRAME "):
                continue
            _, seq, _at, length = line.split(" ")
            pixels = client.read_exact(int(length))
            path = out / f"{args.camera}-{int(seq):06d}.pgm"
            write_pgm(path, width, height, pixels)
            print(path, flush=True)
            saved += 1
    except KeyboardInterrupt:
        pass
    client.send("STOP")
    while True:   # frames still in flight before the stop took effect
        line = client.read_line()
        if line is None or line.startswith("OK") or line.startswith("ERR"):
            break
        if line.startswith("FRAME "):
            client.read_exact(int(line.rsplit(" ", 1)[1]))
    return 0


def _cmd_agent(args) -> int:
    from .mobile import Phone

    phonebook = []
    for pair in args.contact:
        name, _, number = pair.partition("=")
        if not name or not number:
            print(f"bad --contact {pair!r}, want NAME=NUMBER", file=sys.stderr)
            return 2
        phonebook.append((name, number))
    phone = Phone(args.phone, phonebook=phonebook,
                  auto_accept=not args.reject)

    client = _Client(args.host, args.port, args.token)
    ok, fields = client.request(f"HELLO {args.phone}")
    if not ok:
        print(fields[0], file=sys.stderr)
        return 1
    print(f"agent {args.phone} attached", file=sys.stderr)
    while True:
        line = client.read_line()
        if line is None:
            return 0
        if line == "PAIR?":
            client.send("REJECT" if args.reject else "ACCEPT")
            continue
        if line.startswith("OP "):
            op_fields = wire.split_fields(line[3:])
            try:
                result = phone.op(op_fields[0], op_fields[1:])
                client.send("RES " + wire.join_fields(result))
            except HubError as err:
                client.send(f"ERR {err.code} {err.message}")
            continue
        # server chatter (e.g. OK pong) needs no answer


if __name__ == "__main__":
    sys.exit(main())
