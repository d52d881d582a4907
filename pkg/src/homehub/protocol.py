"""TCP control protocol: newline-delimited requests, pushes and frame bytes.

Framing: request = `<VERB> [rest]`, response = `OK [tab-sep fields]` or
`ERR <code> <message>`, push = `EVT <topic> <event-line>`. Stream frames are
`FRAME <seq> <at-ms> <len>` followed by exactly len raw pixel bytes.

Per session one reader and one writer thread; the writer drains a bounded
outbox so a stalled client can never wedge the hub. Pushes caused by a
session's own request are enqueued during execution, hence always precede
that request's OK.
"""

from __future__ import annotations

import itertools
import queue
import socket
import threading
from collections import deque

from . import wire
from .errors import (
    AuthRequired,
    BadOp,
    BindFailure,
    BusyCall,
    Denied,
    HubError,
    LinkLost,
    NotPaired,
    StreamBusy,
    UnknownCommand,
    UnknownContact,
    UnknownVerb,
)
from .events import Event
from .grammar import CHANNELS
from .hub import Hub

PUSH_LIMIT = 256
VALID_TOPICS = ("state", "alert", "stream-meta")

# verbs a session may issue before AUTH
_OPEN_VERBS = ("AUTH", "PING")

# owner-only verbs with no per-session state; the HTTP facade accepts these
# verbatim in POST /command so panels can drive the security automaton, the
# simulated sensors, and the phone bridge
INGRESS_VERBS = ("SETNUM", "ARM", "DISARM", "PAIR", "MOP", "SEVER",
                 "BEAM", "TANK", "GPS", "PRESENCE", "SMS")


def ingress_fields(hub: Hub, verb: str, rest: str, owner_key: str) -> list[str]:
    """Run one session-free wire verb; the caller has checked the principal."""
    if verb == "SETNUM":
        hub.set_number(rest.strip())
        return [hub.security.phase]
    if verb == "ARM":
        return [hub.arm()]
    if verb == "DISARM":
        return [hub.disarm()]
    if verb == "PAIR":
        phone_id = rest.strip()
        if not phone_id:
            raise BadOp("PAIR needs a phone id")
        session = hub.pair(owner_key, phone_id)
        return [phone_id, session.state]
    if verb == "MOP":
        fields = wire.split_fields(rest) if "\t" in rest else rest.split()
        if not fields or not fields[0]:
            raise BadOp("MOP needs an op name")
        op, args = fields[0], fields[1:]
        if op == "sms-send" and len(args) > 2:
            args = [args[0], " ".join(args[1:])]   # space-form convenience
        return hub.bridge_op(owner_key, op, args)
    if verb == "SEVER":
        phone_id = rest.strip()
        if not phone_id:
            raise BadOp("SEVER needs a phone id")
        hub.sever(phone_id)
        return []
    if verb == "BEAM":
        parts = rest.split()
        if not parts:
            raise BadOp("BEAM needs a beam id")
        if len(parts) > 1 and parts[1] not in ("broken", "restored"):
            raise BadOp("beam state must be broken or restored")
        hub.beam(parts[0], broken=(len(parts) < 2 or parts[1] == "broken"))
        return []
    if verb == "TANK":
        value = rest.strip()
        if not value.lstrip("-").isdigit():
            raise BadOp("TANK needs an integer level")
        hub.tank_level(int(value))
        return []
    if verb == "GPS":
        parts = rest.split()
        if len(parts) != 3:
            raise BadOp("GPS needs <asset> <lat> <lon>")
        try:
            lat, lon = float(parts[1]), float(parts[2])
        except ValueError:
            raise BadOp("bad coordinates") from None
        hub.gps_fix(parts[0], lat, lon)
        return []
    if verb == "PRESENCE":
        hub.presence(rest.strip())
        return []
    if verb == "SMS":
        from_number, _, body = rest.partition(" ")
        if not from_number or not body:
            raise BadOp("SMS needs <from> <body>")
        return [hub.sms_in(from_number, body)]
    raise UnknownVerb(f"unknown verb {verb}")

_AGENT_ERRORS = {
    "EBUSY": BusyCall,
    "ETARGET": UnknownContact,
    "EPARSE": BadOp,
    "EUNKNOWNCMD": UnknownCommand,
    "ELINK": LinkLost,
    "ESTATE": NotPaired,
}


def _agent_error(code: str, message: str) -> HubError:
    cls = _AGENT_ERRORS.get(code)
    if cls is not None:
        return cls(message)
    err = HubError(message)
    err.code = code or "ESTATE"
    return err


def _sanitize(message: str) -> str:
    return " ".join(message.split()) if message else ""


class _Outbox:
    """Outbound items in FIFO order; EVT pushes count toward the slow cap."""

    def __init__(self, push_limit: int):
        self._items: deque = deque()
        self._cv = threading.Condition()
        self._limit = push_limit
        self._pushes = 0
        self._frames_flagged = False
        self.dead = False

    def put_reply(self, line: str) -> None:
        with self._cv:
            if self.dead:
                return
            self._items.append(("line", line))
            self._cv.notify()

    def put_push(self, line: str) -> None:
        with self._cv:
            if self.dead:
                return
            if self._pushes >= self._limit:
                # slow client: drop everything pending and hang up
                self.dead = True
                self._items.clear()
                self._items.append(("line", "ERR ESLOW push buffer overflow"))
                self._items.append(("close", None))
                self._cv.notify()
                return
            self._pushes += 1
            self._items.append(("push", line))
            self._cv.notify()

    def wake_frames(self) -> None:
        with self._cv:
            if self.dead or self._frames_flagged:
                return
            self._frames_flagged = True
            self._items.append(("frames", None))
            self._cv.notify()

    def put_close(self) -> None:
        with self._cv:
            self.dead = True
            self._items.append(("close", None))
            self._cv.notify()

    def get(self):
        with self._cv:
            while not self._items:
                self._cv.wait()
            kind, value = self._items.popleft()
            if kind == "push":
                self._pushes -= 1
            elif kind == "frames":
                self._frames_flagged = False
            return kind, value


class TcpAgentLink:
    """A phone agent on the far end of a control connection.

    Bridge calls become one-question-at-a-time RPCs: `PAIR?` answered by
    ACCEPT/REJECT, `OP ...` answered by RES/ERR. No answer within the
    timeout means the link is dead.
    """

    def __init__(self, session: "Session", timeout: float = 5.0):
        self._session = session
        self._timeout = timeout
        self._rpc = threading.Lock()
        self._pending: queue.Queue | None = None
        self._alive = True

    def request_pair(self) -> bool:
        head, _rest = self._call("PAIR?")
        return head == "ACCEPT"

    def op(self, name: str, args: list[str]) -> list[str]:
        head, rest = self._call("OP " + wire.join_fields([name] + list(args)))
        if head == "RES":
            return wire.split_fields(rest)
        code, _, message = rest.partition(" ")
        raise _agent_error(code, message)

    def _call(self, line: str) -> tuple[str, str]:
        with self._rpc:
            if not self._alive:
                raise LinkLost("agent link closed")
            q: queue.Queue = queue.Queue(1)
            self._pending = q
            try:
                self._session.out.put_reply(line)
                try:
                    return q.get(timeout=self._timeout)
                except queue.Empty:
                    self._alive = False
                    self._session.out.put_close()
                    raise LinkLost("agent did not answer") from None
            finally:
                self._pending = None

    def feed(self, head: str, rest: str) -> bool:
        q = self._pending
        if q is None:
            return False
        try:
            q.put_nowait((head, rest))
        except queue.Full:
            return False
        return True

    def alive(self) -> bool:
        return self._alive

    def close(self) -> None:
        self._alive = False
        self._session.out.put_close()


class Session:
    def __init__(self, server: "ControlServer", sock: socket.socket, sid: int):
        self.server = server
        self.hub: Hub = server.hub
        self.sock = sock
        self.sid = sid
        self.principal: str | None = None
        self.channel = "local"
        self.subs: set[str] = set()
        self.out = _Outbox(server.push_limit)
        self.stream = None
        self.agent_phone: str | None = None
        self.agent_link: TcpAgentLink | None = None
        self._down = False
        self._down_lock = threading.Lock()
        threading.Thread(target=self._write_loop, daemon=True,
                         name=f"hub-wire-w{sid}").start()

    @property
    def owner_key(self) -> str:
        return f"s{self.sid}"

    # runs under the hub lock; must only enqueue
    def on_event(self, ev: Event) -> None:
        topic = ev.topic
        if topic is not None and topic in self.subs:
            self.out.put_push(f"EVT {topic} {ev.line()}")

    # ---- writer ----------------------------------------------------------

    def _write_loop(self) -> None:
        try:
            while True:
                kind, value = self.out.get()
                if kind == "close":
                    break
                if kind == "frames":
                    if not self._send_frames():
                        break
                else:
                    self.sock.sendall((value + "\n").encode("utf-8"))
        except OSError:
            pass
        self._teardown()

    def _send_frames(self) -> bool:
        stream = self.stream
        if stream is None:
            return True
        while True:
            frame = stream.pop()
            if frame is None:
                return True
            head = f"FRAME {frame.seq} {frame.at_ms} {len(frame.pixels)}\n"
            try:
                self.sock.sendall(head.encode("utf-8") + frame.pixels)
            except OSError:
                return False

    # ---- reader ----------------------------------------------------------

    def _read_loop(self) -> None:
        rfile = self.sock.makefile("rb")
        try:
            while True:
                raw = rfile.readline(wire.MAX_LINE + 1)
                if not raw:
                    break
                if len(raw) > wire.MAX_LINE:
                    self.out.put_reply("ERR ETOOLONG line exceeds "
                                       f"{wire.MAX_LINE} bytes")
                    break
                if not raw.endswith(b"\n"):
                    break   # EOF mid-line
                line = raw.decode("utf-8", errors="replace").rstrip("\r\n")
                if not line:
                    continue
                if self.agent_phone is not None:
                    if not self._agent_line(line):
                        break
                else:
                    self._request(line)
                if self.out.dead:
                    break
        except OSError:
            pass
        finally:
            # the writer drains any queued goodbye, then tears down
            self.out.put_close()

    def _request(self, line: str) -> None:
        verb, _, rest = line.partition(" ")
        verb = verb.upper()
        try:
            if self.principal is None and verb not in _OPEN_VERBS:
                raise AuthRequired("authenticate first")
            handler = getattr(self, "_verb_" + verb.lower(), None)
            if handler is None:
                raise UnknownVerb(f"unknown verb {verb}")
            fields = handler(rest)
            self.out.put_reply(
                "OK" if not fields else "OK " + wire.join_fields(fields))
        except HubError as err:
            self.out.put_reply(f"ERR {err.code} {_sanitize(err.message)}")

    def _agent_line(self, line: str) -> bool:
        """Answer lines from a phone agent; False closes the connection."""
        head, _, rest = line.partition(" ")
        head = head.upper()
        if head == "BYE":
            return False
        if head == "PING":
            self.out.put_reply("OK pong")
            return True
        if head in ("ACCEPT", "REJECT", "RES", "ERR"):
            if not self.agent_link.feed(head, rest):
                self.out.put_reply("ERR ESTATE no pending request")
            return True
        self.out.put_reply("ERR EVERB agent sessions only answer")
        return True

    # ---- request verbs ------------------------------------------------------

    def _need_owner(self) -> None:
        if self.principal != "owner":
            raise Denied("owner only")

    def _verb_auth(self, rest: str) -> list[str]:
        parts = rest.split()
        if not parts:
            raise AuthRequired("token required")
        principal = self.server.tokens.get(parts[0])
        if principal is None:
            raise AuthRequired("invalid token")
        channel = parts[1] if len(parts) > 1 else "local"
        if channel not in CHANNELS:
            raise BadOp(f"unknown channel {channel!r}")
        self.principal = principal
        self.channel = channel
        return [principal]

    def _verb_ping(self, rest: str) -> list[str]:
        return ["pong"]

    def _verb_cmd(self, rest: str) -> list[str]:
        command = self.hub.bind_text(rest, self.channel, self.principal)
        if (command.action in ("start-scanning", "stop-scanning")
                and self.principal != "owner"):
            raise Denied("security control is owner-only")
        if command.action == "stream":
            return self._open_stream(command.device_id)
        return self.hub.execute(command)

    def _verb_sub(self, rest: str) -> list[str]:
        topic = rest.strip()
        if topic not in VALID_TOPICS:
            raise BadOp(f"unknown topic {topic!r}")
        self.subs.add(topic)
        return [topic]

    def _verb_unsub(self, rest: str) -> list[str]:
        topic = rest.strip()
        if topic not in VALID_TOPICS:
            raise BadOp(f"unknown topic {topic!r}")
        self.subs.discard(topic)
        return [topic]

    def _verb_setnum(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "SETNUM", rest, self.owner_key)

    def _verb_arm(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "ARM", rest, self.owner_key)

    def _verb_disarm(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "DISARM", rest, self.owner_key)

    def _verb_stream(self, rest: str) -> list[str]:
        phrase = rest.strip()
        if not phrase:
            raise BadOp("STREAM needs a camera")
        return self._open_stream(self._resolve_camera(phrase))

    def _resolve_camera(self, phrase: str) -> str:
        if phrase in self.hub.deck.ids():
            return phrase
        command = self.hub.bind_text("stream " + phrase, self.channel,
                                     self.principal)
        return command.device_id

    def _open_stream(self, camera_id: str) -> list[str]:
        if self.stream is not None:
            raise StreamBusy("session already streaming")
        width, height, _fps = self.hub.deck.geometry(camera_id)
        stream = self.hub.deck.open_stream(camera_id)
        stream.on_offer = self.out.wake_frames
        self.stream = stream
        return ["STREAM", str(width), str(height)]

    def _verb_stop(self, rest: str) -> list[str]:
        stream = self.stream
        if stream is None:
            raise BadOp("no stream open")
        self.stream = None
        self.hub.deck.close_stream(stream)
        return ["stopped"]

    def _verb_desk(self, rest: str) -> list[str]:
        model = self.hub.desktop_model()
        fields = [str(model["width"]), str(model["height"])]
        fields += [f"{i['name']}@{i['x']},{i['y']},{i['w']}x{i['h']}"
                   for i in model["icons"]]
        fields.append("running:" + ",".join(model["running"]))
        return fields

    def _verb_click(self, rest: str) -> list[str]:
        parts = rest.split()
        if len(parts) != 4:
            raise BadOp("CLICK needs x y Wc Hc")
        try:
            xc, yc, wc, hc = (int(p) for p in parts)
        except ValueError:
            raise BadOp("CLICK needs four integers") from None
        outcome = self.hub.desktop_click(xc, yc, wc, hc)
        if outcome is None:
            return ["miss"]
        return [outcome[0], outcome[1]]

    def _verb_exec(self, rest: str) -> list[str]:
        return [self.hub.desktop_exec(self.principal, rest)]

    def _verb_power(self, rest: str) -> list[str]:
        action = rest.strip()
        return [self.hub.desktop_power(self.principal, action)]

    def _verb_pair(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "PAIR", rest, self.owner_key)

    def _verb_mop(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "MOP", rest, self.owner_key)

    def _verb_sever(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "SEVER", rest, self.owner_key)

    def _verb_hello(self, rest: str) -> list[str]:
        phone_id = rest.strip()
        if not phone_id:
            raise BadOp("HELLO needs a phone id")
        link = TcpAgentLink(self)
        self.hub.register_agent(phone_id, link)
        self.agent_phone = phone_id
        self.agent_link = link
        return [phone_id]

    # ---- simulator ingress (owner only) --------------------------------------

    def _verb_beam(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "BEAM", rest, self.owner_key)

    def _verb_tank(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "TANK", rest, self.owner_key)

    def _verb_gps(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "GPS", rest, self.owner_key)

    def _verb_presence(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "PRESENCE", rest, self.owner_key)

    def _verb_sms(self, rest: str) -> list[str]:
        self._need_owner()
        return ingress_fields(self.hub, "SMS", rest, self.owner_key)

    # ---- teardown -------------------------------------------------------------

    def _teardown(self) -> None:
        with self._down_lock:
            if self._down:
                return
            self._down = True
        self.hub.unsubscribe(self.on_event)
        stream, self.stream = self.stream, None
        if stream is not None:
            try:
                self.hub.deck.close_stream(stream)
            except Exception:
                pass
        if self.agent_phone is not None:
            try:
                self.hub.sever(self.agent_phone)
            except Exception:
                pass
        else:
            try:
                self.hub.drop_owner(self.owner_key)
            except Exception:
                pass
        try:
            # shutdown, not just close: the reader thread holds a makefile
            # handle on the same fd, so close alone would never send FIN
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        self.server._forget(self)


class ControlServer:
    def __init__(self, hub: Hub, host: str, port: int,
                 tokens: dict[str, str] | None = None,
                 push_limit: int = PUSH_LIMIT,
                 sndbuf: int | None = None):
        self.hub = hub
        self.tokens = dict(tokens if tokens is not None else hub.config.tokens)
        self.push_limit = push_limit
        self._sndbuf = sndbuf
        try:
            self._srv = socket.create_server((host, port))
        except OSError as err:
            raise BindFailure(f"cannot bind {host}:{port}: {err}") from None
        self.host, self.port = self._srv.getsockname()[:2]
        self._sessions: set[Session] = set()
        self._sessions_lock = threading.Lock()
        self._sid = itertools.count(1)
        hub.add_logoff_hook(self._logoff_all)
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True, name="hub-accept")
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while True:
            try:
                sock, _addr = self._srv.accept()
            except OSError:
                break
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            if self._sndbuf is not None:
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, self._sndbuf)
            session = Session(self, sock, next(self._sid))
            with self._sessions_lock:
                self._sessions.add(session)
            self.hub.subscribe(session.on_event)
            threading.Thread(target=session._read_loop, daemon=True,
                             name=f"hub-wire-r{session.sid}").start()

    def _forget(self, session: Session) -> None:
        with self._sessions_lock:
            self._sessions.discard(session)

    def _logoff_all(self) -> None:
        with self._sessions_lock:
            sessions = list(self._sessions)
        for s in sessions:
            s.principal = None

    def close(self) -> None:
        try:
            self._srv.close()
        except OSError:
            pass
        with self._sessions_lock:
            sessions = list(self._sessions)
        for s in sessions:
            s.out.put_close()
            try:
                s.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
