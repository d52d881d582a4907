"""Wire protocol tests: golden transcripts plus concurrency and flow control."""

import pathlib
import socket
import threading
import time

import pytest

from homehub.errors import BindFailure
from homehub.events import replay
from homehub.protocol import ControlServer

from conftest import make_hub

GOLDEN = pathlib.Path(__file__).parent / "golden"


class WireClient:
    def __init__(self, port: int, rcvbuf: int | None = None):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        if rcvbuf is not None:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, rcvbuf)
        self.sock.settimeout(10)
        self.sock.connect(("127.0.0.1", port))
        self.rf = self.sock.makefile("rb")

    def send(self, line: str) -> None:
        self.sock.sendall((line + "\n").encode("utf-8"))

    def read_line(self) -> str | None:
        raw = self.rf.readline()
        if not raw:
            return None
        return raw.rstrip(b"\n").decode("utf-8")

    def expect_line(self) -> str:
        line = self.read_line()
        assert line is not None, "connection closed early"
        return line

    def read_exact(self, n: int) -> bytes:
        data = self.rf.read(n)
        assert data is not None and len(data) == n
        return data

    def close(self) -> None:
        for obj in (self.rf, self.sock):   # makefile holds the fd open too
            try:
                obj.close()
            except OSError:
                pass


@pytest.fixture
def wired(tmp_path):
    hub = make_hub(tmp_path)
    server = ControlServer(hub, "127.0.0.1", 0)
    clients = []

    def connect(**kw) -> WireClient:
        c = WireClient(server.port, **kw)
        clients.append(c)
        return c

    yield hub, server, connect
    for c in clients:
        c.close()
    server.close()
    hub.close()


def play(path: pathlib.Path, hub, client: WireClient) -> None:
    for n, raw in enumerate(path.read_text().splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        tag, rest = raw[0], raw[2:]
        if tag == ">":
            client.send(rest)
        elif tag == "<":
            got = client.expect_line()
            assert got == rest, (
                f"{path.name}:{n}\n want {rest!r}\n got  {got!r}")
        elif tag == "@":
            hub.clock.advance_to(int(rest))
        elif tag == "F":
            seq, at_ms, length = (int(x) for x in rest.split())
            got = client.expect_line()
            assert got == f"FRAME {seq} {at_ms} {length}", (
                f"{path.name}:{n}: got {got!r}")
            pixels = client.read_exact(length)
            assert int.from_bytes(pixels[0:8], "big") == seq
            assert int.from_bytes(pixels[8:16], "big") == at_ms
        else:
            raise AssertionError(f"{path.name}:{n}: bad directive {raw!r}")


@pytest.mark.parametrize("name", ["auth", "device", "security", "stream",
                                  "desktop", "mobile"])
def test_golden_transcript(wired, name):
    hub, _server, connect = wired
    play(GOLDEN / f"{name}.txt", hub, connect())


def test_own_push_always_precedes_ok(wired):
    hub, _server, connect = wired
    c = connect()
    c.send("AUTH hunter2")
    assert c.expect_line() == "OK owner"
    c.send("SUB state")
    assert c.expect_line() == "OK state"
    for i in range(50):
        verb = "on" if i % 2 == 0 else "off"
        c.send(f"CMD turn {verb} study desk")
        push = c.expect_line()
        assert push.startswith("EVT state ") and "\tstate-changed\td3\t" in push
        assert c.expect_line() == f"OK study\tdesk\t{verb}"


def test_line_too_long_closes_connection(wired):
    _hub, _server, connect = wired
    c = connect()
    c.send("CMD " + "x" * 5000)
    assert c.expect_line() == "ERR ETOOLONG line exceeds 4096 bytes"
    assert c.read_line() is None


def test_every_verb_requires_auth(wired):
    _hub, _server, connect = wired
    verbs = ["CMD status", "SUB state", "UNSUB state", "SETNUM +111", "ARM",
             "DISARM", "STREAM d8", "STOP", "DESK", "CLICK 1 1 10 10",
             "EXEC ver", "POWER restart", "PAIR sim-phone", "MOP hangup",
             "SEVER sim-phone", "BEAM b1", "TANK 50", "GPS car 1 1",
             "PRESENCE yard/main", "SMS +1 STATUS", "HELLO pixel"]
    c = connect()
    for line in verbs:
        c.send(line)
        assert c.expect_line() == "ERR EAUTH authenticate first", line


def test_slow_consumer_is_cut_off(tmp_path):
    hub = make_hub(tmp_path)
    server = ControlServer(hub, "127.0.0.1", 0, push_limit=8, sndbuf=4096)
    try:
        watcher = WireClient(server.port, rcvbuf=4096)
        watcher.send("AUTH hunter2")
        assert watcher.expect_line() == "OK owner"
        watcher.send("SUB state")
        assert watcher.expect_line() == "OK state"

        # watcher stops reading; flood it with pushes
        worker = WireClient(server.port)
        worker.send("AUTH hunter2")
        assert worker.expect_line() == "OK owner"
        for i in range(1000):
            verb = "on" if i % 2 == 0 else "off"
            worker.send(f"CMD turn {verb} bedroom ceiling")
            assert worker.expect_line().startswith("OK ")

        lines = []
        while True:
            line = watcher.read_line()
            if line is None:
                break
            lines.append(line)
        assert lines[-1] == "ERR ESLOW push buffer overflow"
        delivered = sum(1 for ln in lines if ln.startswith("EVT "))
        assert delivered < 1000
        watcher.close()
        worker.close()
    finally:
        server.close()
        hub.close()


def test_second_bind_fails(wired):
    hub, server, _connect = wired
    with pytest.raises(BindFailure):
        ControlServer(hub, "127.0.0.1", server.port)


def test_concurrent_sessions_log_stays_consistent(wired):
    hub, _server, connect = wired
    watcher = connect()
    watcher.send("AUTH hunter2")
    assert watcher.expect_line() == "OK owner"
    watcher.send("SUB state")
    assert watcher.expect_line() == "OK state"

    per_thread = 80
    targets = ["bedroom ceiling", "kitchen tube", "study desk"]
    errors = []

    def pound(target: str) -> None:
        try:
            c = connect()
            c.send("AUTH hunter2")
            assert c.expect_line() == "OK owner"
            for i in range(per_thread):
                verb = "on" if i % 2 == 0 else "off"
                c.send(f"CMD turn {verb} {target}")
                reply = c.expect_line()
                assert reply.startswith("OK "), reply
        except Exception as exc:   # surfaced after join
            errors.append(exc)

    threads = [threading.Thread(target=pound, args=(t,)) for t in targets]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=30)
    assert not errors

    # every state change was pushed, in strictly increasing seq order
    total = per_thread * len(targets)
    seqs = []
    for _ in range(total):
        line = watcher.expect_line()
        assert line.startswith("EVT state ")
        seqs.append(int(line.split(" ", 2)[2].split("\t", 1)[0]))
    assert seqs == sorted(seqs)
    assert len(set(seqs)) == total

    # the log replays to exactly the live state
    state = replay(hub.config.data_dir / "events.log")
    live = hub.snapshot()
    assert state.devices == live["devices"]
    assert state.counters == live["counters"]


def test_tcp_agent_pairs_and_answers_ops(wired):
    _hub, _server, connect = wired
    agent = connect()
    agent.send("AUTH hunter2")
    assert agent.expect_line() == "OK owner"
    agent.send("HELLO pixel")
    assert agent.expect_line() == "OK pixel"

    owner = connect()
    owner.send("AUTH hunter2")
    assert owner.expect_line() == "OK owner"

    replies = []
    done = threading.Event()

    def drive() -> None:
        owner.send("PAIR pixel")
        replies.append(owner.expect_line())
        owner.send("MOP call +555")
        replies.append(owner.expect_line())
        owner.send("MOP nope")
        replies.append(owner.expect_line())
        done.set()

    threading.Thread(target=drive, daemon=True).start()

    assert agent.expect_line() == "PAIR?"
    agent.send("ACCEPT")
    assert agent.expect_line() == "OP call\t+555"
    agent.send("RES in-call\t+555")
    assert agent.expect_line() == "OP nope"
    agent.send("ERR EUNKNOWNCMD phone op 'nope'")
    assert done.wait(timeout=10)
    assert replies == ["OK pixel\tactive", "OK in-call\t+555",
                       "ERR EUNKNOWNCMD phone op 'nope'"]

    # agent hanging up severs the link
    agent.close()
    deadline = time.monotonic() + 10
    while "pixel" in _hub.bridge.link_ids():
        assert time.monotonic() < deadline, "sever never observed"
        time.sleep(0.01)
    owner.send("MOP call +555")
    assert owner.expect_line() == "ERR ELINK link to pixel was severed"


def test_wire_logoff_drops_every_session(wired):
    _hub, _server, connect = wired
    a, b = connect(), connect()
    for c in (a, b):
        c.send("AUTH hunter2")
        assert c.expect_line() == "OK owner"
    a.send("POWER logoff")
    assert a.expect_line() == "OK logged-off"
    b.send("DESK")
    assert b.expect_line() == "ERR EAUTH authenticate first"
    a.send("DESK")
    assert a.expect_line() == "ERR EAUTH authenticate first"
