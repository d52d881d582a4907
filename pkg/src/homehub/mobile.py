"""Virtual mobile: a simulated phone, agent links, and the bridge.

A Phone holds the state (phonebook, SMS store, call state). An AgentLink
is the transport-shaped boundary to wherever the phone lives: in-process
for scenarios and tests, or a TCP agent connection (see protocol.py).
The bridge tracks which control session is paired with which phone and
proxies ops, so bridged and local execution are the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import (
    AlreadyPaired,
    BadOp,
    BusyCall,
    LinkLost,
    NotPaired,
    PairRejected,
    PhoneUnreachable,
    UnknownCommand,
    UnknownContact,
)


class Phone:
    def __init__(self, phone_id: str, phonebook=(), auto_accept: bool = True):
        self.id = phone_id
        self.phonebook = dict(phonebook)
        self.sms_store: list[tuple[str, str, str]] = []   # (dir, peer, body)
        self.call_state: tuple[str, str | None] = ("idle", None)
        self.link_up = True
        self.auto_accept = auto_accept

    def op(self, name: str, args: list[str]) -> list[str]:
        if not self.link_up:
            raise LinkLost(f"{self.id} link is down")
        handler = getattr(self, "_op_" + name.replace("-", "_"), None)
        if handler is None:
            raise UnknownCommand(f"phone op {name!r}")
        return handler(args)

    def _op_call(self, args):
        if len(args) != 1:
            raise BadOp("call needs a number")
        if self.call_state[0] != "idle":
            raise BusyCall(f"already in a call with {self.call_state[1]}")
        self.call_state = ("in-call", args[0])
        return ["in-call", args[0]]

    def _op_hangup(self, args):
        if args:
            raise BadOp("hangup takes no arguments")
        self.call_state = ("idle", None)
        return ["idle"]

    def _op_sms_send(self, args):
        if len(args) != 2:
            raise BadOp("sms-send needs a number and a body")
        self.sms_store.append(("out", args[0], args[1]))
        return ["sent"]

    def _op_sms_list(self, args):
        if args:
            raise BadOp("sms-list takes no arguments")
        return [f"{d}:{peer}:{body}" for d, peer, body in self.sms_store]

    def _op_phonebook_list(self, args):
        if args:
            raise BadOp("phonebook-list takes no arguments")
        return [f"{name}={number}" for name, number in self.phonebook.items()]

    def _op_phonebook_get(self, args):
        if len(args) != 1:
            raise BadOp("phonebook-get needs a name")
        try:
            return [self.phonebook[args[0]]]
        except KeyError:
            raise UnknownContact(f"no contact {args[0]!r}") from None


class LocalAgentLink:
    """In-process link: the phone lives inside the hub process."""

    def __init__(self, phone: Phone, decide: Callable[[], bool] | None = None):
        self._phone = phone
        self._decide = decide

    def request_pair(self) -> bool:
        if not self._phone.link_up:
            raise LinkLost(f"{self._phone.id} link is down")
        if self._decide is not None:
            return bool(self._decide())
        return self._phone.auto_accept

    def op(self, name: str, args: list[str]) -> list[str]:
        return self._phone.op(name, args)

    def alive(self) -> bool:
        return self._phone.link_up

    def close(self) -> None:
        self._phone.link_up = False


@dataclass
class BridgeSession:
    owner: str
    phone_id: str
    state: str = "requested"          # requested | active | closed
    reason: str | None = field(default=None)   # rejected | severed


class MobileBridge:
    def __init__(self, emit):
        self._emit = emit
        self._links: dict[str, object] = {}
        self._sessions: dict[str, BridgeSession] = {}

    def register_link(self, phone_id: str, link) -> None:
        self._links[phone_id] = link

    def link_ids(self) -> tuple[str, ...]:
        return tuple(pid for pid, link in self._links.items() if link.alive())

    def pair(self, owner: str, phone_id: str) -> BridgeSession:
        current = self._sessions.get(owner)
        if current is not None and current.state == "active":
            raise AlreadyPaired(f"session already paired with {current.phone_id}")
        link = self._links.get(phone_id)
        if link is None or not link.alive():
            raise PhoneUnreachable(f"no live agent for {phone_id}")
        session = BridgeSession(owner, phone_id)
        self._sessions[owner] = session
        self._emit("pair-requested", phone_id, owner=owner)
        try:
            accepted = link.request_pair()
        except LinkLost:
            session.state, session.reason = "closed", "severed"
            raise PhoneUnreachable(f"{phone_id} went away") from None
        if not accepted:
            session.state, session.reason = "closed", "rejected"
            self._emit("pair-rejected", phone_id, owner=owner)
            raise PairRejected(f"{phone_id} rejected the request")
        session.state = "active"
        self._emit("paired", phone_id, owner=owner)
        return session

    def op(self, owner: str, name: str, args: list[str]) -> list[str]:
        session = self._sessions.get(owner)
        if session is None or session.state != "active":
            if session is not None and session.reason == "severed":
                raise LinkLost(f"link to {session.phone_id} was severed")
            raise NotPaired("no active phone session")
        link = self._links.get(session.phone_id)
        if link is None or not link.alive():
            self._close_for_phone(session.phone_id)
            raise LinkLost(f"link to {session.phone_id} is down")
        try:
            return link.op(name, args)
        except LinkLost:
            self._close_for_phone(session.phone_id)
            raise

    def session_for(self, owner: str) -> BridgeSession | None:
        return self._sessions.get(owner)

    def drop_owner(self, owner: str) -> None:
        """Forget a control session's pairing (its connection closed)."""
        self._sessions.pop(owner, None)

    def sever(self, phone_id: str) -> None:
        link = self._links.pop(phone_id, None)
        if link is not None:
            link.close()
            self._emit("link-severed", phone_id)
        self._close_for_phone(phone_id)

    def _close_for_phone(self, phone_id: str) -> None:
        for session in self._sessions.values():
            if session.phone_id == phone_id and session.state == "active":
                session.state, session.reason = "closed", "severed"
