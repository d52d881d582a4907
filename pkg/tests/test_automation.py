"""Automation rule tests.

Each rule is checked against an independent brute-force oracle written
before the rule itself: reference_count pairs occupancy beam events over
the full list, reference_pump is a two-state hysteresis automaton, and
the geofence tests recompute great-circle distance with their own inline
formula instead of calling the production helper.
"""

import math
import random

import pytest

from homehub.automation import (
    AssetTracker,
    GateAutomation,
    OccupancyZone,
    TankController,
    haversine_m,
)
from homehub.clock import SimClock
from homehub.errors import (
    BadCoordinates,
    BadLevel,
    UnknownAsset,
    UnknownBeam,
)
from homehub.model import Binary, DeviceKind, Gate, GatePhase


def reference_count(events, window_ms=1000):
    """Oracle: pair (outer,inner) beam breaks over the whole event list.

    A break pairs with a pending break of the other beam at most window_ms
    older; any other break becomes the new pending one. outer->inner is an
    entry, inner->outer an exit clamped at zero.
    """
    count, pending = 0, None
    counts = []
    for beam, at in events:
        if pending is not None and pending[0] != beam and at - pending[1] <= window_ms:
            count = count + 1 if pending[0] == "outer" else max(0, count - 1)
            pending = None
        else:
            pending = (beam, at)
        counts.append(count)
    return counts


def test_reference_count_hand_trace():
    # traced by hand: entry, entry, exit, lone break, expired pair
    events = [
        ("outer", 0), ("inner", 200),          # entry -> 1
        ("outer", 1000), ("inner", 2000),      # entry (gap 1000 <= window) -> 2
        ("inner", 5000), ("outer", 5400),      # exit -> 1
        ("outer", 8000),                       # pending, never paired
        ("outer", 10000), ("inner", 11500),    # expired (1500 > 1000) -> pending inner
    ]
    assert reference_count(events) == [0, 1, 1, 2, 2, 1, 1, 1, 1]


@pytest.fixture
def occupancy(registry, clock, sink):
    light = registry.register(DeviceKind.LIGHT, "study", "desk", Binary(False))
    zone = OccupancyZone("study", "ob", "ib", [light.id], registry, clock, sink)
    return zone, light


def test_entry_exit_and_lights(occupancy, registry, clock):
    zone, light = occupancy
    zone.on_beam("ob")
    clock.advance(200)
    zone.on_beam("ib")
    assert zone.count == 1
    assert registry.get(light.id).state == Binary(True)
    clock.advance(5000)
    zone.on_beam("ob")  # second entry starts
    clock.advance(100)
    zone.on_beam("ib")
    assert zone.count == 2
    clock.advance(5000)
    zone.on_beam("ib")
    clock.advance(100)
    zone.on_beam("ob")  # exit -> 1, light stays on
    assert zone.count == 1
    assert registry.get(light.id).state == Binary(True)
    clock.advance(5000)
    zone.on_beam("ib")
    clock.advance(100)
    zone.on_beam("ob")  # exit -> 0, light off
    assert zone.count == 0
    assert registry.get(light.id).state == Binary(False)
    with pytest.raises(UnknownBeam):
        zone.on_beam("zz")


def test_exit_at_zero_clamps_and_logs_anomaly(occupancy, clock, sink):
    zone, _ = occupancy
    zone.on_beam("ib")
    clock.advance(100)
    zone.on_beam("ob")
    assert zone.count == 0
    (room, fields), = sink.of_kind("anomaly")
    assert room == "study"


def test_unpaired_and_expired_breaks_change_nothing(occupancy, clock):
    zone, _ = occupancy
    zone.on_beam("ob")
    clock.advance(1001)  # just past the window
    zone.on_beam("ib")
    assert zone.count == 0
    clock.advance(5000)
    zone.on_beam("ob")
    clock.advance(1000)  # exactly the window still pairs
    zone.on_beam("ib")
    assert zone.count == 1


def test_thousand_random_events_match_reference(registry, sink):
    rng = random.Random(20260816)
    clock = SimClock()
    light = registry.register(DeviceKind.LIGHT, "study", "desk", Binary(False))
    zone = OccupancyZone("study", "ob", "ib", [light.id], registry, clock, sink)
    events = []
    at = 0
    for _ in range(1000):
        at += rng.randint(0, 1500)
        events.append((rng.choice(["outer", "inner"]), at))
    got = []
    for beam, t in events:
        clock.advance_to(t)
        zone.on_beam("ob" if beam == "outer" else "ib")
        got.append(zone.count)
    assert got == reference_count(events)


def reference_pump(levels, low, high, start_on):
    on = start_on
    cmds = []
    for lv in levels:
        if lv < low and not on:
            on = True
            cmds.append("on")
        elif lv > high and on:
            on = False
            cmds.append("off")
    return cmds


@pytest.fixture
def tank(registry, sink):
    # the pump starts on: a fresh ramp up from empty is already being filled
    pump = registry.register(DeviceKind.PUMP, "roof", "pump", Binary(True))
    controller = TankController(registry, pump.id, low=30, high=90)
    return controller, pump


def test_tank_ramp_exactly_one_off_and_one_on(tank, registry, sink):
    controller, pump = tank
    levels = list(range(0, 101)) + list(range(99, -1, -1))
    for lv in levels:
        controller.on_level(lv)
    changes = [f["new"] for _, f in sink.of_kind("state-changed")]
    assert changes == ["off", "on"]  # off at 91 on the way up, on at 29 down
    assert reference_pump(levels, 30, 90, True) == ["off", "on"]


def test_tank_hysteresis_band_is_inert(tank, registry):
    controller, pump = tank
    for lv in (30, 50, 90, 50, 30):
        controller.on_level(lv)
    assert registry.get(pump.id).state == Binary(True)
    controller.on_level(91)
    assert registry.get(pump.id).state == Binary(False)
    for lv in (90, 50, 30):
        controller.on_level(lv)
    assert registry.get(pump.id).state == Binary(False)
    controller.on_level(29)
    assert registry.get(pump.id).state == Binary(True)
    with pytest.raises(BadLevel):
        controller.on_level(101)
    with pytest.raises(BadLevel):
        controller.on_level(-1)


def test_tank_random_traces_match_reference(registry, sink):
    rng = random.Random(4242)
    pump = registry.register(DeviceKind.PUMP, "roof", "pump", Binary(True))
    controller = TankController(registry, pump.id, low=30, high=90)
    levels = [rng.randint(0, 100) for _ in range(2000)]
    for lv in levels:
        controller.on_level(lv)
    got = [f["new"] for _, f in sink.of_kind("state-changed")]
    want = reference_pump(levels, 30, 90, True)
    assert got == want
    # never two consecutive identical pump commands
    assert all(a != b for a, b in zip(got, got[1:]))


@pytest.fixture
def auto_gate(registry, clock, sink):
    gate = registry.register(DeviceKind.GATE, "yard", "main", Gate(GatePhase.CLOSED))
    auto = GateAutomation(registry, gate.id, clock, sink, idle_ms=10000)
    return auto, gate


def gate_trace(sink):
    return [(f["new"], f["cause"]) for _, f in sink.of_kind("state-changed")]


def test_gate_presence_opens_then_autocloses(auto_gate, registry, clock, sink):
    # oracle: hand-replay of the timed automaton with travel 3s, idle 10s
    auto, gate = auto_gate
    auto.presence()
    clock.advance_to(13000)
    assert registry.get(gate.id).state == Gate(GatePhase.CLOSED)
    assert gate_trace(sink) == [
        ("opening", "gate-auto"), ("open", "gate-travel"),
        ("closing", "gate-auto"), ("closed", "gate-travel"),
    ]


def test_gate_presence_resets_idle_timer(auto_gate, registry, clock, sink):
    auto, gate = auto_gate
    auto.presence()
    clock.advance_to(8000)
    auto.presence()  # gate already open; only the timer resets
    clock.advance_to(17999)
    assert registry.get(gate.id).state == Gate(GatePhase.OPEN)
    clock.advance_to(18000)
    assert registry.get(gate.id).state == Gate(GatePhase.CLOSING)
    clock.advance_to(21000)
    assert registry.get(gate.id).state == Gate(GatePhase.CLOSED)


def test_gate_reopen_during_closing(auto_gate, registry, clock, sink):
    auto, gate = auto_gate
    auto.presence()                 # opening@0, open@3000, closing@10000
    clock.advance_to(11000)
    assert registry.get(gate.id).state == Gate(GatePhase.CLOSING)
    auto.presence()                 # reopen mid-travel
    clock.advance_to(24000)
    assert registry.get(gate.id).state == Gate(GatePhase.CLOSED)
    assert gate_trace(sink) == [
        ("opening", "gate-auto"), ("open", "gate-travel"),
        ("closing", "gate-auto"), ("opening", "gate-auto"),
        ("open", "gate-travel"), ("closing", "gate-auto"),
        ("closed", "gate-travel"),
    ]


def _oracle_distance_m(lat1, lon1, lat2, lon2):
    # inline haversine, kept separate from the production helper
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = math.radians(lat2 - lat1), math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * 6371000.0 * math.asin(math.sqrt(a))


@pytest.fixture
def tracker(clock, sink):
    sent = []
    t = AssetTracker(clock, sink, lambda subject, body: sent.append((subject, body)))
    t.add("gold-case", "gold case", 0.0, 0.0, 1000.0)
    return t, sent


def test_geofence_edge_trigger(tracker, clock):
    t, sent = tracker
    t.on_fix("gold-case", 0.0, 0.0)
    assert t.locate("gold-case").inside is True
    assert sent == []
    # 0.010 deg of latitude is about 1112 m on a 6371 km sphere: outside
    assert 1111 < _oracle_distance_m(0, 0, 0.010, 0) < 1113
    t.on_fix("gold-case", 0.010, 0.0)
    track = t.locate("gold-case")
    assert track.inside is False
    assert len(sent) == 1
    t.on_fix("gold-case", 0.011, 0.0)  # still outside: no second alert
    assert len(sent) == 1
    t.on_fix("gold-case", 0.0, 0.001)  # back inside: silent return
    assert t.locate("gold-case").inside is True
    assert len(sent) == 1
    t.on_fix("gold-case", 0.010, 0.0)  # out again: second alert
    assert len(sent) == 2


def test_geofence_errors_and_initial_state(tracker):
    t, _ = tracker
    with pytest.raises(UnknownAsset):
        t.on_fix("ghost", 0, 0)
    with pytest.raises(UnknownAsset):
        t.locate("ghost")
    with pytest.raises(BadCoordinates):
        t.on_fix("gold-case", 91.0, 0.0)
    with pytest.raises(BadCoordinates):
        t.on_fix("gold-case", 0.0, 181.0)
    # before any fix: located at the fence center, inside
    track = t.locate("gold-case")
    assert (track.lat, track.lon, track.inside) == (0.0, 0.0, True)


def test_geofence_random_walk_matches_transition_count(clock, sink):
    rng = random.Random(11)
    alerts = []
    t = AssetTracker(clock, sink, lambda s, b: alerts.append(s))
    t.add("a", "a", 10.0, 20.0, 500.0)
    lat, lon = 10.0, 20.0
    inside, transitions = True, 0
    for _ in range(1000):
        lat += rng.uniform(-0.004, 0.004)
        lon += rng.uniform(-0.004, 0.004)
        now_inside = _oracle_distance_m(10.0, 20.0, lat, lon) <= 500.0
        if inside and not now_inside:
            transitions += 1
        inside = now_inside
        t.on_fix("a", lat, lon)
    assert len(alerts) == transitions
    assert len(sink.of_kind("geofence-alert")) == transitions


def test_haversine_agrees_with_oracle():
    rng = random.Random(5)
    for _ in range(500):
        lat1, lon1 = rng.uniform(-89, 89), rng.uniform(-179, 179)
        lat2 = lat1 + rng.uniform(-0.5, 0.5)
        lon2 = lon1 + rng.uniform(-0.5, 0.5)
        got = haversine_m(lat1, lon1, lat2, lon2)
        want = _oracle_distance_m(lat1, lon1, lat2, lon2)
        assert got == pytest.approx(want, rel=1e-9)
