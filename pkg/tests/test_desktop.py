"""Remote desktop tests.

The click-mapping oracle below recomputes the scaling with exact rational
arithmetic (Fraction), independently of the integer formula used by
map_click. Hit tests are checked against a brute-force every-box scan.
"""

import math
import random
from fractions import Fraction

import pytest

from homehub.desktop import DEFAULT_ICONS, DesktopModel, Icon, map_click
from homehub.errors import (
    BadViewport,
    ConfigError,
    Denied,
    DesktopUnavailable,
    UnknownCommand,
)


def oracle_map(xc, yc, wc, hc, ws, hs):
    # round half away from zero; coordinates are never negative here,
    # so that is floor(value + 1/2) in exact arithmetic
    xs = math.floor(Fraction(xc * ws, wc) + Fraction(1, 2))
    ys = math.floor(Fraction(yc * hs, hc) + Fraction(1, 2))
    return xs, ys


def test_map_click_frozen_examples():
    assert map_click(400, 300, 800, 600, 1600, 1200) == (800, 600)
    # 100 * 1080 / 768 = 140.625 which rounds up to 141
    assert map_click(512, 100, 1024, 768, 1920, 1080) == (960, 141)
    assert map_click(0, 0, 800, 600, 1600, 1200) == (0, 0)
    assert map_click(33, 77, 1024, 768, 1024, 768) == (33, 77)  # identity


def test_map_click_ten_thousand_random_reports():
    rng = random.Random(20260816)
    for _ in range(10000):
        wc = rng.randint(1, 4096)
        hc = rng.randint(1, 4096)
        ws = rng.randint(1, 8192)
        hs = rng.randint(1, 8192)
        xc = rng.randint(0, wc - 1)
        yc = rng.randint(0, hc - 1)
        assert map_click(xc, yc, wc, hc, ws, hs) == oracle_map(xc, yc, wc, hc, ws, hs)


def test_map_click_monotone_and_validated():
    last = -1
    for xc in range(0, 640):
        xs, _ = map_click(xc, 0, 640, 480, 1920, 1080)
        assert xs >= last
        last = xs
    with pytest.raises(BadViewport):
        map_click(1, 1, 0, 600, 800, 600)
    with pytest.raises(BadViewport):
        map_click(1, 1, 800, 0, 800, 600)


@pytest.fixture
def desktop(clock, sink):
    return DesktopModel(1600, 1200, DEFAULT_ICONS, sink, clock)


def test_default_fixture_shape(desktop):
    model = desktop.get_desktop()
    assert model["width"] == 1600 and model["height"] == 1200
    assert len(model["icons"]) == 6
    assert model["running"] == []


def test_click_hits_icon_and_toggles(desktop):
    icon = next(i for i in DEFAULT_ICONS if i.name == "Media Player")
    cx, cy = icon.x + icon.w // 2, icon.y + icon.h // 2
    outcome = desktop.click(cx, cy, 1600, 1200)
    assert outcome == ("Media Player", "opened")
    assert "Media Player" in desktop.get_desktop()["running"]
    outcome = desktop.click(cx, cy, 1600, 1200)
    assert outcome == ("Media Player", "closed")
    assert desktop.get_desktop()["running"] == []
    assert desktop.click(1599, 1199, 1600, 1200) is None  # empty corner


def test_click_scaled_viewport(desktop):
    # clicking the icon center through a half-size viewport still hits
    icon = DEFAULT_ICONS[0]
    cx, cy = (icon.x + icon.w // 2) // 2, (icon.y + icon.h // 2) // 2
    outcome = desktop.click(cx, cy, 800, 600)
    assert outcome == (icon.name, "opened")


def test_five_hundred_random_clicks_match_point_in_box_oracle(desktop):
    rng = random.Random(7)
    for _ in range(500):
        wc = rng.randint(100, 2000)
        hc = rng.randint(100, 2000)
        xc = rng.randint(0, wc - 1)
        yc = rng.randint(0, hc - 1)
        xs, ys = oracle_map(xc, yc, wc, hc, 1600, 1200)
        hit = None
        for icon in DEFAULT_ICONS:
            if icon.x <= xs < icon.x + icon.w and icon.y <= ys < icon.y + icon.h:
                hit = icon.name
        outcome = desktop.click(xc, yc, wc, hc)
        if hit is None:
            assert outcome is None
        else:
            assert outcome[0] == hit


def test_icon_layout_validation(clock, sink):
    with pytest.raises(ConfigError):
        DesktopModel(100, 100, [Icon("a", 50, 50, 96, 96, "a")], sink, clock)
    overlapping = [Icon("a", 0, 0, 96, 96, "a"), Icon("b", 50, 50, 96, 96, "b")]
    with pytest.raises(ConfigError):
        DesktopModel(1600, 1200, overlapping, sink, clock)


def test_exec_allowlist(desktop):
    assert desktop.exec_command("owner", "echo hi") == "hi"
    assert desktop.exec_command("owner", "echo") == ""
    assert "ver" in desktop.exec_command("owner", "ver").lower()
    assert desktop.exec_command("owner", "time").startswith("2026-01-01T")
    listing = desktop.exec_command("owner", "dir")
    assert "documents" in listing
    with pytest.raises(UnknownCommand):
        desktop.exec_command("owner", "format c:")
    with pytest.raises(Denied):
        desktop.exec_command("guest", "echo hi")


def test_power_actions(desktop):
    desktop.click(88, 88, 1600, 1200)  # open the first icon
    assert desktop.get_desktop()["running"]
    assert desktop.power("owner", "restart") == "restarted"
    assert desktop.get_desktop()["running"] == []
    with pytest.raises(Denied):
        desktop.power("guest", "shutdown")
    assert desktop.power("owner", "logoff") == "logged-off"
    assert desktop.power("owner", "shutdown") == "shut-down"
    with pytest.raises(DesktopUnavailable):
        desktop.get_desktop()
    with pytest.raises(DesktopUnavailable):
        desktop.click(88, 88, 1600, 1200)
    with pytest.raises(DesktopUnavailable):
        desktop.exec_command("owner", "echo hi")
    with pytest.raises(DesktopUnavailable):
        desktop.power("owner", "restart")


def test_exec_and_power_never_touch_devices(desktop, registry, sink):
    from conftest import six_devices

    six_devices(registry)
    before = [(d.id, d.state) for d in registry.snapshot()]
    desktop.exec_command("owner", "dir")
    desktop.power("owner", "restart")
    desktop.click(88, 88, 1600, 1200)
    after = [(d.id, d.state) for d in registry.snapshot()]
    assert before == after
