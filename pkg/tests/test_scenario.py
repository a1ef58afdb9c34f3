"""Scenario runner: happy path, fault injection, custom topologies."""

import pytest

from policycast import scenario

# slot_seconds above 2 selects the virtual clock, so these finish fast
BASE = {"slot_seconds": 15}


def cfg(**overrides):
    merged = dict(BASE)
    merged.update(overrides)
    return merged


def test_defaults_reach_exactly_the_matching_device():
    res = scenario.run_scenario(cfg())
    assert res.ok
    assert res.outcomes["sd-match"] == ("accepted", "accepted")
    assert res.outcomes["sd-other"] == ("ignored", "ignored")
    assert res.slots_used <= 2
    assert "PASSED" in res.summary()
    assert any(e["event"] == "block-appended" for e in res.events)


def test_header_mode_and_custom_policy():
    res = scenario.run_scenario(cfg(
        push_mode="header",
        policy="(alpha, beta, gamma)@2",
        message="threshold broadcast",
        devices=[
            {"name": "d-two", "attributes": ["alpha", "gamma"],
             "expect": "accepted"},
            {"name": "d-one", "attributes": ["beta"], "expect": "ignored"},
        ]))
    assert res.ok
    assert res.outcomes["d-two"][0] == "accepted"
    assert res.outcomes["d-one"][0] == "ignored"


def test_pull_mode():
    res = scenario.run_scenario(cfg(push_mode="pull"))
    assert res.ok
    assert res.outcomes["sd-match"][0] == "accepted"


def test_tampered_payload_alarms_every_device():
    res = scenario.run_scenario(cfg(fault="tamper-payload"))
    assert res.ok
    # the digest gate fires before any attribute filtering
    assert res.outcomes["sd-match"] == ("alarm", "alarm")
    assert res.outcomes["sd-other"] == ("alarm", "alarm")
    assert any(e["event"] == "integrity-alarm" for e in res.events)


def test_stale_replay_changes_nothing():
    res = scenario.run_scenario(cfg(fault="stale-replay"))
    assert res.ok
    assert res.outcomes["sd-match"][0] == "accepted"
    assert res.outcomes["sd-other"][0] == "ignored"
    assert any(e["event"] in ("stale", "duplicate") for e in res.events)


def test_unknown_mode_is_rejected():
    with pytest.raises(ValueError):
        scenario.run_scenario(cfg(), mode="carrier-pigeon")


def test_message_hex_override():
    res = scenario.run_scenario(cfg(message_hex="00ff10"))
    assert res.ok
