import json
import threading
import time
import urllib.error
import urllib.request

import pytest

from hotlsim.decision_engine import OperatorAction
from hotlsim.errors import CorruptLog
from hotlsim.gateway import (
    MissionRunner,
    format_report,
    read_log,
    replay,
    report,
    run_headless,
    serve,
)

from conftest import interactive_schedule


# ---------------------------------------------------------------------------
# log files


def test_headless_log_roundtrip(tmp_path, river_snow_scenario):
    path = tmp_path / "mission.jsonl"
    runner = run_headless(river_snow_scenario, ticks=60, record_path=path)
    envelopes = read_log(path)
    assert [e.to_json_line() for e in envelopes] == runner.lines()
    assert envelopes[0].kind == "snapshot"
    assert envelopes[0].payload["protocol"] == "hotl/1"
    seqs = [e.seq for e in envelopes]
    assert seqs == list(range(1, len(envelopes) + 1))
    ticks = [e.tick for e in envelopes]
    assert ticks == sorted(ticks)


def test_corrupt_log_names_gap_line(tmp_path, river_snow_scenario):
    path = tmp_path / "mission.jsonl"
    run_headless(river_snow_scenario, ticks=30, record_path=path)
    lines = path.read_text().splitlines()
    removed = 10
    path.write_text("\n".join(lines[:removed - 1] + lines[removed:]) + "\n")
    with pytest.raises(CorruptLog) as err:
        read_log(path)
    assert err.value.line_number == removed


def test_corrupt_log_parse_failure(tmp_path, river_snow_scenario):
    path = tmp_path / "mission.jsonl"
    run_headless(river_snow_scenario, ticks=10, record_path=path)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(CorruptLog):
        read_log(path)


# ---------------------------------------------------------------------------
# replay


def test_replay_headless_log_passes(tmp_path, river_snow_scenario):
    path = tmp_path / "mission.jsonl"
    runner = run_headless(river_snow_scenario, ticks=80, record_path=path)
    result = replay(path)
    assert result.ok, result
    assert result.envelopes_checked == runner.envelope_count()


def test_replay_interactive_log_passes(tmp_path, river_snow_scenario):
    schedule = interactive_schedule(river_snow_scenario)
    assert len(schedule) == 3
    path = tmp_path / "interactive.jsonl"
    run_headless(river_snow_scenario, record_path=path, schedule=schedule)
    commands = [e for e in read_log(path) if e.kind == "operator_command"]
    assert [c.payload["action"] for c in commands] == [
        "reject", "request_more_imagery", "confirm",
    ]
    result = replay(path)
    assert result.ok, result


def test_command_envelopes_follow_their_alerts(tmp_path, river_snow_scenario):
    # causality: a command envelope always comes after the alert it targets,
    # and its effects only appear at higher seq
    schedule = interactive_schedule(river_snow_scenario)
    path = tmp_path / "interactive.jsonl"
    run_headless(river_snow_scenario, record_path=path, schedule=schedule)
    envelopes = read_log(path)
    first_alert_seq = {}
    for env in envelopes:
        if env.kind == "alert":
            first_alert_seq.setdefault(env.payload["alert_id"], env.seq)
    for env in envelopes:
        if env.kind == "operator_command":
            assert first_alert_seq[env.payload["alert_id"]] < env.seq
            assert env.payload["effective_tick"] == env.tick


def test_replay_detects_tampering(tmp_path, river_snow_scenario):
    path = tmp_path / "mission.jsonl"
    run_headless(river_snow_scenario, ticks=60, record_path=path)
    lines = path.read_text().splitlines()
    target = next(i for i, l in enumerate(lines) if '"kind":"agent_state"' in l)
    doctored = json.loads(lines[target])
    doctored["payload"]["position"] = [9999.0, 9999.0]
    lines[target] = json.dumps(doctored, sort_keys=True, separators=(",", ":"))
    path.write_text("\n".join(lines) + "\n")
    result = replay(path)
    assert not result.ok
    assert result.first_divergent_seq == target + 1


# ---------------------------------------------------------------------------
# report


def test_report_tallies(tmp_path, river_snow_scenario):
    schedule = interactive_schedule(river_snow_scenario)
    path = tmp_path / "mission.jsonl"
    run_headless(river_snow_scenario, record_path=path, schedule=schedule)
    data = report(path)
    assert data["scenario"] == "river_snow"
    assert data["operator_commands"] == {
        "reject": 1, "request_more_imagery": 1, "confirm": 1,
    }
    assert data["decisions"]["uav1"].get("ar2_request_permission", 0) >= 1
    lat = data["operator_latency_ticks"]
    assert lat["count"] == 3
    assert lat["min"] >= 1
    text = format_report(data)
    assert "river_snow" in text
    assert "uav1" in text


# ---------------------------------------------------------------------------
# live gateway


def http_json(method: str, url: str, body: dict | None = None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


@pytest.fixture
def live_gateway(river_snow_scenario):
    runner = MissionRunner(river_snow_scenario, ticks=250)
    server = serve(runner, "127.0.0.1:0")
    port = server.server_address[1]
    thread = threading.Thread(target=runner.run, kwargs={"tick_ms": 2}, daemon=True)
    thread.start()
    yield runner, f"http://127.0.0.1:{port}"
    server.shutdown()
    thread.join(timeout=30)


def wait_for_high_alert(base: str, timeout: float = 30.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        _, state = http_json("GET", f"{base}/state")
        for alert in state["alerts"]:
            if alert["priority"] == "high" and alert["status"] == "pending":
                return alert
        if state["finished"]:
            break
        time.sleep(0.02)
    raise AssertionError("no high alert appeared in time")


def test_gateway_stream_and_commands(live_gateway):
    runner, base = live_gateway

    status, err = http_json("POST", f"{base}/commands",
                            {"alert_id": "alert-does-not-exist", "action": "confirm"})
    assert status == 404
    assert err["code"] == "UNKNOWN_ALERT"

    status, err = http_json("POST", f"{base}/commands", {"alert_id": 5, "action": "bogus"})
    assert status == 400
    assert err["code"] == "BAD_COMMAND"

    alert = wait_for_high_alert(base)
    status, ack = http_json("POST", f"{base}/commands",
                            {"alert_id": alert["alert_id"], "action": "confirm"})
    assert status == 200
    assert ack["ok"] is True
    assert ack["seq"] > 0

    # confirming again is stale
    status, err = http_json("POST", f"{base}/commands",
                            {"alert_id": alert["alert_id"], "action": "reject"})
    assert status == 409
    assert err["code"] == "STALE_ALERT"

    # command causality: effects only after the ack seq
    deadline = time.monotonic() + 30
    while time.monotonic() < deadline:
        _, state = http_json("GET", f"{base}/state")
        agent = next(a for a in state["agents"] if a["agent_id"] == alert["agent_id"])
        if agent["mode"] == "track":
            break
        time.sleep(0.02)
    assert agent["mode"] == "track"
    cmd_env = next(e for e in runner.envelopes if e.kind == "operator_command")
    assert cmd_env.seq == ack["seq"]
    track_env = next(
        e for e in runner.envelopes
        if e.kind == "agent_state" and e.payload["mode"] == "track"
    )
    assert track_env.seq > ack["seq"]


def read_stream_lines(base: str, from_seq: int, count: int) -> list[dict]:
    req = urllib.request.Request(f"{base}/events?from={from_seq}")
    out = []
    with urllib.request.urlopen(req, timeout=30) as resp:
        for _ in range(count):
            line = resp.readline()
            if not line:
                break
            out.append(json.loads(line))
    return out


def test_gateway_two_clients_see_identical_streams(live_gateway):
    _, base = live_gateway
    a = read_stream_lines(base, 1, 40)
    b = read_stream_lines(base, 1, 40)
    assert a == b
    assert [e["seq"] for e in a] == list(range(1, len(a) + 1))
    assert a[0]["kind"] == "snapshot"


def test_gateway_catchup_from_mid_stream(live_gateway):
    runner, base = live_gateway
    while runner.envelope_count() < 30:
        time.sleep(0.01)
    tail = read_stream_lines(base, 25, 10)
    assert [e["seq"] for e in tail] == list(range(25, 35))
    full = read_stream_lines(base, 1, 34)
    assert full[24:34] == tail
