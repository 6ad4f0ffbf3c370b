"""Live mission gateway: event stream, command endpoint, log, replay.

Every event the world emits is wrapped in a sequenced envelope, appended to
an in-memory history (and optionally a JSONL file, one fsync-friendly line
per envelope), and broadcast to any number of streaming readers.  The first
envelope is always a snapshot embedding the fully resolved scenario and
seed, which makes a recorded log self-contained: replay re-runs the
simulator from the snapshot, re-injects the logged operator commands at
their effective ticks, and checks the regenerated stream is byte-identical.

Wire protocol (frozen, see PROTOCOL.md):
  GET  /events?from=N   newline-delimited JSON envelopes, catch-up then live
  GET  /state           current agents/alerts for UI bootstrap
  POST /commands        {"alert_id": ..., "action": "confirm" | "reject" |
                         "request_more_imagery"}
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .decision_engine import OperatorAction
from .errors import BindError, CorruptLog
from .events import EVENT_KINDS
from .sim_world import Scenario, World, scenario_from_dict, scenario_to_dict

PROTOCOL_VERSION = "hotl/1"

_ACTIONS = {a.value: a for a in OperatorAction}


@dataclass(frozen=True)
class Envelope:
    seq: int
    tick: int
    kind: str
    payload: dict

    def to_json_line(self) -> str:
        return json.dumps(
            {"seq": self.seq, "tick": self.tick, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


def read_log(path: str | Path) -> list[Envelope]:
    """Parse and validate a JSONL log; seq must be gapless from 1."""
    envelopes: list[Envelope] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                raise CorruptLog(f"blank line at {line_no}", line_number=line_no)
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLog(f"parse failure at line {line_no}: {exc.msg}", line_number=line_no)
            try:
                env = Envelope(int(data["seq"]), int(data["tick"]), str(data["kind"]), data["payload"])
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptLog(f"malformed envelope at line {line_no}: {exc}", line_number=line_no)
            if env.kind not in EVENT_KINDS:
                raise CorruptLog(f"unknown kind {env.kind!r} at line {line_no}", line_number=line_no)
            expected = envelopes[-1].seq + 1 if envelopes else 1
            if env.seq != expected:
                raise CorruptLog(
                    f"seq gap at line {line_no}: expected {expected}, got {env.seq}",
                    line_number=line_no,
                )
            if envelopes and env.tick < envelopes[-1].tick:
                raise CorruptLog(f"tick regression at line {line_no}", line_number=line_no)
            envelopes.append(env)
    return envelopes


class EventLogWriter:
    """Append-only JSONL sink; one flushed line per envelope."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def append(self, envelope: Envelope) -> None:
        self._fh.write(envelope.to_json_line() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class MissionRunner:
    """Drives a world tick by tick, sequencing events into envelopes.

    Commands can arrive asynchronously (server sessions) or from a schedule
    keyed by tick (fixtures and replays); both funnel through the world's
    ordered buffer and take effect at the next tick boundary.
    """

    def __init__(
        self,
        scenario: Scenario,
        ticks: int | None = None,
        record_path: str | Path | None = None,
        profile=None,
    ):
        self.scenario = scenario
        self.world = World(scenario, profile=profile)
        self.ticks = scenario.ticks_max if ticks is None else ticks
        self.finished = False
        self._cond = threading.Condition()
        self._envelopes: list[Envelope] = []
        self._seq = 0
        self._schedule: dict[int, list[tuple[str, OperatorAction, int]]] = {}
        self._log = EventLogWriter(record_path) if record_path else None

        snapshot = Envelope(
            seq=1,
            tick=0,
            kind="snapshot",
            payload={
                "protocol": PROTOCOL_VERSION,
                "seed": scenario.seed,
                "ticks_planned": self.ticks,
                "scenario": scenario_to_dict(scenario),
                "agents": self.world.state_snapshot()["agents"],
                "alerts": [],
            },
        )
        self._seq = 1
        self._envelopes.append(snapshot)
        if self._log:
            self._log.append(snapshot)

    # -- scheduled (scripted / replayed) commands ---------------------------

    def schedule_command(self, tick: int, alert_id: str, action: OperatorAction,
                         issued_at: int | None = None) -> None:
        self._schedule.setdefault(tick, []).append(
            (alert_id, action, tick if issued_at is None else issued_at)
        )

    # -- live commands (gateway sessions) -----------------------------------

    def submit_command_sync(self, alert_id: str, action: OperatorAction,
                            timeout: float = 30.0) -> tuple[dict, bool]:
        """Block until the tick loop applies the command; returns (body, ok)."""
        if self.finished:
            return {"code": "MISSION_COMPLETE", "message": "mission is over"}, False
        ticket = self.world.submit_command(alert_id, action)
        if not ticket.done.wait(timeout):
            return {"code": "TIMEOUT", "message": "command not applied in time"}, False
        if ticket.status == "ok":
            return {
                "ok": True,
                "alert_id": alert_id,
                "action": action.value,
                "seq": ticket.seq,
                "effective_tick": ticket.effective_tick,
            }, True
        return {"code": ticket.error_code, "message": ticket.error_message}, False

    # -- stepping ------------------------------------------------------------

    def step(self) -> bool:
        """Run one tick; returns False once the mission is over."""
        if self.finished:
            return False
        t = self.world.next_tick
        if t >= self.ticks:
            self._finish()
            return False
        for alert_id, action, issued_at in self._schedule.pop(t, []):
            self.world.submit_command(alert_id, action, issued_at=issued_at)
        events = self.world.tick()
        event_seq: dict[int, int] = {}
        with self._cond:
            for ev in events:
                self._seq += 1
                env = Envelope(self._seq, t, ev.kind, ev.payload)
                self._envelopes.append(env)
                event_seq[id(ev)] = self._seq
                if self._log:
                    self._log.append(env)
            self._cond.notify_all()
        for ticket in self.world.take_processed_tickets():
            if ticket.event is not None:
                ticket.seq = event_seq.get(id(ticket.event))
            ticket.done.set()
        if self.world.next_tick >= self.ticks:
            self._finish()
            return False
        return True

    def _finish(self) -> None:
        with self._cond:
            self.finished = True
            self._cond.notify_all()
        # unblock any session still waiting on a queued command
        for ticket in self.world.take_processed_tickets():
            ticket.done.set()
        for ticket in self.world._command_buffer:
            ticket.status = "error"
            ticket.error_code = "MISSION_COMPLETE"
            ticket.error_message = "mission ended before the command was applied"
            ticket.done.set()
        if self._log:
            self._log.close()
            self._log = None

    def run(self, tick_ms: int = 0) -> None:
        while self.step():
            if tick_ms > 0:
                time.sleep(tick_ms / 1000.0)

    # -- read access -----------------------------------------------------------

    @property
    def envelopes(self) -> list[Envelope]:
        with self._cond:
            return list(self._envelopes)

    def envelope_count(self) -> int:
        with self._cond:
            return len(self._envelopes)

    def envelopes_from(self, index: int) -> list[Envelope]:
        with self._cond:
            return list(self._envelopes[index:])

    def lines(self) -> list[str]:
        return [e.to_json_line() for e in self.envelopes]

    def state_snapshot(self) -> dict:
        snap = self.world.state_snapshot()
        snap["protocol"] = PROTOCOL_VERSION
        snap["seq"] = self.envelope_count()
        snap["finished"] = self.finished
        return snap


def run_headless(
    scenario: Scenario,
    ticks: int | None = None,
    record_path: str | Path | None = None,
    schedule: list[tuple[int, str, OperatorAction]] | None = None,
    profile=None,
) -> MissionRunner:
    runner = MissionRunner(scenario, ticks=ticks, record_path=record_path, profile=profile)
    for tick, alert_id, action in schedule or []:
        runner.schedule_command(tick, alert_id, action)
    runner.run(tick_ms=0)
    return runner


# ---------------------------------------------------------------------------
# HTTP gateway


class _GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.0"  # close-delimited streaming bodies

    def log_message(self, fmt, *args):  # quiet by default
        pass

    @property
    def runner(self) -> MissionRunner:
        return self.server.runner  # type: ignore[attr-defined]

    def _send_json(self, status: int, body: dict) -> None:
        data = json.dumps(body, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        path, _, query = self.path.partition("?")
        if path == "/state":
            self._send_json(200, self.runner.state_snapshot())
            return
        if path != "/events":
            self._send_json(404, {"code": "NOT_FOUND", "message": path})
            return
        params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
        try:
            from_seq = max(int(params.get("from", "1")), 1)
        except ValueError:
            self._send_json(400, {"code": "BAD_QUERY", "message": "from must be an integer"})
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        index = from_seq - 1
        runner = self.runner
        try:
            while True:
                batch = runner.envelopes_from(index)
                if batch:
                    for env in batch:
                        self.wfile.write((env.to_json_line() + "\n").encode("utf-8"))
                    self.wfile.flush()
                    index += len(batch)
                elif runner.finished:
                    return
                else:
                    with runner._cond:
                        runner._cond.wait(timeout=0.5)
        except (BrokenPipeError, ConnectionResetError):
            return

    def do_POST(self):
        if self.path.partition("?")[0] != "/commands":
            self._send_json(404, {"code": "NOT_FOUND", "message": self.path})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._send_json(400, {"code": "BAD_JSON", "message": "body must be a JSON object"})
            return
        alert_id = body.get("alert_id")
        action_name = body.get("action")
        if not isinstance(alert_id, str) or action_name not in _ACTIONS:
            self._send_json(400, {
                "code": "BAD_COMMAND",
                "message": "need alert_id and action in {confirm, reject, request_more_imagery}",
            })
            return
        result, ok = self.runner.submit_command_sync(alert_id, _ACTIONS[action_name])
        if ok:
            self._send_json(200, result)
        else:
            status = {"UNKNOWN_ALERT": 404, "STALE_ALERT": 409}.get(result.get("code"), 400)
            self._send_json(status, result)


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


def serve(runner: MissionRunner, bind_address: str) -> GatewayServer:
    """Start the gateway on "host:port"; returns the running server."""
    host, _, port_text = bind_address.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_text)
    except ValueError:
        raise BindError(f"bad bind address {bind_address!r}")
    try:
        server = GatewayServer((host, port), _GatewayHandler)
    except OSError as exc:
        raise BindError(f"cannot bind {bind_address!r}: {exc}") from exc
    server.runner = runner  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, name="gateway", daemon=True)
    thread.start()
    return server


# ---------------------------------------------------------------------------
# Replay and reporting


@dataclass
class ReplayReport:
    ok: bool
    envelopes_checked: int
    first_divergent_seq: int | None = None
    reason: str | None = None


def _scenario_and_schedule(envelopes: list[Envelope]):
    if not envelopes or envelopes[0].kind != "snapshot":
        raise CorruptLog("log does not start with a snapshot envelope", line_number=1)
    snap = envelopes[0].payload
    scenario = scenario_from_dict(snap["scenario"])
    executed_ticks = sum(1 for e in envelopes if e.kind == "heartbeat")
    schedule = [
        (e.tick, e.payload["alert_id"], _ACTIONS[e.payload["action"]], e.payload["issued_at"])
        for e in envelopes
        if e.kind == "operator_command"
    ]
    return scenario, executed_ticks, schedule


def replay(log_path: str | Path) -> ReplayReport:
    """Re-run a recorded mission and compare the regenerated stream."""
    envelopes = read_log(log_path)
    scenario, executed_ticks, schedule = _scenario_and_schedule(envelopes)
    runner = MissionRunner(scenario, ticks=executed_ticks)
    for tick, alert_id, action, issued_at in schedule:
        runner.schedule_command(tick, alert_id, action, issued_at=issued_at)
    runner.run(tick_ms=0)

    original = [e.to_json_line() for e in envelopes]
    regenerated = runner.lines()
    for i, (a, b) in enumerate(zip(original, regenerated)):
        if a != b:
            return ReplayReport(
                ok=False,
                envelopes_checked=i,
                first_divergent_seq=envelopes[i].seq,
                reason="regenerated envelope differs",
            )
    if len(original) != len(regenerated):
        shorter = min(len(original), len(regenerated))
        return ReplayReport(
            ok=False,
            envelopes_checked=shorter,
            first_divergent_seq=shorter + 1,
            reason=f"length mismatch: log {len(original)}, regenerated {len(regenerated)}",
        )
    return ReplayReport(ok=True, envelopes_checked=len(original))


def replay_runner(log_path: str | Path, ticks: int | None = None) -> MissionRunner:
    """A runner primed from a recorded log, for paced debrief serving."""
    envelopes = read_log(log_path)
    scenario, executed_ticks, schedule = _scenario_and_schedule(envelopes)
    runner = MissionRunner(scenario, ticks=ticks if ticks is not None else executed_ticks)
    for tick, alert_id, action, issued_at in schedule:
        runner.schedule_command(tick, alert_id, action, issued_at=issued_at)
    return runner


def report(log_path: str | Path) -> dict:
    """Per-agent rule tallies, alert traffic, and operator latency stats."""
    envelopes = read_log(log_path)
    if not envelopes or envelopes[0].kind != "snapshot":
        raise CorruptLog("log does not start with a snapshot envelope", line_number=1)
    snap = envelopes[0].payload
    agents = [a["agent_id"] for a in snap["agents"]]
    decisions: dict[str, dict[str, int]] = {a: {} for a in agents}
    detections: dict[str, int] = {a: 0 for a in agents}
    alerts_raised: dict[str, int] = {}
    alert_first_tick: dict[str, int] = {}
    resolutions: dict[str, int] = {}
    commands: dict[str, int] = {}
    latencies: list[int] = []

    for env in envelopes:
        p = env.payload
        if env.kind == "decision":
            per = decisions.setdefault(p["agent_id"], {})
            per[p["rule"]] = per.get(p["rule"], 0) + 1
        elif env.kind == "detection":
            detections[p["agent_id"]] = detections.get(p["agent_id"], 0) + 1
        elif env.kind == "alert":
            aid = p["alert_id"]
            if aid not in alert_first_tick:
                alert_first_tick[aid] = p["tick_raised"]
                alerts_raised[p["priority"]] = alerts_raised.get(p["priority"], 0) + 1
            if p["status"] not in ("pending", "provisional"):
                resolutions[p["status"]] = resolutions.get(p["status"], 0) + 1
        elif env.kind == "operator_command":
            commands[p["action"]] = commands.get(p["action"], 0) + 1
            raised = alert_first_tick.get(p["alert_id"])
            if raised is not None:
                latencies.append(p["effective_tick"] - raised)

    latency_stats = None
    if latencies:
        latency_stats = {
            "count": len(latencies),
            "mean": sum(latencies) / len(latencies),
            "min": min(latencies),
            "max": max(latencies),
        }
    return {
        "scenario": snap["scenario"].get("name"),
        "seed": snap["seed"],
        "ticks": sum(1 for e in envelopes if e.kind == "heartbeat"),
        "envelopes": len(envelopes),
        "detections": detections,
        "decisions": decisions,
        "alerts_raised": alerts_raised,
        "alert_resolutions": resolutions,
        "operator_commands": commands,
        "operator_latency_ticks": latency_stats,
    }


def format_report(data: dict) -> str:
    lines = [
        f"scenario: {data['scenario']}  seed: {data['seed']}  "
        f"ticks: {data['ticks']}  envelopes: {data['envelopes']}",
        "",
        "agent        detections  decisions",
    ]
    for agent_id in sorted(data["decisions"]):
        rules = data["decisions"][agent_id]
        rule_text = ", ".join(f"{k}={v}" for k, v in sorted(rules.items())) or "-"
        lines.append(f"{agent_id:<12} {data['detections'].get(agent_id, 0):>10}  {rule_text}")
    lines.append("")
    lines.append(f"alerts raised: {data['alerts_raised'] or '-'}")
    lines.append(f"alert resolutions: {data['alert_resolutions'] or '-'}")
    lines.append(f"operator commands: {data['operator_commands'] or '-'}")
    lat = data["operator_latency_ticks"]
    if lat:
        lines.append(
            f"operator latency (ticks): n={lat['count']} mean={lat['mean']:.1f} "
            f"min={lat['min']} max={lat['max']}"
        )
    else:
        lines.append("operator latency (ticks): no operator activity")
    return "\n".join(lines)


def default_log_path(scenario: Scenario) -> Path | None:
    log_dir = os.environ.get("HOTL_LOG_DIR")
    if not log_dir:
        return None
    return Path(log_dir) / f"{scenario.name}-seed{scenario.seed}.jsonl"
