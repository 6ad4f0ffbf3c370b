"""Deterministic tick-based mission world.

Agents fly boustrophedon sweeps over a rectangular area (each agent owns a
horizontal strip), the environment's covariates follow a piecewise-constant
schedule, and a surrogate detector turns ground truth plus context mismatch
into detection events that run the full reliability pipeline every tick:
uncertainty estimate, hysteresis band, coverage lookup, adaptation rules.

Everything downstream of the scenario file is a pure function of
(scenario, seed, operator-command schedule): randomness comes from named
hash-derived substreams, so adding an agent or subsystem never shifts the
draws of another.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import covariate_model as cm
from .decision_engine import (
    AgentState,
    AlertCenter,
    Autonomy,
    DetectionEvent,
    Mode,
    OperatorAction,
    OperatorCommand,
    PolicyThresholds,
    apply_decision,
    apply_operator_command,
    decide,
    evaluate_reliability,
)
from .errors import ParseError, StaleAlert, UnknownAlert, ValidationError
from .events import Event
from .seeding import stable_seed, substream
from .uncertainty import BandState, SceneObservation, SurrogatePredictor, band_update, estimate


@dataclass(frozen=True)
class WorldObject:
    object_id: str
    position: tuple[float, float]
    contains_target: bool


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    start: tuple[float, float]
    speed: float
    lane_spacing: float


@dataclass(frozen=True)
class SimilarityParams:
    seed: int = 7
    matched_base: float = 0.75
    unmatched_base: float = 0.25
    covariate_weight: float = 0.15
    noise_sigma: float = 0.08


@dataclass(frozen=True)
class ObservationNoise:
    flip_prob: float = 0.0     # per categorical attribute
    jitter_frac: float = 0.0   # sigma as fraction of range, per continuous attribute


@dataclass
class Scenario:
    name: str
    seed: int
    ticks_max: int
    area: tuple[float, float]  # width, height in meters
    victims: list[WorldObject]
    decoys: list[WorldObject]
    agents: list[AgentSpec]
    environment_schedule: list[tuple[int, cm.CovariateVector]]
    thresholds: PolicyThresholds
    predictor: SurrogatePredictor
    sensor_noise_sigma: float
    nominal_covariates: cm.CovariateVector
    band: BandState
    schema: cm.CovariateSchema
    corpus: list[cm.AnnotatedSample]
    similarity: SimilarityParams
    min_support: int
    detection_range: float
    false_positive_rate: float
    observation_noise: ObservationNoise
    takeoff_ticks: int
    loiter_ticks: int


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ValidationError(f"{where}: missing field {key!r}")
    return data[key]


def scenario_from_dict(data: dict, base_dir: str | Path | None = None) -> Scenario:
    """Validate a parsed scenario; resolves corpus/schema path references."""
    base = Path(base_dir) if base_dir is not None else Path(".")

    name = str(data.get("name", "scenario"))
    seed = int(_require(data, "seed", "scenario"))
    ticks_max = int(_require(data, "ticks_max", "scenario"))
    if ticks_max < 1:
        raise ValidationError("ticks_max: must be >= 1")

    area_spec = _require(data, "area", "scenario")
    area = (float(area_spec["width"]), float(area_spec["height"]))
    if area[0] <= 0 or area[1] <= 0:
        raise ValidationError("area: width and height must be > 0")

    def objects(key: str, contains_target: bool) -> list[WorldObject]:
        out = []
        for entry in data.get(key, []):
            pos = entry["position"]
            obj = WorldObject(str(entry["id"]), (float(pos[0]), float(pos[1])), contains_target)
            if not (0 <= obj.position[0] <= area[0] and 0 <= obj.position[1] <= area[1]):
                raise ValidationError(f"{key}: object {obj.object_id!r} outside area")
            out.append(obj)
        return out

    victims = objects("victims", True)
    decoys = objects("decoys", False)

    agents = []
    for entry in _require(data, "agents", "scenario"):
        spec = AgentSpec(
            agent_id=str(entry["agent_id"]),
            start=(float(entry["start"][0]), float(entry["start"][1])),
            speed=float(entry["speed"]),
            lane_spacing=float(entry["lane_spacing"]),
        )
        if spec.speed <= 0:
            raise ValidationError(f"agents: {spec.agent_id!r} speed must be > 0")
        if spec.lane_spacing <= 0:
            raise ValidationError(f"agents: {spec.agent_id!r} lane_spacing must be > 0")
        agents.append(spec)
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ValidationError("agents: agent ids must be unique")

    if "covariate_schema" in data:
        schema = cm.schema_from_dict(data["covariate_schema"])
    else:
        schema = cm.load_schema(base / _require(data, "covariate_schema_path", "scenario"))

    if "corpus" in data:
        corpus = cm.corpus_from_list(data["corpus"], schema)
    else:
        corpus = cm.load_corpus(base / _require(data, "corpus_path", "scenario"), schema)

    schedule: list[tuple[int, cm.CovariateVector]] = []
    last_tick = None
    for entry in _require(data, "environment_schedule", "scenario"):
        tick, mapping = int(entry[0]), entry[1]
        if last_tick is None and tick != 0:
            raise ValidationError("environment_schedule: first entry must be at tick 0")
        if last_tick is not None and tick <= last_tick:
            raise ValidationError("environment_schedule: ticks must be strictly increasing")
        last_tick = tick
        schedule.append((tick, schema.vector_from_mapping(mapping)))
    if not schedule:
        raise ValidationError("environment_schedule: must be non-empty")

    th = _require(data, "thresholds", "scenario")
    try:
        thresholds = PolicyThresholds(
            detect_threshold=float(th["detect_threshold"]),
            alert_threshold=float(th["alert_threshold"]),
            uncertainty_threshold=float(th["uncertainty_threshold"]),
            covariate_coverage=float(th["covariate_coverage"]),
            operating_fpr=float(th.get("operating_fpr", 0.05)),
            operator_budget=int(th.get("operator_budget", 1)),
        )
    except ValueError as exc:
        raise ValidationError(f"thresholds: {exc}") from exc

    pred = _require(data, "predictor", "scenario")
    predictor = SurrogatePredictor(
        target_peak=float(pred.get("target_peak", 0.95)),
        clutter_peak=float(pred.get("clutter_peak", 0.25)),
        distance_falloff=float(pred.get("distance_falloff", 0.5)),
        covariate_penalty=float(pred.get("covariate_penalty", 0.6)),
        model_jitter_sigma=float(pred.get("model_jitter_sigma", 0.05)),
        replica_count=int(pred.get("replica_count", 32)),
    )
    sensor_noise_sigma = float(pred.get("sensor_noise_sigma", 0.0))
    if sensor_noise_sigma < 0:
        raise ValidationError("predictor: sensor_noise_sigma must be >= 0")
    nominal = schema.vector_from_mapping(_require(pred, "nominal_covariates", "predictor"))

    band_spec = data.get("band", {})
    try:
        band = BandState(
            b1=float(band_spec.get("b1", 0.3)),
            b2=float(band_spec.get("b2", 0.7)),
            h=float(band_spec.get("h", 0.05)),
        )
    except ValueError as exc:
        raise ValidationError(f"band: {exc}") from exc

    sim_spec = data.get("similarity", {})
    similarity = SimilarityParams(
        seed=int(sim_spec.get("seed", 7)),
        matched_base=float(sim_spec.get("matched_base", 0.75)),
        unmatched_base=float(sim_spec.get("unmatched_base", 0.25)),
        covariate_weight=float(sim_spec.get("covariate_weight", 0.15)),
        noise_sigma=float(sim_spec.get("noise_sigma", 0.08)),
    )

    fp_rate = float(data.get("false_positive_rate", 0.0))
    if not (0.0 <= fp_rate <= 1.0):
        raise ValidationError("false_positive_rate: must be in [0, 1]")

    noise_spec = data.get("observation_noise", {})
    obs_noise = ObservationNoise(
        flip_prob=float(noise_spec.get("flip_prob", 0.0)),
        jitter_frac=float(noise_spec.get("jitter_frac", 0.0)),
    )
    if not (0.0 <= obs_noise.flip_prob <= 1.0):
        raise ValidationError("observation_noise: flip_prob must be in [0, 1]")

    detection_range = float(_require(data, "detection_range", "scenario"))
    if detection_range <= 0:
        raise ValidationError("detection_range: must be > 0")

    return Scenario(
        name=name,
        seed=seed,
        ticks_max=ticks_max,
        area=area,
        victims=victims,
        decoys=decoys,
        agents=agents,
        environment_schedule=schedule,
        thresholds=thresholds,
        predictor=predictor,
        sensor_noise_sigma=sensor_noise_sigma,
        nominal_covariates=nominal,
        band=band,
        schema=schema,
        corpus=corpus,
        similarity=similarity,
        min_support=int(data.get("min_support", 10)),
        detection_range=detection_range,
        false_positive_rate=fp_rate,
        observation_noise=obs_noise,
        takeoff_ticks=int(data.get("takeoff_ticks", 3)),
        loiter_ticks=int(data.get("loiter_ticks", 25)),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Self-contained form (schema and corpus inlined) for log snapshots."""
    return {
        "name": scenario.name,
        "seed": scenario.seed,
        "ticks_max": scenario.ticks_max,
        "area": {"width": scenario.area[0], "height": scenario.area[1]},
        "victims": [
            {"id": o.object_id, "position": list(o.position)} for o in scenario.victims
        ],
        "decoys": [
            {"id": o.object_id, "position": list(o.position)} for o in scenario.decoys
        ],
        "agents": [
            {
                "agent_id": a.agent_id,
                "start": list(a.start),
                "speed": a.speed,
                "lane_spacing": a.lane_spacing,
            }
            for a in scenario.agents
        ],
        "environment_schedule": [
            [tick, scenario.schema.vector_to_mapping(vec)]
            for tick, vec in scenario.environment_schedule
        ],
        "thresholds": {
            "detect_threshold": scenario.thresholds.detect_threshold,
            "alert_threshold": scenario.thresholds.alert_threshold,
            "uncertainty_threshold": scenario.thresholds.uncertainty_threshold,
            "covariate_coverage": scenario.thresholds.covariate_coverage,
            "operating_fpr": scenario.thresholds.operating_fpr,
            "operator_budget": scenario.thresholds.operator_budget,
        },
        "predictor": {
            "target_peak": scenario.predictor.target_peak,
            "clutter_peak": scenario.predictor.clutter_peak,
            "distance_falloff": scenario.predictor.distance_falloff,
            "covariate_penalty": scenario.predictor.covariate_penalty,
            "model_jitter_sigma": scenario.predictor.model_jitter_sigma,
            "replica_count": scenario.predictor.replica_count,
            "sensor_noise_sigma": scenario.sensor_noise_sigma,
            "nominal_covariates": scenario.schema.vector_to_mapping(scenario.nominal_covariates),
        },
        "band": {"b1": scenario.band.b1, "b2": scenario.band.b2, "h": scenario.band.h},
        "covariate_schema": cm.schema_to_dict(scenario.schema),
        "corpus": cm.corpus_to_list(scenario.corpus, scenario.schema),
        "similarity": {
            "seed": scenario.similarity.seed,
            "matched_base": scenario.similarity.matched_base,
            "unmatched_base": scenario.similarity.unmatched_base,
            "covariate_weight": scenario.similarity.covariate_weight,
            "noise_sigma": scenario.similarity.noise_sigma,
        },
        "min_support": scenario.min_support,
        "detection_range": scenario.detection_range,
        "false_positive_rate": scenario.false_positive_rate,
        "observation_noise": {
            "flip_prob": scenario.observation_noise.flip_prob,
            "jitter_frac": scenario.observation_noise.jitter_frac,
        },
        "takeoff_ticks": scenario.takeoff_ticks,
        "loiter_ticks": scenario.loiter_ticks,
    }


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(data, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Search geometry


def lawnmower_waypoints(
    area: tuple[float, float],
    strip: tuple[float, float],
    lane_spacing: float,
) -> list[tuple[float, float]]:
    """Serpentine sweep of a horizontal strip [y0, y1] of the area."""
    width, _ = area
    y0, y1 = strip
    lanes: list[float] = []
    y = y0 + lane_spacing / 2.0
    while y <= y1 - lane_spacing / 2.0 + 1e-9:
        lanes.append(y)
        y += lane_spacing
    if not lanes:
        lanes = [(y0 + y1) / 2.0]
    waypoints: list[tuple[float, float]] = []
    for i, lane_y in enumerate(lanes):
        if i % 2 == 0:
            waypoints.append((0.0, lane_y))
            waypoints.append((width, lane_y))
        else:
            waypoints.append((width, lane_y))
            waypoints.append((0.0, lane_y))
    return waypoints


@dataclass
class AgentRuntime:
    spec: AgentSpec
    state: AgentState
    position: tuple[float, float]
    waypoints: list[tuple[float, float]]
    wp_index: int = 0
    band: BandState = field(default_factory=BandState)
    takeoff_remaining: int = 0
    loiter_target: tuple[float, float] | None = None
    loiter_until: int = -1
    cause: str = "init"

    def payload(self) -> dict:
        lock = self.state.target_lock
        return {
            "agent_id": self.spec.agent_id,
            "mode": self.state.mode.value,
            "autonomy": self.state.autonomy.value,
            "position": [self.position[0], self.position[1]],
            "pending_alert_id": self.state.pending_alert_id,
            "target_lock": (
                {"object_ref": lock.object_ref, "position": list(lock.position)}
                if lock else None
            ),
            "loiter_target": list(self.loiter_target) if self.loiter_target else None,
            "cause": self.cause,
        }


@dataclass
class CommandTicket:
    """A buffered operator command plus its application outcome."""

    alert_id: str
    action: OperatorAction
    issued_at: int
    status: str = "queued"  # queued | ok | error
    error_code: str | None = None
    error_message: str | None = None
    effective_tick: int | None = None
    event: Event | None = None
    done: threading.Event = field(default_factory=threading.Event)


class World:
    """Owns all mission state; advanced one tick at a time by one thread."""

    def __init__(self, scenario: Scenario, profile: cm.TrainingProfile | None = None):
        self.scenario = scenario
        if profile is None:
            sim_gen = cm.SyntheticSimilarityGenerator(
                schema=scenario.schema,
                seed=scenario.similarity.seed,
                matched_base=scenario.similarity.matched_base,
                unmatched_base=scenario.similarity.unmatched_base,
                covariate_weight=scenario.similarity.covariate_weight,
                noise_sigma=scenario.similarity.noise_sigma,
            )
            profile = cm.build_profile(
                scenario.corpus, scenario.schema, sim_gen, scenario.min_support
            )
        self.profile = profile
        self.alert_center = AlertCenter(scenario.thresholds.operator_budget)
        self.objects: list[WorldObject] = list(scenario.victims) + list(scenario.decoys)
        self.next_tick = 0

        self.agents: dict[str, AgentRuntime] = {}
        n = len(scenario.agents)
        strip_h = scenario.area[1] / n if n else scenario.area[1]
        for i, spec in enumerate(scenario.agents):
            strip = (i * strip_h, (i + 1) * strip_h)
            self.agents[spec.agent_id] = AgentRuntime(
                spec=spec,
                state=AgentState(agent_id=spec.agent_id, mode=Mode.TAKEOFF),
                position=spec.start,
                waypoints=lawnmower_waypoints(scenario.area, strip, spec.lane_spacing),
                band=scenario.band,
                takeoff_remaining=scenario.takeoff_ticks,
            )

        self._command_lock = threading.Lock()
        self._command_buffer: list[CommandTicket] = []
        self._processed_tickets: list[CommandTicket] = []
        self._detector_rngs = {
            spec.agent_id: substream(scenario.seed, "detector", spec.agent_id)
            for spec in scenario.agents
        }

    # -- command intake (any thread) --------------------------------------

    def submit_command(self, alert_id: str, action: OperatorAction,
                       issued_at: int | None = None) -> CommandTicket:
        ticket = CommandTicket(
            alert_id=alert_id,
            action=action,
            issued_at=self.next_tick if issued_at is None else issued_at,
        )
        with self._command_lock:
            self._command_buffer.append(ticket)
        return ticket

    def take_processed_tickets(self) -> list[CommandTicket]:
        out = self._processed_tickets
        self._processed_tickets = []
        return out

    # -- environment -------------------------------------------------------

    def environment_at(self, tick: int) -> cm.CovariateVector:
        current = self.scenario.environment_schedule[0][1]
        for entry_tick, vec in self.scenario.environment_schedule:
            if entry_tick <= tick:
                current = vec
            else:
                break
        return current

    def observed_covariates(self, agent_id: str, tick: int) -> cm.CovariateVector:
        """Environment vector under the configured observation-noise rule."""
        vec = self.environment_at(tick)
        noise = self.scenario.observation_noise
        if noise.flip_prob <= 0 and noise.jitter_frac <= 0:
            return vec
        rng = substream(self.scenario.seed, "obsnoise", agent_id, tick)
        values = []
        for attr, value in zip(self.scenario.schema.attributes, vec.values):
            if isinstance(attr, cm.CategoricalAttribute):
                if noise.flip_prob > 0 and rng.random() < noise.flip_prob:
                    others = [l for l in attr.labels if l != value]
                    value = others[rng.integers(len(others))]
            else:
                if noise.jitter_frac > 0:
                    span = attr.hi - attr.lo
                    value = float(
                        min(max(value + rng.normal(0.0, noise.jitter_frac * span), attr.lo), attr.hi)
                    )
            values.append(value)
        return cm.CovariateVector(tuple(values))

    # -- kinematics ---------------------------------------------------------

    def _move_toward(self, rt: AgentRuntime, target: tuple[float, float]) -> None:
        x, y = rt.position
        tx, ty = target
        dx, dy = tx - x, ty - y
        dist = math.hypot(dx, dy)
        if dist <= 1e-12:
            return
        step = min(rt.spec.speed, dist)
        nx, ny = x + dx / dist * step, y + dy / dist * step
        w, h = self.scenario.area
        rt.position = (min(max(nx, 0.0), w), min(max(ny, 0.0), h))

    def _advance_agent(self, rt: AgentRuntime, tick: int) -> None:
        mode = rt.state.mode
        if mode is Mode.TAKEOFF:
            rt.takeoff_remaining -= 1
            if rt.takeoff_remaining <= 0:
                rt.state = replace(rt.state, mode=Mode.SEARCH)
                rt.cause = "takeoff_complete"
            return
        if mode is Mode.AWAITING_OPERATOR:
            return  # hold position while waiting
        if mode in (Mode.TRACK, Mode.PROVISIONAL_TRACK):
            lock = rt.state.target_lock
            if lock is not None:
                self._move_toward(rt, lock.position)
            return
        # SEARCH
        if rt.loiter_target is not None and tick < rt.loiter_until:
            self._move_toward(rt, rt.loiter_target)
            return
        rt.loiter_target = None
        target = rt.waypoints[rt.wp_index]
        self._move_toward(rt, target)
        if math.hypot(rt.position[0] - target[0], rt.position[1] - target[1]) <= 1e-9:
            rt.wp_index = (rt.wp_index + 1) % len(rt.waypoints)

    # -- sensing ------------------------------------------------------------

    def detector_observe(
        self, rt: AgentRuntime, tick: int, observed: cm.CovariateVector, rng
    ) -> list[tuple[DetectionEvent, "object"]]:
        """Surrogate detector pass: range-gated emissions plus false alarms.

        Each in-range object fires with probability equal to the predictor's
        base response for it; fired detections carry the replica-mean
        confidence from a fresh seeded uncertainty estimate.
        """
        scenario = self.scenario
        observed_map = scenario.schema.vector_to_mapping(observed)
        mismatch = scenario.schema.distance(observed, scenario.nominal_covariates)
        out = []
        for obj in self.objects:
            d = math.hypot(rt.position[0] - obj.position[0], rt.position[1] - obj.position[1])
            if d > scenario.detection_range:
                continue
            obs = SceneObservation(
                contains_target=obj.contains_target,
                distance_frac=d / scenario.detection_range,
                covariate_mismatch=mismatch,
            )
            if rng.random() >= scenario.predictor.base_response(obs):
                continue
            est = estimate(
                scenario.predictor, obs, scenario.sensor_noise_sigma,
                stable_seed(scenario.seed, "estimate", rt.spec.agent_id, tick, obj.object_id),
            )
            out.append((
                DetectionEvent(
                    agent_id=rt.spec.agent_id,
                    tick=tick,
                    object_ref=obj.object_id,
                    confidence=est.mean_confidence,
                    observed_covariates=observed_map,
                    position=obj.position,
                ),
                est,
            ))
        if scenario.false_positive_rate > 0 and rng.random() < scenario.false_positive_rate:
            bearing = rng.random() * 2.0 * math.pi
            radius = (0.3 + 0.7 * rng.random()) * scenario.detection_range
            w, h = scenario.area
            pos = (
                min(max(rt.position[0] + radius * math.cos(bearing), 0.0), w),
                min(max(rt.position[1] + radius * math.sin(bearing), 0.0), h),
            )
            ref = f"fp-{rt.spec.agent_id}-t{tick}"
            obs = SceneObservation(
                contains_target=False,
                distance_frac=radius / scenario.detection_range,
                covariate_mismatch=mismatch,
            )
            est = estimate(
                scenario.predictor, obs, scenario.sensor_noise_sigma,
                stable_seed(scenario.seed, "estimate", rt.spec.agent_id, tick, ref),
            )
            out.append((
                DetectionEvent(
                    agent_id=rt.spec.agent_id,
                    tick=tick,
                    object_ref=ref,
                    confidence=est.mean_confidence,
                    observed_covariates=observed_map,
                    position=pos,
                ),
                est,
            ))
        return out

    # -- command application --------------------------------------------------

    def _apply_commands(self, tick: int, events: list[Event]) -> None:
        with self._command_lock:
            tickets, self._command_buffer = self._command_buffer, []
        for ticket in tickets:
            alert = self.alert_center.get(ticket.alert_id)
            if alert is None:
                ticket.status = "error"
                ticket.error_code = "UNKNOWN_ALERT"
                ticket.error_message = f"no alert with id {ticket.alert_id!r}"
                self._processed_tickets.append(ticket)
                continue
            rt = self.agents[alert.agent_id]
            cmd = OperatorCommand(ticket.alert_id, ticket.action, ticket.issued_at)
            try:
                new_state, alert, cmd_events = apply_operator_command(
                    rt.state, cmd, alert, self.alert_center
                )
            except StaleAlert as exc:
                ticket.status = "error"
                ticket.error_code = "STALE_ALERT"
                ticket.error_message = str(exc)
            except UnknownAlert as exc:
                ticket.status = "error"
                ticket.error_code = "UNKNOWN_ALERT"
                ticket.error_message = str(exc)
            else:
                rt.state = new_state
                rt.cause = f"operator_{ticket.action.value}"
                if ticket.action is OperatorAction.REQUEST_MORE_IMAGERY:
                    rt.loiter_target = alert.position
                    rt.loiter_until = tick + self.scenario.loiter_ticks
                else:
                    rt.loiter_target = None
                # stamp the effective tick into the command envelope payload
                cmd_events[-1].payload["effective_tick"] = tick
                events.extend(cmd_events)
                ticket.status = "ok"
                ticket.effective_tick = tick
                ticket.event = cmd_events[-1]
            self._processed_tickets.append(ticket)

    # -- the tick ------------------------------------------------------------

    def tick(self) -> list[Event]:
        t = self.next_tick
        events: list[Event] = []

        self._apply_commands(t, events)

        # agents sense only if they were airborne when the tick began
        airborne = {
            spec.agent_id: self.agents[spec.agent_id].state.mode is not Mode.TAKEOFF
            for spec in self.scenario.agents
        }
        for spec in self.scenario.agents:
            rt = self.agents[spec.agent_id]
            self._advance_agent(rt, t)

        for spec in self.scenario.agents:
            rt = self.agents[spec.agent_id]
            if not airborne[spec.agent_id] or rt.state.mode is Mode.TAKEOFF:
                continue
            observed = self.observed_covariates(spec.agent_id, t)
            coverage = cm.coverage_score(
                self.profile, observed, self.scenario.thresholds.operating_fpr
            )
            rng = self._detector_rngs[spec.agent_id]
            for detection, est in self.detector_observe(rt, t, observed, rng):
                rt.band, band_value = band_update(rt.band, est)
                verdict = evaluate_reliability(est, band_value, coverage, self.scenario.thresholds)
                det_payload = detection.payload()
                det_payload["tick"] = t
                events.append(Event("detection", det_payload))
                events.append(Event("reliability", {
                    "agent_id": spec.agent_id,
                    "object_ref": detection.object_ref,
                    "mean_confidence": est.mean_confidence,
                    "u": est.u,
                    "data_variance": est.data_variance,
                    "model_variance": est.model_variance,
                    "band": band_value.value,
                    "coverage_score": coverage.score,
                    "coverage_supported": coverage.supported,
                    "loss_of_reliability": verdict.loss_of_reliability,
                    "reasons": verdict.reasons(),
                }))
                if rt.state.mode is Mode.SEARCH:
                    decision = decide(detection, verdict, self.scenario.thresholds, rt.state)
                    events.append(Event("decision", {
                        "agent_id": spec.agent_id,
                        "object_ref": detection.object_ref,
                        "rule": decision.value,
                        "confidence": detection.confidence,
                        "loss_of_reliability": verdict.loss_of_reliability,
                    }))
                    new_state, decision_events = apply_decision(
                        rt.state, decision, detection, verdict, self.alert_center
                    )
                    if new_state.mode is not rt.state.mode:
                        rt.cause = decision.value
                        rt.loiter_target = None
                    rt.state = new_state
                    events.extend(decision_events)
                elif rt.state.mode in (Mode.TRACK, Mode.PROVISIONAL_TRACK):
                    lock = rt.state.target_lock
                    if lock is not None and lock.object_ref == detection.object_ref:
                        # tracking update: refresh the lock, no rule re-fires
                        rt.state = replace(
                            rt.state,
                            target_lock=replace(lock, position=detection.position),
                        )

        for spec in self.scenario.agents:
            events.append(Event("agent_state", self.agents[spec.agent_id].payload()))
        events.append(Event("heartbeat", {}))

        self.next_tick = t + 1
        return events

    # -- state summaries -------------------------------------------------------

    def awaiting_operator_count(self) -> int:
        return sum(
            1 for rt in self.agents.values() if rt.state.mode is Mode.AWAITING_OPERATOR
        )

    def state_snapshot(self) -> dict:
        return {
            "tick": self.next_tick,
            "agents": [self.agents[s.agent_id].payload() for s in self.scenario.agents],
            "alerts": [a.payload() for a in self.alert_center.unresolved()],
        }
