import json
import math

import numpy as np
import pytest

from hotlsim.decision_engine import Mode, OperatorAction
from hotlsim.errors import ParseError, ValidationError
from hotlsim.gateway import run_headless
from hotlsim.sim_world import (
    World,
    lawnmower_waypoints,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from hotlsim.uncertainty import SceneObservation


def minimal_scenario_dict(**overrides) -> dict:
    data = {
        "name": "mini",
        "seed": 11,
        "ticks_max": 50,
        "area": {"width": 100.0, "height": 80.0},
        "victims": [{"id": "victim-1", "position": [50.0, 40.0]}],
        "decoys": [],
        "agents": [{"agent_id": "uav1", "start": [2.0, 2.0], "speed": 5.0, "lane_spacing": 30.0}],
        "environment_schedule": [[0, {"weather": "clear", "daylight": "day", "terrain": "water"}]],
        "thresholds": {
            "detect_threshold": 0.4, "alert_threshold": 0.2,
            "uncertainty_threshold": 0.5, "covariate_coverage": 0.6,
            "operating_fpr": 0.05, "operator_budget": 1,
        },
        "predictor": {
            "target_peak": 0.95, "clutter_peak": 0.2, "distance_falloff": 0.5,
            "covariate_penalty": 1.2, "model_jitter_sigma": 0.0, "replica_count": 8,
            "sensor_noise_sigma": 0.0,
            "nominal_covariates": {"weather": "clear", "daylight": "day", "terrain": "water"},
        },
        "band": {"b1": 0.3, "b2": 0.7, "h": 0.05},
        "covariate_schema": {
            "attributes": [
                {"name": "weather", "kind": "categorical", "labels": ["clear", "rain", "snow"]},
                {"name": "daylight", "kind": "categorical", "labels": ["day", "night"]},
                {"name": "terrain", "kind": "categorical", "labels": ["water", "bank"]},
            ]
        },
        "corpus": [
            {
                "sample_id": f"c{i}",
                "covariates": {"weather": "clear", "daylight": "day", "terrain": "water"},
                "contains_target": i % 2 == 0,
            }
            for i in range(8)
        ],
        "similarity": {"seed": 3},
        "min_support": 4,
        "detection_range": 25.0,
        "false_positive_rate": 0.0,
        "takeoff_ticks": 2,
        "loiter_ticks": 10,
    }
    data.update(overrides)
    return data


# ---------------------------------------------------------------------------
# scenario loading


def test_minimal_scenario_loads_and_runs():
    scenario = scenario_from_dict(minimal_scenario_dict())
    runner = run_headless(scenario)
    assert runner.world.next_tick == 50
    heartbeats = [e for e in runner.envelopes if e.kind == "heartbeat"]
    assert len(heartbeats) == 50


def test_shipped_scenarios_load(river_snow_scenario, river_clear_scenario):
    assert river_snow_scenario.name == "river_snow"
    assert river_snow_scenario.thresholds.detect_threshold == 0.4
    assert len(river_clear_scenario.agents) == 2


def test_non_increasing_schedule_rejected():
    data = minimal_scenario_dict(environment_schedule=[
        [0, {"weather": "clear", "daylight": "day", "terrain": "water"}],
        [5, {"weather": "rain", "daylight": "day", "terrain": "water"}],
        [5, {"weather": "snow", "daylight": "day", "terrain": "water"}],
    ])
    with pytest.raises(ValidationError, match="environment_schedule"):
        scenario_from_dict(data)


def test_schedule_must_start_at_zero():
    data = minimal_scenario_dict(environment_schedule=[
        [3, {"weather": "clear", "daylight": "day", "terrain": "water"}],
    ])
    with pytest.raises(ValidationError, match="environment_schedule"):
        scenario_from_dict(data)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.scenario.json"
    path.write_text('{\n "seed": 1,\n "oops"\n}')
    with pytest.raises(ParseError, match=r"line \d+"):
        load_scenario(path)


def test_duplicate_agent_ids_rejected():
    agents = [
        {"agent_id": "uav1", "start": [0.0, 0.0], "speed": 5.0, "lane_spacing": 30.0},
        {"agent_id": "uav1", "start": [1.0, 1.0], "speed": 5.0, "lane_spacing": 30.0},
    ]
    with pytest.raises(ValidationError, match="agents"):
        scenario_from_dict(minimal_scenario_dict(agents=agents))


def test_bad_speed_rejected():
    agents = [{"agent_id": "uav1", "start": [0.0, 0.0], "speed": 0.0, "lane_spacing": 30.0}]
    with pytest.raises(ValidationError, match="speed"):
        scenario_from_dict(minimal_scenario_dict(agents=agents))


def test_scenario_roundtrips_through_dict():
    scenario = scenario_from_dict(minimal_scenario_dict())
    again = scenario_from_dict(scenario_to_dict(scenario))
    assert scenario_to_dict(again) == scenario_to_dict(scenario)


# ---------------------------------------------------------------------------
# tick mechanics


def test_zero_agents_heartbeat_only():
    scenario = scenario_from_dict(minimal_scenario_dict(agents=[]))
    world = World(scenario)
    events = world.tick()
    assert [e.kind for e in events] == ["heartbeat"]


def test_takeoff_blocks_detection():
    # victim sits right at the start position: no detections until airborne
    data = minimal_scenario_dict(
        victims=[{"id": "victim-1", "position": [2.0, 2.0]}], takeoff_ticks=3,
    )
    world = World(scenario_from_dict(data))
    for t in range(3):
        kinds = [e.kind for e in world.tick()]
        assert "detection" not in kinds, f"detected during takeoff at tick {t}"
    assert world.agents["uav1"].state.mode is Mode.SEARCH


def test_kinematics_bounded_and_inside_area():
    scenario = scenario_from_dict(minimal_scenario_dict(ticks_max=200))
    world = World(scenario)
    prev = {a: world.agents[a].position for a in world.agents}
    for _ in range(200):
        world.tick()
        for agent_id, rt in world.agents.items():
            dx = rt.position[0] - prev[agent_id][0]
            dy = rt.position[1] - prev[agent_id][1]
            assert math.hypot(dx, dy) <= rt.spec.speed + 1e-9
            assert 0.0 <= rt.position[0] <= scenario.area[0]
            assert 0.0 <= rt.position[1] <= scenario.area[1]
            prev[agent_id] = rt.position


def test_environment_follows_schedule():
    data = minimal_scenario_dict(environment_schedule=[
        [0, {"weather": "clear", "daylight": "day", "terrain": "water"}],
        [10, {"weather": "snow", "daylight": "day", "terrain": "water"}],
    ])
    world = World(scenario_from_dict(data))
    schema = world.scenario.schema
    assert schema.vector_to_mapping(world.environment_at(0))["weather"] == "clear"
    assert schema.vector_to_mapping(world.environment_at(9))["weather"] == "clear"
    assert schema.vector_to_mapping(world.environment_at(10))["weather"] == "snow"
    assert schema.vector_to_mapping(world.environment_at(99))["weather"] == "snow"
    # with the noise rule off, observation equals the schedule entry
    assert world.observed_covariates("uav1", 12) == world.environment_at(12)


def test_conservation_objects_never_move():
    scenario = scenario_from_dict(minimal_scenario_dict())
    world = World(scenario)
    before = [(o.object_id, o.position) for o in world.objects]
    for _ in range(50):
        world.tick()
    assert [(o.object_id, o.position) for o in world.objects] == before


# ---------------------------------------------------------------------------
# detector


def parked_world(**overrides) -> World:
    world = World(scenario_from_dict(minimal_scenario_dict(**overrides)))
    rt = world.agents["uav1"]
    rt.state = rt.state.__class__(agent_id="uav1", mode=Mode.SEARCH)
    return world


def test_detector_range_gate():
    world = parked_world(victims=[{"id": "victim-1", "position": [90.0, 70.0]}])
    rt = world.agents["uav1"]
    rt.position = (2.0, 2.0)  # far outside the 25 m range
    rng = np.random.default_rng(0)
    observed = world.environment_at(0)
    for tick in range(500):
        assert world.detector_observe(rt, tick, observed, rng) == []


def test_detector_peak_confidence_at_zero_distance():
    world = parked_world()
    rt = world.agents["uav1"]
    rt.position = (50.0, 40.0)  # on top of the victim, matched covariates, no noise
    rng = np.random.default_rng(1)
    observed = world.environment_at(0)
    detections = []
    tick = 0
    while not detections:
        detections = world.detector_observe(rt, tick, observed, rng)
        tick += 1
    detection, est = detections[0]
    assert detection.confidence == pytest.approx(0.95)
    assert est.u == 0.0


def test_detector_emission_probability_matches_base_response():
    world = parked_world()
    rt = world.agents["uav1"]
    rt.position = (44.0, 40.0)  # 6 m from the victim
    observed = world.environment_at(0)
    obs = SceneObservation(True, 6.0 / 25.0, 0.0)
    p = world.scenario.predictor.base_response(obs)
    rng = np.random.default_rng(2024)
    trials = 10_000
    hits = 0
    for tick in range(trials):
        detections = world.detector_observe(rt, tick, observed, rng)
        hits += sum(
            1 for d, _ in detections
            if d.confidence >= world.scenario.thresholds.detect_threshold
        )
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) <= 3 * sigma


def test_covariate_mismatch_lowers_confidence_by_penalty():
    # direct estimate sampling under clear vs snow observation
    from hotlsim.seeding import stable_seed
    from hotlsim.uncertainty import estimate

    scenario = scenario_from_dict(minimal_scenario_dict(predictor={
        "target_peak": 0.95, "clutter_peak": 0.2, "distance_falloff": 0.5,
        "covariate_penalty": 0.9, "model_jitter_sigma": 0.05, "replica_count": 8,
        "sensor_noise_sigma": 0.02,
        "nominal_covariates": {"weather": "clear", "daylight": "day", "terrain": "water"},
    }))
    schema = scenario.schema
    clear = schema.vector_from_mapping({"weather": "clear", "daylight": "day", "terrain": "water"})
    snow = schema.vector_from_mapping({"weather": "snow", "daylight": "day", "terrain": "water"})
    mismatch = schema.distance(snow, scenario.nominal_covariates)
    assert mismatch == pytest.approx(1 / 3)

    d_frac = 0.2
    obs_clear = SceneObservation(True, d_frac, schema.distance(clear, scenario.nominal_covariates))
    obs_snow = SceneObservation(True, d_frac, mismatch)
    n = 10_000
    cs_clear = np.array([
        estimate(scenario.predictor, obs_clear, scenario.sensor_noise_sigma,
                 stable_seed("cs-test", "clear", k)).mean_confidence
        for k in range(n)
    ])
    cs_snow = np.array([
        estimate(scenario.predictor, obs_snow, scenario.sensor_noise_sigma,
                 stable_seed("cs-test", "snow", k)).mean_confidence
        for k in range(n)
    ])
    expected_gap = scenario.predictor.covariate_penalty * mismatch
    per_sample_var = (0.02 * 0.95) ** 2 + 0.05**2 / 8
    sigma_gap = math.sqrt(2 * per_sample_var / n)
    assert abs((cs_clear.mean() - cs_snow.mean()) - expected_gap) <= 3 * sigma_gap


# ---------------------------------------------------------------------------
# search coverage geometry


def point_to_segment(p, a, b) -> float:
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / length_sq))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


@pytest.mark.parametrize("scenario_name", ["river_snow.scenario.json", "river_clear.scenario.json"])
def test_lawnmower_covers_area_within_detection_range(scenario_dir, scenario_name):
    scenario = load_scenario(scenario_dir / scenario_name)
    n = len(scenario.agents)
    strip_h = scenario.area[1] / n
    segments = []
    total_length = {}
    for i, spec in enumerate(scenario.agents):
        wps = lawnmower_waypoints(scenario.area, (i * strip_h, (i + 1) * strip_h), spec.lane_spacing)
        length = sum(
            math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(wps, wps[1:])
        )
        total_length[spec.agent_id] = length
        segments.extend(zip(wps, wps[1:]))
    # every grid point is reachable by the sweep
    step = 10.0
    x = 0.0
    while x <= scenario.area[0]:
        y = 0.0
        while y <= scenario.area[1]:
            nearest = min(point_to_segment((x, y), a, b) for a, b in segments)
            assert nearest <= scenario.detection_range, (x, y, nearest)
            y += step
        x += step
    # and the mission is long enough to finish a full sweep
    for spec in scenario.agents:
        travel_ticks = total_length[spec.agent_id] / spec.speed
        assert travel_ticks + scenario.takeoff_ticks + 20 < scenario.ticks_max


# ---------------------------------------------------------------------------
# end-to-end mode flows


def test_snow_mission_reaches_awaiting_operator(river_snow_scenario):
    runner = run_headless(river_snow_scenario)
    rt = runner.world.agents["uav1"]
    assert rt.state.mode is Mode.AWAITING_OPERATOR
    alert = runner.world.alert_center.get(rt.state.pending_alert_id)
    assert alert.priority.value == "high"
    assert alert.status.value == "pending"
    assert alert.verdict.coverage.supported is False


def test_clear_mission_auto_tracks(river_clear_scenario):
    runner = run_headless(river_clear_scenario)
    modes = {a: rt.state.mode for a, rt in runner.world.agents.items()}
    assert Mode.TRACK in modes.values()
    ar1 = [e for e in runner.envelopes
           if e.kind == "decision" and e.payload["rule"] == "ar1_auto_track"]
    assert ar1
    assert all(e.payload["loss_of_reliability"] is False for e in ar1)


def test_request_more_imagery_re_escalates(river_snow_scenario):
    # find the first high alert, then ask for more imagery: the agent loiters,
    # re-detects the same candidate, and escalates again with a fresh alert
    probe = run_headless(river_snow_scenario)
    first_high = next(
        e for e in probe.envelopes
        if e.kind == "alert" and e.payload["priority"] == "high"
    )
    alert_id = first_high.payload["alert_id"]
    raised_tick = first_high.payload["tick_raised"]

    runner = run_headless(
        river_snow_scenario,
        schedule=[(raised_tick + 5, alert_id, OperatorAction.REQUEST_MORE_IMAGERY)],
    )
    rt = runner.world.agents["uav1"]
    assert rt.state.mode is Mode.AWAITING_OPERATOR
    new_alert = runner.world.alert_center.get(rt.state.pending_alert_id)
    assert new_alert.alert_id != alert_id
    assert runner.world.alert_center.get(alert_id).status.value == "more_imagery_requested"


def test_identical_runs_identical_events(river_snow_scenario):
    lines_a = run_headless(river_snow_scenario, ticks=150).lines()
    lines_b = run_headless(river_snow_scenario, ticks=150).lines()
    assert lines_a == lines_b
