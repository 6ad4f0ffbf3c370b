import random
from pathlib import Path

import pytest

from hotlsim.covariate_model import (
    AnnotatedSample,
    CategoricalAttribute,
    ContinuousAttribute,
    CovariateSchema,
    CovariateVector,
    SyntheticSimilarityGenerator,
    build_profile,
)
from hotlsim.decision_engine import PolicyThresholds
from hotlsim.sim_world import load_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def river_snow_scenario():
    return load_scenario(SCENARIO_DIR / "river_snow.scenario.json")


@pytest.fixture(scope="session")
def river_clear_scenario():
    return load_scenario(SCENARIO_DIR / "river_clear.scenario.json")


@pytest.fixture
def weather_schema() -> CovariateSchema:
    return CovariateSchema((
        CategoricalAttribute("weather", ("clear", "rain", "snow")),
        ContinuousAttribute("light", 0.0, 1.0, 3),
    ))


@pytest.fixture
def thresholds() -> PolicyThresholds:
    return PolicyThresholds(
        detect_threshold=0.4,
        alert_threshold=0.2,
        uncertainty_threshold=0.5,
        covariate_coverage=0.6,
        operating_fpr=0.05,
        operator_budget=1,
    )


def make_random_corpus(schema: CovariateSchema, n: int, seed: int,
                       weathers=("clear", "rain")) -> list[AnnotatedSample]:
    rng = random.Random(seed)
    return [
        AnnotatedSample(
            sample_id=f"s{i:03d}",
            covariates=CovariateVector((rng.choice(weathers), rng.random())),
            contains_target=rng.random() < 0.6,
        )
        for i in range(n)
    ]


def brute_force_tpr(corpus, schema, sim_gen, x, fpr, min_support):
    """Independent counting oracle: enumerate pairs, scan thresholds linearly.

    Mirrors the decision semantics (detection when score exceeds the
    threshold; the threshold is the smallest observed non-match score whose
    exceedance fraction is within fpr) without sharing any code with the
    profile implementation.
    """
    key = schema.bin_key(x)
    match, nonmatch = [], []
    for q in corpus:
        if schema.bin_key(q.covariates) != key:
            continue
        for g in corpus:
            m = q.contains_target and g.contains_target
            s = sim_gen(q, g, m)
            (match if m else nonmatch).append(s)
    if len(match) + len(nonmatch) < min_support or not match or not nonmatch:
        return None
    n = len(nonmatch)
    threshold = None
    for s in sorted(set(nonmatch)):
        if sum(1 for v in nonmatch if v > s) / n <= fpr:
            threshold = s
            break
    return sum(1 for v in match if v > threshold) / len(match)


def build_weather_profile(schema, corpus, seed=0, min_support=5):
    gen = SyntheticSimilarityGenerator(schema=schema, seed=seed)
    return build_profile(corpus, schema, gen, min_support=min_support), gen


def interactive_schedule(scenario):
    """Discover a three-command schedule against the deterministic mission.

    Each discovery run extends the schedule by one command; determinism makes
    alert ids and ticks stable across runs, so the composed schedule is valid.
    """
    from hotlsim.decision_engine import OperatorAction
    from hotlsim.gateway import run_headless

    schedule = []

    probe = run_headless(scenario, schedule=schedule)
    low = next(e for e in probe.envelopes
               if e.kind == "alert" and e.payload["priority"] == "low"
               and e.payload["status"] == "pending")
    schedule.append((low.payload["tick_raised"] + 2, low.payload["alert_id"],
                     OperatorAction.REJECT))

    probe = run_headless(scenario, schedule=schedule)
    high = next(e for e in probe.envelopes
                if e.kind == "alert" and e.payload["priority"] == "high")
    schedule.append((high.payload["tick_raised"] + 3, high.payload["alert_id"],
                     OperatorAction.REQUEST_MORE_IMAGERY))

    probe = run_headless(scenario, schedule=schedule)
    second_high = next(
        e for e in probe.envelopes
        if e.kind == "alert" and e.payload["priority"] == "high"
        and e.payload["alert_id"] != high.payload["alert_id"]
        and e.payload["status"] == "pending"
    )
    schedule.append((second_high.payload["tick_raised"] + 2,
                     second_high.payload["alert_id"], OperatorAction.CONFIRM))
    return schedule
