"""Per-detection uncertainty estimation and tri-state confidence banding.

A detection's confidence comes from a small ensemble of perturbed surrogate
replicas evaluated on one noisy sensor reading; the ensemble spread is the
model-uncertainty term and a first-order (delta method) propagation of the
sensor noise through the response curve is the data-uncertainty term.  Their
sum, normalized by the largest variance a [0,1] variable can have (0.25),
gives the scalar u that the hysteresis band filters into confident /
uncertain / no-confidence.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import DegenerateReplicas, InvalidSigma

# hard upper bound on the variance of a [0,1]-valued variable
V_MAX = 0.25


class ConfidenceBand(Enum):
    CONFIDENT = "confident"
    UNCERTAIN = "uncertain"
    NO_CONFIDENCE = "no_confidence"


@dataclass(frozen=True)
class SceneObservation:
    """What the sensor hands the surrogate for one candidate object."""

    contains_target: bool
    distance_frac: float  # distance / detection range, clamped to [0, 1]
    covariate_mismatch: float  # normalized distance from nominal conditions


@dataclass(frozen=True)
class SurrogatePredictor:
    """Closed-form stand-in for the detection network.

    The response is a distance-attenuated peak minus a covariate-mismatch
    penalty, clamped to [0, 1].  ``model_jitter_sigma`` perturbs each replica
    (stand-in for dropout-sampled sub-networks), ``replica_count`` is the
    ensemble size.
    """

    target_peak: float = 0.95
    clutter_peak: float = 0.25
    distance_falloff: float = 0.5
    covariate_penalty: float = 0.6
    model_jitter_sigma: float = 0.05
    replica_count: int = 32

    def __post_init__(self):
        if self.replica_count < 2:
            raise DegenerateReplicas(f"replica_count must be >= 2, got {self.replica_count}")
        if self.model_jitter_sigma < 0:
            raise InvalidSigma("model_jitter_sigma must be >= 0")

    def signal(self, observation: SceneObservation) -> float:
        d = min(max(observation.distance_frac, 0.0), 1.0)
        return 1.0 - self.distance_falloff * d

    def peak(self, observation: SceneObservation) -> float:
        return self.target_peak if observation.contains_target else self.clutter_peak

    def response_at(self, observation: SceneObservation, signal: float) -> float:
        raw = self.peak(observation) * signal - self.covariate_penalty * observation.covariate_mismatch
        return min(max(raw, 0.0), 1.0)

    def base_response(self, observation: SceneObservation) -> float:
        return self.response_at(observation, self.signal(observation))

    def response_slope(self, observation: SceneObservation) -> float:
        """|d response / d signal| at the operating point; 0 where clamped."""
        raw = (self.peak(observation) * self.signal(observation)
               - self.covariate_penalty * observation.covariate_mismatch)
        if 0.0 < raw < 1.0:
            return self.peak(observation)
        return 0.0


@dataclass(frozen=True)
class UncertaintyEstimate:
    mean_confidence: float
    u: float
    data_variance: float
    model_variance: float


def estimate(
    predictor: SurrogatePredictor,
    observation: SceneObservation,
    sensor_noise_sigma: float,
    seed: int,
) -> UncertaintyEstimate:
    """One uncertainty-annotated prediction, deterministic given the seed.

    A single sensor-noise draw perturbs the attenuated signal (one physical
    reading shared by all replicas); each replica then adds its own parameter
    jitter.  The replica mean is the detection confidence, the replica
    population variance the model term, and the delta-method term
    (sigma * slope)^2 the data term.
    """
    if sensor_noise_sigma < 0:
        raise InvalidSigma("sensor_noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sensor_noise_sigma) if sensor_noise_sigma > 0 else 0.0
    noisy_response = predictor.response_at(observation, predictor.signal(observation) + noise)
    jitter = (
        rng.normal(0.0, predictor.model_jitter_sigma, predictor.replica_count)
        if predictor.model_jitter_sigma > 0
        else np.zeros(predictor.replica_count)
    )
    replicas = np.clip(noisy_response + jitter, 0.0, 1.0)
    mean_confidence = float(replicas.mean())
    model_variance = float(replicas.var())
    slope = predictor.response_slope(observation)
    data_variance = (sensor_noise_sigma * slope) ** 2
    u = min(max((data_variance + model_variance) / V_MAX, 0.0), 1.0)
    return UncertaintyEstimate(
        mean_confidence=mean_confidence,
        u=u,
        data_variance=data_variance,
        model_variance=model_variance,
    )


@dataclass(frozen=True)
class BandState:
    """Hysteresis filter state over the streaming u values.

    b1 and b2 split [0,1] into the three confidence regions; crossings only
    register once u clears the boundary by more than h, and the band moves a
    single step per update so the middle state is always visible for at
    least one tick.
    """

    current: ConfidenceBand = ConfidenceBand.CONFIDENT
    b1: float = 0.3
    b2: float = 0.7
    h: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.b1 < self.b2 < 1.0):
            raise ValueError("band boundaries must satisfy 0 < b1 < b2 < 1")
        if self.h < 0:
            raise ValueError("hysteresis half-width must be >= 0")
        if not (self.b1 + self.h < self.b2 - self.h):
            raise ValueError("hysteresis bands around b1 and b2 must not overlap")


def band_update(state: BandState, est: UncertaintyEstimate) -> tuple[BandState, ConfidenceBand]:
    u = est.u
    cur = state.current
    if cur is ConfidenceBand.CONFIDENT:
        nxt = ConfidenceBand.UNCERTAIN if u > state.b1 + state.h else cur
    elif cur is ConfidenceBand.UNCERTAIN:
        if u < state.b1 - state.h:
            nxt = ConfidenceBand.CONFIDENT
        elif u > state.b2 + state.h:
            nxt = ConfidenceBand.NO_CONFIDENCE
        else:
            nxt = cur
    else:  # NO_CONFIDENCE
        nxt = ConfidenceBand.UNCERTAIN if u < state.b2 - state.h else cur
    if nxt is cur:
        return state, cur
    return replace(state, current=nxt), nxt
