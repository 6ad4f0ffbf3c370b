"""Reliability-adaptive multi-sUAS search-and-rescue simulator."""

from .covariate_model import (
    AnnotatedSample,
    CategoricalAttribute,
    ContinuousAttribute,
    CovariateSchema,
    CovariateVector,
    CoverageResult,
    EmpiricalCdf,
    SyntheticSimilarityGenerator,
    TrainingProfile,
    build_profile,
    conditional_tpr,
    coverage_score,
)
from .decision_engine import (
    AgentState,
    Alert,
    AlertCenter,
    AlertPriority,
    AlertStatus,
    Autonomy,
    Decision,
    DetectionEvent,
    Mode,
    OperatorAction,
    OperatorCommand,
    PolicyThresholds,
    ReliabilityVerdict,
    apply_decision,
    apply_operator_command,
    decide,
    evaluate_reliability,
)
from .uncertainty import (
    BandState,
    ConfidenceBand,
    SceneObservation,
    SurrogatePredictor,
    UncertaintyEstimate,
    band_update,
    estimate,
)

__version__ = "0.1.0"
