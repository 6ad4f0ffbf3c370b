"""Autonomy adaptation rules, agent mode machine, and the alert queue.

Three rules partition every (confidence, reliability) pair seen while an
agent searches: high confidence with intact reliability tracks
autonomously, high confidence with degraded reliability asks the operator
for permission, and mid-band confidence raises a low-priority heads-up
while the search continues.  The operator answers alerts with confirm /
reject / request-more-imagery; a bounded intervention budget decides
whether a permission request blocks the agent or lets it act provisionally
until review.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .covariate_model import CoverageResult
from .errors import IllegalTransition, RuleDomainError, StaleAlert, UnknownAlert
from .events import Event
from .uncertainty import ConfidenceBand, UncertaintyEstimate


class Mode(Enum):
    TAKEOFF = "takeoff"
    SEARCH = "search"
    TRACK = "track"
    PROVISIONAL_TRACK = "provisional_track"
    AWAITING_OPERATOR = "awaiting_operator"


class Autonomy(Enum):
    FULL = "full"
    REDUCED = "reduced"


class Decision(Enum):
    AR1_AUTO_TRACK = "ar1_auto_track"
    AR2_REQUEST_PERMISSION = "ar2_request_permission"
    AR3_LOW_ALERT = "ar3_low_alert"
    NO_ACTION = "no_action"


class AlertPriority(Enum):
    HIGH = "high"
    LOW = "low"


class AlertStatus(Enum):
    PENDING = "pending"
    PROVISIONAL = "provisional"
    CONFIRMED = "confirmed"
    REJECTED = "rejected"
    MORE_IMAGERY_REQUESTED = "more_imagery_requested"
    SUPERSEDED = "superseded"


RESOLVED_STATUSES = frozenset({
    AlertStatus.CONFIRMED,
    AlertStatus.REJECTED,
    AlertStatus.MORE_IMAGERY_REQUESTED,
    AlertStatus.SUPERSEDED,
})


class OperatorAction(Enum):
    CONFIRM = "confirm"
    REJECT = "reject"
    REQUEST_MORE_IMAGERY = "request_more_imagery"


@dataclass(frozen=True)
class PolicyThresholds:
    detect_threshold: float
    alert_threshold: float
    uncertainty_threshold: float
    covariate_coverage: float
    operating_fpr: float = 0.05
    operator_budget: int = 1

    def __post_init__(self):
        for name in ("detect_threshold", "alert_threshold", "uncertainty_threshold",
                     "covariate_coverage", "operating_fpr"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        # AR3's open interval (alert, detect) must be non-empty
        if not self.alert_threshold < self.detect_threshold:
            raise ValueError("alert_threshold must be < detect_threshold")
        if self.operator_budget < 1:
            raise ValueError("operator_budget must be >= 1")


@dataclass(frozen=True)
class ReliabilityVerdict:
    u: float
    band: ConfidenceBand
    coverage: CoverageResult
    uncertainty_exceeded: bool
    coverage_below: bool
    loss_of_reliability: bool

    def reasons(self) -> list[str]:
        out = []
        if self.uncertainty_exceeded:
            out.append("uncertainty_above_threshold")
        if self.coverage_below:
            out.append("coverage_below_threshold")
        return out


def evaluate_reliability(
    est: UncertaintyEstimate,
    band: ConfidenceBand,
    coverage: CoverageResult,
    thresholds: PolicyThresholds,
) -> ReliabilityVerdict:
    """Loss of reliability is the strict disjunction of the two arms."""
    uncertainty_exceeded = est.u > thresholds.uncertainty_threshold
    coverage_below = coverage.score < thresholds.covariate_coverage
    return ReliabilityVerdict(
        u=est.u,
        band=band,
        coverage=coverage,
        uncertainty_exceeded=uncertainty_exceeded,
        coverage_below=coverage_below,
        loss_of_reliability=uncertainty_exceeded or coverage_below,
    )


@dataclass(frozen=True)
class TargetLock:
    object_ref: str
    position: tuple[float, float]


@dataclass(frozen=True)
class AgentState:
    agent_id: str
    mode: Mode = Mode.TAKEOFF
    autonomy: Autonomy = Autonomy.FULL
    pending_alert_id: str | None = None
    target_lock: TargetLock | None = None

    def check_invariants(self) -> "AgentState":
        if self.mode is Mode.AWAITING_OPERATOR:
            if self.autonomy is not Autonomy.REDUCED or self.pending_alert_id is None:
                raise IllegalTransition(
                    f"{self.agent_id}: awaiting_operator requires reduced autonomy and a pending alert"
                )
        if self.mode is Mode.PROVISIONAL_TRACK and self.pending_alert_id is None:
            raise IllegalTransition(f"{self.agent_id}: provisional_track requires a pending alert")
        if self.mode is Mode.TRACK and self.target_lock is None:
            raise IllegalTransition(f"{self.agent_id}: track requires a target lock")
        return self


@dataclass
class Alert:
    alert_id: str
    agent_id: str
    priority: AlertPriority
    tick: int
    object_ref: str
    confidence: float
    observed_covariates: dict
    position: tuple[float, float]
    verdict: ReliabilityVerdict
    status: AlertStatus

    @property
    def resolved(self) -> bool:
        return self.status in RESOLVED_STATUSES

    def payload(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "agent_id": self.agent_id,
            "priority": self.priority.value,
            "status": self.status.value,
            "tick_raised": self.tick,
            "detection": {
                "object_ref": self.object_ref,
                "confidence": self.confidence,
                "observed_covariates": self.observed_covariates,
                "position": list(self.position),
            },
            "verdict": {
                "u": self.verdict.u,
                "band": self.verdict.band.value,
                "coverage_score": self.verdict.coverage.score,
                "coverage_supported": self.verdict.coverage.supported,
                "loss_of_reliability": self.verdict.loss_of_reliability,
                "reasons": self.verdict.reasons(),
            },
        }


@dataclass(frozen=True)
class OperatorCommand:
    alert_id: str
    action: OperatorAction
    issued_at: int


@dataclass
class DetectionEvent:
    """One surrogate-detector firing, as consumed by the rules."""

    agent_id: str
    tick: int
    object_ref: str
    confidence: float
    observed_covariates: dict
    position: tuple[float, float]

    def payload(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "object_ref": self.object_ref,
            "confidence": self.confidence,
            "observed_covariates": self.observed_covariates,
            "position": list(self.position),
        }


class AlertCenter:
    """Registry and priority queue for escalations.

    Ordering: high before low, then raise tick ascending, then agent id
    ascending.  The operator budget counts blocking permission requests
    (high-priority pending alerts), one per agent awaiting the operator.
    """

    def __init__(self, operator_budget: int = 1):
        if operator_budget < 1:
            raise ValueError("operator_budget must be >= 1")
        self.operator_budget = operator_budget
        self._alerts: dict[str, Alert] = {}
        self._counter = 0

    def _new_id(self) -> str:
        self._counter += 1
        return f"alert-{self._counter:06d}"

    def raise_alert(
        self,
        agent_id: str,
        priority: AlertPriority,
        status: AlertStatus,
        detection: DetectionEvent,
        verdict: ReliabilityVerdict,
    ) -> Alert:
        alert = Alert(
            alert_id=self._new_id(),
            agent_id=agent_id,
            priority=priority,
            tick=detection.tick,
            object_ref=detection.object_ref,
            confidence=detection.confidence,
            observed_covariates=detection.observed_covariates,
            position=detection.position,
            verdict=verdict,
            status=status,
        )
        self._alerts[alert.alert_id] = alert
        return alert

    def get(self, alert_id: str) -> Alert | None:
        return self._alerts.get(alert_id)

    def unresolved(self) -> list[Alert]:
        out = [a for a in self._alerts.values() if not a.resolved]
        out.sort(key=lambda a: (0 if a.priority is AlertPriority.HIGH else 1, a.tick, a.agent_id))
        return out

    def next_alert(self) -> Alert | None:
        queue = self.unresolved()
        return queue[0] if queue else None

    def high_pending_count(self) -> int:
        return sum(
            1 for a in self._alerts.values()
            if a.priority is AlertPriority.HIGH and a.status is AlertStatus.PENDING
        )

    def budget_free(self) -> bool:
        return self.high_pending_count() < self.operator_budget

    def resolve(self, alert_id: str, status: AlertStatus) -> Alert:
        alert = self._alerts[alert_id]
        if alert.resolved:
            raise StaleAlert(f"alert {alert_id} already {alert.status.value}")
        if status not in RESOLVED_STATUSES:
            raise ValueError(f"{status} is not a terminal status")
        alert.status = status
        return alert

    def all_alerts(self) -> list[Alert]:
        return list(self._alerts.values())


def decide(
    detection: DetectionEvent,
    verdict: ReliabilityVerdict,
    thresholds: PolicyThresholds,
    agent: AgentState,
) -> Decision:
    """Apply the adaptation rules to one detection seen during search.

    Comparisons are deliberately asymmetric: the tracking rules use
    cs >= detect_threshold, the low-alert band is the open interval
    (alert_threshold, detect_threshold), and everything at or below
    alert_threshold is ignored.
    """
    if agent.mode is not Mode.SEARCH:
        raise RuleDomainError(
            f"adaptation rules only fire in search mode, agent {agent.agent_id} is {agent.mode.value}"
        )
    cs = detection.confidence
    if cs >= thresholds.detect_threshold:
        if verdict.loss_of_reliability:
            return Decision.AR2_REQUEST_PERMISSION
        return Decision.AR1_AUTO_TRACK
    if thresholds.alert_threshold < cs < thresholds.detect_threshold:
        return Decision.AR3_LOW_ALERT
    return Decision.NO_ACTION


def _supersede_pending(agent: AgentState, center: AlertCenter, events: list[Event]) -> AgentState:
    """A new escalation replaces the agent's stale unresolved alert, if any."""
    if agent.pending_alert_id is None:
        return agent
    old = center.get(agent.pending_alert_id)
    if old is not None and not old.resolved:
        center.resolve(old.alert_id, AlertStatus.SUPERSEDED)
        events.append(Event("alert", old.payload()))
    return replace(agent, pending_alert_id=None)


def apply_decision(
    agent: AgentState,
    decision: Decision,
    detection: DetectionEvent,
    verdict: ReliabilityVerdict,
    center: AlertCenter,
) -> tuple[AgentState, list[Event]]:
    """Enact a rule decision: mode/autonomy changes plus alert traffic."""
    events: list[Event] = []
    if decision is Decision.NO_ACTION:
        return agent, events

    lock = TargetLock(detection.object_ref, detection.position)

    if decision is Decision.AR1_AUTO_TRACK:
        agent = _supersede_pending(agent, center, events)
        note = center.raise_alert(
            agent.agent_id, AlertPriority.LOW, AlertStatus.PENDING, detection, verdict,
        )
        # informational notification: auto-resolved, never consumes budget
        center.resolve(note.alert_id, AlertStatus.CONFIRMED)
        events.append(Event("alert", note.payload()))
        agent = replace(agent, mode=Mode.TRACK, autonomy=Autonomy.FULL,
                        target_lock=lock, pending_alert_id=None)

    elif decision is Decision.AR2_REQUEST_PERMISSION:
        agent = _supersede_pending(agent, center, events)
        if center.budget_free():
            alert = center.raise_alert(
                agent.agent_id, AlertPriority.HIGH, AlertStatus.PENDING, detection, verdict,
            )
            events.append(Event("alert", alert.payload()))
            agent = replace(agent, mode=Mode.AWAITING_OPERATOR, autonomy=Autonomy.REDUCED,
                            pending_alert_id=alert.alert_id, target_lock=None)
        else:
            # operator saturated: act on best judgment, flagged for review
            alert = center.raise_alert(
                agent.agent_id, AlertPriority.HIGH, AlertStatus.PROVISIONAL, detection, verdict,
            )
            events.append(Event("alert", alert.payload()))
            agent = replace(agent, mode=Mode.PROVISIONAL_TRACK, autonomy=Autonomy.REDUCED,
                            pending_alert_id=alert.alert_id, target_lock=lock)

    elif decision is Decision.AR3_LOW_ALERT:
        agent = _supersede_pending(agent, center, events)
        alert = center.raise_alert(
            agent.agent_id, AlertPriority.LOW, AlertStatus.PENDING, detection, verdict,
        )
        events.append(Event("alert", alert.payload()))
        agent = replace(agent, pending_alert_id=alert.alert_id)

    return agent.check_invariants(), events


def apply_operator_command(
    agent: AgentState,
    cmd: OperatorCommand,
    alert: Alert,
    center: AlertCenter,
) -> tuple[AgentState, Alert, list[Event]]:
    """Resolve an alert per the operator's answer and move the agent.

    Confirm locks the agent onto the alert's sighting; reject returns it to
    search; request-more-imagery also returns it to search but the caller is
    expected to honor the emitted reposition directive so fresh imagery of
    the same candidate re-enters the rules.
    """
    if cmd.alert_id != alert.alert_id:
        raise UnknownAlert(f"command targets {cmd.alert_id}, alert is {alert.alert_id}")
    if alert.resolved:
        raise StaleAlert(f"alert {alert.alert_id} already {alert.status.value}")
    if agent.agent_id != alert.agent_id:
        raise UnknownAlert(f"alert {alert.alert_id} belongs to {alert.agent_id}")

    events: list[Event] = []
    directive = None

    if cmd.action is OperatorAction.CONFIRM:
        center.resolve(alert.alert_id, AlertStatus.CONFIRMED)
        agent = replace(agent, mode=Mode.TRACK, autonomy=Autonomy.FULL,
                        pending_alert_id=None,
                        target_lock=TargetLock(alert.object_ref, alert.position))
    elif cmd.action is OperatorAction.REJECT:
        center.resolve(alert.alert_id, AlertStatus.REJECTED)
        agent = replace(agent, mode=Mode.SEARCH, autonomy=Autonomy.FULL,
                        pending_alert_id=None, target_lock=None)
    else:  # REQUEST_MORE_IMAGERY
        center.resolve(alert.alert_id, AlertStatus.MORE_IMAGERY_REQUESTED)
        agent = replace(agent, mode=Mode.SEARCH, autonomy=Autonomy.FULL,
                        pending_alert_id=None, target_lock=None)
        directive = {
            "type": "reposition_and_stream",
            "object_ref": alert.object_ref,
            "position": list(alert.position),
        }

    events.append(Event("alert", alert.payload()))
    events.append(Event("operator_command", {
        "alert_id": alert.alert_id,
        "agent_id": agent.agent_id,
        "action": cmd.action.value,
        "issued_at": cmd.issued_at,
        "directive": directive,
        "new_mode": agent.mode.value,
    }))
    return agent.check_invariants(), alert, events
