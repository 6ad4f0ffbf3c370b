"""Internal event records produced by the tick pipeline.

The gateway wraps these into sequenced wire envelopes; inside the simulator
they are plain (kind, payload) pairs.  Payloads must stay JSON-serializable.
"""

from __future__ import annotations

from dataclasses import dataclass

EVENT_KINDS = frozenset({
    "snapshot",
    "agent_state",
    "detection",
    "reliability",
    "alert",
    "decision",
    "operator_command",
    "heartbeat",
})


@dataclass(frozen=True)
class Event:
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
