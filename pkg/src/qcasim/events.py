"""Simulated event records and the totally ordered event timeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

__all__ = ["EventKind", "SimEvent", "EventTimeline"]


class EventKind(Enum):
    TRIGGER_SENT = "TriggerSent"
    TRIGGER_LATCHED = "TriggerLatched"
    GATE_START = "GateStart"
    GATE_END = "GateEnd"
    MEASURE_START = "MeasureStart"
    MEASURE_RESULT = "MeasureResult"
    FEEDBACK_COLLECTED = "FeedbackCollected"
    FEEDBACK_DELIVERED = "FeedbackDelivered"
    FIFO_UNDERFLOW = "FifoUnderflow"
    SHOT_END = "ShotEnd"
    DEADLOCK = "Deadlock"


@dataclass(frozen=True)
class SimEvent:
    time_ns: int
    kind: EventKind
    node: str
    process_id: int
    shot: int
    seq: int = 0
    payload: tuple[tuple[str, int | str], ...] = ()

    def sort_key(self) -> tuple:
        return (self.time_ns, self.node, self.seq)

    def render(self) -> str:
        fields = [f"t={self.time_ns}", f"kind={self.kind.value}",
                  f"node={self.node}", f"pid={self.process_id}",
                  f"shot={self.shot}"]
        fields += [f"{k}={v}" for k, v in self.payload]
        return " ".join(fields)


@dataclass
class EventTimeline:
    events: list[SimEvent] = field(default_factory=list)
    deadlocked: bool = False
    underflowed: bool = False

    def add(self, event: SimEvent) -> None:
        self.events.append(event)

    def sorted(self) -> list[SimEvent]:
        return sorted(self.events, key=SimEvent.sort_key)

    def of_kind(self, *kinds: EventKind) -> list[SimEvent]:
        wanted = set(kinds)
        return [e for e in self.sorted() if e.kind in wanted]

    def of_process(self, process_id: int) -> list[SimEvent]:
        return [e for e in self.sorted() if e.process_id == process_id]

    def last_time(self) -> int:
        return max((e.time_ns for e in self.events), default=0)

    def export_lines(self) -> list[str]:
        lines = [e.render() for e in self.sorted()]
        lines.append("# summary")
        counts: dict[str, int] = {}
        for e in self.events:
            counts[e.kind.value] = counts.get(e.kind.value, 0) + 1
        for kind in sorted(counts):
            lines.append(f"# {kind}: {counts[kind]}")
        lines.append(f"# last_time_ns: {self.last_time()}")
        lines.append(f"# deadlocked: {self.deadlocked}")
        lines.append(f"# underflowed: {self.underflowed}")
        return lines

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.export_lines()) + "\n")
