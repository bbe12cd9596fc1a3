"""Multi-process admission control and staggered trigger arbitration."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "ProcessState", "ProcessContext", "StiTable", "TriggerRequest",
    "Scheduler", "SchedulerError", "UnitConflict", "SlotsExhausted", "NotDone",
    "HARD_PROCESS_CAP",
]

HARD_PROCESS_CAP = 32
DEFAULT_MAX_PROCESSES = 5


class SchedulerError(Exception):
    pass


class UnitConflict(SchedulerError):
    def __init__(self, blocking: list[int]):
        self.blocking = blocking
        super().__init__(f"units shared with running processes {blocking}")


class SlotsExhausted(SchedulerError):
    pass


class NotDone(SchedulerError):
    pass


class ProcessState(Enum):
    LOADED = "Loaded"
    RUNNING = "Running"
    DONE = "Done"


@dataclass
class StiTable:
    """Minimum spacing between shot-initial triggers of distinct processes,
    in ns.  Symmetric by default; directional overrides win."""

    default_ns: int = 0
    pairs: dict[tuple[int, int], int] = field(default_factory=dict)

    def get(self, a: int, b: int) -> int:
        if a == b:
            return 0
        if (a, b) in self.pairs:
            return self.pairs[(a, b)]
        if (b, a) in self.pairs:
            return self.pairs[(b, a)]
        return self.default_ns

    def set_pair(self, a: int, b: int, ns: int, symmetric: bool = True) -> None:
        if ns < 0:
            raise ValueError("STI must be non-negative")
        self.pairs[(a, b)] = ns
        if symmetric:
            self.pairs[(b, a)] = ns


@dataclass(frozen=True)
class TriggerRequest:
    process_id: int
    start: int
    time_ns: int


@dataclass
class ProcessContext:
    process_id: int
    qubit_set: frozenset[int]
    unit_set: frozenset[str]
    state: ProcessState = ProcessState.LOADED
    shots_remaining: int = 0
    last_start_grant_ns: int | None = None
    admitted_at_ns: int = 0

    def task_core_counter(self, now: int) -> int:
        """ns elapsed since the most recent start-flagged trigger grant."""
        if self.last_start_grant_ns is None:
            return 0
        return now - self.last_start_grant_ns


class Scheduler:
    """Passive state machine driven by the single-threaded event loop."""

    def __init__(self, sti: StiTable | None = None,
                 max_processes: int = DEFAULT_MAX_PROCESSES):
        if not 1 <= max_processes <= HARD_PROCESS_CAP:
            raise ValueError(f"max_processes must be in [1, {HARD_PROCESS_CAP}]")
        self.sti = sti or StiTable()
        self.max_processes = max_processes
        self.contexts: dict[int, ProcessContext] = {}

    def running(self) -> list[ProcessContext]:
        return [c for c in self.contexts.values() if c.state is ProcessState.RUNNING]

    def admit(self, task, now: int) -> ProcessContext:
        """Admit a compiled task into a free process slot.

        Raises UnitConflict when its units overlap a running process, or
        SlotsExhausted when every slot is busy.
        """
        units = task.unit_set
        blocking = sorted(c.process_id for c in self.running()
                          if c.unit_set & units)
        if blocking:
            raise UnitConflict(blocking)
        if len(self.running()) >= self.max_processes:
            raise SlotsExhausted(f"all {self.max_processes} slots busy")
        pid = task.process_id
        if pid in self.contexts and self.contexts[pid].state is ProcessState.RUNNING:
            raise UnitConflict([pid])
        ctx = ProcessContext(process_id=pid, qubit_set=task.qubit_set,
                             unit_set=units, state=ProcessState.RUNNING,
                             shots_remaining=task.shot_count, admitted_at_ns=now)
        self.contexts[pid] = ctx
        return ctx

    def arbitrate(self, req: TriggerRequest) -> int:
        """Grant time for a trigger request.

        Non-initial triggers (start=0) are never staggered.  Initial
        triggers are delayed to the earliest time at which every pairwise
        spacing against other running processes' start-trigger history
        meets the safety interval.  Grants are monotone in request order.
        """
        ctx = self.contexts[req.process_id]
        if ctx.state is not ProcessState.RUNNING:
            raise SchedulerError(f"process {req.process_id} is not running")
        if req.start == 0:
            return req.time_ns
        t = req.time_ns
        others = sorted((c for c in self.running()
                         if c.process_id != req.process_id
                         and c.last_start_grant_ns is not None),
                        key=lambda c: c.process_id)
        changed = True
        while changed:
            changed = False
            for other in others:
                spacing = self.sti.get(req.process_id, other.process_id)
                if spacing and abs(t - other.last_start_grant_ns) < spacing:
                    t = other.last_start_grant_ns + spacing
                    changed = True
        ctx.last_start_grant_ns = t
        return t

    def mark_done(self, process_id: int) -> None:
        self.contexts[process_id].state = ProcessState.DONE

    def release(self, process_id: int) -> None:
        ctx = self.contexts.get(process_id)
        if ctx is None or ctx.state is not ProcessState.DONE:
            raise NotDone(f"process {process_id} is not Done")
        del self.contexts[process_id]
