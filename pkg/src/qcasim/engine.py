"""The discrete-event engine: executes controller and unit programs,
propagates hierarchical triggers with sync-period alignment, samples
asynchronous measurements, and runs the feedback interrupt flow."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

from .compiler import CompiledTask
from .events import EventKind, EventTimeline, SimEvent
from .isa import OPERAND_NAMES, Instruction, Opcode
from .readout import ReadoutModel
from .scheduler import Scheduler, TriggerRequest
from .topology import Hierarchy

__all__ = [
    "run", "flat_oracle", "issue_rate_check", "IssueRateReport",
    "EngineError", "MissingTriggerAfterFeedback", "IllegalUnitInstruction",
    "DEFAULT_DECISION_COST_NS",
]

DEFAULT_DECISION_COST_NS = 100

_HOLD = "hold"        # output selector held, waiting for a trigger latch
_BLOCKED = "blocked"  # BR interrupt raised, waiting for feedback data
_RUNNING = "running"
_DONE = "done"


class EngineError(Exception):
    pass


class MissingTriggerAfterFeedback(EngineError):
    pass


class IllegalUnitInstruction(EngineError):
    pass


def _has(name: str, ins: Instruction) -> bool:
    return name in OPERAND_NAMES[ins.opcode]


class _UnitRt:
    __slots__ = ("unit_id", "module", "program", "pc", "time", "status",
                 "released", "latches_consumed", "regs", "regs_epoch",
                 "consumed_epoch", "measure_index", "end_time")

    def __init__(self, unit_id: str, module: str, program):
        self.unit_id = unit_id
        self.module = module
        self.program = program
        self.reset(0)

    def reset(self, t: int) -> None:
        self.pc = 0
        self.time = t
        self.status = _RUNNING
        self.released = False
        self.latches_consumed = 0
        self.regs = [0, 0, 0, 0]
        self.regs_epoch = 0
        self.consumed_epoch = 0
        self.measure_index = 0
        self.end_time = t


class _ProcRt:
    def __init__(self, task: CompiledTask, modules: list[str]):
        self.task = task
        self.pid = task.process_id
        self.modules = modules
        self.units = {}
        self.module_units: dict[str, list[str]] = {}
        self.shot = 0
        self.ctrl_pc = 0
        self.ctrl_time = 0
        self.ctrl_blocked = False
        self.ctrl_regs = [0, 0, 0, 0]
        self.module_latches: dict[str, list[int]] = {}
        self.fb_queue: dict[int, list[tuple[int, int]]] = {}
        self.done_units = 0
        self.anchor: int | None = None
        self.shot_done = False
        self.finished = False


class _Engine:
    def __init__(self, h: Hierarchy, scheduler: Scheduler, seed: int,
                 readout: ReadoutModel, detail: str, decision_cost_ns: int,
                 parse_rate=None):
        self.h = h
        self.sched = scheduler
        self.seed = seed
        self.readout = readout
        self.full = detail == "full"
        self.decision_cost = decision_cost_ns
        self.parse_rate = parse_rate
        self.timeline = EventTimeline()
        self.heap: list = []
        self._push_seq = 0
        self._event_seq = 0
        self.procs: dict[int, _ProcRt] = {}
        self.wait_queue: list[tuple[int, CompiledTask]] = []

    # -- plumbing ---------------------------------------------------------
    def push(self, t: int, fn, *args) -> None:
        self._push_seq += 1
        heapq.heappush(self.heap, (t, self._push_seq, fn, args))

    def emit(self, t: int, kind: EventKind, node: str, pid: int, shot: int,
             **payload) -> None:
        self._event_seq += 1
        self.timeline.add(SimEvent(t, kind, node, pid, shot, self._event_seq,
                                   tuple(sorted(payload.items()))))

    def next_sync(self, t: int) -> int:
        period = self.h.sync_period_ns
        return ((t + period - 1) // period) * period

    # -- task lifecycle ---------------------------------------------------
    def submit(self, t: int, task: CompiledTask) -> None:
        from .scheduler import SchedulerError
        try:
            self.sched.admit(task, t)
        except SchedulerError:
            self.wait_queue.append((t, task))
            return
        modules = sorted(m for m in task.masks
                         if m in self.h.modules and task.process_id in task.masks[m])
        pr = _ProcRt(task, modules)
        for uid, prog in sorted(task.programs.items()):
            module = self.h.units[uid].module_id
            pr.units[uid] = _UnitRt(uid, module, prog)
            pr.module_units.setdefault(module, []).append(uid)
        self.procs[task.process_id] = pr
        if self.parse_rate is not None:
            for uid, rep in issue_rate_check(task, self.parse_rate).items():
                if rep.underflow:
                    self.emit(t, EventKind.FIFO_UNDERFLOW, uid,
                              task.process_id, 0, op_index=rep.underflow_index,
                              headroom=rep.min_headroom)
        self.start_shot(pr, t)

    def retry_admissions(self, t: int) -> None:
        pending = self.wait_queue
        self.wait_queue = []
        for when, task in pending:
            self.submit(max(when, t), task)

    def start_shot(self, pr: _ProcRt, t: int) -> None:
        pr.ctrl_pc = 0
        pr.ctrl_time = t
        pr.ctrl_blocked = False
        pr.ctrl_regs = [0, 0, 0, 0]
        pr.module_latches = {m: [] for m in pr.modules}
        pr.fb_queue = {}
        pr.done_units = 0
        pr.anchor = None
        pr.shot_done = False
        for u in pr.units.values():
            u.reset(t)
            self.run_unit(pr, u)
        self.ctrl_run(pr)

    # -- controller -------------------------------------------------------
    def ctrl_run(self, pr: _ProcRt) -> None:
        prog = pr.task.controller_program.instructions
        while pr.ctrl_pc < len(prog):
            ins = prog[pr.ctrl_pc]
            op = ins.opcode
            if op is Opcode.TRIGGER:
                start = ins.get("start")
                grant = self.sched.arbitrate(
                    TriggerRequest(pr.pid, start, pr.ctrl_time))
                pr.ctrl_time = grant
                self.emit(grant, EventKind.TRIGGER_SENT, self.h.root, pr.pid,
                          pr.shot, start=start)
                latches = []
                for module in pr.modules:
                    latch = self.next_sync(grant + self.h.trigger_path_latency(module))
                    latches.append(latch)
                    self.emit(latch, EventKind.TRIGGER_LATCHED, module, pr.pid,
                              pr.shot)
                    self.push(latch, self.module_latch, pr, pr.shot, module, latch)
                if pr.anchor is None:
                    pr.anchor = min(latches) if latches else grant
                pr.ctrl_pc += 1
            elif op is Opcode.WAIT:
                pr.ctrl_time += ins.dur
                pr.ctrl_pc += 1
            elif op is Opcode.FEEDBACK:
                if not self.ctrl_feedback(pr, ins):
                    pr.ctrl_blocked = True
                    return
            elif op is Opcode.BR:
                rs, imm, offset = ins.operands
                taken = pr.ctrl_regs[rs % len(pr.ctrl_regs)] == imm
                pr.ctrl_pc += offset if taken else 1
            else:
                raise IllegalUnitInstruction(
                    f"{op.value} on controller of process {pr.pid}")
        self.maybe_finish_shot(pr)

    def ctrl_feedback(self, pr: _ProcRt, ins: Instruction) -> bool:
        """Returns False while readout results are still outstanding."""
        entry = pr.task.feedback_entries[ins.get("addr")]
        qubits = sorted(entry.input_mask)
        if any(not pr.fb_queue.get(q) for q in qubits):
            return False
        bits: dict[int, int] = {}
        t_collect = pr.ctrl_time
        for q in qubits:
            bit, arrival = pr.fb_queue[q].pop(0)
            bits[q] = bit
            t_collect = max(t_collect, arrival)
        self.emit(t_collect, EventKind.FEEDBACK_COLLECTED, self.h.root, pr.pid,
                  pr.shot, entry=entry.addr,
                  bits="".join(str(bits[q]) for q in qubits))
        value = entry.decide(bits)
        t_dec = t_collect + self.decision_cost
        pr.ctrl_time = t_dec
        pr.ctrl_regs[0] = value
        for uid in sorted(pr.units):
            u = pr.units[uid]
            d = t_dec + self.h.feedback_path_latency(u.module)
            self.emit(d, EventKind.FEEDBACK_DELIVERED, uid, pr.pid, pr.shot,
                      value=value)
            self.push(d, self.deliver, pr, pr.shot, uid, value, d)
        pr.ctrl_pc += 1
        prog = pr.task.controller_program.instructions
        nxt = prog[pr.ctrl_pc] if pr.ctrl_pc < len(prog) else None
        if nxt is None or nxt.opcode is not Opcode.TRIGGER or nxt.get("start") != 0:
            raise MissingTriggerAfterFeedback(
                f"process {pr.pid}: FEEDBACK not followed by TRIGGER 0")
        return True

    # -- units ------------------------------------------------------------
    def module_latch(self, pr: _ProcRt, shot: int, module: str, t: int) -> None:
        if shot != pr.shot:
            return  # stale latch from a completed shot
        pr.module_latches[module].append(t)
        for uid in pr.module_units.get(module, ()):
            u = pr.units[uid]
            if u.status == _HOLD:
                u.status = _RUNNING
                self.run_unit(pr, u)

    def deliver(self, pr: _ProcRt, shot: int, uid: str, value: int, t: int) -> None:
        if shot != pr.shot:
            return
        u = pr.units[uid]
        u.regs[0] = value
        u.regs_epoch += 1
        if u.status == _BLOCKED:
            u.time = max(u.time, t)
            u.status = _RUNNING
            self.run_unit(pr, u)

    def fb_arrival(self, pr: _ProcRt, shot: int, qubit: int, bit: int,
                   t: int) -> None:
        if shot != pr.shot:
            return
        pr.fb_queue.setdefault(qubit, []).append((bit, t))
        if pr.ctrl_blocked:
            pr.ctrl_blocked = False
            self.ctrl_run(pr)

    def run_unit(self, pr: _ProcRt, u: _UnitRt) -> None:
        prog = u.program.instructions
        pid, shot = pr.pid, pr.shot
        while u.pc < len(prog):
            ins = prog[u.pc]
            op = ins.opcode
            if _has("trig", ins) and ins.trig == 1 and not u.released:
                latches = pr.module_latches.get(u.module, ())
                if u.latches_consumed < len(latches):
                    u.time = max(u.time, latches[u.latches_consumed])
                    u.latches_consumed += 1
                    u.released = True
                    continue
                u.status = _HOLD
                return
            u.released = False
            if op is Opcode.GATE:
                if self.full:
                    self.emit(u.time, EventKind.GATE_START, u.unit_id, pid,
                              shot, addr=ins.get("addr"))
                    self.emit(u.time + ins.dur, EventKind.GATE_END, u.unit_id,
                              pid, shot, addr=ins.get("addr"))
                u.time += ins.dur
                u.pc += 1
            elif op is Opcode.WAIT:
                u.time += ins.dur
                u.pc += 1
            elif op is Opcode.MEASURE:
                qubit = pr.task.unit_qubit.get(u.unit_id, -1)
                bit = self.readout.sample(self.seed, pid, qubit, shot,
                                          u.measure_index)
                u.measure_index += 1
                if self.full:
                    self.emit(u.time, EventKind.MEASURE_START, u.unit_id, pid,
                              shot, dtype=ins.get("dtype"))
                    self.emit(u.time + ins.dur, EventKind.MEASURE_RESULT,
                              u.unit_id, pid, shot, bit=bit,
                              dtype=ins.get("dtype"))
                u.time += ins.dur
                if ins.get("fb") == 1:
                    arrival = u.time + self.h.feedback_path_latency(u.module)
                    self.push(arrival, self.fb_arrival, pr, shot, qubit, bit,
                              arrival)
                u.pc += 1
            elif op is Opcode.BR:
                rs, imm, offset = ins.operands
                blocking = u.pc not in u.program.nonblocking_brs
                if blocking:
                    if u.regs_epoch <= u.consumed_epoch:
                        u.status = _BLOCKED
                        return
                    u.consumed_epoch = u.regs_epoch
                taken = u.regs[rs % len(u.regs)] == imm
                u.pc += offset if taken else 1
            else:
                raise IllegalUnitInstruction(
                    f"{op.value} on unit {u.unit_id}")
        u.status = _DONE
        u.end_time = u.time
        pr.done_units += 1
        self.maybe_finish_shot(pr)

    # -- shot completion --------------------------------------------------
    def maybe_finish_shot(self, pr: _ProcRt) -> None:
        if pr.shot_done or pr.finished:
            return
        if pr.done_units < len(pr.units):
            return
        if pr.ctrl_pc < len(pr.task.controller_program.instructions):
            return
        pr.shot_done = True
        end = max([u.end_time for u in pr.units.values()] + [pr.ctrl_time])
        self.emit(end, EventKind.SHOT_END, self.h.root, pr.pid, pr.shot)
        if pr.shot + 1 >= pr.task.shot_count:
            pr.finished = True
            self.sched.mark_done(pr.pid)
            self.sched.release(pr.pid)
            self.push(end, lambda t=end: self.retry_admissions(t))
        else:
            pr.shot += 1
            anchor = end if pr.anchor is None else pr.anchor
            nxt = max(anchor + pr.task.shot_period_ns, end, pr.ctrl_time)
            self.push(nxt, self.start_shot, pr, nxt)

    # -- main loop --------------------------------------------------------
    def loop(self) -> EventTimeline:
        while self.heap:
            _, _, fn, args = heapq.heappop(self.heap)
            fn(*args)
        stuck = [pr for pr in self.procs.values() if not pr.finished]
        if stuck or self.wait_queue:
            self.timeline.deadlocked = True
            t = self.timeline.last_time()
            for pr in stuck:
                self.emit(t, EventKind.DEADLOCK, self.h.root, pr.pid, pr.shot)
            for _, task in self.wait_queue:
                self.emit(t, EventKind.DEADLOCK, self.h.root, task.process_id, -1)
        if any(e.kind is EventKind.FIFO_UNDERFLOW for e in self.timeline.events):
            self.timeline.underflowed = True
        return self.timeline


def run(tasks, h: Hierarchy, scheduler: Scheduler | None = None, *,
        seed: int = 0, submit_times=None, readout: ReadoutModel | None = None,
        detail: str = "full", decision_cost_ns: int = DEFAULT_DECISION_COST_NS,
        parse_rate=None) -> EventTimeline:
    """Simulate a set of admitted tasks to completion.

    Deterministic: identical (tasks, topology, seed) produce an identical
    timeline.  A trigger granted at time g takes effect at a module at the
    next sync-period multiple at or after g plus the accumulated edge
    latencies along its path.
    """
    scheduler = scheduler or Scheduler()
    readout = readout or ReadoutModel()
    eng = _Engine(h, scheduler, seed, readout, detail, decision_cost_ns,
                  parse_rate)
    tasks = list(tasks)
    submit_times = list(submit_times) if submit_times else [0] * len(tasks)
    if len(submit_times) != len(tasks):
        raise ValueError("submit_times must match tasks")
    for t, task in sorted(zip(submit_times, tasks),
                          key=lambda p: (p[0], p[1].process_id)):
        eng.push(t, eng.submit, t, task)
    return eng.loop()


def flat_oracle(ct: CompiledTask, trigger_time: int,
                branch_values: list[int] | None = None):
    """Brute-force ground truth: ignores the hierarchy and lays every
    unit's straight-line timeline at trigger_time + prefix sums.

    ``branch_values`` supplies the register value observed by each
    successive blocking BR (per feedback epoch); default all zeros.
    """
    branch_values = branch_values or []
    out = []
    for uid in sorted(ct.programs):
        prog = ct.programs[uid]
        t = trigger_time
        pc = 0
        epoch = 0
        reg = 0
        steps = 0
        while pc < len(prog.instructions):
            steps += 1
            if steps > 10 * len(prog.instructions) + 100:
                raise EngineError(f"oracle runaway in unit {uid}")
            ins = prog.instructions[pc]
            if ins.opcode is Opcode.BR:
                if pc not in prog.nonblocking_brs:
                    reg = branch_values[epoch] if epoch < len(branch_values) else 0
                    epoch += 1
                taken = reg == ins.get("imm")
                pc += ins.get("offset") if taken else 1
                continue
            out.append((uid, t, ins))
            t += ins.dur
            pc += 1
    return out


@dataclass
class IssueRateReport:
    unit_id: str
    min_headroom: int
    underflow_index: int | None = None

    @property
    def underflow(self) -> bool:
        return self.underflow_index is not None


def issue_rate_check(ct: CompiledTask, parse_rate_ops_per_us,
                     buffer_capacity: int = 16,
                     fifo_capacity: int = 8) -> dict[str, IssueRateReport]:
    """Producer/consumer analysis per unit.

    The classical producer parses one instruction per 1/parse_rate µs and
    may run ahead by ``buffer_capacity`` decoded ops; parsed ops enter the
    waveform FIFO (``fifo_capacity`` slots) when a slot frees up, and the
    FIFO plus the op buffer are filled before the shot trigger.  The
    playback consumer needs op i in the FIFO at its timeline offset;
    headroom is the FIFO fill level (minus the op being consumed) at each
    such instant, and an underflow is any op that is late.
    """
    if parse_rate_ops_per_us <= 0:
        raise ValueError("parse_rate must be > 0")
    cost = Fraction(1000) / Fraction(parse_rate_ops_per_us)
    reports: dict[str, IssueRateReport] = {}
    for uid in sorted(ct.programs):
        ops = [ins for ins in ct.programs[uid].instructions if _has("dur", ins)]
        n = len(ops)
        starts: list[Fraction] = []
        t = Fraction(0)
        for ins in ops:
            starts.append(t)
            t += ins.dur
        F, B = fifo_capacity, buffer_capacity
        write: list[Fraction] = []
        parse_done: list[Fraction] = []
        for i in range(n):
            if i < F:
                write.append(Fraction(0))   # prefilled FIFO slot
                parse_done.append(Fraction(0))
                continue
            if B == 0:
                # no decode run-ahead: parsing op i waits for its FIFO slot
                c = max(parse_done[i - 1], starts[i - F]) + cost
                parse_done.append(c)
                write.append(c)
                continue
            if i < F + B:
                c = Fraction(0)             # prefilled op buffer
            else:
                c = max(parse_done[i - 1], write[i - B]) + cost
            parse_done.append(c)
            write.append(max(c, starts[i - F]))
        underflow_index = None
        min_headroom = F
        for i in range(n):
            if write[i] > starts[i] and underflow_index is None:
                underflow_index = i
            fill = 0
            j = i
            while j < n and write[j] <= starts[i]:
                fill += 1
                j += 1
            min_headroom = min(min_headroom, fill - 1)
        reports[uid] = IssueRateReport(uid, min_headroom, underflow_index)
    return reports
