"""Lowers layered circuits to per-execution-unit instruction programs with
explicit WAIT padding, plus the controller program, mask fragment and
feedback entry table that make up one executable task."""

from __future__ import annotations

from dataclasses import dataclass

from .circuit import (Circuit, ConditionalBlock, GateTimeTable, MeasureOp,
                      SingleQubitGate, TwoQubitGate, validate_circuit)
from .isa import (OPERAND_NAMES, Instruction, Opcode, Program, br, feedback,
                  gate, measure, trigger, wait)
from .topology import QCN, Hierarchy, compute_masks, mask_units

__all__ = [
    "FeedbackEntry", "CompiledTask", "CompileError", "UnmappedQubit",
    "ConditionWithoutMeasure", "ShotPeriodTooShort", "UnknownUnit",
    "compile_circuit", "timeline_of", "check_alignment",
    "DEFAULT_SHOT_PERIOD_NS",
]

DEFAULT_SHOT_PERIOD_NS = 100_000

# Sentinel waveform address patched at emission time.
_UNASSIGNED = -1


class CompileError(Exception):
    pass


class UnmappedQubit(CompileError):
    pass


class ConditionWithoutMeasure(CompileError):
    pass


class ShotPeriodTooShort(CompileError):
    pass


class UnknownUnit(CompileError):
    pass


@dataclass(frozen=True)
class FeedbackEntry:
    """One row of the controller's feedback entry table.

    ``decision`` maps the collected bit vector (bits ordered by sorted
    qubit id of ``input_mask``) to the register value delivered to every
    participating execution unit.
    """
    addr: int
    input_mask: frozenset[int]
    decision: dict[tuple[int, ...], int]

    def decide(self, bits: dict[int, int]) -> int:
        key = tuple(bits[q] for q in sorted(self.input_mask))
        return self.decision[key]

    def __hash__(self):
        return hash((self.addr, self.input_mask))


@dataclass
class CompiledTask:
    process_id: int
    qubit_set: frozenset[int]
    programs: dict[str, Program]          # unit id -> program
    controller_program: Program
    feedback_entries: tuple[FeedbackEntry, ...]
    masks: dict                           # mask table fragment
    unit_qubit: dict[str, int]            # readout-input unit -> qubit
    shot_count: int
    shot_period_ns: int
    waveform_table: dict[str, dict[int, int]]  # unit -> addr -> duration
    base_duration_ns: int                 # straight-line timeline length

    @property
    def unit_set(self) -> frozenset[str]:
        return mask_units(self.masks, self.process_id)


class _UnitEmitter:
    def __init__(self, unit_id: str):
        self.unit_id = unit_id
        self.instructions: list[Instruction] = []
        self.nonblocking: set[int] = set()
        self.next_addr = 0
        self.waveforms: dict[int, int] = {}

    def emit(self, ins: Instruction) -> None:
        if ins.opcode is Opcode.GATE and ins.get("addr") == _UNASSIGNED:
            addr = self.next_addr
            self.next_addr += 1
            self.waveforms[addr] = ins.dur
            ins = gate(addr, ins.dur, ins.trig)
        self.instructions.append(ins)

    def set_trig(self, index: int) -> None:
        ins = self.instructions[index]
        if "trig" not in OPERAND_NAMES[ins.opcode] or ins.trig:
            return
        ops = list(ins.operands)
        ops[-1] = 1  # trig is the last operand wherever it appears
        self.instructions[index] = Instruction(ins.opcode, tuple(ops))

    def finish(self) -> Program:
        return Program(tuple(self.instructions), self.unit_id,
                       nonblocking_brs=frozenset(self.nonblocking))


def _has_dur(ins: Instruction) -> bool:
    return "dur" in OPERAND_NAMES[ins.opcode]


def _contains_block(layers) -> bool:
    return any(isinstance(op, ConditionalBlock)
               for layer in layers for op in layer)


def compile_circuit(circuit: Circuit, times: GateTimeTable, h: Hierarchy,
                    qcns: dict[int, QCN], process_id: int,
                    shots: int = 1,
                    shot_period_ns: int = DEFAULT_SHOT_PERIOD_NS) -> CompiledTask:
    """Per-layer alignment: every layer lasts as long as its longest gate;
    idle or short channels pad with WAIT.  Measurements lower to a readout
    pulse (GATE on the readout output unit) plus MEASURE on the readout
    input unit.  Conditional blocks lower to a blocking BR on every unit
    and FEEDBACK + TRIGGER 0,0 on the controller."""
    problems = validate_circuit(circuit)
    if problems:
        if any("without a prior feedback measurement" in p for p in problems):
            raise ConditionWithoutMeasure("; ".join(problems))
        raise CompileError("; ".join(problems))
    for q in circuit.qubit_ids:
        if q not in qcns:
            raise UnmappedQubit(f"qubit {q} is not mapped to a control node")

    units = _participating_units(circuit, qcns)
    emitters = {uid: _UnitEmitter(uid) for uid in units}
    ctrl: list[Instruction] = [trigger(1, 1)]
    entries: list[FeedbackEntry] = []

    def plan_layer(layer) -> tuple[int, dict[str, list[Instruction]]]:
        """A layer's per-unit instruction sequences, padded to equal span."""
        dur = max(times.duration(op) for op in layer)
        per: dict[str, list[Instruction]] = {}
        for op in layer:
            d = times.duration(op)
            if isinstance(op, SingleQubitGate):
                per[qcns[op.qubit].xy_unit_id] = [gate(_UNASSIGNED, d)]
            elif isinstance(op, TwoQubitGate):
                qa, qb = sorted((op.q1, op.q2))
                a, b = qcns[qa], qcns[qb]
                targets = [a.xy_unit_id, b.xy_unit_id,
                           a.z_unit_ids[0], b.z_unit_ids[0]]
                if len(a.z_unit_ids) > 1:  # coupler line of the lower qubit
                    targets.append(a.z_unit_ids[1])
                for uid in targets:
                    per[uid] = [gate(_UNASSIGNED, d)]
            elif isinstance(op, MeasureOp):
                qcn = qcns[op.qubit]
                per[qcn.readout_output_unit_id] = [gate(_UNASSIGNED, d)]
                per[qcn.readout_input_unit_id] = [
                    measure(d, 0, 1 if op.fb else 0, 0)]
            else:
                raise CompileError(f"unexpected op {op!r}")
        for uid in units:
            seq = per.get(uid, [])
            spent = sum(i.dur for i in seq)
            if spent < dur:
                seq.append(wait(dur - spent))
            per[uid] = seq
        return dur, per

    def emit_conditional(block: ConditionalBlock) -> int:
        if _contains_block(block.then_layers) or _contains_block(block.else_layers):
            raise CompileError("nested conditional blocks are not supported")
        entry = FeedbackEntry(len(entries), frozenset({block.condition_qubit}),
                              {(0,): 0, (1,): 1})
        entries.append(entry)

        def arm_plan(layers) -> tuple[int, dict[str, list[Instruction]]]:
            total = 0
            per: dict[str, list[Instruction]] = {u: [] for u in units}
            for layer in layers:
                dur, lp = plan_layer(layer)
                for uid in units:
                    per[uid].extend(lp[uid])
                total += dur
            return total, per

        then_dur, then_per = arm_plan(block.then_layers)
        else_dur, else_per = arm_plan(block.else_layers)
        arm_dur = max(then_dur, else_dur)
        if arm_dur == 0:
            return 0  # both arms empty: nothing to branch over

        for uid, em in emitters.items():
            def emit_arm(per: dict[str, list[Instruction]], spent: int) -> None:
                start = len(em.instructions)
                for ins in per[uid]:
                    em.emit(ins)
                if spent < arm_dur:
                    em.emit(wait(arm_dur - spent))
                em.set_trig(start)  # resynchronize on the post-feedback trigger

            entry_br = len(em.instructions)
            em.emit(br(0, 1, 0))          # patched: jump to THEN when reg == 1
            emit_arm(else_per, else_dur)
            join_br = len(em.instructions)
            em.emit(br(0, 0, 0))          # patched: join jump, reg is 0 here
            em.nonblocking.add(join_br)
            then_start = len(em.instructions)
            emit_arm(then_per, then_dur)
            join = len(em.instructions)
            em.instructions[entry_br] = br(0, 1, then_start - entry_br)
            em.instructions[join_br] = br(0, 0, join - join_br)

        ctrl.append(feedback(entry.addr))
        ctrl.append(trigger(0, 0))
        ctrl.append(wait(arm_dur))
        return arm_dur

    total = 0
    pending_ctrl_wait = 0
    for layer in circuit.layers:
        if any(isinstance(op, ConditionalBlock) for op in layer):
            if pending_ctrl_wait:
                ctrl.append(wait(pending_ctrl_wait))
                pending_ctrl_wait = 0
            total += emit_conditional(layer[0])
            continue
        dur, per = plan_layer(layer)
        for uid, em in emitters.items():
            for ins in per[uid]:
                em.emit(ins)
        total += dur
        pending_ctrl_wait += dur
    if pending_ctrl_wait:
        ctrl.append(wait(pending_ctrl_wait))

    for em in emitters.values():
        if em.instructions:
            em.set_trig(0)  # shot-start synchronization point
        else:
            em.emit(wait(0, 1))

    if total > shot_period_ns:
        raise ShotPeriodTooShort(
            f"circuit spans {total} ns, shot period is {shot_period_ns} ns")

    qubit_set = frozenset(circuit.qubit_ids)
    masks = compute_masks(h, qcns, process_id, qubit_set) if qubit_set else {}
    unit_qubit = {qcns[q].readout_input_unit_id: q for q in circuit.qubit_ids}

    programs = {uid: em.finish() for uid, em in emitters.items()}
    waveforms = {uid: dict(em.waveforms) for uid, em in emitters.items()
                 if em.waveforms}
    return CompiledTask(
        process_id=process_id,
        qubit_set=qubit_set,
        programs=programs,
        controller_program=Program(tuple(ctrl), "controller"),
        feedback_entries=tuple(entries),
        masks=masks,
        unit_qubit=unit_qubit,
        shot_count=shots,
        shot_period_ns=shot_period_ns,
        waveform_table=waveforms,
        base_duration_ns=total,
    )


def _participating_units(circuit: Circuit, qcns: dict[int, QCN]) -> list[str]:
    xy = {qcns[q].xy_unit_id for q in circuit.qubit_ids}
    z: set[str] = set()
    ro: set[str] = set()

    def walk(layers):
        for layer in layers:
            for op in layer:
                if isinstance(op, TwoQubitGate):
                    qa, qb = sorted((op.q1, op.q2))
                    z.add(qcns[qa].z_unit_ids[0])
                    z.add(qcns[qb].z_unit_ids[0])
                    if len(qcns[qa].z_unit_ids) > 1:
                        z.add(qcns[qa].z_unit_ids[1])
                elif isinstance(op, MeasureOp):
                    ro.add(qcns[op.qubit].readout_output_unit_id)
                    ro.add(qcns[op.qubit].readout_input_unit_id)
                elif isinstance(op, ConditionalBlock):
                    walk(op.then_layers)
                    walk(op.else_layers)

    walk(circuit.layers)
    return sorted(xy | z | ro)


def timeline_of(ct: CompiledTask, unit_id: str) -> list[tuple[int, Instruction]]:
    """Straight-line (offset, instruction) pairs; BR counts as 0 ns."""
    if unit_id not in ct.programs:
        raise UnknownUnit(unit_id)
    out = []
    offset = 0
    for ins in ct.programs[unit_id].instructions:
        out.append((offset, ins))
        if _has_dur(ins):
            offset += ins.dur
    return out


def check_alignment(ct: CompiledTask) -> list[str]:
    """Verify the cross-unit alignment invariants; returns problems."""
    problems: list[str] = []
    ends: dict[str, int] = {}
    trigs: dict[str, tuple[int, ...]] = {}
    for uid in ct.programs:
        tl = timeline_of(ct, uid)
        end = 0
        for off, ins in tl:
            end = off + (ins.dur if _has_dur(ins) else 0)
        ends[uid] = end
        trigs[uid] = tuple(off for off, ins in tl if ins.trig == 1)
    if len(set(ends.values())) > 1:
        problems.append(f"unequal timeline lengths: {sorted(set(ends.values()))}")
    if len(set(trigs.values())) > 1:
        problems.append("trig flags not at identical offsets across units")
    return problems
