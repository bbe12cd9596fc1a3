"""Circuit lowering: layer alignment, readout pairs, conditionals."""

import pytest

from qcasim.circuit import GateTimeTable, parse_circuit
from qcasim.compiler import (CompileError, ShotPeriodTooShort,
                             check_alignment, compile_circuit, timeline_of)
from qcasim.isa import Opcode
from qcasim.topology import build_hierarchy, standard_config


@pytest.fixture(scope="module")
def chip():
    h, qcns, _ = build_hierarchy(standard_config(n_qccs=1))
    return h, qcns


TIMES = GateTimeTable()


def compile_text(chip, text, **kw):
    h, qcns = chip
    return compile_circuit(parse_circuit(text), TIMES, h, qcns,
                           process_id=kw.pop("process_id", 0), **kw)


def test_two_layer_hand_schedule(chip):
    """30 ns single-qubit layer then 40 ns two-qubit layer: all programs
    span exactly 70 ns and the second layer starts at 30 ns everywhere."""
    ct = compile_text(chip, "qubits 0 1\nlayer H 0 ; H 1\nlayer CZ 0 1\n")
    assert ct.base_duration_ns == 70
    for uid in ct.programs:
        tl = timeline_of(ct, uid)
        assert tl[0][1].trig == 1          # every unit waits for the shot
        end = max(off + (ins.dur if ins.opcode is not Opcode.BR else 0)
                  for off, ins in tl)
        assert end == 70
    # the XY drive of qubit 0 plays 30 ns gate then 40 ns gate, no padding
    xy = timeline_of(ct, chip[1][0].xy_unit_id)
    gates = [(off, ins.dur) for off, ins in xy if ins.opcode is Opcode.GATE]
    assert gates == [(0, 30), (30, 40)]


def test_alignment_checker_accepts_all_compiled(chip):
    ct = compile_text(chip, "qubits 0 1 2\nlayer H 0 ; X 1\nlayer CZ 1 2\n"
                            "layer M 0 ; M 1 ; M 2\n")
    assert check_alignment(ct) == []


def test_bell_emits_full_unit_complement(chip):
    ct = compile_text(chip, "qubits 0 1\nlayer H 0 ; H 1\nlayer CZ 0 1\n"
                            "layer M 0 ; M 1\n")
    # 2 XY + at least one Z/coupler + readout output/input pairs
    assert len(ct.programs) >= 5
    kinds = {uid.rsplit("/", 2)[1][:2] for uid in ct.programs}
    assert {"xy", "z0", "ro"} <= kinds | {"z0"}
    ins = ct.programs[chip[1][0].readout_input_unit_id].instructions
    assert any(i.opcode is Opcode.MEASURE for i in ins)
    out = ct.programs[chip[1][0].readout_output_unit_id].instructions
    assert any(i.opcode is Opcode.GATE for i in out)


def test_two_qubit_gate_claims_coupler(chip):
    h, qcns = chip
    ct = compile_text(chip, "qubits 0 1\nlayer CZ 0 1\n")
    coupler = qcns[0].z_unit_ids[1]
    assert any(i.opcode is Opcode.GATE
               for i in ct.programs[coupler].instructions)


def test_empty_circuit(chip):
    h, qcns = chip
    from qcasim.circuit import Circuit
    ct = compile_circuit(Circuit((), ()), TIMES, h, qcns, process_id=0)
    assert ct.programs == {}
    assert ct.base_duration_ns == 0


def test_conditional_lowering(chip):
    from qcasim.scenario import data_path
    ct = compile_text(chip, data_path("reset.qc").read_text())
    ctrl = [i.opcode for i in ct.controller_program.instructions]
    fb = ctrl.index(Opcode.FEEDBACK)
    assert ctrl[fb + 1] is Opcode.TRIGGER
    assert ct.controller_program.instructions[fb + 1].get("start") == 0
    assert len(ct.feedback_entries) == 1
    assert ct.feedback_entries[0].input_mask == frozenset({0})
    # every unit program branches, and the join BR is non-blocking
    for uid, prog in ct.programs.items():
        brs = [i for i, ins in enumerate(prog.instructions)
               if ins.opcode is Opcode.BR]
        assert brs, uid
        assert prog.nonblocking_brs
        assert all(i in brs for i in prog.nonblocking_brs)
    assert check_alignment(ct) == []


def test_nested_conditional_rejected(chip):
    text = ("qubits 0\nlayer M 0 fb\nif 0\nlayer M 0 fb\nif 0\nlayer X 0\n"
            "endif\nendif\n")
    with pytest.raises((CompileError, Exception)):
        compile_text(chip, text)


def test_shot_period_too_short(chip):
    with pytest.raises(ShotPeriodTooShort):
        compile_text(chip, "qubits 0\nlayer M 0\n", shot_period_ns=100)


def test_deterministic_output(chip):
    text = "qubits 0 1\nlayer H 0\nlayer CZ 0 1\nlayer M 0 ; M 1\n"
    a = compile_text(chip, text)
    b = compile_text(chip, text)
    assert a.programs == b.programs
    assert a.controller_program == b.controller_program
