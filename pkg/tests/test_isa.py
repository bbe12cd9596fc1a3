"""Instruction set: legality matrix, parsing, formatting, validation."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcasim.isa import (LEGAL_SCOPES, OPERAND_NAMES, Opcode, Program,
                        ProgramError, UnitScope, br, feedback, format_program,
                        gate, measure, parse_program, trigger,
                        validate_program, wait)

C = UnitScope.CONTROLLER
I = UnitScope.READOUT_INPUT
O = UnitScope.DRIVE_OR_READOUT_OUTPUT

# Opcode -> the exact set of scopes allowed to execute it.
EXPECTED_LEGALITY = {
    Opcode.GATE: {O},
    Opcode.WAIT: {C, I, O},
    Opcode.MEASURE: {I},
    Opcode.TRIGGER: {C},
    Opcode.FEEDBACK: {C},
    Opcode.BR: {C, I, O},
}


@pytest.mark.parametrize("opcode", list(Opcode))
@pytest.mark.parametrize("scope", list(UnitScope))
def test_legality_matrix(opcode, scope):
    expected = scope in EXPECTED_LEGALITY[opcode]
    assert (scope in LEGAL_SCOPES[opcode]) is expected


def test_operand_shapes():
    assert OPERAND_NAMES[Opcode.GATE] == ("addr", "dur", "trig")
    assert OPERAND_NAMES[Opcode.MEASURE] == ("dur", "dtype", "fb", "trig")
    assert OPERAND_NAMES[Opcode.BR] == ("rs", "imm", "offset")
    with pytest.raises(ValueError):
        gate(1, 2).get("start")


def test_parse_basic_program():
    p = parse_program("GATE 0, 30, 1\nWAIT 10, 0\nGATE 1, 40, 0\n", O)
    assert [i.opcode for i in p.instructions] == [Opcode.GATE, Opcode.WAIT,
                                                  Opcode.GATE]
    assert p.instructions[0].trig == 1
    assert p.instructions[2].get("addr") == 1


def test_parse_labels_and_comments():
    text = """
    # reset fragment
    BR 0, 1, THEN
    GATE 0, 30, 1      # else arm
    .nowait
    BR 0, 0, JOIN
    THEN:
    GATE 1, 30, 1
    JOIN:
    """
    p = parse_program(text, O)
    assert p.instructions[0].get("offset") == 3
    assert p.instructions[2].get("offset") == 2
    assert p.nonblocking_brs == frozenset({2})


def test_parse_hex_operands():
    p = parse_program("GATE 0x10, 0x1e, 0", O)
    assert p.instructions[0].get("addr") == 16
    assert p.instructions[0].dur == 30


def test_parse_collects_all_diagnostics():
    with pytest.raises(ProgramError) as exc:
        parse_program("FROB 1\nGATE 1\nBR 0, 0, NOWHERE\n", O)
    codes = [d.code for d in exc.value.diagnostics]
    assert len(codes) == 3


def test_scope_violation_diagnosed():
    with pytest.raises(ProgramError):
        parse_program("MEASURE 1000, 0, 1, 1", O)
    with pytest.raises(ProgramError):
        parse_program("GATE 0, 30, 0", C)
    # and the same check post-hoc on a built program
    p = Program(instructions=(measure(1000),))
    assert any(d.code == "ScopeViolation" for d in validate_program(p, O))


def test_validate_branch_targets():
    ok = Program(instructions=(br(0, 1, 2), wait(10), gate(0, 30)))
    assert validate_program(ok, O) == []
    # offset to exactly one past the end = fall-through exit, legal
    end = Program(instructions=(wait(10), br(0, 0, 1)))
    assert validate_program(end, O) == []
    wild = Program(instructions=(br(0, 1, 5), wait(10)))
    assert any(d.code == "BranchOutOfBounds"
               for d in validate_program(wild, O))


def test_format_round_trip_corpus():
    corpus = []
    for n in range(50):
        ins = [gate(0, 30, 1), wait(10 + n)]
        if n % 2:
            ins.append(gate(n, 40))
        if n % 3 == 0:
            ins.append(br(0, 1, 1))
        corpus.append(Program(instructions=tuple(ins)))
    for p in corpus:
        assert parse_program(format_program(p), O) == p


_scoped_instruction = st.one_of(
    st.builds(gate, st.integers(0, 255), st.integers(1, 10_000),
              st.integers(0, 1)),
    st.builds(wait, st.integers(1, 10_000), st.integers(0, 1)),
    st.builds(br, st.integers(0, 3), st.integers(0, 1), st.just(1)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_scoped_instruction, min_size=1, max_size=12))
def test_round_trip_property(instructions):
    p = Program(instructions=tuple(instructions))
    assert parse_program(format_program(p), O) == p


def test_controller_round_trip():
    p = Program(instructions=(trigger(1, 1), wait(500), feedback(0),
                              trigger(0, 0), wait(30)))
    assert parse_program(format_program(p), C) == p
