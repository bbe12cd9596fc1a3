"""Instruction set of the simulated control stack: six opcodes, a textual
assembly format, a two-pass parser/assembler and per-unit-scope legality
checking."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "Opcode", "UnitScope", "Instruction", "Program", "Diagnostic",
    "ProgramError", "parse_program", "validate_program", "format_program",
    "OPERAND_NAMES", "LEGAL_SCOPES",
    "gate", "wait", "measure", "trigger", "feedback", "br",
]


class Opcode(Enum):
    GATE = "GATE"
    WAIT = "WAIT"
    MEASURE = "MEASURE"
    TRIGGER = "TRIGGER"
    FEEDBACK = "FEEDBACK"
    BR = "BR"


class UnitScope(Enum):
    """Where a program runs: a controller (C), a qubit readout input unit
    (I), or an XY/Z drive or readout output unit (O)."""

    CONTROLLER = "C"
    READOUT_INPUT = "I"
    DRIVE_OR_READOUT_OUTPUT = "O"


OPERAND_NAMES: dict[Opcode, tuple[str, ...]] = {
    Opcode.GATE: ("addr", "dur", "trig"),
    Opcode.WAIT: ("dur", "trig"),
    Opcode.MEASURE: ("dur", "dtype", "fb", "trig"),
    Opcode.TRIGGER: ("start", "trig"),
    Opcode.FEEDBACK: ("addr",),
    Opcode.BR: ("rs", "imm", "offset"),
}

# Legality map straight from the instruction table.
LEGAL_SCOPES: dict[Opcode, frozenset[UnitScope]] = {
    Opcode.GATE: frozenset({UnitScope.DRIVE_OR_READOUT_OUTPUT}),
    Opcode.WAIT: frozenset(UnitScope),
    Opcode.MEASURE: frozenset({UnitScope.READOUT_INPUT}),
    Opcode.TRIGGER: frozenset({UnitScope.CONTROLLER}),
    Opcode.FEEDBACK: frozenset({UnitScope.CONTROLLER}),
    Opcode.BR: frozenset(UnitScope),
}

# Flag-like operands and their allowed ranges; other operands are
# unbounded non-negative (offset may be negative).
_SMALL_RANGES = {"trig": (0, 1), "fb": (0, 1), "start": (0, 1), "dtype": (0, 2)}


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    operands: tuple[int, ...]

    def __post_init__(self):
        names = OPERAND_NAMES[self.opcode]
        if len(self.operands) != len(names):
            raise ValueError(
                f"{self.opcode.value} takes {len(names)} operands, "
                f"got {len(self.operands)}")

    def get(self, name: str) -> int:
        return self.operands[OPERAND_NAMES[self.opcode].index(name)]

    @property
    def dur(self) -> int:
        return self.get("dur")

    @property
    def trig(self) -> int:
        """Trigger flag; 0 for opcodes that do not carry one."""
        return self.get("trig") if "trig" in OPERAND_NAMES[self.opcode] else 0

    def __str__(self) -> str:
        if not self.operands:
            return self.opcode.value
        return f"{self.opcode.value} " + ", ".join(str(v) for v in self.operands)


def gate(addr: int, dur: int, trig: int = 0) -> Instruction:
    return Instruction(Opcode.GATE, (addr, dur, trig))


def wait(dur: int, trig: int = 0) -> Instruction:
    return Instruction(Opcode.WAIT, (dur, trig))


def measure(dur: int, dtype: int = 0, fb: int = 0, trig: int = 0) -> Instruction:
    return Instruction(Opcode.MEASURE, (dur, dtype, fb, trig))


def trigger(start: int, trig: int = 0) -> Instruction:
    return Instruction(Opcode.TRIGGER, (start, trig))


def feedback(addr: int) -> Instruction:
    return Instruction(Opcode.FEEDBACK, (addr,))


def br(rs: int, imm: int, offset: int) -> Instruction:
    return Instruction(Opcode.BR, (rs, imm, offset))


@dataclass
class Program:
    """An ordered instruction list targeting one execution unit.

    ``labels`` exist only at assembly time and do not take part in
    structural equality.  ``nonblocking_brs`` marks BR instructions that
    re-use the register value already delivered by the most recent
    feedback interrupt instead of raising a new one (compiler-emitted
    join jumps; see the ``.nowait`` directive).
    """

    instructions: tuple[Instruction, ...] = ()
    unit_id: str = ""
    labels: dict[str, int] = field(default_factory=dict)
    nonblocking_brs: frozenset[int] = frozenset()

    def __len__(self) -> int:
        return len(self.instructions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return (self.instructions == other.instructions
                and self.nonblocking_brs == other.nonblocking_brs)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 0
    col: int = 0
    index: int | None = None  # instruction index, when known

    def render(self, file: str = "<program>") -> str:
        return f"{file}:{self.line}:{self.col}: {self.code}: {self.message}"


class ProgramError(Exception):
    """Raised by the parser; carries every diagnostic found."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.render() for d in diagnostics))


_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*):$")
_INT_RE = re.compile(r"^-?(0[xX][0-9a-fA-F]+|\d+)$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_program(text: str, scope: UnitScope, unit_id: str = "") -> Program:
    """Two-pass assembly: pass 1 collects labels, pass 2 resolves operands.

    Raises ProgramError with every diagnostic found (deterministic order,
    line/column included).
    """
    diags: list[Diagnostic] = []
    # Pass 1: tokenize lines, collect labels against instruction indices.
    lines: list[tuple[int, str]] = []  # (lineno, body) for instruction lines
    labels: dict[str, int] = {}
    nowait_lines: set[int] = set()
    index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw).strip()
        if not body:
            continue
        m = _LABEL_RE.match(body)
        if m:
            name = m.group(1)
            if name in labels:
                diags.append(Diagnostic("DuplicateLabel", f"label '{name}' redefined",
                                        lineno, raw.index(name) + 1))
            labels[name] = index
            continue
        if body == ".nowait":
            nowait_lines.add(index)
            continue
        lines.append((lineno, body))
        index += 1

    n_instructions = len(lines)
    instructions: list[Instruction] = []
    nonblocking: set[int] = set()

    for idx, (lineno, body) in enumerate(lines):
        parts = body.split(None, 1)
        mnemonic = parts[0]
        col = 1
        try:
            opcode = Opcode(mnemonic.upper())
        except ValueError:
            diags.append(Diagnostic("UnknownOpcode", f"unknown opcode '{mnemonic}'",
                                    lineno, col, idx))
            instructions.append(wait(0))  # placeholder keeps indices aligned
            continue
        if opcode not in {op for op, scopes in LEGAL_SCOPES.items() if scope in scopes}:
            diags.append(Diagnostic(
                "ScopeViolation",
                f"{opcode.value} is illegal in scope {scope.value}",
                lineno, col, idx))
        names = OPERAND_NAMES[opcode]
        raw_ops = [t.strip() for t in parts[1].split(",")] if len(parts) > 1 else []
        if raw_ops == [""]:
            raw_ops = []
        if len(raw_ops) != len(names):
            diags.append(Diagnostic(
                "ArityMismatch",
                f"{opcode.value} takes {len(names)} operands, got {len(raw_ops)}",
                lineno, len(mnemonic) + 2, idx))
            instructions.append(wait(0))
            continue
        values: list[int] = []
        bad = False
        for name, tok in zip(names, raw_ops):
            colpos = body.index(tok) + 1
            if _INT_RE.match(tok):
                value = int(tok, 0)
            elif opcode is Opcode.BR and name == "offset" and _NAME_RE.match(tok):
                if tok not in labels:
                    diags.append(Diagnostic("UndefinedLabel",
                                            f"undefined label '{tok}'",
                                            lineno, colpos, idx))
                    bad = True
                    break
                value = labels[tok] - idx
            else:
                diags.append(Diagnostic("OperandOutOfRange",
                                        f"bad operand '{tok}' for {name}",
                                        lineno, colpos, idx))
                bad = True
                break
            lo_hi = _SMALL_RANGES.get(name)
            if lo_hi and not lo_hi[0] <= value <= lo_hi[1]:
                diags.append(Diagnostic(
                    "OperandOutOfRange",
                    f"{name}={value} outside [{lo_hi[0]}, {lo_hi[1]}]",
                    lineno, colpos, idx))
                bad = True
                break
            if name not in ("offset",) and value < 0:
                diags.append(Diagnostic("OperandOutOfRange",
                                        f"{name} must be non-negative",
                                        lineno, colpos, idx))
                bad = True
                break
            values.append(value)
        if bad:
            instructions.append(wait(0))
            continue
        ins = Instruction(opcode, tuple(values))
        if opcode is Opcode.BR:
            target = idx + ins.get("offset")
            if not 0 <= target <= n_instructions:
                diags.append(Diagnostic(
                    "OperandOutOfRange",
                    f"BR target {target} outside program of {n_instructions}",
                    lineno, 1, idx))
            if idx in nowait_lines:
                nonblocking.add(idx)
        instructions.append(ins)

    # Labels pointing past the end are allowed (join point after the last
    # instruction) but must not exceed it.
    for name, pos in labels.items():
        if pos > n_instructions:
            diags.append(Diagnostic("UndefinedLabel",
                                    f"label '{name}' beyond program end", 0, 0))

    if diags:
        raise ProgramError(diags)
    return Program(tuple(instructions), unit_id, labels, frozenset(nonblocking))


def validate_program(program: Program, scope: UnitScope, *,
                     addr_width_bits: int = 16,
                     register_count: int = 64) -> list[Diagnostic]:
    """Check every invariant; returns diagnostics (empty iff valid)."""
    diags: list[Diagnostic] = []
    n = len(program.instructions)
    addr_limit = 1 << addr_width_bits
    for i, ins in enumerate(program.instructions):
        op = ins.opcode
        if scope not in LEGAL_SCOPES[op]:
            diags.append(Diagnostic("ScopeViolation",
                                    f"{op.value} illegal in scope {scope.value}",
                                    index=i))
        for name, value in zip(OPERAND_NAMES[op], ins.operands):
            lo_hi = _SMALL_RANGES.get(name)
            if lo_hi and not lo_hi[0] <= value <= lo_hi[1]:
                diags.append(Diagnostic("OperandOutOfRange",
                                        f"{name}={value}", index=i))
            elif name == "addr" and not 0 <= value < addr_limit:
                diags.append(Diagnostic("OperandOutOfRange",
                                        f"addr={value} exceeds {addr_width_bits}-bit range",
                                        index=i))
            elif name == "rs" and not 0 <= value < register_count:
                diags.append(Diagnostic("OperandOutOfRange",
                                        f"rs={value} exceeds register file", index=i))
            elif name == "dur":
                if op in (Opcode.GATE, Opcode.MEASURE) and value <= 0:
                    diags.append(Diagnostic("OperandOutOfRange",
                                            f"{op.value} dur must be > 0", index=i))
                elif value < 0:
                    diags.append(Diagnostic("OperandOutOfRange",
                                            "dur must be >= 0", index=i))
        if op is Opcode.BR:
            target = i + ins.get("offset")
            if not 0 <= target <= n:
                diags.append(Diagnostic("BranchOutOfBounds",
                                        f"BR target {target} outside [0, {n}]",
                                        index=i))
    return diags


def format_program(program: Program) -> str:
    """Render assembly text such that parse_program round-trips."""
    # Synthetic labels for BR targets.
    targets: dict[int, str] = {}
    for i, ins in enumerate(program.instructions):
        if ins.opcode is Opcode.BR:
            t = i + ins.get("offset")
            if t not in targets:
                targets[t] = f"L{len(targets)}"
    out: list[str] = []
    for i, ins in enumerate(program.instructions):
        if i in targets:
            out.append(f"{targets[i]}:")
        if ins.opcode is Opcode.BR:
            if i in program.nonblocking_brs:
                out.append(".nowait")
            t = i + ins.get("offset")
            ops = list(ins.operands[:-1]) + [targets[t]]
            out.append(f"BR {ops[0]}, {ops[1]}, {ops[2]}")
        else:
            out.append(str(ins))
    if len(program.instructions) in targets:
        out.append(f"{targets[len(program.instructions)]}:")
    return "".join(line + "\n" for line in out)
