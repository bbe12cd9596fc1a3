"""Layered quantum circuits: in-memory form, validation and the textual
input format consumed by the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "SingleQubitGate", "TwoQubitGate", "MeasureOp", "ConditionalBlock",
    "Circuit", "GateTimeTable", "CircuitError", "parse_circuit",
    "validate_circuit", "random_circuit",
]


@dataclass(frozen=True)
class SingleQubitGate:
    qubit: int
    name: str


@dataclass(frozen=True)
class TwoQubitGate:
    q1: int
    q2: int
    name: str


@dataclass(frozen=True)
class MeasureOp:
    qubit: int
    fb: bool = False


@dataclass(frozen=True)
class ConditionalBlock:
    """Branch on the most recent feedback measurement of one qubit."""
    condition_qubit: int
    then_layers: tuple[tuple, ...]
    else_layers: tuple[tuple, ...] = ()


Layer = tuple  # tuple of gate ops; a ConditionalBlock occupies a layer alone


@dataclass(frozen=True)
class Circuit:
    qubit_ids: tuple[int, ...]
    layers: tuple[Layer, ...]


@dataclass
class GateTimeTable:
    """Gate name -> duration in ns."""
    single_qubit_ns: int = 30
    two_qubit_ns: int = 40
    measure_ns: int = 1000
    grid_ns: int = 1
    overrides: dict[str, int] = field(default_factory=dict)

    def duration(self, op) -> int:
        if isinstance(op, MeasureOp):
            d = self.overrides.get("measure", self.measure_ns)
        elif isinstance(op, SingleQubitGate):
            d = self.overrides.get(op.name, self.single_qubit_ns)
        elif isinstance(op, TwoQubitGate):
            d = self.overrides.get(op.name, self.two_qubit_ns)
        else:
            raise TypeError(f"no duration for {op!r}")
        if d <= 0 or d % self.grid_ns:
            raise CircuitError(
                f"duration {d} not a positive multiple of {self.grid_ns} ns grid")
        return d


class CircuitError(Exception):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _op_qubits(op) -> tuple[int, ...]:
    if isinstance(op, SingleQubitGate):
        return (op.qubit,)
    if isinstance(op, TwoQubitGate):
        return (op.q1, op.q2)
    if isinstance(op, MeasureOp):
        return (op.qubit,)
    if isinstance(op, ConditionalBlock):
        qs: set[int] = {op.condition_qubit}
        for layers in (op.then_layers, op.else_layers):
            for layer in layers:
                for sub in layer:
                    qs.update(_op_qubits(sub))
        return tuple(sorted(qs))
    raise TypeError(f"unknown op {op!r}")


def validate_circuit(c: Circuit) -> list[str]:
    problems: list[str] = []
    known = set(c.qubit_ids)
    fb_measured: set[int] = set()

    def walk(layers, depth=0):
        for li, layer in enumerate(layers):
            used: set[int] = set()
            for op in layer:
                for q in _op_qubits(op):
                    if q not in known:
                        problems.append(f"layer {li}: unknown qubit {q}")
                if isinstance(op, ConditionalBlock):
                    if len(layer) != 1:
                        problems.append(f"layer {li}: conditional block must be alone")
                    if op.condition_qubit not in fb_measured:
                        problems.append(
                            f"layer {li}: condition on qubit {op.condition_qubit} "
                            "without a prior feedback measurement")
                    walk(op.then_layers, depth + 1)
                    walk(op.else_layers, depth + 1)
                    continue
                direct = _op_qubits(op)
                if used & set(direct):
                    problems.append(f"layer {li}: qubit used twice")
                used.update(direct)
                if isinstance(op, MeasureOp) and op.fb:
                    fb_measured.add(op.qubit)

    walk(c.layers)
    return problems


def _parse_gate(tokens: list[str], lineno: int):
    name = tokens[0]
    args = tokens[1:]
    if name.upper() in ("M", "MEASURE"):
        fb = False
        if args and args[-1] == "fb":
            fb = True
            args = args[:-1]
        if len(args) != 1:
            raise CircuitError("measure takes one qubit", lineno)
        return MeasureOp(int(args[0]), fb)
    if len(args) == 1:
        return SingleQubitGate(int(args[0]), name)
    if len(args) == 2:
        return TwoQubitGate(int(args[0]), int(args[1]), name)
    raise CircuitError(f"gate '{name}' takes 1 or 2 qubits", lineno)


def parse_circuit(text: str) -> Circuit:
    """Parse the line-based circuit format.

    Grammar (one statement per line, '#' comments):
        qubits 0 1 2 ...
        layer GATE q [q2] ; GATE q ...        (M q [fb] for measurement)
        if QUBIT / else / endif               (conditional block)
    """
    qubits: list[int] = []
    stack: list[list[Layer]] = [[]]
    cond_stack: list[tuple[int, list[Layer] | None]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        kw = tokens[0].lower()
        if kw == "qubits":
            if qubits:
                raise CircuitError("duplicate qubits line", lineno)
            try:
                qubits = [int(t) for t in tokens[1:]]
            except ValueError as exc:
                raise CircuitError(str(exc), lineno)
        elif kw == "layer":
            gates = []
            for part in " ".join(tokens[1:]).split(";"):
                toks = part.split()
                if toks:
                    gates.append(_parse_gate(toks, lineno))
            if not gates:
                raise CircuitError("empty layer", lineno)
            stack[-1].append(tuple(gates))
        elif kw == "if":
            if len(tokens) != 2:
                raise CircuitError("if takes one qubit", lineno)
            cond_stack.append((int(tokens[1]), None))
            stack.append([])
        elif kw == "else":
            if not cond_stack or cond_stack[-1][1] is not None:
                raise CircuitError("else without if", lineno)
            q, _ = cond_stack.pop()
            then_layers = stack.pop()
            cond_stack.append((q, then_layers))
            stack.append([])
        elif kw == "endif":
            if not cond_stack:
                raise CircuitError("endif without if", lineno)
            q, then_layers = cond_stack.pop()
            last = stack.pop()
            if then_layers is None:
                then_layers, else_layers = last, []
            else:
                else_layers = last
            block = ConditionalBlock(q, tuple(then_layers), tuple(else_layers))
            stack[-1].append((block,))
        else:
            raise CircuitError(f"unknown statement '{tokens[0]}'", lineno)

    if cond_stack:
        raise CircuitError("unterminated if block")
    circuit = Circuit(tuple(qubits), tuple(stack[0]))
    problems = validate_circuit(circuit)
    if problems:
        raise CircuitError("; ".join(problems))
    return circuit


def random_circuit(rng, qubits: list[int], n_layers: int,
                   measure_last: bool = True) -> Circuit:
    """Feedback-free random layered circuit for property testing."""
    layers: list[Layer] = []
    for _ in range(n_layers):
        free = list(qubits)
        rng.shuffle(free)
        gates = []
        while free:
            if len(free) >= 2 and rng.random() < 0.35:
                q1, q2 = free.pop(), free.pop()
                gates.append(TwoQubitGate(q1, q2, "CZ"))
            elif rng.random() < 0.8:
                gates.append(SingleQubitGate(free.pop(), "X"))
            else:
                free.pop()  # idle qubit this layer
        if gates:
            layers.append(tuple(gates))
    if measure_last:
        layers.append(tuple(MeasureOp(q) for q in qubits))
    return Circuit(tuple(qubits), tuple(layers))
