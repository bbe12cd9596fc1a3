"""Scenario files: one TOML document describing a topology, a task list
and benchmark parameters, as the unit of reproducible runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .circuit import (Circuit, ConditionalBlock, GateTimeTable, MeasureOp,
                      SingleQubitGate, TwoQubitGate, parse_circuit,
                      validate_circuit)
from .readout import ReadoutModel
from .scheduler import Scheduler, StiTable
from .topology import build_hierarchy, standard_config

__all__ = ["Scenario", "TaskSpec", "ScenarioError", "load_scenario",
           "remap_circuit", "data_path"]


class ScenarioError(Exception):
    pass


def data_path(name: str) -> Path:
    """Path of a bundled data file (configs, circuits, scenarios)."""
    return Path(__file__).parent / "data" / name


@dataclass
class TaskSpec:
    circuit_path: Path
    circuit: Circuit
    times: GateTimeTable
    process_id: int
    shots: int
    shot_period_ns: int
    submit_ns: int = 0


@dataclass
class Scenario:
    path: Path
    topology_config: dict
    tasks: list[TaskSpec] = field(default_factory=list)
    seed: int | None = None
    out_dir: Path | None = None
    max_processes: int = 5
    sti: StiTable = field(default_factory=StiTable)
    sti_given: bool = True
    readout: ReadoutModel = field(default_factory=ReadoutModel)
    decision_cost_ns: int = 100
    detail: str = "full"
    parse_rate: float | None = None
    qla_params: dict = field(default_factory=dict)
    clops_params: dict = field(default_factory=dict)

    def build_topology(self):
        return build_hierarchy(self.topology_config)

    def build_scheduler(self) -> Scheduler:
        return Scheduler(sti=self.sti, max_processes=self.max_processes)


def remap_circuit(c: Circuit, mapping: dict[int, int]) -> Circuit:
    """Rewrite circuit qubit ids onto physical qubit ids."""

    def remap_op(op):
        if isinstance(op, SingleQubitGate):
            return SingleQubitGate(mapping[op.qubit], op.name)
        if isinstance(op, TwoQubitGate):
            return TwoQubitGate(mapping[op.q1], mapping[op.q2], op.name)
        if isinstance(op, MeasureOp):
            return MeasureOp(mapping[op.qubit], op.fb)
        if isinstance(op, ConditionalBlock):
            return ConditionalBlock(
                mapping[op.condition_qubit],
                tuple(tuple(remap_op(o) for o in layer)
                      for layer in op.then_layers),
                tuple(tuple(remap_op(o) for o in layer)
                      for layer in op.else_layers))
        raise TypeError(f"cannot remap {op!r}")

    return Circuit(
        tuple(sorted(mapping[q] for q in c.qubit_ids)),
        tuple(tuple(remap_op(op) for op in layer) for layer in c.layers))


def _gate_times(table: dict) -> GateTimeTable:
    times = GateTimeTable()
    times.single_qubit_ns = int(table.get("single_qubit_ns", times.single_qubit_ns))
    times.two_qubit_ns = int(table.get("two_qubit_ns", times.two_qubit_ns))
    times.measure_ns = int(table.get("measure_ns", times.measure_ns))
    times.grid_ns = int(table.get("grid_ns", times.grid_ns))
    times.overrides = {k: int(v) for k, v in table.get("overrides", {}).items()}
    return times


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    base = path.parent

    topo = dict(doc.get("topology", {}))
    if "config" in topo:
        ref = topo.pop("config")
        cfg_path = base / ref
        if not cfg_path.exists():
            cfg_path = data_path(ref)
        try:
            file_cfg = tomli.loads(cfg_path.read_text())
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ScenarioError(f"topology config {ref}: {exc}") from exc
        file_cfg.update(topo)
        topo = file_cfg
    if not topo:
        topo = standard_config()

    sched = doc.get("scheduler", {})
    sti_given = "sti_default_ns" in sched or "sti_pairs" in sched
    sti = StiTable(default_ns=int(sched.get("sti_default_ns", 0)))
    for entry in sched.get("sti_pairs", []):
        a, b, ns = entry
        sti.set_pair(int(a), int(b), int(ns))

    ro_cfg = doc.get("readout", {})
    if "p_one" in ro_cfg:
        readout = ReadoutModel.biased(float(ro_cfg["p_one"]),
                                      [int(q) for q in ro_cfg.get("qubits", [])])
    else:
        readout = ReadoutModel()

    times_default = _gate_times(doc.get("gate_times", {}))

    tasks = []
    for i, spec in enumerate(doc.get("tasks", [])):
        if "circuit" not in spec:
            raise ScenarioError(f"task {i}: missing circuit path")
        cpath = base / spec["circuit"]
        if not cpath.exists():
            cpath = data_path(spec["circuit"])
        if not cpath.exists():
            raise ScenarioError(f"task {i}: circuit file {spec['circuit']} not found")
        circ = parse_circuit(cpath.read_text())
        problems = validate_circuit(circ)
        if problems:
            raise ScenarioError(f"task {i}: {problems[0]}")
        if "qubit_map" in spec:
            phys = [int(q) for q in spec["qubit_map"]]
            if len(phys) != len(circ.qubit_ids):
                raise ScenarioError(
                    f"task {i}: qubit_map has {len(phys)} entries for "
                    f"{len(circ.qubit_ids)} circuit qubits")
            circ = remap_circuit(circ, dict(zip(sorted(circ.qubit_ids), phys)))
        times = (_gate_times(spec["gate_times"]) if "gate_times" in spec
                 else times_default)
        tasks.append(TaskSpec(
            circuit_path=cpath, circuit=circ, times=times,
            process_id=int(spec.get("process_id", i)),
            shots=int(spec.get("shots", 1)),
            shot_period_ns=int(spec.get("shot_period_ns", 100_000)),
            submit_ns=int(spec.get("submit_ns", 0))))

    sim = doc.get("simulate", {})
    return Scenario(
        path=path,
        topology_config=topo,
        tasks=tasks,
        seed=int(doc["seed"]) if "seed" in doc else None,
        out_dir=(base / doc["out_dir"]) if "out_dir" in doc else None,
        max_processes=int(sched.get("max_processes", 5)),
        sti=sti,
        sti_given=sti_given,
        readout=readout,
        decision_cost_ns=int(sim.get("decision_cost_ns", 100)),
        detail=str(sim.get("detail", "full")),
        parse_rate=(float(sim["parse_rate_ops_per_us"])
                    if "parse_rate_ops_per_us" in sim else None),
        qla_params=doc.get("bench", {}).get("qla", {}),
        clops_params=doc.get("bench", {}).get("clops", {}))
