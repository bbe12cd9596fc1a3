"""Command-line front end: compile circuits, validate assembly, run
simulations and drive the benchmark harnesses.

Exit codes: 0 success; 1 input/compile/admission error; 2 deadlock;
3 FIFO underflow in strict mode.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import engine, metrics
from .circuit import CircuitError, parse_circuit, validate_circuit
from .compiler import CompileError, compile_circuit
from .isa import ProgramError, UnitScope, format_program, parse_program
from .scenario import Scenario, ScenarioError, load_scenario
from .scheduler import SchedulerError, UnitConflict
from .topology import TopologyError, standard_config, build_hierarchy

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEADLOCK = 2
EXIT_UNDERFLOW = 3


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _load_topology(path: str | None):
    if path is None:
        return build_hierarchy(standard_config())
    from .scenario import tomli
    try:
        cfg = tomli.loads(Path(path).read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise TopologyError(str(exc)) from exc
    return build_hierarchy(cfg)


def _safe_name(unit_id: str) -> str:
    return unit_id.replace("/", "_")


def cmd_compile(args) -> int:
    try:
        h, qcns, _ = _load_topology(args.topology)
        circ = parse_circuit(Path(args.circuit).read_text())
        problems = validate_circuit(circ)
        if problems:
            return _fail(problems[0])
        from .circuit import GateTimeTable
        task = compile_circuit(circ, GateTimeTable(), h, qcns,
                               process_id=args.process_id, shots=args.shots,
                               shot_period_ns=args.shot_period)
    except (OSError, CircuitError, CompileError, TopologyError) as exc:
        return _fail(str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "controller.qasm").write_text(
        format_program(task.controller_program) + "\n")
    for uid in sorted(task.programs):
        (out / f"{_safe_name(uid)}.qasm").write_text(
            format_program(task.programs[uid]) + "\n")
    mask_lines = []
    for node in sorted(task.masks):
        for pid in sorted(task.masks[node]):
            bits = ",".join(sorted(task.masks[node][pid]))
            mask_lines.append(f"{node} pid={pid} -> {bits}")
    (out / "masks.txt").write_text("\n".join(mask_lines) + "\n")
    print(f"compiled {len(task.programs)} unit programs "
          f"+ controller into {out}")
    return EXIT_OK


_SCOPES = {
    "controller": UnitScope.CONTROLLER,
    "input": UnitScope.READOUT_INPUT,
    "output": UnitScope.DRIVE_OR_READOUT_OUTPUT,
}


def cmd_validate(args) -> int:
    scope = _SCOPES[args.scope]
    try:
        text = Path(args.program).read_text()
        parse_program(text, scope)
    except OSError as exc:
        return _fail(str(exc))
    except ProgramError as exc:
        for d in exc.diagnostics:
            print(d.render(args.program), file=sys.stderr)
        return EXIT_ERROR
    print("ok")
    return EXIT_OK


def _compile_scenario_tasks(sc: Scenario, h, qcns):
    tasks, submits = [], []
    for spec in sc.tasks:
        tasks.append(compile_circuit(spec.circuit, spec.times, h, qcns,
                                     process_id=spec.process_id,
                                     shots=spec.shots,
                                     shot_period_ns=spec.shot_period_ns))
        submits.append(spec.submit_ns)
    return tasks, submits


def cmd_simulate(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        seed = args.seed if args.seed is not None else sc.seed
        if seed is None:
            return _fail("simulate requires a seed (flag --seed or scenario)")
        h, qcns, _ = sc.build_topology()
        tasks, submits = _compile_scenario_tasks(sc, h, qcns)
        # admission pre-check: tasks submitted together must be disjoint
        for i in range(len(tasks)):
            for j in range(i + 1, len(tasks)):
                if submits[i] == submits[j] and \
                        tasks[i].unit_set & tasks[j].unit_set:
                    raise UnitConflict([tasks[i].process_id,
                                        tasks[j].process_id])
        tl = engine.run(tasks, h, sc.build_scheduler(), seed=seed,
                        submit_times=submits, readout=sc.readout,
                        detail=sc.detail, decision_cost_ns=sc.decision_cost_ns,
                        parse_rate=sc.parse_rate)
    except (ScenarioError, CircuitError, CompileError, TopologyError,
            SchedulerError, engine.EngineError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    out = Path(args.out_dir) if args.out_dir else (sc.out_dir or Path("."))
    out.mkdir(parents=True, exist_ok=True)
    tl.write(out / "timeline.txt")
    n_shots = sum(1 for e in tl.events if e.kind.value == "ShotEnd")
    print(f"{len(tl.events)} events, {n_shots} shots completed, "
          f"makespan {tl.last_time()} ns -> {out / 'timeline.txt'}")
    if tl.deadlocked:
        print("deadlock detected", file=sys.stderr)
        return EXIT_DEADLOCK
    if tl.underflowed and args.strict:
        print("FIFO underflow (strict mode)", file=sys.stderr)
        return EXIT_UNDERFLOW
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        seed = args.seed if args.seed is not None else (sc.seed or 0)
        h, qcns, _ = sc.build_topology()
        if not sc.sti_given:
            print("warning: no STI table in scenario, defaulting to zero",
                  file=sys.stderr)
        out = Path(args.out_dir) if args.out_dir else (sc.out_dir or Path("."))
        out.mkdir(parents=True, exist_ok=True)
        if args.kind == "qla":
            q = sc.qla_params
            points = metrics.run_qla_benchmark(
                h, qcns,
                usage_points=[int(n) for n in q.get("usage_points", [9, 14])],
                total_qubits=int(q.get("total_qubits", len(qcns))),
                shots=int(q.get("shots", 1024)),
                shot_period_ns=int(q.get("shot_period_ns", 100_000)),
                t_pre_ns=int(q.get("t_pre_ns", metrics.DEFAULT_T_PRE_NS)),
                t_post_ns=int(q.get("t_post_ns", metrics.DEFAULT_T_POST_NS)),
                max_processes=sc.max_processes, seed=seed)
            (out / "qla_sweep.csv").write_text(metrics.qla_sweep_csv(points))
            lo = points[0]
            print(f"lowest point n={lo.n_qubits}: load "
                  f"{float(lo.qla_serial):.4f} serial -> "
                  f"{float(lo.qla_parallel):.4f} parallel, "
                  f"speedup {float(lo.speedup):.2f}")
            print(f"wrote {out / 'qla_sweep.csv'}")
        else:
            c = sc.clops_params
            params = metrics.ClopsParams(
                m=int(c.get("m", 100)), k=int(c.get("k", 10)),
                s=int(c.get("s", 100)), d=int(c.get("d", 5)),
                update_latency_ns=int(c.get("update_latency_ns",
                                            metrics.DEFAULT_UPDATE_LATENCY_NS)),
                shot_period_ns=int(c.get("shot_period_ns", 100_000)))
            nprocs = [int(n) for n in c.get("nproc", [1, 2, 3, 4, 5])]
            reports = [metrics.run_clops_benchmark(
                h, qcns, params, n,
                qubits_per_region=int(c.get("qubits_per_region", 5)),
                seed=seed) for n in nprocs]
            (out / "clops.csv").write_text(metrics.clops_table_csv(reports))
            for r in reports:
                print(f"nproc={r.extra['nproc']}: total {r.clops:,.1f} "
                      f"per-process {r.extra['per_process_clops']:,.1f}")
            print(f"wrote {out / 'clops.csv'}")
    except (ScenarioError, CircuitError, CompileError, TopologyError,
            SchedulerError, engine.EngineError, ValueError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--strict", action="store_true")
    common.add_argument("--out-dir", default=None)

    ap = argparse.ArgumentParser(
        prog="qcasim",
        description="Deterministic simulator for a hierarchical "
                    "multi-process quantum control stack")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", parents=[common],
                       help="compile a circuit into per-unit assembly")
    p.add_argument("circuit")
    p.add_argument("--topology", default=None)
    p.add_argument("--process-id", type=int, default=0)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--shot-period", type=int, default=100_000)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("validate", parents=[common],
                       help="validate an assembly program")
    p.add_argument("program")
    p.add_argument("--scope", default="output",
                   choices=["controller", "input", "output"])
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", parents=[common],
                       help="run a scenario and export its event timeline")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", parents=[common], help="run a benchmark")
    p.add_argument("kind", choices=["qla", "clops"])
    p.add_argument("scenario")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "compile" and args.out_dir is None:
        args.out_dir = "compiled"
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
