"""Utilization and throughput metrics (load average, speedup, layer
operations per second) plus the two benchmark harnesses that drive the
simulator to produce them."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

from . import engine
from .circuit import Circuit, GateTimeTable, MeasureOp, SingleQubitGate
from .compiler import compile_circuit
from .events import EventKind
from .scheduler import Scheduler
from .topology import Hierarchy, QCN

__all__ = [
    "NS_PER_S", "DEFAULT_T_PRE_NS", "DEFAULT_T_POST_NS",
    "TaskTiming", "ClopsParams", "MetricsReport", "QlaPoint",
    "ZeroWindow", "ZeroTime",
    "qla", "speedup", "speedup_efficiency", "clops", "efficiency_factor",
    "run_qla_benchmark", "run_clops_benchmark",
    "qla_sweep_csv", "clops_table_csv",
]

NS_PER_S = 1_000_000_000
DEFAULT_T_PRE_NS = 2_000_000   # classical compile/upload per task
DEFAULT_T_POST_NS = 1_000_000  # result readback/post-processing per task
DEFAULT_UPDATE_LATENCY_NS = 2_000_000
DEFAULT_SHOT_PERIOD_NS = 100_000


class ZeroWindow(ValueError):
    pass


class ZeroTime(ValueError):
    pass


@dataclass
class TaskTiming:
    """Stage decomposition of one task's wall time, all in ns."""
    n_qubits: int
    t_pre_ns: int = 0
    t_qcs_ns: int = 0
    t_qpu_ns: int = 0
    t_post_ns: int = 0
    t_send_ns: int = 0
    t_recv_ns: int = 0
    t_total_ns: int = 0

    def sequential_total_ns(self) -> int:
        return (self.t_pre_ns + self.t_qcs_ns + self.t_post_ns
                + self.t_send_ns + self.t_recv_ns)


@dataclass
class ClopsParams:
    """Variational-loop benchmark knobs: M circuit templates, K parameter
    updates each, S shots per update, D layers per circuit."""
    m: int = 100
    k: int = 10
    s: int = 100
    d: int = 5
    update_latency_ns: int = DEFAULT_UPDATE_LATENCY_NS
    shot_period_ns: int = DEFAULT_SHOT_PERIOD_NS

    def __post_init__(self):
        if min(self.m, self.k, self.s, self.d) < 1:
            raise ValueError("M, K, S, D must all be >= 1")


@dataclass
class MetricsReport:
    scenario: str
    qla: Fraction | None = None
    speedup: float | None = None
    speedup_efficiency: float | None = None
    clops: float | None = None
    efficiency_factor: float | None = None
    timings: list[TaskTiming] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def qla(timings, total_qubits: int, t_total_ns: int) -> Fraction:
    """Load average: occupied qubit-time over available qubit-time."""
    if t_total_ns <= 0:
        raise ZeroWindow("t_total must be > 0")
    if timings and total_qubits < max(t.n_qubits for t in timings):
        raise ValueError("total_qubits smaller than a task's qubit count")
    num = sum(Fraction(t.t_qpu_ns) * t.n_qubits for t in timings)
    return Fraction(num, Fraction(t_total_ns) * total_qubits) if timings else Fraction(0)


def speedup(t_single_ns: int, t_multi_ns: int) -> Fraction:
    if t_single_ns <= 0 or t_multi_ns <= 0:
        raise ZeroTime("times must be > 0")
    return Fraction(t_single_ns, t_multi_ns)


def speedup_efficiency(ratio, nproc: int) -> Fraction:
    if nproc < 1:
        raise ValueError("nproc must be >= 1")
    return Fraction(ratio) / nproc


def clops(p: ClopsParams, elapsed_ns) -> float:
    if elapsed_ns <= 0:
        raise ZeroTime("elapsed must be > 0")
    return p.m * p.k * p.s * p.d / (elapsed_ns / NS_PER_S)


def efficiency_factor(clops_value: float, d: int) -> float:
    if d < 1:
        raise ValueError("layer count must be >= 1")
    return clops_value / d


# ---------------------------------------------------------------------------
# Benchmark harnesses
# ---------------------------------------------------------------------------

def _benchmark_circuit(qubit_ids, shot_period_ns: int):
    """One single-qubit layer plus a measurement stretched so the whole
    straight-line program spans exactly one shot period: the control
    system is busy wall-to-wall for every shot."""
    times = GateTimeTable()
    meas_ns = shot_period_ns - times.single_qubit_ns
    if meas_ns < 1:
        raise ValueError("shot period too short for the benchmark template")
    times.measure_ns = meas_ns
    layers = (
        tuple(SingleQubitGate(q, "H") for q in qubit_ids),
        tuple(MeasureOp(q) for q in qubit_ids),
    )
    return Circuit(tuple(qubit_ids), layers), times


def _makespan_ns(timeline, start_ns: int = 0) -> int:
    ends = [e.time_ns for e in timeline.of_kind(EventKind.SHOT_END)]
    if not ends:
        raise RuntimeError("no completed shots in benchmark run")
    return max(ends) - start_ns


@dataclass
class QlaPoint:
    n_qubits: int
    nproc: int
    t_serial_ns: int
    t_parallel_ns: int
    qla_serial: Fraction
    qla_parallel: Fraction
    speedup: Fraction
    speedup_efficiency: Fraction
    serial_report: MetricsReport
    parallel_report: MetricsReport


def run_qla_benchmark(h: Hierarchy, qcns: dict[int, QCN], *,
                      usage_points, total_qubits: int,
                      shots: int = 1024,
                      shot_period_ns: int = DEFAULT_SHOT_PERIOD_NS,
                      t_pre_ns: int = DEFAULT_T_PRE_NS,
                      t_post_ns: int = DEFAULT_T_POST_NS,
                      max_processes: int = 5,
                      seed: int = 0) -> list[QlaPoint]:
    """Usage sweep: at each point, tasks of n qubits are packed onto the
    chip (process count = total // n capped by the scheduler limit) and
    run twice — serially, one task at a time, and in parallel with
    staggered admissions — to contrast load averages.

    Serial mode charges each task its full pre/run/post pipeline
    back-to-back.  Parallel mode overlaps: admission i lands once i+1
    preprocessing slots have elapsed (preprocessing is serialized on the
    host), runs overlap on disjoint regions, and postprocessing of the
    last task closes the window.
    """
    points = []
    for n in usage_points:
        nproc = min(max_processes, total_qubits // n)
        if nproc < 1:
            raise ValueError(f"usage point {n} exceeds the chip")
        qubit_sets = [list(range(i * n, (i + 1) * n)) for i in range(nproc)]
        circuits = [_benchmark_circuit(qs, shot_period_ns) for qs in qubit_sets]
        tasks = [compile_circuit(c, t, h, qcns, process_id=i, shots=shots,
                                 shot_period_ns=shot_period_ns)
                 for i, (c, t) in enumerate(circuits)]
        t_qpu = shots * shot_period_ns

        # serial baseline: identical disjoint tasks, so one solo run
        # stands in for each of the nproc sequential slots
        solo = engine.run([tasks[0]], h, Scheduler(max_processes=max_processes),
                          seed=seed, detail="coarse")
        t_qcs_solo = _makespan_ns(solo)
        serial_timings = [
            TaskTiming(n_qubits=n, t_pre_ns=t_pre_ns, t_qcs_ns=t_qcs_solo,
                       t_qpu_ns=t_qpu, t_post_ns=t_post_ns,
                       t_total_ns=t_pre_ns + t_qcs_solo + t_post_ns)
            for _ in range(nproc)]
        t_serial = sum(t.t_total_ns for t in serial_timings)
        qla_serial = qla(serial_timings, total_qubits, t_serial)

        # parallel run: admission i at (i+1) preprocessing intervals
        submit = [(i + 1) * t_pre_ns for i in range(nproc)]
        tl = engine.run(tasks, h, Scheduler(max_processes=max_processes),
                        seed=seed, submit_times=submit, detail="coarse")
        par_timings = []
        for i in range(nproc):
            ends = [e.time_ns for e in tl.of_process(i)
                    if e.kind is EventKind.SHOT_END]
            t_qcs = max(ends) - submit[i]
            par_timings.append(
                TaskTiming(n_qubits=n, t_pre_ns=t_pre_ns, t_qcs_ns=t_qcs,
                           t_qpu_ns=t_qpu, t_post_ns=t_post_ns,
                           t_total_ns=t_pre_ns + t_qcs + t_post_ns))
        t_parallel = _makespan_ns(tl) + t_post_ns
        qla_parallel = qla(par_timings, total_qubits, t_parallel)

        ratio = speedup(t_serial, t_parallel)
        eff = speedup_efficiency(ratio, nproc)
        points.append(QlaPoint(
            n_qubits=n, nproc=nproc, t_serial_ns=t_serial,
            t_parallel_ns=t_parallel, qla_serial=qla_serial,
            qla_parallel=qla_parallel, speedup=ratio, speedup_efficiency=eff,
            serial_report=MetricsReport(
                scenario=f"qla-serial-n{n}", qla=qla_serial,
                timings=serial_timings),
            parallel_report=MetricsReport(
                scenario=f"qla-parallel-n{n}", qla=qla_parallel,
                speedup=float(ratio), speedup_efficiency=float(eff),
                timings=par_timings)))
    return points


def run_clops_benchmark(h: Hierarchy, qcns: dict[int, QCN], p: ClopsParams,
                        nproc: int, *, qubits_per_region: int = 5,
                        seed: int = 0) -> MetricsReport:
    """Variational-loop throughput on nproc disjoint regions.

    The engine times one S-shot block per region (the repeating unit of
    the loop); the M*K iterations per region are then replayed at block
    granularity, with each iteration's parameter update serialized on the
    shared classical server for update_latency before its block starts.
    """
    if nproc < 1:
        raise ValueError("nproc must be >= 1")
    block_ns = []
    for i in range(nproc):
        qs = list(range(i * qubits_per_region, (i + 1) * qubits_per_region))
        circ, times = _benchmark_circuit(qs, p.shot_period_ns)
        task = compile_circuit(circ, times, h, qcns, process_id=i, shots=p.s,
                               shot_period_ns=p.shot_period_ns)
        tl = engine.run([task], h, Scheduler(max_processes=max(nproc, 1)),
                        seed=seed, detail="coarse")
        block_ns.append(_makespan_ns(tl))

    iters = p.m * p.k
    u = p.update_latency_ns
    server_free = 0
    elapsed = [0] * nproc
    heap = [(0, pid, iters) for pid in range(nproc)]
    heapq.heapify(heap)
    while heap:
        ready, pid, remaining = heapq.heappop(heap)
        grant = max(server_free, ready)
        server_free = grant + u
        end = grant + u + block_ns[pid]
        elapsed[pid] = end
        if remaining > 1:
            heapq.heappush(heap, (end, pid, remaining - 1))

    region_clops = [clops(p, e) for e in elapsed]
    total = sum(region_clops)
    return MetricsReport(
        scenario=f"clops-nproc{nproc}",
        clops=total,
        efficiency_factor=efficiency_factor(total, p.d),
        extra={
            "nproc": nproc,
            "per_process_clops": total / nproc,
            "region_clops": region_clops,
            "region_elapsed_ns": elapsed,
            "block_ns": block_ns,
        })


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

QLA_CSV_HEADER = ("usage_qubits,processes,t_serial_ns,t_parallel_ns,"
                  "qla_serial,qla_parallel,speedup,speedup_efficiency")


def qla_sweep_csv(points: list[QlaPoint]) -> str:
    rows = [QLA_CSV_HEADER]
    for pt in points:
        rows.append(",".join([
            str(pt.n_qubits), str(pt.nproc), str(pt.t_serial_ns),
            str(pt.t_parallel_ns), f"{float(pt.qla_serial):.6f}",
            f"{float(pt.qla_parallel):.6f}", f"{float(pt.speedup):.6f}",
            f"{float(pt.speedup_efficiency):.6f}"]))
    return "\n".join(rows) + "\n"


CLOPS_CSV_HEADER = "processes,total_clops,per_process_clops,efficiency_factor"


def clops_table_csv(reports: list[MetricsReport]) -> str:
    rows = [CLOPS_CSV_HEADER]
    for r in reports:
        rows.append(",".join([
            str(r.extra["nproc"]), f"{r.clops:.1f}",
            f"{r.extra['per_process_clops']:.1f}",
            f"{r.efficiency_factor:.1f}"]))
    return "\n".join(rows) + "\n"
