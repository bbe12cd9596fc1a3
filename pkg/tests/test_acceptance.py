"""Acceptance suite: twelve criteria, one pass/fail line each.

Shared simulator runs are registered so the sync-alignment criterion can
audit every timeline the suite produced.
"""

import random
from fractions import Fraction

import pytest

from qcasim import engine, metrics
from qcasim.circuit import GateTimeTable, parse_circuit, random_circuit
from qcasim.cli import main
from qcasim.compiler import compile_circuit
from qcasim.events import EventKind
from qcasim.isa import (LEGAL_SCOPES, Opcode, Program, UnitScope, br,
                        format_program, gate, parse_program, wait)
from qcasim.readout import ReadoutModel
from qcasim.scenario import data_path
from qcasim.scheduler import Scheduler, StiTable
from qcasim.topology import (CHANNELS_FIXED_FREQUENCY, CHANNELS_TUNABLE,
                             build_hierarchy, max_capacity, standard_config)

TIMES = GateTimeTable()

# every engine timeline produced by this suite, with its sync period,
# for the global latch-alignment audit of criterion 4
_RUNS: list = []


def tracked_run(tasks, h, *args, **kwargs):
    tl = engine.run(tasks, h, *args, **kwargs)
    _RUNS.append((tl, h.sync_period_ns))
    return tl


def ok(n: int, text: str) -> None:
    print(f"criterion {n:2d}: PASS — {text}")


@pytest.fixture(scope="module")
def chip():
    return build_hierarchy(standard_config(n_qccs=1))


@pytest.fixture(scope="module")
def chip72():
    return build_hierarchy(standard_config(n_qccs=3))


@pytest.fixture(scope="module")
def qla_sweep(chip72):
    h, qcns, _ = chip72
    return metrics.run_qla_benchmark(
        h, qcns, usage_points=[9, 12, 14, 15, 18, 20, 24, 30, 36, 48, 72],
        total_qubits=72, shots=1024)


def test_criterion_01_isa_conformance():
    C, I, O = (UnitScope.CONTROLLER, UnitScope.READOUT_INPUT,
               UnitScope.DRIVE_OR_READOUT_OUTPUT)
    table = {Opcode.GATE: {O}, Opcode.WAIT: {C, I, O},
             Opcode.MEASURE: {I}, Opcode.TRIGGER: {C},
             Opcode.FEEDBACK: {C}, Opcode.BR: {C, I, O}}
    for op in Opcode:
        for scope in UnitScope:
            assert (scope in LEGAL_SCOPES[op]) is (scope in table[op]), \
                f"{op} x {scope}"
    rng = random.Random(1)
    for _ in range(50):
        ins = []
        for _ in range(rng.randint(1, 15)):
            pick = rng.random()
            if pick < 0.5:
                ins.append(gate(rng.randint(0, 99), rng.randint(1, 5000),
                                rng.randint(0, 1)))
            elif pick < 0.85:
                ins.append(wait(rng.randint(0, 5000), rng.randint(0, 1)))
            else:
                ins.append(br(rng.randint(0, 3), rng.randint(0, 1), 1))
        p = Program(instructions=tuple(ins))
        assert parse_program(format_program(p), O) == p
    ok(1, "6x3 legality matrix exact; 50-program parse/format round trip")


def test_criterion_02_capacity():
    two = build_hierarchy(standard_config(n_qccs=8))[0]
    three = build_hierarchy(
        standard_config(n_qccs=64, n_mids=8, qccs_per_mid=8))[0]
    assert max_capacity(two, CHANNELS_TUNABLE) == 192
    assert max_capacity(two, CHANNELS_FIXED_FREQUENCY) == 768
    assert max_capacity(three, CHANNELS_FIXED_FREQUENCY) == 6144
    ok(2, "capacities 192 / 768 / 6144 exact")


def test_criterion_03_oracle_equivalence(chip):
    h, qcns, _ = chip
    rng = random.Random(2024)
    for trial in range(200):
        qubits = sorted(rng.sample(range(24), rng.randint(1, 8)))
        circ = random_circuit(rng, qubits, rng.randint(1, 12))
        ct = compile_circuit(circ, TIMES, h, qcns, process_id=0)
        tl = tracked_run([ct], h)
        first_latch = min(e.time_ns
                          for e in tl.of_kind(EventKind.TRIGGER_LATCHED))
        oracle = sorted((uid, t) for uid, t, ins
                        in engine.flat_oracle(ct, first_latch)
                        if ins.opcode is Opcode.GATE)
        got = sorted((e.node, e.time_ns)
                     for e in tl.of_kind(EventKind.GATE_START))
        assert got == oracle, f"trial {trial}"
    ok(3, "200 random feedback-free circuits match the flat oracle exactly")


def test_criterion_05_staggered_trigger(chip):
    h, qcns, _ = chip
    text = data_path("bell.qc").read_text()
    t0 = compile_circuit(parse_circuit(text), TIMES, h, qcns, process_id=0,
                         shots=4, shot_period_ns=100_000)
    from qcasim.scenario import remap_circuit
    c1 = remap_circuit(parse_circuit(text), {0: 10, 1: 11})
    t1 = compile_circuit(c1, TIMES, h, qcns, process_id=1, shots=4,
                         shot_period_ns=100_000)
    for sti_ns in (5_000, 10_000, 15_000, 20_000):
        tl = tracked_run([t0, t1], h, Scheduler(sti=StiTable(sti_ns)))
        starts = [(e.process_id, e.time_ns)
                  for e in tl.of_kind(EventKind.TRIGGER_SENT)
                  if dict(e.payload)["start"] == 1]
        gaps = [abs(a[1] - b[1]) for i, a in enumerate(starts)
                for b in starts[i + 1:] if a[0] != b[0]]
        assert min(gaps) >= sti_ns, f"STI {sti_ns}"
    # zero interval: each process's timeline matches its solo run
    both = tracked_run([t0, t1], h, Scheduler(sti=StiTable(0)))
    key = lambda evs: sorted((e.time_ns, e.kind.value, e.node, e.shot,
                              e.payload) for e in evs)
    for pid, task in ((0, t0), (1, t1)):
        solo = tracked_run([task], h, Scheduler())
        assert key(both.of_process(pid)) == key(solo.events)
    ok(5, "cross-process start gaps >= STI for 5/10/15/20 us; "
          "zero STI is transparent")


def test_criterion_06_speedup(qla_sweep):
    pt = next(p for p in qla_sweep if p.n_qubits == 14)
    assert pt.nproc == 5
    assert 4.5 <= float(pt.speedup) <= 5.0
    assert float(pt.speedup_efficiency) >= 0.90
    ok(6, f"5x14-qubit speedup {float(pt.speedup):.3f} in [4.5, 5.0], "
          f"efficiency {float(pt.speedup_efficiency):.3f} >= 0.90")


def test_criterion_07_qla_improvement(qla_sweep):
    lo = qla_sweep[0]
    assert 0.10 <= float(lo.qla_serial) <= 0.25
    assert 0.55 <= float(lo.qla_parallel) <= 0.75
    assert float(lo.qla_parallel / lo.qla_serial) >= 3.5
    # monotone non-decreasing within each fixed-process-count zone
    for series in ("qla_serial", "qla_parallel"):
        prev = None
        for pt in qla_sweep:
            val = getattr(pt, series)
            if prev is not None and pt.nproc == prev[0]:
                assert val >= prev[1], f"{series} dips at n={pt.n_qubits}"
            prev = (pt.nproc, val)
    ok(7, f"lowest point load {float(lo.qla_serial):.3f} -> "
          f"{float(lo.qla_parallel):.3f} "
          f"(x{float(lo.qla_parallel / lo.qla_serial):.2f}); "
          "sweep monotone per zone")


def test_criterion_08_clops_arithmetic():
    p = metrics.ClopsParams(d=5)
    c = metrics.clops(p, 40.64e9)
    assert abs(c - 12_303.1) / 12_303.1 < 5e-4
    assert abs(metrics.efficiency_factor(12_304, 5) - 2_460.8) < 0.05
    assert abs(metrics.efficiency_factor(15_000, 9) - 1_666.7) < 0.05
    ok(8, "reference-table cells reproduced to 4 significant digits")


def test_criterion_09_clops_scaling(chip72):
    h, qcns, _ = chip72
    reports = [metrics.run_clops_benchmark(h, qcns, metrics.ClopsParams(), n)
               for n in range(1, 6)]
    totals = [r.clops for r in reports]
    per = [r.extra["per_process_clops"] for r in reports]
    assert all(b > a for a, b in zip(totals, totals[1:]))
    assert all(b <= a for a, b in zip(per, per[1:]))
    assert totals[4] >= 3 * totals[0]
    ok(9, f"total CLOPS {totals[0]:,.0f} -> {totals[4]:,.0f} "
          f"({totals[4] / totals[0]:.2f}x >= 3x), per-process non-increasing")


def test_criterion_10_feedback_correctness(chip):
    h, qcns, _ = chip
    ct = compile_circuit(parse_circuit(data_path("reset.qc").read_text()),
                         TIMES, h, qcns, process_id=0, shots=10_000)
    tl = tracked_run([ct], h, seed=0, readout=ReadoutModel.biased(0.7, [0]))
    assert not tl.deadlocked
    collected = tl.of_kind(EventKind.FEEDBACK_COLLECTED)
    taken = sum(1 for e in collected if dict(e.payload)["bits"] == "1")
    assert abs(taken - 7000) <= 150, taken
    # after every feedback collection, the resume trigger precedes any
    # further unit execution of that shot
    trig0 = {(e.process_id, e.shot): e.time_ns
             for e in tl.of_kind(EventKind.TRIGGER_SENT)
             if dict(e.payload)["start"] == 0}
    gate_starts = {}
    for e in tl.of_kind(EventKind.GATE_START):
        gate_starts.setdefault((e.process_id, e.shot), []).append(e.time_ns)
    for e in collected:
        key = (e.process_id, e.shot)
        assert key in trig0 and trig0[key] >= e.time_ns
        after = [t for t in gate_starts[key] if t > e.time_ns]
        assert not after or min(after) >= trig0[key]
    ok(10, f"reset branch taken {taken}/10000 (7000 +- 150); resume "
           "trigger always precedes post-feedback execution")


def test_criterion_11_issue_rate():
    durations = [30] * 40

    def oracle(cost, F):
        starts = [30 * i for i in range(len(durations))]
        ready = [0 if i < F else 0 for i in range(len(durations))]
        for i in range(F, len(durations)):
            ready[i] = max(ready[i - 1], starts[i - F]) + cost
        return [i for i in range(len(durations)) if ready[i] > starts[i]]

    class Task:
        programs = {"u": Program(
            instructions=tuple(gate(i, d) for i, d in enumerate(durations)))}

    fast = engine.issue_rate_check(Task(), 50, buffer_capacity=0,
                                   fifo_capacity=8)["u"]
    assert not fast.underflow and oracle(20, 8) == []
    slow = engine.issue_rate_check(Task(), 25, buffer_capacity=0,
                                   fifo_capacity=2)["u"]
    assert slow.underflow
    assert [slow.underflow_index] == oracle(40, 2)[:1] == [5]
    ok(11, "both hand cases match the queue oracle "
           "(no underflow; underflow at op 5)")


def test_criterion_12_determinism(tmp_path, chip72):
    # scenario timeline files
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["simulate", str(data_path("single_task.toml")),
                     "--out-dir", str(d)]) == 0
        outs.append((d / "timeline.txt").read_bytes())
    assert outs[0] == outs[1]
    # benchmark report files
    h, qcns, _ = chip72
    csvs = []
    for _ in range(2):
        pts = metrics.run_qla_benchmark(h, qcns, usage_points=[9],
                                        total_qubits=72, shots=64)
        reports = [metrics.run_clops_benchmark(
            h, qcns, metrics.ClopsParams(m=2, k=2, s=10), n)
            for n in (1, 3)]
        csvs.append(metrics.qla_sweep_csv(pts)
                    + metrics.clops_table_csv(reports))
    assert csvs[0] == csvs[1]
    # feedback path, rerun in-process
    h1, q1, _ = build_hierarchy(standard_config(n_qccs=1))
    ct = compile_circuit(parse_circuit(data_path("reset.qc").read_text()),
                         TIMES, h1, q1, process_id=0, shots=200)
    lines = [tracked_run([ct], h1, seed=9,
                         readout=ReadoutModel.biased(0.7, [0])).export_lines()
             for _ in range(2)]
    assert lines[0] == lines[1]
    ok(12, "identical seeds give byte-identical timeline and report files")


def test_criterion_04_sync_alignment_and_rigidity(chip):
    h, qcns, _ = chip
    ct = compile_circuit(parse_circuit(data_path("bell.qc").read_text()),
                         TIMES, h, qcns, process_id=0, shots=1024)
    tl = tracked_run([ct], h)
    by_shot = {}
    for e in tl.events:
        by_shot.setdefault(e.shot, []).append(e)
    assert len(by_shot) == 1024
    signatures = set()
    for evs in by_shot.values():
        t0 = min(e.time_ns for e in evs)
        signatures.add(tuple(sorted(
            (e.time_ns - t0, e.kind.value, e.node, e.payload) for e in evs)))
    assert len(signatures) == 1
    # global audit over every timeline this suite produced
    audited = 0
    for timeline, period in _RUNS:
        for e in timeline.of_kind(EventKind.TRIGGER_LATCHED):
            assert e.time_ns % period == 0
            audited += 1
    assert audited > 1024
    ok(4, f"{audited} latch events on the sync grid across {len(_RUNS)} "
          "runs; 1024-shot offsets rigid")
