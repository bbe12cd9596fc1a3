"""Deterministic discrete-event simulator of a hierarchical,
multi-process quantum control stack: a six-opcode control ISA, a
circuit-to-program compiler, a trigger/feedback execution engine, a
staggered multi-process scheduler, and utilization/throughput metrics."""

from .circuit import (Circuit, CircuitError, ConditionalBlock, GateTimeTable,
                      MeasureOp, SingleQubitGate, TwoQubitGate, parse_circuit,
                      random_circuit, validate_circuit)
from .compiler import (CompiledTask, CompileError, FeedbackEntry,
                       ShotPeriodTooShort, check_alignment, compile_circuit,
                       timeline_of)
from .engine import (EngineError, IssueRateReport, MissingTriggerAfterFeedback,
                     flat_oracle, issue_rate_check, run)
from .events import EventKind, EventTimeline, SimEvent
from .isa import (Diagnostic, Instruction, Opcode, Program, ProgramError,
                  UnitScope, format_program, parse_program, validate_program)
from .metrics import (ClopsParams, MetricsReport, TaskTiming, clops,
                      efficiency_factor, qla, run_clops_benchmark,
                      run_qla_benchmark, speedup, speedup_efficiency)
from .readout import ReadoutModel
from .scenario import Scenario, load_scenario
from .scheduler import (Scheduler, SchedulerError, SlotsExhausted, StiTable,
                        TriggerRequest, UnitConflict)
from .topology import (CHANNELS_FIXED_FREQUENCY, CHANNELS_TUNABLE, Feedline,
                       Hierarchy, QCN, TopologyError, build_hierarchy,
                       compute_masks, max_capacity, standard_config)

__version__ = "1.0.0"
