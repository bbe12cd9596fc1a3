"""Controller hierarchy, qubit control nodes, feedlines and per-process
trigger mask tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "UnitKind", "ExecutionUnit", "ExecutionModule", "Hierarchy", "QCN",
    "Feedline", "TopologyError", "DanglingReference", "FeedlineOverflow",
    "CycleDetected", "UnknownQubit", "build_hierarchy", "compute_masks",
    "merge_masks", "max_capacity", "standard_config",
    "CHANNELS_TUNABLE", "CHANNELS_FIXED_FREQUENCY",
]

# Channel-budget demand per qubit flavour, in execution-unit slots.  A
# tunable qubit consumes an XY drive, its own Z drive, a coupler Z share
# and a readout output slot.  A fixed-frequency qubit needs only an XY
# slot from the budget: its readout is frequency-multiplexed on a shared
# feedline and does not consume a board slot.
CHANNELS_TUNABLE = 4
CHANNELS_FIXED_FREQUENCY = 1

# Default trigger propagation latencies per edge kind (ns).
DEFAULT_CABLE_LATENCY_NS = 200     # root<->mid, root/mid<->leaf
DEFAULT_BACKPLANE_LATENCY_NS = 100  # leaf<->module
DEFAULT_FEEDBACK_LATENCY_NS = 200   # per hop, each way
DEFAULT_SYNC_PERIOD_NS = 10


class TopologyError(Exception):
    pass


class DanglingReference(TopologyError):
    pass


class FeedlineOverflow(TopologyError):
    pass


class CycleDetected(TopologyError):
    pass


class UnknownQubit(TopologyError):
    pass


class UnitKind(Enum):
    XY = "xy"
    Z = "z"
    READOUT_OUT = "ro_out"
    READOUT_IN = "ro_in"


@dataclass(frozen=True)
class ExecutionUnit:
    unit_id: str
    kind: UnitKind
    module_id: str


@dataclass(frozen=True)
class ExecutionModule:
    module_id: str
    leaf_id: str
    unit_ids: tuple[str, ...]
    slot_count: int  # repurposable board unit slots, for capacity math


@dataclass(frozen=True)
class QCN:
    """Qubit control node: the per-qubit bundle of execution units."""
    qubit_id: int
    xy_unit_id: str
    z_unit_ids: tuple[str, ...]  # own Z first, then coupler lines
    readout_output_unit_id: str
    readout_input_unit_id: str
    feedline_id: str

    def unit_ids(self) -> tuple[str, ...]:
        return (self.xy_unit_id, *self.z_unit_ids,
                self.readout_output_unit_id, self.readout_input_unit_id)


@dataclass(frozen=True)
class Feedline:
    feedline_id: str
    member_qubits: tuple[int, ...]
    capacity: int = 6


@dataclass
class Hierarchy:
    root: str
    mid_controllers: tuple[str, ...]
    leaf_controllers: tuple[str, ...]
    modules: dict[str, ExecutionModule]
    units: dict[str, ExecutionUnit]
    parent: dict[str, str]  # child node -> parent node
    link_latency_ns: dict[tuple[str, str], int]
    feedback_latency_ns: dict[tuple[str, str], int]
    sync_period_ns: int = DEFAULT_SYNC_PERIOD_NS
    _path_cache: dict[str, tuple[int, int]] = field(default_factory=dict, repr=False)

    def children(self, node: str) -> list[str]:
        return sorted(c for c, p in self.parent.items() if p == node)

    def _paths(self, module_id: str) -> tuple[int, int]:
        if module_id not in self._path_cache:
            trig = fb = 0
            node = module_id
            while node != self.root:
                p = self.parent[node]
                trig += self.link_latency_ns[(p, node)]
                fb += self.feedback_latency_ns[(p, node)]
                node = p
            self._path_cache[module_id] = (trig, fb)
        return self._path_cache[module_id]

    def trigger_path_latency(self, module_id: str) -> int:
        """Accumulated trigger latency from the root down to a module."""
        return self._paths(module_id)[0]

    def feedback_path_latency(self, module_id: str) -> int:
        """One-way feedback transport latency between root and a module."""
        return self._paths(module_id)[1]

    def module_of(self, unit_id: str) -> str:
        return self.units[unit_id].module_id


def _validate_tree(parent: dict[str, str], root: str) -> None:
    for node in parent:
        seen = {node}
        cur = node
        while cur != root:
            cur = parent.get(cur)
            if cur is None:
                raise DanglingReference(f"node chain from '{node}' does not reach root")
            if cur in seen:
                raise CycleDetected(f"cycle through '{cur}'")
            seen.add(cur)


def standard_config(n_qccs: int = 3, *, n_mids: int = 0, qccs_per_mid: int = 8,
                    z_boards: int = 8, xy_boards: int = 3,
                    units_per_board: int = 8, feedlines: int = 4,
                    qubits_per_feedline: int = 6,
                    sync_period_ns: int = DEFAULT_SYNC_PERIOD_NS,
                    cable_latency_ns: int = DEFAULT_CABLE_LATENCY_NS,
                    backplane_latency_ns: int = DEFAULT_BACKPLANE_LATENCY_NS,
                    feedback_latency_ns: int = DEFAULT_FEEDBACK_LATENCY_NS) -> dict:
    """Config dict for the reference chassis composition: per subsystem,
    8 Z boards, 3 XY boards and one 4-feedline readout board manage 24
    tunable qubits."""
    return {
        "sync_period_ns": sync_period_ns,
        "cable_latency_ns": cable_latency_ns,
        "backplane_latency_ns": backplane_latency_ns,
        "feedback_latency_ns": feedback_latency_ns,
        "mid_controllers": n_mids,
        "qccs_per_mid": qccs_per_mid,
        "qccs": n_qccs,
        "z_boards": z_boards,
        "xy_boards": xy_boards,
        "units_per_board": units_per_board,
        "feedlines": feedlines,
        "qubits_per_feedline": qubits_per_feedline,
    }


def build_hierarchy(config: dict) -> tuple[Hierarchy, dict[int, QCN], list[Feedline]]:
    """Construct and validate the controller tree plus the QCN map.

    Unit ids are assigned deterministically from the config; qubit q of
    subsystem s takes XY unit q', Z units 2q' and 2q'+1 (own line plus a
    coupler line) and the readout I/O pair of slot q' on its feedline,
    where q' is the local index within the subsystem.
    """
    sync = int(config.get("sync_period_ns", DEFAULT_SYNC_PERIOD_NS))
    if sync <= 0:
        raise TopologyError("sync_period_ns must be > 0")
    cable = int(config.get("cable_latency_ns", DEFAULT_CABLE_LATENCY_NS))
    backplane = int(config.get("backplane_latency_ns", DEFAULT_BACKPLANE_LATENCY_NS))
    fb_lat = int(config.get("feedback_latency_ns", DEFAULT_FEEDBACK_LATENCY_NS))
    n_qccs = int(config.get("qccs", 1))
    n_mids = int(config.get("mid_controllers", 0))
    qccs_per_mid = int(config.get("qccs_per_mid", 8))
    z_boards = int(config.get("z_boards", 8))
    xy_boards = int(config.get("xy_boards", 3))
    upb = int(config.get("units_per_board", 8))
    n_feedlines = int(config.get("feedlines", 4))
    qpf = int(config.get("qubits_per_feedline", 6))
    fl_capacity = int(config.get("feedline_capacity", qpf))
    if qpf > fl_capacity:
        raise FeedlineOverflow(
            f"{qpf} qubits per feedline exceeds capacity {fl_capacity}")

    root = "root"
    mids = tuple(f"mid{m}" for m in range(n_mids))
    parent: dict[str, str] = {m: root for m in mids}
    link: dict[tuple[str, str], int] = {}
    fb_link: dict[tuple[str, str], int] = {}
    for m in mids:
        link[(root, m)] = cable
        fb_link[(root, m)] = fb_lat

    leaves: list[str] = []
    modules: dict[str, ExecutionModule] = {}
    units: dict[str, ExecutionUnit] = {}
    qcns: dict[int, QCN] = {}
    feedlines: list[Feedline] = []

    qubit_counter = 0
    for s in range(n_qccs):
        leaf = f"qccs{s}"
        leaves.append(leaf)
        up = mids[s // qccs_per_mid] if mids else root
        if mids and s // qccs_per_mid >= len(mids):
            raise DanglingReference(f"subsystem {s} has no mid controller")
        parent[leaf] = up
        link[(up, leaf)] = cable
        fb_link[(up, leaf)] = fb_lat

        def add_module(mid_id: str, kind: UnitKind, count: int, slots: int) -> list[str]:
            ids = tuple(f"{mid_id}/u{i}" for i in range(count))
            modules[mid_id] = ExecutionModule(mid_id, leaf, ids, slots)
            parent[mid_id] = leaf
            link[(leaf, mid_id)] = backplane
            fb_link[(leaf, mid_id)] = fb_lat
            for uid in ids:
                units[uid] = ExecutionUnit(uid, kind, mid_id)
            return list(ids)

        z_units: list[str] = []
        for b in range(z_boards):
            z_units += add_module(f"{leaf}/z{b}", UnitKind.Z, upb, upb)
        xy_units: list[str] = []
        for b in range(xy_boards):
            xy_units += add_module(f"{leaf}/xy{b}", UnitKind.XY, upb, upb)

        # One readout board: per feedline, an output unit group and an
        # input unit group, one qubit readout I/O pair per feedline slot.
        ro_id = f"{leaf}/ro"
        ro_out = [f"{ro_id}/out{f}_{k}" for f in range(n_feedlines) for k in range(qpf)]
        ro_in = [f"{ro_id}/in{f}_{k}" for f in range(n_feedlines) for k in range(qpf)]
        modules[ro_id] = ExecutionModule(ro_id, leaf, tuple(ro_out + ro_in),
                                         2 * n_feedlines)
        parent[ro_id] = leaf
        link[(leaf, ro_id)] = backplane
        fb_link[(leaf, ro_id)] = fb_lat
        for uid in ro_out:
            units[uid] = ExecutionUnit(uid, UnitKind.READOUT_OUT, ro_id)
        for uid in ro_in:
            units[uid] = ExecutionUnit(uid, UnitKind.READOUT_IN, ro_id)

        n_qubits = min(len(xy_units), len(z_units) // 2, n_feedlines * qpf)
        fl_members: dict[int, list[int]] = {f: [] for f in range(n_feedlines)}
        for q_local in range(n_qubits):
            q = qubit_counter
            qubit_counter += 1
            f, k = divmod(q_local, qpf)
            fl_members[f].append(q)
            qcns[q] = QCN(
                qubit_id=q,
                xy_unit_id=xy_units[q_local],
                z_unit_ids=(z_units[2 * q_local], z_units[2 * q_local + 1]),
                readout_output_unit_id=f"{ro_id}/out{f}_{k}",
                readout_input_unit_id=f"{ro_id}/in{f}_{k}",
                feedline_id=f"{leaf}/fl{f}",
            )
        for f in range(n_feedlines):
            if len(fl_members[f]) > fl_capacity:
                raise FeedlineOverflow(
                    f"feedline {leaf}/fl{f} holds {len(fl_members[f])} qubits, "
                    f"capacity {fl_capacity}")
            feedlines.append(Feedline(f"{leaf}/fl{f}", tuple(fl_members[f]),
                                      fl_capacity))

    _validate_tree(parent, root)
    for q, qcn in qcns.items():
        for uid in qcn.unit_ids():
            if uid not in units:
                raise DanglingReference(f"qubit {q} references unknown unit {uid}")

    h = Hierarchy(root=root, mid_controllers=mids, leaf_controllers=tuple(leaves),
                  modules=modules, units=units, parent=parent,
                  link_latency_ns=link, feedback_latency_ns=fb_link,
                  sync_period_ns=sync)
    return h, qcns, feedlines


MaskTable = dict  # node id -> {process_id -> frozenset of child ids}


def compute_masks(h: Hierarchy, qcns: dict[int, QCN], process_id: int,
                  qubit_set: frozenset[int] | set[int]) -> MaskTable:
    """Minimal top-down masks: exactly the units of the involved QCNs are
    reachable through set bits."""
    if not qubit_set:
        raise UnknownQubit("empty qubit set")
    unit_ids: set[str] = set()
    for q in sorted(qubit_set):
        if q not in qcns:
            raise UnknownQubit(f"qubit {q} has no control node")
        unit_ids.update(qcns[q].unit_ids())

    masks: dict[str, dict[int, frozenset[str]]] = {}

    def set_bit(node: str, child: str) -> None:
        cur = masks.setdefault(node, {}).get(process_id, frozenset())
        masks[node][process_id] = cur | {child}

    for uid in sorted(unit_ids):
        module = h.units[uid].module_id
        set_bit(module, uid)
        node = module
        while node != h.root:
            p = h.parent[node]
            set_bit(p, node)
            node = p
    return masks


def merge_masks(*fragments: MaskTable) -> MaskTable:
    merged: dict[str, dict[int, frozenset[str]]] = {}
    for frag in fragments:
        for node, per_pid in frag.items():
            dst = merged.setdefault(node, {})
            for pid, bits in per_pid.items():
                dst[pid] = dst.get(pid, frozenset()) | bits
    return merged


def mask_units(masks: MaskTable, process_id: int) -> frozenset[str]:
    """All execution units reachable for a process (leaf bits of its masks)."""
    children_with_bits = {node for node in masks}
    out: set[str] = set()
    for node, per_pid in masks.items():
        for bit in per_pid.get(process_id, ()):  # bits are child ids
            if bit not in children_with_bits:
                out.add(bit)
    return frozenset(out)


def max_capacity(h: Hierarchy, channels_per_qubit: int) -> int:
    """Maximum qubit count the tree supports: total repurposable unit
    slots across all execution modules divided by the per-qubit channel
    demand (CHANNELS_TUNABLE or CHANNELS_FIXED_FREQUENCY)."""
    if channels_per_qubit < 1:
        raise ValueError("channels_per_qubit must be >= 1")
    total_slots = sum(m.slot_count for m in h.modules.values())
    return total_slots // channels_per_qubit
