"""Controller tree construction, path latencies, masks, capacity."""

import pytest

from qcasim.topology import (CHANNELS_FIXED_FREQUENCY, CHANNELS_TUNABLE,
                             TopologyError, build_hierarchy, compute_masks,
                             mask_units, max_capacity, standard_config)


@pytest.fixture(scope="module")
def chip():
    return build_hierarchy(standard_config(n_qccs=3))


def test_reference_chip_shape(chip):
    h, qcns, feedlines = chip
    assert len(h.leaf_controllers) == 3
    assert len(qcns) == 72
    assert len(feedlines) == 12
    # 8 Z + 3 XY + 1 readout module per subsystem
    assert len(h.modules) == 3 * 12


def test_qcn_unit_assignment(chip):
    h, qcns, _ = chip
    q = qcns[0]
    assert q.xy_unit_id == "qccs0/xy0/u0"
    assert q.z_unit_ids == ("qccs0/z0/u0", "qccs0/z0/u1")
    assert q.readout_input_unit_id == "qccs0/ro/in0_0"
    # qubit 24 is the first of the second subsystem
    assert qcns[24].xy_unit_id == "qccs1/xy0/u0"
    # no two qubits share a unit
    seen = set()
    for qcn in qcns.values():
        for uid in qcn.unit_ids():
            assert uid not in seen
            seen.add(uid)


def test_path_latencies(chip):
    h, _, _ = chip
    # root -> leaf (cable 200) -> module (backplane 100)
    assert h.trigger_path_latency("qccs0/xy0") == 300
    assert h.feedback_path_latency("qccs0/xy0") == 400


def test_three_layer_latency():
    cfg = standard_config(n_qccs=16, n_mids=2, qccs_per_mid=8)
    h, qcns, _ = build_hierarchy(cfg)
    # root -> mid (cable) -> leaf (cable) -> module (backplane)
    assert h.trigger_path_latency("qccs0/z0") == 500
    assert len(qcns) == 16 * 24


def test_capacity_numbers():
    two_layer = build_hierarchy(standard_config(n_qccs=8))[0]
    assert max_capacity(two_layer, CHANNELS_TUNABLE) == 192
    assert max_capacity(two_layer, CHANNELS_FIXED_FREQUENCY) == 768
    three_layer = build_hierarchy(
        standard_config(n_qccs=64, n_mids=8, qccs_per_mid=8))[0]
    assert max_capacity(three_layer, CHANNELS_FIXED_FREQUENCY) == 6144


def test_masks_cover_exactly_task_units(chip):
    h, qcns, _ = chip
    masks = compute_masks(h, qcns, process_id=3, qubit_set={0, 1})
    units = mask_units(masks, 3)
    expected = set()
    for q in (0, 1):
        expected.update(qcns[q].unit_ids())
    assert units == frozenset(expected)
    # the root mask routes only toward qccs0
    assert masks[h.root][3] == frozenset({"qccs0"})


def test_masks_union_property(chip):
    """Each internal node's set bits are exactly the children that lead to
    at least one masked unit."""
    h, qcns, _ = chip
    masks = compute_masks(h, qcns, process_id=0, qubit_set={0, 30, 71})
    for node, per_pid in masks.items():
        for child in per_pid[0]:
            assert child in masks or child in h.units


def test_disjoint_processes_have_disjoint_masks(chip):
    h, qcns, _ = chip
    a = mask_units(compute_masks(h, qcns, 0, {0, 1, 2}), 0)
    b = mask_units(compute_masks(h, qcns, 1, {10, 11}), 1)
    assert not a & b


def test_bad_config_rejected():
    with pytest.raises(TopologyError):
        build_hierarchy({"qccs": 1, "sync_period_ns": 0})
