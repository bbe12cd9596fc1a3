"""Configurable per-qubit readout outcome sampling.

Outcomes come from a counter-based generator keyed on
(seed, process, qubit, shot, measurement index), so results are
reproducible and independent of event interleaving.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

__all__ = ["ReadoutModel"]


def _uniform(seed: int, process_id: int, qubit: int, shot: int, index: int) -> float:
    key = f"{seed}:{process_id}:{qubit}:{shot}:{index}".encode()
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


@dataclass
class ReadoutModel:
    """Per-qubit assignment-fidelity matrix over a configured prepared state.

    ``assignment[qubit]`` is ((P(read 0|prep 0), P(read 1|prep 0)),
    (P(read 0|prep 1), P(read 1|prep 1))); default identity.  The
    effective probability of reading 1 is the matrix row selected by the
    prepared state.
    """

    assignment: dict[int, tuple[tuple[float, float], tuple[float, float]]] = \
        field(default_factory=dict)
    prepared: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for q, rows in self.assignment.items():
            for row in rows:
                if not all(0.0 <= p <= 1.0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                    raise ValueError(f"qubit {q}: bad assignment row {row}")

    @classmethod
    def biased(cls, p_one: float, qubits) -> "ReadoutModel":
        """Every listed qubit reads 1 with probability p_one."""
        rows = ((1.0 - p_one, p_one), (1.0 - p_one, p_one))
        return cls(assignment={q: rows for q in qubits})

    def p_one(self, qubit: int) -> float:
        rows = self.assignment.get(qubit, ((1.0, 0.0), (0.0, 1.0)))
        return rows[self.prepared.get(qubit, 0)][1]

    def sample(self, seed: int, process_id: int, qubit: int, shot: int,
               index: int) -> int:
        p = self.p_one(qubit)
        if p <= 0.0:
            return 0
        if p >= 1.0:
            return 1
        return 1 if _uniform(seed, process_id, qubit, shot, index) < p else 0
