"""Circuit abstraction used by the scheduler.

Circuits are kept deliberately shallow: the scheduler only needs qubit
counts, depth, and two-qubit connectivity. Single-qubit gates are opaque
placeholders and the only two-qubit gate is CX.
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass, field

SINGLE = "single"
CX = "cx"

PRIORITY_MIN = 1
PRIORITY_MAX = 20


def derive_id(base: str, suffix: str) -> str:
    """Deterministic child identifier (UUID5 of base/suffix)."""
    return str(uuid.uuid5(uuid.NAMESPACE_OID, f"{base}/{suffix}"))


@dataclass(frozen=True, slots=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind == SINGLE:
            if len(self.qubits) != 1:
                raise ValueError("single-qubit gate takes exactly one qubit")
        elif self.kind == CX:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError("cx gate takes two distinct qubits")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")


def _depth_of(num_qubits: int, gates: tuple[Gate, ...]) -> int:
    if not gates:
        raise ValueError("circuit has no gates")
    levels = [0] * num_qubits
    for gate in gates:
        d = max(levels[q] for q in gate.qubits) + 1
        for q in gate.qubits:
            levels[q] = d
    return max(levels)


@dataclass(frozen=True, slots=True)
class Circuit:
    """Immutable gate list with derived depth.

    ``depth`` is the length of the longest chain of gates sharing a qubit;
    it is recomputed on construction and never stored stale.
    """

    id: str
    num_qubits: int
    gates: tuple[Gate, ...]
    parent_id: str | None = None
    depth: int = field(init=False)

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be positive")
        for gate in self.gates:
            for q in gate.qubits:
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"gate qubit {q} out of range")
        object.__setattr__(self, "depth", _depth_of(self.num_qubits, self.gates))

    def cx_pairs(self) -> list[tuple[int, int]]:
        """CX endpoints with multiplicity, in gate order."""
        return [(g.qubits[0], g.qubits[1]) for g in self.gates if g.kind == CX]


def compute_depth(circuit: Circuit) -> int:
    """Longest qubit-sharing dependency chain of the circuit."""
    return _depth_of(circuit.num_qubits, circuit.gates)


def generate_random_circuit(
    num_qubits: int, depth_target: int, cx_density: float, seed: int
) -> Circuit:
    """Deterministic synthetic workload circuit.

    Gates are laid down layer by layer; each layer is guaranteed to extend
    the critical path, so the resulting depth equals ``depth_target``
    exactly. CX gates pair up qubits from a per-layer random permutation,
    taking each adjacent pair with probability ``cx_density``.
    """
    if num_qubits < 1:
        raise ValueError("num_qubits must be positive")
    if depth_target < 1:
        raise ValueError("depth_target must be positive")
    if not 0.0 <= cx_density <= 1.0:
        raise ValueError("cx_density must lie in [0, 1]")
    if cx_density > 0.0 and num_qubits < 2:
        raise ValueError("cx_density > 0 requires at least two qubits")

    rng = random.Random(seed)
    gates: list[Gate] = []
    levels = [0] * num_qubits
    for _ in range(depth_target):
        order = list(range(num_qubits))
        rng.shuffle(order)
        layer: list[Gate] = []
        idx = 0
        while idx < num_qubits:
            if idx + 1 < num_qubits and cx_density > 0.0 and rng.random() < cx_density:
                layer.append(Gate(CX, (order[idx], order[idx + 1])))
                idx += 2
            else:
                if rng.random() < 0.85:
                    layer.append(Gate(SINGLE, (order[idx],)))
                idx += 1
        # Guarantee the layer advances the longest chain by one.
        top = max(levels)
        touched = {q for g in layer for q in g.qubits}
        if not any(levels[q] == top for q in touched):
            anchor = min(q for q in range(num_qubits) if levels[q] == top)
            layer.append(Gate(SINGLE, (anchor,)))
        for gate in layer:
            d = max(levels[q] for q in gate.qubits) + 1
            for q in gate.qubits:
                levels[q] = d
        gates.extend(layer)

    circuit_id = str(uuid.UUID(int=rng.getrandbits(128), version=4))
    return Circuit(id=circuit_id, num_qubits=num_qubits, gates=tuple(gates))


@dataclass(frozen=True, slots=True)
class CircuitProxy:
    """Lightweight job record the scheduler operates on.

    Carries the user parameters (preferred machine, strictness, priority),
    the circuit shape (qubits, depth, shots), and the resource estimates
    attached at submission or cut time. Start/completion times are derived
    by the schedule evaluator and kept off this record, which stays
    immutable and safe to share across search workers.
    """

    id: str
    parent_id: str
    num_qubits: int
    depth: int
    preferred_machine: str | None
    strictness: float
    priority: int
    shots: int
    base_processing_time: float | None
    base_noise: float
    is_fragment: bool = False

    def __post_init__(self) -> None:
        if not PRIORITY_MIN <= self.priority <= PRIORITY_MAX:
            raise ValueError(
                f"priority must lie in [{PRIORITY_MIN}, {PRIORITY_MAX}]"
            )
        if self.preferred_machine is not None and self.strictness <= 0.0:
            raise ValueError("strictness must be > 0 when a machine preference is set")
        if self.preferred_machine is None and self.strictness != 0.0:
            raise ValueError("strictness must be 0 without a machine preference")
        if self.num_qubits < 1 or self.depth < 1 or self.shots < 1:
            raise ValueError("qubits, depth and shots must all be >= 1")
        if self.base_processing_time is not None and self.base_processing_time < 0.0:
            raise ValueError("base_processing_time must be non-negative")
        if not 0.0 <= self.base_noise < 1.0:
            raise ValueError("base_noise must lie in [0, 1)")


def make_proxy(
    circuit: Circuit,
    preferred_machine: str | None = None,
    strictness: float = 0.0,
    priority: int = 1,
    shots: int = 1024,
    estimates: tuple[float | None, float] = (None, 0.0),
) -> CircuitProxy:
    """Build the scheduling proxy for a circuit."""
    base_time, base_noise = estimates
    return CircuitProxy(
        id=derive_id(circuit.id, "proxy"),
        parent_id=circuit.id,
        num_qubits=circuit.num_qubits,
        depth=circuit.depth,
        preferred_machine=preferred_machine,
        strictness=strictness,
        priority=priority,
        shots=shots,
        base_processing_time=base_time,
        base_noise=base_noise,
    )


def circuit_to_dict(circuit: Circuit) -> dict:
    doc = {
        "id": circuit.id,
        "numQubits": circuit.num_qubits,
        "gates": [{"kind": g.kind, "qubits": list(g.qubits)} for g in circuit.gates],
    }
    if circuit.parent_id is not None:
        doc["parentId"] = circuit.parent_id
    return doc


def circuit_from_dict(doc: dict) -> Circuit:
    gates = tuple(Gate(g["kind"], tuple(g["qubits"])) for g in doc["gates"])
    return Circuit(
        id=doc["id"],
        num_qubits=doc["numQubits"],
        gates=gates,
        parent_id=doc.get("parentId"),
    )


def dump_circuit(circuit: Circuit) -> str:
    return json.dumps(circuit_to_dict(circuit), indent=2, sort_keys=True)


def load_circuit(text: str) -> Circuit:
    return circuit_from_dict(json.loads(text))
