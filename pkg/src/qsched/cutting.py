"""Gate-cut estimation and application.

A cut is a qubit bipartition; every CX gate spanning the two blocks is
decomposed individually, which costs a factor of three in the coefficient
one-norm per gate. Cutting ``k`` gates therefore multiplies the required
shots by ``9**k`` and produces ``6**k`` local-operation variants. The
variants are folded into the fragment shot budgets rather than emitted as
separate jobs; ``shot_variant_schedule`` exposes the per-variant split for
reporting and execution backends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .circuits import CX, SINGLE, Circuit, CircuitProxy, Gate, derive_id
from .estimation import extrapolated_noise, scaled_processing_time

MAX_BRUTE_FORCE_QUBITS = 20

KAPPA_PER_CUT_GATE = 3
OVERHEAD_PER_CUT_GATE = 9
VARIANTS_PER_CUT_GATE = 6


class InfeasibleCutError(Exception):
    """No bipartition satisfies the size constraints."""


@dataclass(frozen=True, slots=True)
class CutPlan:
    """A qubit bipartition with its sampling-cost bookkeeping.

    ``partition[q]`` is 0 for block A and 1 for block B. ``kappa`` is the
    coefficient one-norm 3**k for k crossing CX gates, ``overhead`` the
    shot multiplier kappa**2, and ``variant_count`` the number 6**k of
    distinct local-operation substitutions.
    """

    partition: tuple[int, ...]
    crossing_gates: int
    kappa: int
    overhead: int
    fragment_sizes: tuple[int, int]
    variant_count: int

    def __post_init__(self) -> None:
        k = self.crossing_gates
        if self.kappa != KAPPA_PER_CUT_GATE**k:
            raise ValueError("kappa inconsistent with crossing gate count")
        if self.overhead != self.kappa**2:
            raise ValueError("overhead must equal kappa squared")
        if self.variant_count != VARIANTS_PER_CUT_GATE**k:
            raise ValueError("variant count inconsistent with crossing gate count")
        size_a, size_b = self.fragment_sizes
        if size_a < 1 or size_b < 1:
            raise ValueError("both blocks must be non-empty")
        if size_a + size_b != len(self.partition):
            raise ValueError("fragment sizes must sum to the qubit count")
        if size_a != self.partition.count(0) or size_b != self.partition.count(1):
            raise ValueError("fragment sizes inconsistent with partition")

    def to_dict(self) -> dict:
        return {
            "partition": list(self.partition),
            "crossingGates": self.crossing_gates,
            "kappa": self.kappa,
            "overhead": self.overhead,
            "variantCount": self.variant_count,
        }


@dataclass(frozen=True, slots=True)
class CutOutcome:
    fragment_proxies: tuple[CircuitProxy, CircuitProxy]
    fragment_circuits: tuple[Circuit, Circuit]
    plan: CutPlan


def plan_from_partition(circuit: Circuit, partition: Iterable[int]) -> CutPlan:
    """Build the plan for an explicit bipartition of ``circuit``."""
    partition = tuple(int(b) for b in partition)
    if len(partition) != circuit.num_qubits:
        raise ValueError("partition length must match the qubit count")
    if any(b not in (0, 1) for b in partition):
        raise ValueError("partition entries must be 0 (block A) or 1 (block B)")
    size_a = partition.count(0)
    size_b = partition.count(1)
    if size_a == 0 or size_b == 0:
        raise ValueError("both blocks must be non-empty")
    crossings = sum(1 for a, b in circuit.cx_pairs() if partition[a] != partition[b])
    return CutPlan(
        partition=partition,
        crossing_gates=crossings,
        kappa=KAPPA_PER_CUT_GATE**crossings,
        overhead=KAPPA_PER_CUT_GATE ** (2 * crossings),
        fragment_sizes=(size_a, size_b),
        variant_count=VARIANTS_PER_CUT_GATE**crossings,
    )


def estimate_cut(circuit: Circuit, max_a: int, max_b: int) -> CutPlan:
    """Exhaustively search for the bipartition with fewest crossing CX gates.

    All 2**q assignments are scored; ties are broken by smaller block A,
    then by the lexicographically smallest partition bit-vector, so the
    result is deterministic. Capped at 20 qubits.
    """
    q = circuit.num_qubits
    if q < 2:
        raise ValueError("cutting needs at least two qubits")
    if q > MAX_BRUTE_FORCE_QUBITS:
        raise ValueError(f"brute-force search is capped at {MAX_BRUTE_FORCE_QUBITS} qubits")
    if max_a < 1 or max_b < 1 or max_a + max_b < q:
        raise InfeasibleCutError(
            f"size constraints ({max_a}, {max_b}) cannot split {q} qubits"
        )

    masks = np.arange(1 << q, dtype=np.int64)
    size_b = np.zeros(1 << q, dtype=np.int64)
    lex_key = np.zeros(1 << q, dtype=np.int64)
    for bit in range(q):
        bit_set = (masks >> bit) & 1
        size_b += bit_set
        lex_key |= bit_set << (q - 1 - bit)
    size_a = q - size_b

    crossings = np.zeros(1 << q, dtype=np.int64)
    for a, b in circuit.cx_pairs():
        crossings += ((masks >> a) ^ (masks >> b)) & 1

    feasible = (size_a >= 1) & (size_b >= 1) & (size_a <= max_a) & (size_b <= max_b)
    if not feasible.any():
        raise InfeasibleCutError(
            f"size constraints ({max_a}, {max_b}) cannot split {q} qubits"
        )

    # Composite key: crossings first, then |A|, then lexicographic bit-vector.
    key = (crossings << (q + 6)) + (size_a << q) + lex_key
    key[~feasible] = np.iinfo(np.int64).max
    best = int(masks[int(np.argmin(key))])
    partition = tuple((best >> bit) & 1 for bit in range(q))
    return plan_from_partition(circuit, partition)


def apply_cut_to_circuit(circuit: Circuit, plan: CutPlan) -> tuple[Circuit, Circuit]:
    """Materialize the two fragments of a planned cut.

    Within-block gates are kept in order with qubits renumbered; each
    crossing CX leaves one single-qubit placeholder per side so fragment
    depths reflect the substituted local operations.
    """
    if len(plan.partition) != circuit.num_qubits:
        raise ValueError("plan does not match the circuit")
    index_map: dict[int, int] = {}
    counters = [0, 0]
    for qubit, block in enumerate(plan.partition):
        index_map[qubit] = counters[block]
        counters[block] += 1
    if (counters[0], counters[1]) != plan.fragment_sizes:
        raise ValueError("plan fragment sizes inconsistent with partition")

    gates: tuple[list[Gate], list[Gate]] = ([], [])
    for gate in circuit.gates:
        blocks = {plan.partition[q] for q in gate.qubits}
        if len(blocks) == 1:
            block = blocks.pop()
            remapped = tuple(index_map[q] for q in gate.qubits)
            gates[block].append(Gate(gate.kind, remapped))
        else:
            a, b = gate.qubits
            gates[plan.partition[a]].append(Gate(SINGLE, (index_map[a],)))
            gates[plan.partition[b]].append(Gate(SINGLE, (index_map[b],)))
    for block_gates in gates:
        if not block_gates:
            # a block of fully idle qubits still forms a runnable fragment
            block_gates.append(Gate(SINGLE, (0,)))

    tag = "".join(str(b) for b in plan.partition)
    fragments = tuple(
        Circuit(
            id=derive_id(circuit.id, f"cut-{tag}-{side}"),
            num_qubits=plan.fragment_sizes[block],
            gates=tuple(gates[block]),
            parent_id=circuit.id,
        )
        for block, side in ((0, "a"), (1, "b"))
    )
    return fragments


def apply_cut_to_proxy(
    parent: CircuitProxy,
    circuit: Circuit,
    plan: CutPlan,
    machines: Iterable[object],
) -> CutOutcome:
    """Cut a job into two fragment proxies with rescaled estimates.

    Fragment shot budgets absorb the full sampling overhead; processing
    times scale with the fragment/parent depth ratio and noise is
    re-extrapolated over the machine pool. User parameters and the root
    circuit linkage are inherited.
    """
    if plan.fragment_sizes[0] + plan.fragment_sizes[1] != parent.num_qubits:
        raise ValueError("plan fragment sizes do not match the parent proxy")
    if circuit.num_qubits != parent.num_qubits:
        raise ValueError("circuit does not match the parent proxy")
    machines = list(machines)
    frag_circuits = apply_cut_to_circuit(circuit, plan)
    shots = parent.shots * plan.overhead
    proxies = []
    for side, frag in zip(("a", "b"), frag_circuits):
        proxies.append(
            CircuitProxy(
                id=derive_id(parent.id, f"cut-{side}"),
                parent_id=parent.parent_id,
                num_qubits=frag.num_qubits,
                depth=frag.depth,
                preferred_machine=parent.preferred_machine,
                strictness=parent.strictness,
                priority=parent.priority,
                shots=shots,
                base_processing_time=scaled_processing_time(parent, frag.depth),
                base_noise=extrapolated_noise(parent, frag.depth, machines),
                is_fragment=True,
            )
        )
    return CutOutcome(
        fragment_proxies=(proxies[0], proxies[1]),
        fragment_circuits=frag_circuits,
        plan=plan,
    )


def shot_variant_schedule(plan: CutPlan, total_shots: int) -> list[tuple[int, int]]:
    """Apportion the overhead-scaled shots across the cut variants.

    All variants carry equal coefficient magnitude for CX cutting, so the
    split is near-uniform with the remainder assigned to the lowest
    variant indices (largest-remainder rule).
    """
    if total_shots < 1:
        raise ValueError("total_shots must be positive")
    count = plan.variant_count
    total = total_shots * plan.overhead
    base, remainder = divmod(total, count)
    return [(i, base + (1 if i < remainder else 0)) for i in range(count)]
