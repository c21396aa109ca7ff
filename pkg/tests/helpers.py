"""Shared test fixtures: independent oracles and random instance builders.

The evaluation oracle transcribes the cost model directly from its
definition (completion recursion, machine score, max cost, noise sum) with
a structure unrelated to the implementation, so the two can check each
other.
"""

from __future__ import annotations

import random
import uuid

from qsched.circuits import CircuitProxy
from qsched.devices import Machine
from qsched.estimation import EstimateModel


def rand_id(rng: random.Random) -> str:
    return str(uuid.UUID(int=rng.getrandbits(128), version=4))


def make_test_proxy(
    rng: random.Random,
    num_qubits: int | None = None,
    ptime: float | None = None,
    priority: int | None = None,
    preferred: str | None = None,
    strictness: float = 0.0,
    depth: int | None = None,
    noise: float | None = None,
    is_fragment: bool = False,
    parent_id: str | None = None,
) -> CircuitProxy:
    jid = rand_id(rng)
    return CircuitProxy(
        id=jid,
        parent_id=parent_id if parent_id is not None else jid,
        num_qubits=num_qubits if num_qubits is not None else rng.randint(1, 5),
        depth=depth if depth is not None else rng.randint(1, 12),
        preferred_machine=preferred,
        strictness=strictness,
        priority=priority if priority is not None else rng.randint(1, 20),
        shots=1024,
        base_processing_time=ptime if ptime is not None else rng.uniform(0.2, 3.0),
        base_noise=noise if noise is not None else rng.uniform(0.0, 0.5),
        is_fragment=is_fragment,
    )


def make_test_machines(
    rng: random.Random,
    count: int,
    cap_range: tuple[int, int] = (3, 8),
    with_load: bool = True,
) -> list[Machine]:
    machines = []
    for i in range(count):
        model = EstimateModel(
            per_layer_time=rng.uniform(0.01, 0.05),
            per_shot_readout=rng.uniform(0.0, 1e-4),
            noise_per_qubit_layer=rng.uniform(0.001, 0.01),
            base_setup=rng.uniform(0.1, 1.0),
            fragment_setup=rng.choice([0.0, 0.0, 0.02]),
        )
        machine = Machine(id=f"m{i}", capacity=rng.randint(*cap_range), model=model)
        if with_load:
            machine.load_offset = rng.uniform(0.0, 4.0)
        machines.append(machine)
    return machines


def random_schedule_assignment(rng, proxies, machines):
    """Arbitrary (possibly over-capacity) assignment into random timeslots."""
    assignment = {m.id: [] for m in machines}
    for proxy in proxies:
        mid = rng.choice(machines).id
        slots = assignment[mid]
        idx = rng.randrange(len(slots) + 1)
        if idx == len(slots):
            slots.append([proxy])
        else:
            slots[idx].append(proxy)
    return assignment


def oracle_evaluate(schedule, machines):
    """Definition-level reimplementation of the schedule metrics.

    Returns (per_job, per_machine, cost, makespan, noise, valid).
    """
    per_job = {}
    per_machine = {}
    makespans = [0.0]
    noise = 0.0
    valid = True

    for machine in machines:
        completions = []
        terms = []
        clock = 0.0
        previous_slot = None
        for slot in schedule.assignment.get(machine.id, []):
            if len(slot) == 0:
                continue
            if sum(job.num_qubits for job in slot) > machine.capacity:
                valid = False
            if previous_slot is not None:
                # setup between the last-finishing job of the previous slot
                # (ties: the later one in slot order) and the slot's head
                longest = max(j.base_processing_time for j in previous_slot)
                last = [j for j in previous_slot if j.base_processing_time == longest][-1]
                if last.parent_id == slot[0].parent_id:
                    clock += machine.model.fragment_setup
                else:
                    clock += machine.model.base_setup
            slot_start = clock
            for job in slot:
                c = slot_start + job.base_processing_time
                per_job[job.id] = (slot_start, c)
                completions.append(c)
                on_preferred = 1 if job.preferred_machine == machine.id else 0
                if schedule.preference_mode == "penalty_when_off":
                    pref = (1 - on_preferred) * job.strictness * schedule.beta
                else:
                    pref = on_preferred * job.strictness * schedule.beta
                terms.append(c * job.priority * schedule.alpha + pref)
                if job.is_fragment or job.num_qubits > machine.capacity:
                    noise += job.base_noise
                else:
                    eps = machine.model.noise_per_qubit_layer
                    noise += 1.0 - (1.0 - eps) ** (job.num_qubits * job.depth)
            clock = slot_start + max(j.base_processing_time for j in slot)
            previous_slot = slot
        per_machine[machine.id] = machine.queue_length + (max(terms) if terms else 0.0)
        if completions:
            makespans.append(max(completions))

    cost = max(per_machine.values()) if per_machine else 0.0
    return per_job, per_machine, cost, max(makespans), noise, valid
