"""Schedule data model, cost evaluation, and the inter-schedule distance.

Evaluation linearizes each machine's timeslots, chains completion times
through per-pair setup times, scores each machine by its worst
priority/preference-weighted completion term on top of the pending queue,
and takes the maximum machine score as the schedule cost. Jobs grouped in
one timeslot run as a combined circuit: they share the slot start and the
slot cannot end before its longest member.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .circuits import CircuitProxy
from .devices import Machine
from .estimation import base_noise, setup_time

PREFERENCE_AS_WRITTEN = "as_written"
PREFERENCE_PENALTY_WHEN_OFF = "penalty_when_off"
PREFERENCE_MODES = (PREFERENCE_AS_WRITTEN, PREFERENCE_PENALTY_WHEN_OFF)


@dataclass(slots=True)
class Schedule:
    """Assignment of proxies to (machine, timeslot).

    ``assignment`` maps machine ids to ordered timeslot lists; a timeslot
    is an ordered list of proxies running concurrently. Over-capacity
    schedules are representable (the searchers allow them) but evaluate as
    invalid.
    """

    assignment: dict[str, list[list[CircuitProxy]]]
    alpha: float = 1.0
    beta: float = 1.0
    preference_mode: str = PREFERENCE_AS_WRITTEN

    def __post_init__(self) -> None:
        if self.preference_mode not in PREFERENCE_MODES:
            raise ValueError(f"unknown preference mode {self.preference_mode!r}")

    def clone(self) -> Schedule:
        return Schedule(
            assignment={
                mid: [list(slot) for slot in slots]
                for mid, slots in self.assignment.items()
            },
            alpha=self.alpha,
            beta=self.beta,
            preference_mode=self.preference_mode,
        )

    def jobs(self) -> list[CircuitProxy]:
        return [p for slots in self.assignment.values() for slot in slots for p in slot]

    def job_machines(self) -> dict[str, str]:
        placed: dict[str, str] = {}
        for mid, slots in self.assignment.items():
            for slot in slots:
                for proxy in slot:
                    if proxy.id in placed:
                        raise ValueError(f"job {proxy.id} appears more than once")
                    placed[proxy.id] = mid
        return placed

    def compact(self) -> None:
        """Drop empty timeslots left behind by moves."""
        for mid in self.assignment:
            self.assignment[mid] = [s for s in self.assignment[mid] if s]


@dataclass(slots=True)
class EvaluationResult:
    per_job: dict[str, tuple[float, float]]  # id -> (start, completion)
    per_machine: dict[str, float]
    cost: float
    makespan: float
    noise: float
    valid: bool
    machine_spans: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "perJob": {
                jid: {"start": b, "completion": c}
                for jid, (b, c) in sorted(self.per_job.items())
            },
            "perMachine": dict(sorted(self.per_machine.items())),
            "cost": self.cost,
            "makespan": self.makespan,
            "noise": self.noise,
            "valid": self.valid,
        }


def job_noise(proxy: CircuitProxy, machine: Machine) -> float:
    """Noise term a scheduled assignment contributes to the total.

    Originals that fit use the device-specific estimate; fragments keep the
    extrapolated value from cut time, and oversize placements fall back to
    the stored estimate so evaluation stays total.
    """
    if not proxy.is_fragment:
        value = base_noise(proxy, machine)
        if value is not None:
            return value
    return proxy.base_noise


def evaluate(schedule: Schedule, machines: Sequence[Machine]) -> EvaluationResult:
    """Derive job times, machine scores, cost, makespan, and total noise."""
    alpha = schedule.alpha
    beta = schedule.beta
    penalty_when_off = schedule.preference_mode == PREFERENCE_PENALTY_WHEN_OFF

    per_job: dict[str, tuple[float, float]] = {}
    per_machine: dict[str, float] = {}
    machine_spans: dict[str, float] = {}
    total_noise = 0.0
    makespan = 0.0
    valid = True
    seen: set[str] = set()

    for machine in machines:
        slots = schedule.assignment.get(machine.id, [])
        clock = 0.0
        prev_last: CircuitProxy | None = None
        worst = 0.0
        for slot in slots:
            if not slot:
                continue
            qubits = 0
            setup = setup_time(prev_last, slot[0], machine)
            start = clock + setup
            span = 0.0
            last = None
            for proxy in slot:
                if proxy.base_processing_time is None:
                    raise ValueError(f"proxy {proxy.id} has no processing-time estimate")
                if proxy.id in seen:
                    raise ValueError(f"job {proxy.id} appears more than once")
                seen.add(proxy.id)
                qubits += proxy.num_qubits
                duration = proxy.base_processing_time
                completion = start + duration
                per_job[proxy.id] = (start, completion)
                if duration >= span:
                    span = duration
                    last = proxy
                delta_on = proxy.preferred_machine == machine.id
                if penalty_when_off:
                    pref = 0.0 if delta_on else proxy.strictness * beta
                else:
                    pref = proxy.strictness * beta if delta_on else 0.0
                term = completion * proxy.priority * alpha + pref
                if term > worst:
                    worst = term
                total_noise += job_noise(proxy, machine)
            if qubits > machine.capacity:
                valid = False
            clock = start + span
            prev_last = last
        per_machine[machine.id] = machine.queue_length + worst
        machine_spans[machine.id] = clock
        if clock > makespan:
            makespan = clock

    known = {m.id for m in machines}
    for mid in schedule.assignment:
        if mid not in known:
            raise ValueError(f"schedule references unknown machine {mid!r}")

    cost = max(per_machine.values()) if per_machine else 0.0
    return EvaluationResult(
        per_job=per_job,
        per_machine=per_machine,
        cost=cost,
        makespan=makespan,
        noise=total_noise,
        valid=valid,
        machine_spans=machine_spans,
    )


def is_valid(schedule: Schedule, machines: Sequence[Machine]) -> bool:
    """True iff every timeslot fits its machine's qubit capacity."""
    capacities = {m.id: m.capacity for m in machines}
    for mid, slots in schedule.assignment.items():
        if mid not in capacities:
            return False
        cap = capacities[mid]
        for slot in slots:
            if sum(p.num_qubits for p in slot) > cap:
                return False
    return True


def _spans_by_machine(result: EvaluationResult, schedule: Schedule) -> dict[str, float]:
    spans: dict[str, float] = {}
    for mid, slots in schedule.assignment.items():
        best = 0.0
        for slot in slots:
            for proxy in slot:
                c = result.per_job[proxy.id][1]
                if c > best:
                    best = c
        spans[mid] = best
    return spans


def schedule_distance(
    s1: Schedule,
    r1: EvaluationResult,
    s2: Schedule,
    r2: EvaluationResult,
) -> float:
    """Hamming-style distance between two schedules over the same jobs.

    Jobs on the same machine in both schedules contribute their start-time
    shift; a job that changed machine contributes the larger of the two
    machine lengths (max completion on the job's machine in each schedule).
    """
    m1 = s1.job_machines()
    m2 = s2.job_machines()
    if set(m1) != set(m2):
        raise ValueError("schedules must cover the same job set")
    spans1 = _spans_by_machine(r1, s1)
    spans2 = _spans_by_machine(r2, s2)
    total = 0.0
    for jid, mid1 in m1.items():
        mid2 = m2[jid]
        if mid1 == mid2:
            total += abs(r1.per_job[jid][0] - r2.per_job[jid][0])
        else:
            total += max(spans1.get(mid1, 0.0), spans2.get(mid2, 0.0))
    return total
