"""Simulated execution platform: device queues, submission, batching.

Every device exposes a single FIFO queue of timeslots. Jobs enter through
``submit``, which can bypass the scheduler for idle machines or backfill
gaps in existing timeslots; everything else waits in the submission queue
until the batch processor pulls a prefix bounded by the qubit threshold.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .circuits import CircuitProxy
from .estimation import EstimateModel

if TYPE_CHECKING:
    from .evaluation import EvaluationResult, Schedule


@dataclass(slots=True)
class QueuedEntry:
    """One timeslot in a device queue; members run concurrently."""

    timeslot: int
    proxies: tuple[CircuitProxy, ...]
    start: float
    end: float

    @property
    def qubits_used(self) -> int:
        return sum(p.num_qubits for p in self.proxies)


@dataclass(slots=True)
class Machine:
    """Simulated QPU with a FIFO device queue.

    ``load_offset`` is pre-populated pending work in seconds;
    ``queue_length`` is the total pending work including queued entries.
    """

    id: str
    capacity: int
    model: EstimateModel
    queue: list[QueuedEntry] = field(default_factory=list)
    load_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("machine capacity must be positive")

    @property
    def queue_length(self) -> float:
        if self.queue:
            return self.queue[-1].end
        return self.load_offset

    def queue_to_dict(self) -> dict:
        return {
            "machine": self.id,
            "loadOffset": self.load_offset,
            "entries": [
                {
                    "timeslot": e.timeslot,
                    "jobs": [p.id for p in e.proxies],
                    "start": e.start,
                    "end": e.end,
                }
                for e in self.queue
            ],
        }


@dataclass(slots=True)
class Platform:
    machines: list[Machine]
    submission_queue: deque[CircuitProxy] = field(default_factory=deque)
    backfilling: bool = True

    def machine(self, machine_id: str) -> Machine:
        for m in self.machines:
            if m.id == machine_id:
                return m
        raise KeyError(machine_id)


@dataclass(frozen=True, slots=True)
class SubmissionResult:
    kind: str  # "immediate" | "backfilled" | "enqueued"
    machine_id: str | None = None
    timeslot: int | None = None


def prepopulate(
    machines: Sequence[Machine], seed: int, load_range: tuple[float, float]
) -> Sequence[Machine]:
    """Draw a random pending-work offset per machine to simulate load."""
    lo, hi = load_range
    if lo < 0.0 or hi < lo:
        raise ValueError("load_range must satisfy 0 <= lo <= hi")
    rng = random.Random(seed)
    for machine in machines:
        machine.load_offset = rng.uniform(lo, hi)
    return machines


def submit(platform: Platform, proxy: CircuitProxy) -> SubmissionResult:
    """Route a job: run immediately, backfill a gap, or enqueue FIFO.

    Both fast paths are skipped when the user pinned a machine. Backfilling
    never delays queued work: a slot qualifies only if the job fits its
    free capacity and either the slot is last in its queue or the job is no
    longer than the slot's span.
    """
    if proxy.preferred_machine is None:
        idle = [
            m
            for m in platform.machines
            if not m.queue and m.load_offset == 0.0 and m.capacity >= proxy.num_qubits
        ]
        if idle:
            machine = min(idle, key=lambda m: (m.capacity, m.id))
            start = machine.queue_length
            machine.queue.append(
                QueuedEntry(
                    timeslot=0,
                    proxies=(proxy,),
                    start=start,
                    end=start + proxy.base_processing_time,
                )
            )
            return SubmissionResult("immediate", machine.id, 0)

        if platform.backfilling:
            candidates = []
            for machine in platform.machines:
                for idx, entry in enumerate(machine.queue):
                    free = machine.capacity - entry.qubits_used
                    if free < proxy.num_qubits:
                        continue
                    is_last = idx == len(machine.queue) - 1
                    fits_span = proxy.base_processing_time <= entry.end - entry.start
                    if is_last or fits_span:
                        candidates.append((entry.start, machine.id, idx, machine, entry))
            if candidates:
                _, _, idx, machine, entry = min(candidates, key=lambda c: c[:3])
                entry.proxies = entry.proxies + (proxy,)
                entry.end = max(entry.end, entry.start + proxy.base_processing_time)
                return SubmissionResult("backfilled", machine.id, idx)

    platform.submission_queue.append(proxy)
    return SubmissionResult("enqueued")


def form_batch(
    queue: deque[CircuitProxy], threshold: int, max_jobs: int | None = None
) -> list[CircuitProxy]:
    """Pop the longest FIFO prefix whose qubit sum stays within ``threshold``.

    An oversize head is emitted alone so the schedulers can cut it.
    """
    batch: list[CircuitProxy] = []
    total = 0
    while queue:
        if max_jobs is not None and len(batch) >= max_jobs:
            break
        head = queue[0]
        if not batch and head.num_qubits > threshold:
            batch.append(queue.popleft())
            break
        if total + head.num_qubits > threshold:
            break
        total += head.num_qubits
        batch.append(queue.popleft())
    return batch


def enqueue_schedule(
    platform: Platform,
    schedule: Schedule,
    result: EvaluationResult | None = None,
) -> None:
    """Append an evaluated schedule to the device queues.

    Timeslot groups land as single queued entries in order; entry times are
    shifted behind each machine's current pending work. Invalid schedules
    are rejected without touching the platform.
    """
    from .evaluation import evaluate

    if result is None:
        result = evaluate(schedule, platform.machines)
    if not result.valid:
        raise ValueError("schedule violates per-timeslot capacity; not enqueued")

    for machine in platform.machines:
        slots = schedule.assignment.get(machine.id, [])
        base = machine.queue_length
        next_index = len(machine.queue)
        for slot in slots:
            if not slot:
                continue
            starts = [result.per_job[p.id][0] for p in slot]
            ends = [result.per_job[p.id][1] for p in slot]
            machine.queue.append(
                QueuedEntry(
                    timeslot=next_index,
                    proxies=tuple(slot),
                    start=base + min(starts),
                    end=base + max(ends),
                )
            )
            next_index += 1
