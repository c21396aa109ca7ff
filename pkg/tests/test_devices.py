from __future__ import annotations

import random
from collections import deque

import pytest

from helpers import make_test_proxy, make_test_machines
from qsched.devices import (
    Machine,
    Platform,
    enqueue_schedule,
    form_batch,
    prepopulate,
    submit,
)
from qsched.estimation import EstimateModel
from qsched.evaluation import Schedule, evaluate

MODEL = EstimateModel(0.1, 0.0, 0.01, 0.5)


def fresh_machine(mid="m1", capacity=5, offset=0.0):
    m = Machine(id=mid, capacity=capacity, model=MODEL)
    m.load_offset = offset
    return m


def test_submit_immediate_on_idle_machine():
    rng = random.Random(0)
    platform = Platform([fresh_machine()])
    result = submit(platform, make_test_proxy(rng, num_qubits=3))
    assert result.kind == "immediate"
    assert result.machine_id == "m1"
    assert len(platform.machines[0].queue) == 1


def test_submit_immediate_prefers_smallest_sufficient_machine():
    rng = random.Random(1)
    platform = Platform([fresh_machine("big", 9), fresh_machine("small", 4)])
    result = submit(platform, make_test_proxy(rng, num_qubits=3))
    assert result.machine_id == "small"


def test_submit_with_preference_always_enqueues():
    rng = random.Random(2)
    platform = Platform([fresh_machine()])
    proxy = make_test_proxy(rng, num_qubits=2, preferred="m1", strictness=1.0)
    result = submit(platform, proxy)
    assert result.kind == "enqueued"
    assert list(platform.submission_queue) == [proxy]


def test_submit_backfills_free_capacity():
    rng = random.Random(3)
    machine = fresh_machine(offset=2.0)  # busy, so no immediate path
    platform = Platform([machine])
    first = make_test_proxy(rng, num_qubits=3, ptime=1.0)
    assert submit(platform, first).kind == "enqueued"
    # hand-place an entry holding q=3 on the capacity-5 machine
    batch = form_batch(platform.submission_queue, 10)
    schedule = Schedule({"m1": [[p] for p in batch]})
    enqueue_schedule(platform, schedule, evaluate(schedule, [machine]))
    result = submit(platform, make_test_proxy(rng, num_qubits=2, ptime=0.5))
    assert result.kind == "backfilled"
    assert machine.queue[result.timeslot].qubits_used == 5


def test_submit_backfilling_disabled():
    rng = random.Random(4)
    machine = fresh_machine(offset=2.0)
    platform = Platform([machine], backfilling=False)
    submit(platform, make_test_proxy(rng, num_qubits=3, ptime=1.0))
    batch = form_batch(platform.submission_queue, 10)
    schedule = Schedule({"m1": [[p] for p in batch]})
    enqueue_schedule(platform, schedule, evaluate(schedule, [machine]))
    result = submit(platform, make_test_proxy(rng, num_qubits=2, ptime=0.5))
    assert result.kind == "enqueued"


def test_backfilling_never_delays_existing_jobs():
    rng = random.Random(5)
    machines = [fresh_machine("m1", 6, offset=1.0), fresh_machine("m2", 5, offset=0.5)]
    platform = Platform(machines)
    for _ in range(6):
        submit(platform, make_test_proxy(rng, num_qubits=rng.randint(2, 4), ptime=rng.uniform(0.2, 2.0)))
    batch = form_batch(platform.submission_queue, 100)
    assignment = {"m1": [[p] for p in batch[:3]], "m2": [[p] for p in batch[3:]]}
    schedule = Schedule(assignment)
    enqueue_schedule(platform, schedule, evaluate(schedule, machines))
    before = {
        m.id: [(e.timeslot, e.start) for e in m.queue] for m in machines
    }
    for _ in range(10):
        submit(platform, make_test_proxy(rng, num_qubits=rng.randint(1, 3), ptime=rng.uniform(0.1, 3.0)))
    for m in machines:
        for timeslot, start in before[m.id]:
            assert m.queue[timeslot].start == start


def test_capacity_safety_after_backfills():
    rng = random.Random(6)
    machines = [fresh_machine("m1", 5, offset=1.0)]
    platform = Platform(machines)
    submit(platform, make_test_proxy(rng, num_qubits=4, ptime=1.0))
    batch = form_batch(platform.submission_queue, 10)
    schedule = Schedule({"m1": [[p] for p in batch]})
    enqueue_schedule(platform, schedule, evaluate(schedule, machines))
    for _ in range(20):
        submit(platform, make_test_proxy(rng, num_qubits=rng.randint(1, 5), ptime=0.1))
    for entry in machines[0].queue:
        assert entry.qubits_used <= 5


def test_form_batch_prefix_sum():
    rng = random.Random(7)
    queue = deque(
        make_test_proxy(rng, num_qubits=q) for q in (3, 4, 5)
    )
    batch = form_batch(queue, 8)
    assert [p.num_qubits for p in batch] == [3, 4]
    assert [p.num_qubits for p in queue] == [5]


def test_form_batch_unconstrained():
    rng = random.Random(8)
    queue = deque(make_test_proxy(rng, num_qubits=q) for q in (3, 4, 5))
    assert len(form_batch(queue, 100)) == 3
    assert not queue


def test_form_batch_oversize_head():
    rng = random.Random(9)
    queue = deque(
        [make_test_proxy(rng, num_qubits=12), make_test_proxy(rng, num_qubits=2)]
    )
    batch = form_batch(queue, 8)
    assert [p.num_qubits for p in batch] == [12]
    assert len(queue) == 1


def test_form_batch_empty_queue():
    assert form_batch(deque(), 8) == []


def test_form_batch_max_jobs():
    rng = random.Random(10)
    queue = deque(make_test_proxy(rng, num_qubits=1) for _ in range(10))
    assert len(form_batch(queue, 100, max_jobs=5)) == 5


def test_form_batch_preserves_fifo_order():
    rng = random.Random(11)
    proxies = [make_test_proxy(rng, num_qubits=2) for _ in range(4)]
    queue = deque(proxies)
    batch = form_batch(queue, 6)
    assert batch == proxies[:3]


def test_prepopulate_zero_range():
    machines = [fresh_machine(f"m{i}") for i in range(3)]
    prepopulate(machines, 1, (0.0, 0.0))
    assert all(m.load_offset == 0.0 for m in machines)


def test_prepopulate_deterministic():
    a = [fresh_machine(f"m{i}") for i in range(3)]
    b = [fresh_machine(f"m{i}") for i in range(3)]
    prepopulate(a, 42, (1.0, 9.0))
    prepopulate(b, 42, (1.0, 9.0))
    assert [m.load_offset for m in a] == [m.load_offset for m in b]


def test_prepopulate_golden_offsets():
    machines = [fresh_machine(f"m{i}") for i in range(3)]
    prepopulate(machines, 7, (10.0, 100.0))
    offsets = [m.load_offset for m in machines]
    assert offsets == pytest.approx(
        [39.14494883498462, 23.576425653205174, 68.58410257358685]
    )
    assert all(10.0 <= o <= 100.0 for o in offsets)


def test_prepopulate_rejects_bad_range():
    with pytest.raises(ValueError):
        prepopulate([fresh_machine()], 1, (5.0, 1.0))
    with pytest.raises(ValueError):
        prepopulate([fresh_machine()], 1, (-1.0, 1.0))


def test_enqueue_empty_schedule_keeps_state():
    machine = fresh_machine(offset=3.0)
    platform = Platform([machine])
    schedule = Schedule({"m1": []})
    enqueue_schedule(platform, schedule, evaluate(schedule, [machine]))
    assert machine.queue == []
    assert machine.queue_length == 3.0


def test_enqueue_two_slots_extends_queue_by_span():
    rng = random.Random(12)
    machine = fresh_machine(offset=1.0)
    platform = Platform([machine])
    a = make_test_proxy(rng, num_qubits=2, ptime=2.0)
    b = make_test_proxy(rng, num_qubits=2, ptime=3.0)
    schedule = Schedule({"m1": [[a], [b]]})
    enqueue_schedule(platform, schedule, evaluate(schedule, [machine]))
    assert len(machine.queue) == 2
    # offset 1.0 + 2.0 + setup 0.5 + 3.0
    assert machine.queue_length == pytest.approx(6.5)
    assert machine.queue[0].start == pytest.approx(1.0)


def test_enqueue_concurrent_jobs_in_one_entry():
    rng = random.Random(13)
    machine = fresh_machine(capacity=6)
    platform = Platform([machine])
    a = make_test_proxy(rng, num_qubits=3, ptime=1.0)
    b = make_test_proxy(rng, num_qubits=3, ptime=2.0)
    schedule = Schedule({"m1": [[a, b]]})
    enqueue_schedule(platform, schedule, evaluate(schedule, [machine]))
    assert len(machine.queue) == 1
    assert set(p.id for p in machine.queue[0].proxies) == {a.id, b.id}
    assert machine.queue[0].end == pytest.approx(2.0)


def test_enqueue_rejects_invalid_schedule():
    rng = random.Random(14)
    machine = fresh_machine(capacity=3)
    platform = Platform([machine])
    a = make_test_proxy(rng, num_qubits=2, ptime=1.0)
    b = make_test_proxy(rng, num_qubits=2, ptime=1.0)
    schedule = Schedule({"m1": [[a, b]]})  # 4 qubits > capacity 3
    with pytest.raises(ValueError):
        enqueue_schedule(platform, schedule)
    assert machine.queue == []


def test_queue_dump_schema():
    rng = random.Random(15)
    machine = fresh_machine()
    platform = Platform([machine])
    submit(platform, make_test_proxy(rng, num_qubits=2, ptime=1.0))
    doc = machine.queue_to_dict()
    assert doc["machine"] == "m1"
    assert len(doc["entries"]) == 1
    assert set(doc["entries"][0]) == {"timeslot", "jobs", "start", "end"}
