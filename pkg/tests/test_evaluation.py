from __future__ import annotations

import math
import random

import pytest

from helpers import (
    make_test_machines,
    make_test_proxy,
    oracle_evaluate,
    random_schedule_assignment,
)
from qsched.devices import Machine
from qsched.estimation import EstimateModel
from qsched.evaluation import Schedule, evaluate, is_valid, schedule_distance

MODEL = EstimateModel(0.1, 0.0, 0.01, 0.5)


def machine(mid="m1", capacity=5, offset=0.0, setup=0.5):
    m = Machine(id=mid, capacity=capacity, model=EstimateModel(0.1, 0.0, 0.01, setup))
    m.load_offset = offset
    return m


def test_single_job_hand_evaluation():
    rng = random.Random(0)
    job = make_test_proxy(rng, ptime=2.0, priority=1)
    result = evaluate(Schedule({"m1": [[job]]}), [machine()])
    assert result.per_job[job.id] == (0.0, 2.0)
    assert result.per_machine["m1"] == pytest.approx(2.0)
    assert result.cost == pytest.approx(2.0)
    assert result.makespan == pytest.approx(2.0)
    assert result.valid


def test_two_job_chain_with_setup():
    rng = random.Random(1)
    a = make_test_proxy(rng, ptime=2.0, priority=1)
    b = make_test_proxy(rng, ptime=3.0, priority=1)
    result = evaluate(Schedule({"m1": [[a], [b]]}), [machine()])
    assert result.per_job[a.id][1] == pytest.approx(2.0)
    assert result.per_job[b.id][1] == pytest.approx(5.5)


def test_empty_schedule_cost_is_max_load():
    machines = [machine("m1", offset=1.0), machine("m2", offset=7.0)]
    result = evaluate(Schedule({}), machines)
    assert result.cost == pytest.approx(7.0)
    assert result.makespan == 0.0
    assert result.noise == 0.0


def test_preference_term_as_written():
    rng = random.Random(2)
    job = make_test_proxy(rng, ptime=2.0, priority=1, preferred="m1", strictness=2.0)
    result = evaluate(Schedule({"m1": [[job]]}), [machine()])
    # c*rho*alpha + delta*sigma*beta = 2*1*1 + 1*2*1
    assert result.per_machine["m1"] == pytest.approx(4.0)


def test_preference_term_penalty_when_off_mode():
    rng = random.Random(3)
    job = make_test_proxy(rng, ptime=2.0, priority=1, preferred="m1", strictness=2.0)
    machines = [machine("m1"), machine("m2", capacity=9)]
    on_pref = Schedule({"m1": [[job]]}, preference_mode="penalty_when_off")
    off_pref = Schedule({"m2": [[job]]}, preference_mode="penalty_when_off")
    assert evaluate(on_pref, machines).per_machine["m1"] == pytest.approx(2.0)
    assert evaluate(off_pref, machines).per_machine["m2"] == pytest.approx(4.0)


def test_concurrent_slot_shares_start():
    rng = random.Random(4)
    a = make_test_proxy(rng, num_qubits=2, ptime=1.0)
    b = make_test_proxy(rng, num_qubits=2, ptime=2.5)
    c = make_test_proxy(rng, num_qubits=2, ptime=1.0)
    result = evaluate(Schedule({"m1": [[a, b], [c]]}), [machine(capacity=6)])
    assert result.per_job[a.id] == (0.0, 1.0)
    assert result.per_job[b.id] == (0.0, 2.5)
    # next slot starts after the longest member plus setup
    assert result.per_job[c.id][0] == pytest.approx(3.0)


def test_sibling_fragments_skip_setup():
    rng = random.Random(5)
    a = make_test_proxy(rng, ptime=1.0, parent_id="root", is_fragment=True)
    b = make_test_proxy(rng, ptime=1.0, parent_id="root", is_fragment=True)
    result = evaluate(Schedule({"m1": [[a], [b]]}), [machine()])
    assert result.per_job[b.id][0] == pytest.approx(1.0)  # no base setup


def test_invalid_flag_on_over_capacity():
    rng = random.Random(6)
    a = make_test_proxy(rng, num_qubits=3, ptime=1.0)
    b = make_test_proxy(rng, num_qubits=3, ptime=1.0)
    schedule = Schedule({"m1": [[a, b]]})
    assert not evaluate(schedule, [machine(capacity=5)]).valid
    assert not is_valid(schedule, [machine(capacity=5)])


def test_is_valid_boundary():
    rng = random.Random(7)
    a = make_test_proxy(rng, num_qubits=5, ptime=1.0)
    assert is_valid(Schedule({"m1": [[a]]}), [machine(capacity=5)])
    assert is_valid(Schedule({}), [machine()])


def test_duplicate_job_rejected():
    rng = random.Random(8)
    a = make_test_proxy(rng, ptime=1.0)
    with pytest.raises(ValueError):
        evaluate(Schedule({"m1": [[a], [a]]}), [machine()])


def test_unset_processing_time_rejected():
    rng = random.Random(9)
    a = make_test_proxy(rng, ptime=1.0)
    b = object.__new__(type(a))
    for slot_name in a.__slots__:
        object.__setattr__(b, slot_name, getattr(a, slot_name))
    object.__setattr__(b, "base_processing_time", None)
    object.__setattr__(b, "id", "unset")
    with pytest.raises(ValueError):
        evaluate(Schedule({"m1": [[b]]}), [machine()])


def test_cost_dominates_every_machine_load():
    rng = random.Random(10)
    for _ in range(20):
        machines = make_test_machines(rng, rng.randint(1, 4))
        proxies = [make_test_proxy(rng) for _ in range(rng.randint(0, 6))]
        schedule = Schedule(random_schedule_assignment(rng, proxies, machines))
        result = evaluate(schedule, machines)
        for m in machines:
            assert result.cost >= m.queue_length - 1e-12


def test_chain_recursion_consistency():
    # singleton slots: each completion exceeds its predecessor by >= p
    rng = random.Random(11)
    for _ in range(20):
        machines = make_test_machines(rng, 2)
        proxies = [make_test_proxy(rng) for _ in range(5)]
        assignment = {m.id: [] for m in machines}
        for p in proxies:
            assignment[rng.choice(machines).id].append([p])
        result = evaluate(Schedule(assignment), machines)
        for m in machines:
            chain = [slot[0] for slot in assignment[m.id]]
            for prev, nxt in zip(chain, chain[1:]):
                gap = result.per_job[nxt.id][1] - result.per_job[prev.id][1]
                assert gap >= nxt.base_processing_time - 1e-12


def test_evaluate_matches_independent_oracle():
    rng = random.Random(12)
    for _ in range(200):
        machines = make_test_machines(rng, rng.randint(1, 3))
        proxies = [make_test_proxy(rng) for _ in range(rng.randint(1, 6))]
        schedule = Schedule(
            random_schedule_assignment(rng, proxies, machines),
            alpha=rng.uniform(0.1, 2.0),
            beta=rng.uniform(0.1, 2.0),
            preference_mode=rng.choice(["as_written", "penalty_when_off"]),
        )
        result = evaluate(schedule, machines)
        per_job, per_machine, cost, makespan, noise, valid = oracle_evaluate(
            schedule, machines
        )
        assert result.valid == valid
        assert math.isclose(result.cost, cost, rel_tol=1e-9, abs_tol=1e-12)
        assert math.isclose(result.makespan, makespan, rel_tol=1e-9, abs_tol=1e-12)
        assert math.isclose(result.noise, noise, rel_tol=1e-9, abs_tol=1e-12)
        for jid, (b, c) in per_job.items():
            assert math.isclose(result.per_job[jid][0], b, rel_tol=1e-9, abs_tol=1e-12)
            assert math.isclose(result.per_job[jid][1], c, rel_tol=1e-9, abs_tol=1e-12)
        for mid, score in per_machine.items():
            assert math.isclose(result.per_machine[mid], score, rel_tol=1e-9, abs_tol=1e-12)


def test_noise_additive_over_machine_restrictions():
    rng = random.Random(13)
    machines = make_test_machines(rng, 3)
    proxies = [make_test_proxy(rng) for _ in range(8)]
    schedule = Schedule(random_schedule_assignment(rng, proxies, machines))
    total = evaluate(schedule, machines).noise
    parts = 0.0
    for m in machines:
        sub = Schedule({m.id: schedule.assignment[m.id]})
        parts += evaluate(sub, [m]).noise
    assert total == pytest.approx(parts)


def test_priority_scaling_preserves_argmin():
    # doubling every priority must not change which schedule is optimal
    from qsched.schedulers import exact_schedule

    rng = random.Random(14)
    for trial in range(5):
        machines = make_test_machines(rng, 2, with_load=True)
        load = rng.uniform(0.0, 2.0)
        for m in machines:
            m.load_offset = load  # equal pending work
        base = [
            make_test_proxy(rng, num_qubits=rng.randint(1, 3), priority=rng.randint(1, 10))
            for _ in range(3)
        ]
        doubled = [
            type(p)(
                id=p.id,
                parent_id=p.parent_id,
                num_qubits=p.num_qubits,
                depth=p.depth,
                preferred_machine=None,
                strictness=0.0,
                priority=p.priority * 2,
                shots=p.shots,
                base_processing_time=p.base_processing_time,
                base_noise=p.base_noise,
            )
            for p in base
        ]
        s1 = exact_schedule(base, machines)
        s2 = exact_schedule(doubled, machines)
        shape1 = {m: [[p.num_qubits for p in slot] for slot in s]
                  for m, s in s1.assignment.items()}
        shape2 = {m: [[p.num_qubits for p in slot] for slot in s]
                  for m, s in s2.assignment.items()}
        assert shape1 == shape2


def test_distance_identity():
    rng = random.Random(15)
    machines = make_test_machines(rng, 2)
    proxies = [make_test_proxy(rng) for _ in range(4)]
    schedule = Schedule(random_schedule_assignment(rng, proxies, machines))
    result = evaluate(schedule, machines)
    assert schedule_distance(schedule, result, schedule, result) == 0.0


def test_distance_single_start_shift():
    rng = random.Random(16)
    a = make_test_proxy(rng, ptime=1.5, parent_id="x")
    b = make_test_proxy(rng, ptime=2.0, parent_id="x")  # sibling: no setup
    m = machine()
    s1 = Schedule({"m1": [[a], [b]]})
    s2 = Schedule({"m1": [[b], [a]]})
    r1, r2 = evaluate(s1, [m]), evaluate(s2, [m])
    # a starts at 0 vs 2.0; b starts at 1.5 vs 0
    d = schedule_distance(s1, r1, s2, r2)
    assert d == pytest.approx(2.0 + 1.5)


def test_distance_moved_job_takes_max_machine_length():
    rng = random.Random(17)
    stay = make_test_proxy(rng, ptime=10.0)
    move = make_test_proxy(rng, ptime=8.0)
    machines = [machine("m1", capacity=9), machine("m2", capacity=9)]
    s1 = Schedule({"m1": [[stay], [move]]})  # m1 length 10 + 0.5 + 8
    s2 = Schedule({"m1": [[stay]], "m2": [[move]]})  # m2 length 8
    r1, r2 = evaluate(s1, machines), evaluate(s2, machines)
    d = schedule_distance(s1, r1, s2, r2)
    # stay keeps its machine and start; move contributes max(18.5, 8)
    assert d == pytest.approx(max(r1.per_job[move.id][1], 8.0))


def test_distance_axioms_random():
    rng = random.Random(18)
    for _ in range(60):
        machines = make_test_machines(rng, rng.randint(1, 3))
        proxies = [make_test_proxy(rng) for _ in range(rng.randint(1, 5))]
        s1 = Schedule(random_schedule_assignment(rng, proxies, machines))
        s2 = Schedule(random_schedule_assignment(rng, proxies, machines))
        r1, r2 = evaluate(s1, machines), evaluate(s2, machines)
        d12 = schedule_distance(s1, r1, s2, r2)
        d21 = schedule_distance(s2, r2, s1, r1)
        assert d12 >= 0.0
        assert d12 == pytest.approx(d21)
        assert schedule_distance(s1, r1, s1, r1) == 0.0


def test_distance_rejects_mismatched_jobs():
    rng = random.Random(19)
    machines = make_test_machines(rng, 2)
    s1 = Schedule(random_schedule_assignment(rng, [make_test_proxy(rng)], machines))
    s2 = Schedule(random_schedule_assignment(rng, [make_test_proxy(rng)], machines))
    r1, r2 = evaluate(s1, machines), evaluate(s2, machines)
    with pytest.raises(ValueError):
        schedule_distance(s1, r1, s2, r2)
