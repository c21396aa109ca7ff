"""Schedule-refinement MDP and a small policy-gradient trainer.

The environment starts from the feasible bin-packing schedule and lets an
agent cut jobs, move or swap them between timeslots, and terminate once
the schedule is valid. The per-step reward is the negated linear
combination of schedule cost and total expected noise; malformed actions
and over-capacity states cost an additional flat penalty. The trainer
optimizes a linear-softmax policy with a clipped-surrogate objective and a
linear value baseline — enough for the desk-scale environments here, not a
general RL framework.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .circuits import Circuit, CircuitProxy
from .cutting import CutOutcome, apply_cut_to_proxy, plan_from_partition
from .devices import Machine
from .evaluation import PREFERENCE_AS_WRITTEN, Schedule, evaluate, is_valid
from .schedulers import _binpack_assignment, _resolve_cuts

TERMINATE = "terminate"
CUT = "cut"
MOVE = "move"
SWAP = "swap"


@dataclass(frozen=True, slots=True)
class Action:
    kind: str
    job: int = 0
    position: int = 0
    machine: int = 0
    timeslot: int = 0
    partner: int = 0


class SchedulingEnv:
    """MDP over schedule refinements for one batch.

    Every (state, action) pair has a defined successor: malformed indices
    and illegal refinements leave the schedule unchanged and charge the
    penalty instead of raising.
    """

    def __init__(
        self,
        batch: Sequence[CircuitProxy],
        machines: Sequence[Machine],
        circuits: Mapping[str, Circuit] | None = None,
        mu: float = 0.5,
        nu: float = 5.0,
        alpha: float = 1.0,
        beta: float = 1.0,
        preference_mode: str = PREFERENCE_AS_WRITTEN,
        penalty: float | None = None,
        max_steps: int | None = None,
    ) -> None:
        if not batch:
            raise ValueError("batch must not be empty")
        self.batch = list(batch)
        self.machines = list(machines)
        self.mu = mu
        self.nu = nu
        self.alpha = alpha
        self.beta = beta
        self.preference_mode = preference_mode

        jobs, cuts, circ = _resolve_cuts(batch, machines, circuits)
        self._initial_jobs = jobs
        self._initial_cuts = tuple(cuts)
        self._initial_circuits = circ
        self.initial_schedule = Schedule(
            _binpack_assignment(jobs, machines),
            alpha=alpha,
            beta=beta,
            preference_mode=preference_mode,
        )

        self.max_jobs = sum(p.num_qubits for p in self.batch)
        self.max_slots = self.max_jobs
        self.max_cut_qubits = max(p.num_qubits for p in self.batch)
        total_time = sum(p.base_processing_time or 0.0 for p in jobs)
        if penalty is None:
            penalty = mu * total_time * 20.0 or 1.0
        self.penalty = penalty
        self.max_steps = max_steps if max_steps is not None else 10 * len(self.batch)

        self._cut_span = max(self.max_cut_qubits - 1, 1)
        self._move_span = len(self.machines) * (self.max_slots + 1)
        self._cut_base = 1
        self._move_base = self._cut_base + self.max_jobs * self._cut_span
        self._swap_base = self._move_base + self.max_jobs * self._move_span
        self.num_actions = self._swap_base + self.max_jobs * self.max_jobs

        # Observation scaling chosen per scenario so features stay in [0, 1].
        self._q_norm = float(max(self.max_cut_qubits, max(m.capacity for m in machines)))
        self._d_norm = float(max(p.depth for p in jobs))
        self._p_norm = total_time or 1.0
        max_setup = max(m.model.base_setup for m in machines)
        self._c_norm = total_time + self.max_jobs * max_setup or 1.0
        self._load_norm = max(m.queue_length for m in machines) + 1.0
        self._cap_norm = float(max(m.capacity for m in machines))
        self.observation_size = self.max_jobs * 7 + len(self.machines) * 2

        self.reset()

    # -- action encoding ---------------------------------------------------

    def decode_action(self, index: int) -> Action | None:
        """Map a flat action index to a structured action; None if out of range."""
        if not 0 <= index < self.num_actions:
            return None
        if index == 0:
            return Action(TERMINATE)
        if index < self._move_base:
            offset = index - self._cut_base
            job, pos = divmod(offset, self._cut_span)
            return Action(CUT, job=job, position=pos + 1)
        if index < self._swap_base:
            offset = index - self._move_base
            job, rest = divmod(offset, self._move_span)
            machine, slot = divmod(rest, self.max_slots + 1)
            return Action(MOVE, job=job, machine=machine, timeslot=slot)
        offset = index - self._swap_base
        a, b = divmod(offset, self.max_jobs)
        return Action(SWAP, job=a, partner=b)

    def encode_action(self, action: Action) -> int:
        if action.kind == TERMINATE:
            return 0
        if action.kind == CUT:
            return self._cut_base + action.job * self._cut_span + (action.position - 1)
        if action.kind == MOVE:
            return (
                self._move_base
                + action.job * self._move_span
                + action.machine * (self.max_slots + 1)
                + action.timeslot
            )
        if action.kind == SWAP:
            return self._swap_base + action.job * self.max_jobs + action.partner
        raise ValueError(f"unknown action kind {action.kind!r}")

    # -- state -------------------------------------------------------------

    def reset(self) -> np.ndarray:
        self.current = self.initial_schedule.clone()
        self.jobs: list[CircuitProxy] = list(self._initial_jobs)
        self.circuits: dict[str, Circuit] = dict(self._initial_circuits)
        self.cuts: list[CutOutcome] = list(self._initial_cuts)
        self.step_count = 0
        self.done = False
        self.last_action_valid = True
        self.last_result = evaluate(self.current, self.machines)
        return self.observe()

    def _locate(self, proxy_id: str) -> tuple[str, int, int]:
        for mid, slots in self.current.assignment.items():
            for k, slot in enumerate(slots):
                for p, proxy in enumerate(slot):
                    if proxy.id == proxy_id:
                        return mid, k, p
        raise KeyError(proxy_id)

    def action_mask(self) -> np.ndarray:
        """Structurally addressable actions in the current state.

        Malformed indices and the explicitly illegal same-slot move are
        masked out; refinements that merely over-fill a machine stay
        available (the penalty handles them). step() remains total for any
        index regardless of the mask.
        """
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[0] = True
        locations = {}
        for mid, slots in self.current.assignment.items():
            for k, slot in enumerate(slots):
                for proxy in slot:
                    locations[proxy.id] = (mid, k)
        can_cut = len(self.jobs) < self.max_jobs
        for j, proxy in enumerate(self.jobs):
            if j >= self.max_jobs:
                break
            if can_cut and self.circuits.get(proxy.id) is not None:
                top = min(proxy.num_qubits, self.max_cut_qubits)
                base = self._cut_base + j * self._cut_span
                for n in range(1, top):
                    mask[base + (n - 1)] = True
            mid, slot_idx = locations[proxy.id]
            for m_idx, machine in enumerate(self.machines):
                slot_count = len(self.current.assignment[machine.id])
                base = self._move_base + j * self._move_span + m_idx * (self.max_slots + 1)
                for s in range(min(slot_count + 1, self.max_slots + 1)):
                    if machine.id == mid and s == slot_idx:
                        continue
                    mask[base + s] = True
            for partner in range(len(self.jobs)):
                if partner != j:
                    mask[self._swap_base + j * self.max_jobs + partner] = True
        return mask

    def observe(self) -> np.ndarray:
        obs = np.zeros(self.observation_size, dtype=np.float64)
        machine_norm = max(len(self.machines) - 1, 1)
        machine_index = {m.id: i for i, m in enumerate(self.machines)}
        slot_index: dict[str, tuple[int, int]] = {}
        for mid, slots in self.current.assignment.items():
            for k, slot in enumerate(slots):
                for proxy in slot:
                    slot_index[proxy.id] = (machine_index[mid], k)
        for row, proxy in enumerate(self.jobs[: self.max_jobs]):
            m_idx, s_idx = slot_index[proxy.id]
            b, c = self.last_result.per_job[proxy.id]
            base = row * 7
            obs[base] = m_idx / machine_norm
            obs[base + 1] = min(s_idx / self.max_slots, 1.0)
            obs[base + 2] = proxy.num_qubits / self._q_norm
            obs[base + 3] = min(proxy.depth / self._d_norm, 1.0)
            obs[base + 4] = min((proxy.base_processing_time or 0.0) / self._p_norm, 1.0)
            obs[base + 5] = proxy.base_noise
            obs[base + 6] = min(c / self._c_norm, 1.0)
        tail = self.max_jobs * 7
        for i, machine in enumerate(self.machines):
            obs[tail + 2 * i] = min(machine.queue_length / self._load_norm, 1.0)
            obs[tail + 2 * i + 1] = machine.capacity / self._cap_norm
        return obs

    # -- transitions ---------------------------------------------------------

    def _apply_cut(self, action: Action) -> bool:
        if action.job >= len(self.jobs):
            return False
        proxy = self.jobs[action.job]
        n = action.position
        if n < 1 or n >= proxy.num_qubits:
            return False
        if len(self.jobs) + 1 > self.max_jobs:
            return False
        circuit = self.circuits.get(proxy.id)
        if circuit is None:
            return False
        partition = [0] * n + [1] * (proxy.num_qubits - n)
        plan = plan_from_partition(circuit, partition)
        outcome = apply_cut_to_proxy(proxy, circuit, plan, self.machines)
        mid, k, p = self._locate(proxy.id)
        del self.current.assignment[mid][k][p]
        self.current.compact()
        for frag_proxy, frag_circuit in zip(
            outcome.fragment_proxies, outcome.fragment_circuits
        ):
            self.current.assignment[mid].append([frag_proxy])
            self.circuits[frag_proxy.id] = frag_circuit
        self.jobs.pop(action.job)
        self.jobs.extend(outcome.fragment_proxies)
        self.cuts.append(outcome)
        return True

    def _apply_move(self, action: Action) -> bool:
        if action.job >= len(self.jobs) or action.machine >= len(self.machines):
            return False
        proxy = self.jobs[action.job]
        target_id = self.machines[action.machine].id
        mid, k, p = self._locate(proxy.id)
        slots = self.current.assignment[target_id]
        if target_id == mid and action.timeslot == k:
            return False
        if action.timeslot > len(slots):
            return False
        del self.current.assignment[mid][k][p]
        if action.timeslot == len(slots):
            slots.append([proxy])
        else:
            slots[action.timeslot].append(proxy)
        self.current.compact()
        return True

    def _apply_swap(self, action: Action) -> bool:
        a, b = action.job, action.partner
        if a == b or a >= len(self.jobs) or b >= len(self.jobs):
            return False
        pa = self.jobs[a]
        pb = self.jobs[b]
        ma, ka, ia = self._locate(pa.id)
        mb, kb, ib = self._locate(pb.id)
        self.current.assignment[ma][ka][ia] = pb
        self.current.assignment[mb][kb][ib] = pa
        return True

    def step(self, action_index: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("episode is done; call reset()")
        action = self.decode_action(int(action_index))
        valid = False
        if action is not None:
            if action.kind == TERMINATE:
                valid = is_valid(self.current, self.machines)
                if valid:
                    self.done = True
            elif action.kind == CUT:
                valid = self._apply_cut(action)
            elif action.kind == MOVE:
                valid = self._apply_move(action)
            else:
                valid = self._apply_swap(action)
        self.last_action_valid = valid

        self.step_count += 1
        if self.step_count >= self.max_steps:
            self.done = True

        self.last_result = evaluate(self.current, self.machines)
        reward = -(self.mu * self.last_result.cost + self.nu * self.last_result.noise)
        if not valid or not self.last_result.valid:
            reward -= self.penalty
        return self.observe(), reward, self.done


@dataclass(slots=True)
class Policy:
    """Linear softmax policy with a linear value baseline."""

    weights: np.ndarray
    bias: np.ndarray
    value_weights: np.ndarray
    value_bias: float

    def logits(self, obs: np.ndarray) -> np.ndarray:
        return self.weights @ obs + self.bias

    def probabilities(self, obs: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        z = self.logits(obs)
        if mask is not None:
            z = np.where(mask, z, -np.inf)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def value(self, obs: np.ndarray) -> float:
        return float(self.value_weights @ obs + self.value_bias)

    def greedy_action(self, obs: np.ndarray, mask: np.ndarray | None = None) -> int:
        z = self.logits(obs)
        if mask is not None:
            z = np.where(mask, z, -np.inf)
        return int(np.argmax(z))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "valueWeights": self.value_weights.tolist(),
            "valueBias": self.value_bias,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Policy:
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=np.asarray(doc["bias"], dtype=np.float64),
            value_weights=np.asarray(doc["valueWeights"], dtype=np.float64),
            value_bias=float(doc["valueBias"]),
        )


def save_policy(policy: Policy, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy.to_dict(), fh)


def load_policy(path: str) -> Policy:
    with open(path, "r", encoding="utf-8") as fh:
        return Policy.from_dict(json.load(fh))


@dataclass(slots=True)
class TrainStats:
    curve: list[tuple[int, float]] = field(default_factory=list)

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("iteration,mean_reward\n")
            for iteration, reward in self.curve:
                fh.write(f"{iteration},{reward}\n")


def train(
    env_factory: Callable[[], SchedulingEnv],
    iterations: int,
    seed: int = 0,
    learning_rate: float = 0.02,
    value_rate: float = 0.2,
    clip_ratio: float = 0.2,
    epochs: int = 4,
    discount: float = 0.05,
    entropy_coef: float = 0.01,
    exploration: float = 0.3,
    stats: TrainStats | None = None,
) -> Policy:
    """Clipped-surrogate policy-gradient training; one episode per update.

    The reward charges the full schedule cost every step, so credit is kept
    near-myopic (small discount): an action is reinforced when it lowers
    the cost it is charged, and terminating stays preferable to idling.
    The behavior policy mixes in a decaying uniform floor so rare improving
    actions keep being visited before the policy commits.

    Deterministic for a fixed seed: all sampling flows through one RNG and
    updates are full-batch over the collected episode.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    env = env_factory()
    n_actions = env.num_actions
    n_features = env.observation_size
    policy = Policy(
        weights=rng.normal(0.0, 0.01, size=(n_actions, n_features)),
        bias=np.zeros(n_actions),
        value_weights=np.zeros(n_features),
        value_bias=0.0,
    )
    value_primed = False

    for iteration in range(iterations):
        eps = exploration * max(0.0, 1.0 - 2.0 * iteration / iterations)
        obs = env.reset()
        observations: list[np.ndarray] = []
        actions: list[int] = []
        rewards: list[float] = []
        old_logps: list[float] = []
        masks: list[np.ndarray] = []
        done = False
        while not done:
            mask = env.action_mask()
            probs = policy.probabilities(obs, mask)
            probs = (1.0 - eps) * probs + eps * (mask / mask.sum())
            action = int(rng.choice(n_actions, p=probs))
            observations.append(obs)
            actions.append(action)
            masks.append(mask)
            old_logps.append(float(np.log(probs[action] + 1e-12)))
            obs, reward, done = env.step(action)
            rewards.append(reward)

        returns = np.empty(len(rewards))
        acc = 0.0
        for t in range(len(rewards) - 1, -1, -1):
            acc = rewards[t] + discount * acc
            returns[t] = acc
        obs_mat = np.stack(observations)
        act_arr = np.asarray(actions)
        old_lp = np.asarray(old_logps)
        mask_mat = np.stack(masks)
        feat_scale = float((obs_mat * obs_mat).sum(axis=1).mean()) + 1.0
        if not value_primed:
            # An accurate baseline from the start keeps ordinary actions at
            # zero advantage; only genuinely better ones get reinforced.
            policy.value_bias = float(returns.mean())
            value_primed = True
        values = obs_mat @ policy.value_weights + policy.value_bias
        advantages = returns - values
        # bound, don't standardize: one-step episodes have zero variance
        scale = max(float(np.abs(advantages).max()), 1.0)
        advantages = advantages / scale

        rows = np.arange(len(actions))
        for _ in range(epochs):
            logits = obs_mat @ policy.weights.T + policy.bias
            logits = np.where(mask_mat, logits, -np.inf)
            logits -= logits.max(axis=1, keepdims=True)
            exp = np.exp(logits)
            probs = exp / exp.sum(axis=1, keepdims=True)
            logp = np.log(probs[rows, act_arr] + 1e-12)
            ratio = np.exp(logp - old_lp)
            clipped = (advantages > 0) & (ratio > 1.0 + clip_ratio)
            clipped |= (advantages < 0) & (ratio < 1.0 - clip_ratio)
            coeff = np.where(clipped, 0.0, ratio * advantages)

            grad_logits = -probs * coeff[:, None]
            grad_logits[rows, act_arr] += coeff
            logp_full = np.log(probs + 1e-12)
            entropy = -(probs * logp_full).sum(axis=1, keepdims=True)
            grad_logits += entropy_coef * (-probs * (logp_full + entropy))
            grad_logits /= len(actions)

            policy.weights += learning_rate * (grad_logits.T @ obs_mat)
            policy.bias += learning_rate * grad_logits.sum(axis=0)

            # normalized step keeps the regression stable for any obs scale
            values = obs_mat @ policy.value_weights + policy.value_bias
            value_error = values - returns
            policy.value_weights -= value_rate * (value_error @ obs_mat) / (
                len(actions) * feat_scale
            )
            policy.value_bias -= value_rate * float(value_error.mean())

        if stats is not None:
            stats.curve.append((iteration, float(np.mean(rewards))))

    return policy


def extract_schedule(policy: Policy, env: SchedulingEnv) -> Schedule:
    """Greedy rollout; prefer the final schedule, fall back to the best
    valid state seen, then to the initial schedule."""
    obs = env.reset()
    best_schedule: Schedule | None = None
    best_score = float("inf")
    done = False
    while not done:
        action = policy.greedy_action(obs, env.action_mask())
        obs, _, done = env.step(action)
        result = env.last_result
        if result.valid:
            score = env.mu * result.cost + env.nu * result.noise
            if score < best_score:
                best_score = score
                best_schedule = env.current.clone()
    if is_valid(env.current, env.machines):
        return env.current
    if best_schedule is not None:
        return best_schedule
    return env.initial_schedule.clone()
