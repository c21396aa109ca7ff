"""Benchmark protocol: scenarios, simulation runs, and report emission.

A scenario bundles devices, a synthetic workload, scheduling configuration
and seeds. Each scheduler gets a fresh prepopulated platform and consumes
the identical job stream batch by batch; after scheduling, the circuit
cutter materializes the fragments, estimates are re-derived from the
actual fragment circuits, and the final metrics (makespan, schedule cost,
total noise) are collected per batch.
"""

from __future__ import annotations

import json
import random
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

from .circuits import Circuit, CircuitProxy, make_proxy, generate_random_circuit
from .devices import Machine, Platform, enqueue_schedule, form_batch, prepopulate, submit
from .estimation import EstimateModel, initial_estimates
from .evaluation import (
    PREFERENCE_MODES,
    Schedule,
    evaluate,
)
from .rl import SchedulingEnv, extract_schedule, train
from .schedulers import Candidate, ScatterConfig, _binpack_assignment, _resolve_cuts, scatter_search

BASELINE = "baseline"
HEURISTIC = "heuristic"
RL = "rl"
SCHEDULER_NAMES = (BASELINE, HEURISTIC, RL)

# Reconfiguration dominates single-job execution (p is 0.1-0.5 s at these
# depths): the regime where setup-aware ordering and fragment adjacency pay.
_DEFAULT_MODEL = EstimateModel(
    per_layer_time=0.02,
    per_shot_readout=5e-5,
    noise_per_qubit_layer=0.002,
    base_setup=1.0,
    fragment_setup=0.0,
)


class ScenarioError(Exception):
    """Scenario validation failure; carries one message per bad field."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(slots=True)
class MachineSpec:
    id: str
    capacity: int
    model: EstimateModel = _DEFAULT_MODEL

    def build(self) -> Machine:
        return Machine(id=self.id, capacity=self.capacity, model=self.model)


@dataclass(slots=True)
class WorkloadSpec:
    batch_count: int = 10
    qubit_range: tuple[int, int] = (2, 8)
    depth_range: tuple[int, int] = (4, 20)
    cx_density: float = 0.4
    shots: int = 1024
    preference_probability: float = 0.5
    strictness_range: tuple[float, float] = (0.5, 3.0)
    load_range: tuple[float, float] = (0.5, 3.0)


@dataclass(slots=True)
class RlBenchConfig:
    iterations: int = 200
    max_steps: int | None = None
    penalty: float | None = None


@dataclass(slots=True)
class BenchConfig:
    batch_size: int = 5
    batch_threshold: int | None = None  # None: sum of machine capacities
    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 0.5
    nu: float = 5.0
    backfilling: bool = False
    preference_term: str = "as_written"
    scatter: ScatterConfig = field(default_factory=ScatterConfig)
    rl: RlBenchConfig = field(default_factory=RlBenchConfig)


@dataclass(slots=True)
class Seeds:
    workload: int = 1
    prepopulate: int = 2
    scatter: int = 3
    rl: int = 4


@dataclass(slots=True)
class BenchmarkScenario:
    name: str
    machines: list[MachineSpec]
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    config: BenchConfig = field(default_factory=BenchConfig)
    seeds: Seeds = field(default_factory=Seeds)

    def build_machines(self) -> list[Machine]:
        return [spec.build() for spec in self.machines]

    def threshold(self) -> int:
        if self.config.batch_threshold is not None:
            return self.config.batch_threshold
        return sum(spec.capacity for spec in self.machines)


def default_config() -> BenchConfig:
    """The published experiment defaults."""
    return BenchConfig()


def builtin_scenario(name: str) -> BenchmarkScenario:
    """The two hardware settings used by the experiments.

    ``5-7``: two devices (five and seven qubits) with identical set-up
    times. ``5-5-7``: additionally a five-qubit device whose set-up takes
    three times as long.
    """
    if name == "5-7":
        machines = [
            MachineSpec("qpu-a", 5),
            MachineSpec("qpu-b", 7),
        ]
    elif name == "5-5-7":
        slow_model = replace(_DEFAULT_MODEL, base_setup=_DEFAULT_MODEL.base_setup * 3)
        machines = [
            MachineSpec("qpu-a", 5),
            MachineSpec("qpu-b", 7),
            MachineSpec("qpu-c", 5, model=slow_model),
        ]
    else:
        raise ScenarioError([f"scenario: unknown builtin {name!r}"])
    return BenchmarkScenario(name=name, machines=machines)


@dataclass(slots=True)
class WorkloadJob:
    circuit: Circuit
    proxy: CircuitProxy


def generate_workload(scenario: BenchmarkScenario, machines: Sequence[Machine]) -> list[WorkloadJob]:
    """Deterministic synthetic job stream for one scenario."""
    spec = scenario.workload
    rng = random.Random(scenario.seeds.workload)
    machine_ids = [m.id for m in machines]
    total = scenario.config.batch_size * spec.batch_count
    jobs: list[WorkloadJob] = []
    for _ in range(total):
        qubits = rng.randint(*spec.qubit_range)
        depth = rng.randint(*spec.depth_range)
        circuit_seed = rng.randrange(2**32)
        density = spec.cx_density if qubits >= 2 else 0.0
        circuit = generate_random_circuit(qubits, depth, density, circuit_seed)
        preferred = None
        strictness = 0.0
        if rng.random() < spec.preference_probability:
            preferred = rng.choice(machine_ids)
            strictness = rng.uniform(*spec.strictness_range)
        priority = rng.randint(1, 20)
        estimates = initial_estimates(qubits, circuit.depth, spec.shots, machines)
        proxy = make_proxy(
            circuit,
            preferred_machine=preferred,
            strictness=strictness,
            priority=priority,
            shots=spec.shots,
            estimates=estimates,
        )
        jobs.append(WorkloadJob(circuit=circuit, proxy=proxy))
    return jobs


@dataclass(slots=True)
class ReportRow:
    scheduler: str
    batch: int
    makespan: float
    pmax: float
    noise: float
    runtime_s: float
    jobs: int
    fragments: int


@dataclass(slots=True)
class BenchmarkReport:
    scenario: str
    rows: list[ReportRow] = field(default_factory=list)

    def schedulers(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.scheduler not in seen:
                seen.append(row.scheduler)
        return seen

    def metric_values(self, scheduler: str, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.rows if r.scheduler == scheduler]

    def aggregates(self) -> dict[str, dict[str, dict[str, float]]]:
        out: dict[str, dict[str, dict[str, float]]] = {}
        for scheduler in self.schedulers():
            metrics = {}
            for metric in ("makespan", "pmax", "noise", "runtime_s"):
                values = self.metric_values(scheduler, metric)
                if values:
                    metrics[metric] = {
                        "mean": statistics.fmean(values),
                        "median": statistics.median(values),
                    }
            out[scheduler] = metrics
        return out

    def improvements(self) -> dict[str, dict[str, float | None]]:
        """Relative improvement vs the baseline: (baseline - x) / baseline."""
        aggregates = self.aggregates()
        base = aggregates.get(BASELINE)
        out: dict[str, dict[str, float | None]] = {}
        if not base:
            return out
        for scheduler, metrics in aggregates.items():
            if scheduler == BASELINE:
                continue
            rel: dict[str, float | None] = {}
            for metric in ("makespan", "pmax", "noise"):
                if metric in metrics and metric in base and base[metric]["mean"] != 0:
                    rel[metric] = (
                        base[metric]["mean"] - metrics[metric]["mean"]
                    ) / base[metric]["mean"]
                else:
                    rel[metric] = None
            out[scheduler] = rel
        return out

    def to_dict(self, canonical_runtime: bool = False) -> dict:
        return {
            "scenario": self.scenario,
            "rows": [
                {
                    "scheduler": r.scheduler,
                    "batch": r.batch,
                    "makespan": r.makespan,
                    "pmax": r.pmax,
                    "noise": r.noise,
                    "runtime_s": 0.0 if canonical_runtime else r.runtime_s,
                    "jobs": r.jobs,
                    "fragments": r.fragments,
                }
                for r in self.rows
            ],
            "aggregates": _strip_runtime(self.aggregates()) if canonical_runtime else self.aggregates(),
            "improvements": self.improvements(),
        }


def _strip_runtime(aggregates: dict) -> dict:
    return {
        scheduler: {m: v for m, v in metrics.items() if m != "runtime_s"}
        for scheduler, metrics in aggregates.items()
    }


def _verify_cut_consistency(candidate: Candidate, circuits: dict[str, Circuit]) -> None:
    # Circuit-cutter stage: the fragments must match what was promised at
    # plan time, otherwise the re-estimated metrics would diverge.
    for slots in candidate.schedule.assignment.values():
        for slot in slots:
            for proxy in slot:
                circuit = circuits.get(proxy.id)
                if circuit is None:
                    continue
                if circuit.num_qubits != proxy.num_qubits or circuit.depth != proxy.depth:
                    raise RuntimeError(
                        f"fragment {proxy.id} diverged from its planned shape"
                    )


def _baseline_candidate(
    batch: Sequence[CircuitProxy],
    machines: Sequence[Machine],
    circuits: dict[str, Circuit],
    config: BenchConfig,
) -> tuple[Candidate, dict[str, Circuit]]:
    jobs, cuts, circ = _resolve_cuts(batch, machines, circuits)
    schedule = Schedule(
        _binpack_assignment(jobs, machines),
        alpha=config.alpha,
        beta=config.beta,
        preference_mode=config.preference_term,
    )
    result = evaluate(schedule, machines)
    candidate = Candidate(
        schedule=schedule, cuts=tuple(cuts), evaluation=result, order=0
    )
    return candidate, circ


def _run_scheduler_batch(
    scheduler: str,
    batch: list[CircuitProxy],
    machines: list[Machine],
    circuits: dict[str, Circuit],
    scenario: BenchmarkScenario,
    batch_index: int,
) -> tuple[Candidate, dict[str, Circuit]]:
    config = scenario.config
    if scheduler == BASELINE:
        return _baseline_candidate(batch, machines, circuits, config)
    if scheduler == HEURISTIC:
        candidate = scatter_search(
            batch,
            machines,
            config.scatter,
            seed=scenario.seeds.scatter + batch_index,
            circuits=circuits,
            alpha=config.alpha,
            beta=config.beta,
            preference_mode=config.preference_term,
        )
        circ = dict(circuits)
        for outcome in candidate.cuts:
            for proxy, circuit in zip(outcome.fragment_proxies, outcome.fragment_circuits):
                circ[proxy.id] = circuit
        return candidate, circ
    if scheduler == RL:
        env = SchedulingEnv(
            batch,
            machines,
            circuits=circuits,
            mu=config.mu,
            nu=config.nu,
            alpha=config.alpha,
            beta=config.beta,
            preference_mode=config.preference_term,
            penalty=config.rl.penalty,
            max_steps=config.rl.max_steps,
        )
        policy = train(
            lambda: env,
            iterations=config.rl.iterations,
            seed=scenario.seeds.rl + batch_index,
        )
        schedule = extract_schedule(policy, env)
        result = evaluate(schedule, machines)
        candidate = Candidate(
            schedule=schedule, cuts=tuple(env.cuts), evaluation=result, order=0
        )
        return candidate, dict(env.circuits)
    raise ScenarioError([f"schedulers: unknown scheduler {scheduler!r}"])


def run_benchmark(
    scenario: BenchmarkScenario, schedulers: Sequence[str] = SCHEDULER_NAMES
) -> BenchmarkReport:
    """Simulate the scenario's batches once per scheduler.

    All schedulers see byte-identical workloads and prepopulated loads;
    device queues grow batch over batch, so later batches face the load
    the scheduler itself created.
    """
    for name in schedulers:
        if name not in SCHEDULER_NAMES:
            raise ScenarioError([f"schedulers: unknown scheduler {name!r}"])

    report = BenchmarkReport(scenario=scenario.name)
    for scheduler in schedulers:
        machines = scenario.build_machines()
        prepopulate(machines, scenario.seeds.prepopulate, scenario.workload.load_range)
        platform = Platform(machines, backfilling=scenario.config.backfilling)
        workload = generate_workload(scenario, machines)
        circuits = {job.proxy.id: job.circuit for job in workload}
        for job in workload:
            submit(platform, job.proxy)

        threshold = scenario.threshold()
        for batch_index in range(scenario.workload.batch_count):
            batch = form_batch(
                platform.submission_queue, threshold, scenario.config.batch_size
            )
            if not batch:
                break
            started = time.perf_counter()
            candidate, circ = _run_scheduler_batch(
                scheduler, batch, machines, circuits, scenario, batch_index
            )
            _verify_cut_consistency(candidate, circ)
            # Final metrics are re-derived from the realized schedule.
            result = evaluate(candidate.schedule, machines)
            elapsed = time.perf_counter() - started
            circuits.update(circ)
            enqueue_schedule(platform, candidate.schedule, result)
            report.rows.append(
                ReportRow(
                    scheduler=scheduler,
                    batch=batch_index,
                    makespan=result.makespan,
                    pmax=result.cost,
                    noise=result.noise,
                    runtime_s=elapsed,
                    jobs=len(batch),
                    fragments=sum(1 for j in candidate.schedule.jobs() if j.is_fragment),
                )
            )
    return report


CSV_HEADER = "scheduler,batch,makespan,pmax,noise,runtime_s"


def report_to_csv(report: BenchmarkReport, canonical_runtime: bool = False) -> str:
    """Delimited per-(scheduler, batch) rows; byte-stable for fixed input."""
    lines = [CSV_HEADER]
    for r in report.rows:
        runtime = 0.0 if canonical_runtime else r.runtime_s
        lines.append(
            f"{r.scheduler},{r.batch},{r.makespan!r},{r.pmax!r},{r.noise!r},{runtime!r}"
        )
    return "\n".join(lines) + "\n"


def emit_report(
    report: BenchmarkReport,
    fmt: str,
    path: str,
    canonical_runtime: bool = False,
) -> str:
    """Write the report as ``json`` or ``csv``; returns the path written.

    ``canonical_runtime`` zeroes the wall-clock column so that two runs
    with identical seeds produce byte-identical files (used for golden
    fixtures and determinism checks).
    """
    if fmt == "csv":
        payload = report_to_csv(report, canonical_runtime)
    elif fmt == "json":
        payload = json.dumps(report.to_dict(canonical_runtime), indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(payload)
    return path


# -- scenario (de)serialization ------------------------------------------------
#
# The configuration file mirrors BenchmarkScenario field for field; CLI
# flags override individual keys via dotted paths.


def model_to_dict(model: EstimateModel) -> dict:
    return {
        "perLayerTime": model.per_layer_time,
        "perShotReadout": model.per_shot_readout,
        "noisePerQubitLayer": model.noise_per_qubit_layer,
        "baseSetup": model.base_setup,
        "fragmentSetup": model.fragment_setup,
    }


def scenario_to_dict(scenario: BenchmarkScenario) -> dict:
    cfg = scenario.config
    return {
        "name": scenario.name,
        "machines": [
            {"id": m.id, "capacity": m.capacity, "model": model_to_dict(m.model)}
            for m in scenario.machines
        ],
        "workload": {
            "batchCount": scenario.workload.batch_count,
            "qubitRange": list(scenario.workload.qubit_range),
            "depthRange": list(scenario.workload.depth_range),
            "cxDensity": scenario.workload.cx_density,
            "shots": scenario.workload.shots,
            "preferenceProbability": scenario.workload.preference_probability,
            "strictnessRange": list(scenario.workload.strictness_range),
            "loadRange": list(scenario.workload.load_range),
        },
        "config": {
            "batchSize": cfg.batch_size,
            "batchThreshold": cfg.batch_threshold,
            "alpha": cfg.alpha,
            "beta": cfg.beta,
            "mu": cfg.mu,
            "nu": cfg.nu,
            "backfilling": cfg.backfilling,
            "preferenceTerm": cfg.preference_term,
            "scatter": {
                "iterations": cfg.scatter.iterations,
                "eliteSolutions": cfg.scatter.elite_solutions,
                "initializations": list(cfg.scatter.initializations),
                "numSwaps": cfg.scatter.num_swaps,
                "populationSize": cfg.scatter.population_size,
                "parallelism": cfg.scatter.parallelism,
            },
            "rl": {
                "iterations": cfg.rl.iterations,
                "maxSteps": cfg.rl.max_steps,
                "penalty": cfg.rl.penalty,
            },
        },
        "seeds": {
            "workload": scenario.seeds.workload,
            "prepopulate": scenario.seeds.prepopulate,
            "scatter": scenario.seeds.scatter,
            "rl": scenario.seeds.rl,
        },
    }


class _Reader:
    """Pulls typed values out of a nested dict, recording field-path errors."""

    def __init__(self, doc: dict, errors: list[str]):
        self.doc = doc
        self.errors = errors

    def get(self, path: str, default, kind, predicate=None, message: str = ""):
        node = self.doc
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        if node is None:
            return default
        if kind is float and isinstance(node, int) and not isinstance(node, bool):
            node = float(node)
        if kind is not None and not isinstance(node, kind):
            self.errors.append(f"{path}: expected {getattr(kind, '__name__', kind)}")
            return default
        if predicate is not None and not predicate(node):
            self.errors.append(f"{path}: {message}")
            return default
        return node

    def get_pair(self, path: str, default, kind):
        raw = self.get(path, None, list)
        if raw is None:
            return default
        if len(raw) != 2 or not all(isinstance(v, kind) or (kind is float and isinstance(v, int)) for v in raw):
            self.errors.append(f"{path}: expected a [low, high] pair")
            return default
        lo, hi = (kind(v) for v in raw)
        if lo > hi:
            self.errors.append(f"{path}: low bound exceeds high bound")
            return default
        return (lo, hi)


def _model_from_dict(doc: dict, path: str, errors: list[str]) -> EstimateModel:
    reader = _Reader(doc, errors)
    kwargs = {
        "per_layer_time": reader.get("perLayerTime", _DEFAULT_MODEL.per_layer_time, float),
        "per_shot_readout": reader.get("perShotReadout", _DEFAULT_MODEL.per_shot_readout, float),
        "noise_per_qubit_layer": reader.get(
            "noisePerQubitLayer", _DEFAULT_MODEL.noise_per_qubit_layer, float
        ),
        "base_setup": reader.get("baseSetup", _DEFAULT_MODEL.base_setup, float),
        "fragment_setup": reader.get("fragmentSetup", _DEFAULT_MODEL.fragment_setup, float),
    }
    try:
        return EstimateModel(**kwargs)
    except ValueError as exc:
        errors.append(f"{path}.model: {exc}")
        return _DEFAULT_MODEL


def scenario_from_dict(doc: dict) -> BenchmarkScenario:
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario: expected a JSON object"])
    reader = _Reader(doc, errors)

    name = reader.get("name", "custom", str)
    machines: list[MachineSpec] = []
    raw_machines = doc.get("machines", [])
    if not isinstance(raw_machines, list) or not raw_machines:
        errors.append("machines: expected a non-empty list")
        raw_machines = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(raw_machines):
        path = f"machines[{i}]"
        if not isinstance(raw, dict):
            errors.append(f"{path}: expected an object")
            continue
        mid = raw.get("id")
        if not isinstance(mid, str) or not mid:
            errors.append(f"{path}.id: expected a non-empty string")
            continue
        if mid in seen_ids:
            errors.append(f"{path}.id: duplicate machine id {mid!r}")
            continue
        seen_ids.add(mid)
        capacity = raw.get("capacity")
        if not isinstance(capacity, int) or isinstance(capacity, bool) or capacity < 1:
            errors.append(f"{path}.capacity: expected a positive integer")
            continue
        model = (
            _model_from_dict(raw["model"], path, errors)
            if isinstance(raw.get("model"), dict)
            else _DEFAULT_MODEL
        )
        machines.append(MachineSpec(id=mid, capacity=capacity, model=model))

    positive = lambda v: v > 0
    non_negative = lambda v: v >= 0
    unit = lambda v: 0.0 <= v <= 1.0

    workload = WorkloadSpec(
        batch_count=reader.get("workload.batchCount", 10, int, non_negative, "must be >= 0"),
        qubit_range=reader.get_pair("workload.qubitRange", (2, 8), int),
        depth_range=reader.get_pair("workload.depthRange", (4, 20), int),
        cx_density=reader.get("workload.cxDensity", 0.4, float, unit, "must lie in [0, 1]"),
        shots=reader.get("workload.shots", 1024, int, positive, "must be positive"),
        preference_probability=reader.get(
            "workload.preferenceProbability", 0.5, float, unit, "must lie in [0, 1]"
        ),
        strictness_range=reader.get_pair("workload.strictnessRange", (0.5, 3.0), float),
        load_range=reader.get_pair("workload.loadRange", (0.5, 3.0), float),
    )
    if workload.qubit_range[0] < 1:
        errors.append("workload.qubitRange: qubit counts must be >= 1")
    if workload.depth_range[0] < 1:
        errors.append("workload.depthRange: depths must be >= 1")
    if workload.strictness_range[0] <= 0:
        errors.append("workload.strictnessRange: strictness must be > 0")
    if workload.load_range[0] < 0:
        errors.append("workload.loadRange: load must be >= 0")

    threshold = reader.get(
        "config.batchThreshold", None, int, positive, "must be positive"
    )
    scatter_kwargs = {
        "iterations": reader.get("config.scatter.iterations", 100, int, non_negative, "must be >= 0"),
        "elite_solutions": reader.get("config.scatter.eliteSolutions", 5, int, positive, "must be positive"),
        "num_swaps": reader.get("config.scatter.numSwaps", 3, int, non_negative, "must be >= 0"),
        "population_size": reader.get("config.scatter.populationSize", 10, int, positive, "must be positive"),
        "parallelism": reader.get("config.scatter.parallelism", 1, int, positive, "must be positive"),
    }
    inits = reader.get("config.scatter.initializations", None, list)
    if inits is not None:
        scatter_kwargs["initializations"] = tuple(str(v) for v in inits)
    try:
        scatter = ScatterConfig(**scatter_kwargs)
    except ValueError as exc:
        errors.append(f"config.scatter: {exc}")
        scatter = ScatterConfig()

    rl = RlBenchConfig(
        iterations=reader.get("config.rl.iterations", 200, int, positive, "must be positive"),
        max_steps=reader.get("config.rl.maxSteps", None, int, positive, "must be positive"),
        penalty=reader.get("config.rl.penalty", None, float, positive, "must be positive"),
    )

    config = BenchConfig(
        batch_size=reader.get("config.batchSize", 5, int, positive, "must be positive"),
        batch_threshold=threshold,
        alpha=reader.get("config.alpha", 1.0, float),
        beta=reader.get("config.beta", 1.0, float),
        mu=reader.get("config.mu", 0.5, float),
        nu=reader.get("config.nu", 5.0, float),
        backfilling=reader.get("config.backfilling", False, bool),
        preference_term=reader.get(
            "config.preferenceTerm",
            "as_written",
            str,
            lambda v: v in PREFERENCE_MODES,
            f"must be one of {PREFERENCE_MODES}",
        ),
        scatter=scatter,
        rl=rl,
    )

    seeds = Seeds(
        workload=reader.get("seeds.workload", 1, int),
        prepopulate=reader.get("seeds.prepopulate", 2, int),
        scatter=reader.get("seeds.scatter", 3, int),
        rl=reader.get("seeds.rl", 4, int),
    )

    if errors:
        raise ScenarioError(errors)
    return BenchmarkScenario(
        name=name, machines=machines, workload=workload, config=config, seeds=seeds
    )


def load_scenario(source: str) -> BenchmarkScenario:
    """Load ``builtin:<name>`` or a JSON scenario file."""
    if source.startswith("builtin:"):
        return builtin_scenario(source.split(":", 1)[1])
    with open(source, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
