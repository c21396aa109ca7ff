"""Command-line interface.

Subcommands:
  bench         run a benchmark scenario and write reports (and figures)
  cut-estimate  find the cheapest bipartition of a circuit file
  schedule      schedule one batch file onto a machines file

Exit codes: 0 on success, 2 on validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import (
    SCHEDULER_NAMES,
    ScenarioError,
    emit_report,
    load_scenario,
    run_benchmark,
    scenario_from_dict,
    scenario_to_dict,
)
from .circuits import circuit_from_dict, load_circuit, make_proxy
from .cutting import InfeasibleCutError, estimate_cut
from .devices import Machine
from .estimation import EstimateModel, initial_estimates
from .evaluation import evaluate
from .schedulers import (
    InfeasibleJobError,
    InstanceTooLargeError,
    ScatterConfig,
    binpack_schedule,
    exact_schedule,
    scatter_search,
)

EXIT_OK = 0
EXIT_VALIDATION = 2


def _apply_override(doc: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ScenarioError([f"--set {assignment!r}: expected dotted.path=value"])
    path, _, raw = assignment.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = path.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ScenarioError([f"--set {path}: {part} is not an object"])
    node[parts[-1]] = value


def _load_machines(path: str) -> list[Machine]:
    with open(path, "r", encoding="utf-8") as fh:
        docs = json.load(fh)
    if not isinstance(docs, list) or not docs:
        raise ScenarioError(["machines: expected a non-empty JSON list"])
    machines = []
    for i, doc in enumerate(docs):
        model_doc = doc.get("model", {})
        model = EstimateModel(
            per_layer_time=model_doc.get("perLayerTime", 0.02),
            per_shot_readout=model_doc.get("perShotReadout", 5e-5),
            noise_per_qubit_layer=model_doc.get("noisePerQubitLayer", 0.002),
            base_setup=model_doc.get("baseSetup", 0.25),
            fragment_setup=model_doc.get("fragmentSetup", 0.0),
        )
        try:
            machine = Machine(id=doc["id"], capacity=doc["capacity"], model=model)
        except (KeyError, ValueError, TypeError) as exc:
            raise ScenarioError([f"machines[{i}]: {exc}"]) from exc
        machine.load_offset = float(doc.get("loadOffset", 0.0))
        machines.append(machine)
    return machines


def _cmd_bench(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.set:
        doc = scenario_to_dict(scenario)
        for assignment in args.set:
            _apply_override(doc, assignment)
        scenario = scenario_from_dict(doc)
    if args.seed is not None:
        scenario.seeds.workload = args.seed
        scenario.seeds.prepopulate = args.seed + 1
        scenario.seeds.scatter = args.seed + 2
        scenario.seeds.rl = args.seed + 3
    schedulers = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    for name in schedulers:
        if name not in SCHEDULER_NAMES:
            raise ScenarioError([f"--schedulers: unknown scheduler {name!r}"])

    report = run_benchmark(scenario, schedulers)

    import os

    os.makedirs(args.out, exist_ok=True)
    written = []
    for fmt in (f.strip() for f in args.format.split(",")):
        if fmt not in ("json", "csv"):
            raise ScenarioError([f"--format: unknown format {fmt!r}"])
        path = os.path.join(args.out, f"report.{fmt}")
        emit_report(report, fmt, path, canonical_runtime=args.canonical_runtime)
        written.append(path)
    if not args.no_plots:
        from .figures import render_report_figures

        written.extend(render_report_figures(report, args.out))

    aggregates = report.aggregates()
    for scheduler in report.schedulers():
        metrics = aggregates[scheduler]
        print(
            f"{scheduler}: mean makespan {metrics['makespan']['mean']:.3f}s, "
            f"mean cost {metrics['pmax']['mean']:.3f}, "
            f"mean noise {metrics['noise']['mean']:.3f}"
        )
    for scheduler, rel in report.improvements().items():
        parts = [
            f"{metric} {value * 100.0:+.1f}%"
            for metric, value in rel.items()
            if value is not None
        ]
        if parts:
            print(f"{scheduler} vs baseline: " + ", ".join(parts))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_cut_estimate(args: argparse.Namespace) -> int:
    with open(args.circuit, "r", encoding="utf-8") as fh:
        circuit = load_circuit(fh.read())
    plan = estimate_cut(circuit, args.max_a, args.max_b)
    doc = plan.to_dict()
    # Equal per-variant coefficient magnitudes are assumed for CX cutting.
    doc["variantWeights"] = "equal"
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _proxy_to_dict(proxy) -> dict:
    return {
        "id": proxy.id,
        "parentId": proxy.parent_id,
        "numQubits": proxy.num_qubits,
        "depth": proxy.depth,
        "preferredMachine": proxy.preferred_machine,
        "strictness": proxy.strictness,
        "priority": proxy.priority,
        "shots": proxy.shots,
        "basePTime": proxy.base_processing_time,
        "baseNoise": proxy.base_noise,
        "isFragment": proxy.is_fragment,
    }


def _cmd_schedule(args: argparse.Namespace) -> int:
    machines = _load_machines(args.machines)
    with open(args.batch, "r", encoding="utf-8") as fh:
        docs = json.load(fh)
    if not isinstance(docs, list) or not docs:
        raise ScenarioError(["batch: expected a non-empty JSON list"])
    batch = []
    circuits = {}
    for i, doc in enumerate(docs):
        try:
            circuit = circuit_from_dict(doc["circuit"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ScenarioError([f"batch[{i}].circuit: {exc}"]) from exc
        estimates = initial_estimates(
            circuit.num_qubits, circuit.depth, doc.get("shots", 1024), machines
        )
        try:
            proxy = make_proxy(
                circuit,
                preferred_machine=doc.get("preferredMachine"),
                strictness=doc.get("strictness", 0.0),
                priority=doc.get("priority", 1),
                shots=doc.get("shots", 1024),
                estimates=estimates,
            )
        except ValueError as exc:
            raise ScenarioError([f"batch[{i}]: {exc}"]) from exc
        batch.append(proxy)
        circuits[proxy.id] = circuit

    if args.algo == "baseline":
        schedule = binpack_schedule(batch, machines, circuits)
    elif args.algo in ("scatter", "heuristic"):
        candidate = scatter_search(
            batch, machines, ScatterConfig(), seed=args.seed, circuits=circuits
        )
        schedule = candidate.schedule
    elif args.algo == "exact":
        schedule = exact_schedule(batch, machines, circuits=circuits)
    else:
        raise ScenarioError([f"--algo: unknown algorithm {args.algo!r}"])

    result = evaluate(schedule, machines)
    jobs = {p.id: _proxy_to_dict(p) for p in schedule.jobs()}
    print(
        json.dumps(
            {
                "algorithm": args.algo,
                "assignment": {
                    mid: [[p.id for p in slot] for slot in slots]
                    for mid, slots in schedule.assignment.items()
                },
                "jobs": jobs,
                "evaluation": result.to_dict(),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsched",
        description="Schedule quantum-circuit batches onto simulated devices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run a benchmark scenario")
    bench.add_argument(
        "--scenario",
        required=True,
        help="scenario JSON file or builtin:5-7 / builtin:5-5-7",
    )
    bench.add_argument(
        "--schedulers",
        default="baseline,heuristic,rl",
        help="comma-separated subset of baseline,heuristic,rl",
    )
    bench.add_argument("--seed", type=int, default=None, help="override all seeds")
    bench.add_argument("--out", default=".", help="output directory")
    bench.add_argument("--format", default="json,csv", help="report formats")
    bench.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override a scenario key, e.g. --set config.scatter.iterations=50",
    )
    bench.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    bench.add_argument(
        "--canonical-runtime",
        action="store_true",
        help="zero the runtime column for byte-stable output",
    )
    bench.set_defaults(func=_cmd_bench)

    cut = sub.add_parser("cut-estimate", help="find a low-overhead bipartition")
    cut.add_argument("--circuit", required=True, help="circuit JSON file")
    cut.add_argument("--max-a", type=int, required=True, help="max qubits in block A")
    cut.add_argument("--max-b", type=int, required=True, help="max qubits in block B")
    cut.set_defaults(func=_cmd_cut_estimate)

    schedule = sub.add_parser("schedule", help="schedule one batch file")
    schedule.add_argument("--batch", required=True, help="batch JSON file")
    schedule.add_argument("--machines", required=True, help="machines JSON file")
    schedule.add_argument(
        "--algo", default="scatter", help="baseline | scatter | exact"
    )
    schedule.add_argument("--seed", type=int, default=0)
    schedule.set_defaults(func=_cmd_schedule)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleCutError, InfeasibleJobError, InstanceTooLargeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
