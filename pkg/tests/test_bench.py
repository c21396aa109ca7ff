from __future__ import annotations

import json
import statistics
from pathlib import Path

import pytest

from qsched.bench import (
    BenchmarkReport,
    ReportRow,
    ScenarioError,
    builtin_scenario,
    default_config,
    emit_report,
    generate_workload,
    load_scenario,
    report_to_csv,
    run_benchmark,
    scenario_from_dict,
    scenario_to_dict,
)
from qsched.evaluation import is_valid

DATA = Path(__file__).parent / "data"


def small_scenario(batches=2, name="5-7"):
    scenario = builtin_scenario(name)
    scenario.workload.batch_count = batches
    scenario.config.scatter.iterations = 10
    scenario.config.rl.iterations = 10
    return scenario


def test_default_config_published_values():
    config = default_config()
    assert config.batch_size == 5
    assert config.alpha == 1
    assert config.beta == 1
    assert config.mu == 0.5
    assert config.nu == 5
    assert config.backfilling is False


def test_builtin_five_seven():
    scenario = builtin_scenario("5-7")
    caps = [m.capacity for m in scenario.machines]
    assert sorted(caps) == [5, 7]
    setups = {m.model.base_setup for m in scenario.machines}
    assert len(setups) == 1  # identical set-up times


def test_builtin_five_five_seven_has_slower_third_device():
    scenario = builtin_scenario("5-5-7")
    caps = sorted(m.capacity for m in scenario.machines)
    assert caps == [5, 5, 7]
    base = builtin_scenario("5-7").machines[0].model.base_setup
    slow = [m for m in scenario.machines if m.model.base_setup != base]
    assert len(slow) == 1
    assert slow[0].capacity == 5
    assert slow[0].model.base_setup == pytest.approx(3 * base)


def test_builtin_unknown_name():
    with pytest.raises(ScenarioError):
        builtin_scenario("9-9")


def test_workload_identity_for_fixed_seed():
    scenario = small_scenario()
    a = generate_workload(scenario, scenario.build_machines())
    b = generate_workload(scenario, scenario.build_machines())
    assert [j.proxy for j in a] == [j.proxy for j in b]
    assert [j.circuit.id for j in a] == [j.circuit.id for j in b]


def test_run_benchmark_rows_and_validity():
    scenario = small_scenario()
    report = run_benchmark(scenario, ["baseline", "heuristic"])
    assert report.schedulers() == ["baseline", "heuristic"]
    per = {s: [r for r in report.rows if r.scheduler == s] for s in report.schedulers()}
    assert len(per["baseline"]) == len(per["heuristic"]) == 2
    for rows in per.values():
        assert [r.batch for r in rows] == [0, 1]
        for r in rows:
            assert r.makespan > 0
            assert r.pmax > 0
            assert r.noise >= 0
            assert r.jobs >= 1


def test_run_benchmark_rl_path():
    scenario = small_scenario(batches=1)
    scenario.config.batch_size = 2
    report = run_benchmark(scenario, ["rl"])
    assert len(report.rows) == 1
    assert report.rows[0].scheduler == "rl"


def test_run_benchmark_rejects_unknown_scheduler():
    with pytest.raises(ScenarioError):
        run_benchmark(small_scenario(), ["baseline", "quantum-annealer"])


def test_zero_job_scenario():
    scenario = small_scenario(batches=0)
    report = run_benchmark(scenario, ["baseline"])
    assert report.rows == []
    assert report.aggregates() == {"baseline": {}} or report.aggregates() == {}
    assert report.improvements() == {}


def test_aggregates_recomputable_from_rows():
    scenario = small_scenario()
    report = run_benchmark(scenario, ["baseline", "heuristic"])
    aggregates = report.aggregates()
    for scheduler in report.schedulers():
        values = [r.pmax for r in report.rows if r.scheduler == scheduler]
        assert aggregates[scheduler]["pmax"]["mean"] == pytest.approx(statistics.fmean(values))
        assert aggregates[scheduler]["pmax"]["median"] == pytest.approx(statistics.median(values))


def test_improvements_formula():
    report = BenchmarkReport(scenario="x")
    report.rows = [
        ReportRow("baseline", 0, 10.0, 20.0, 1.0, 0.0, 2, 0),
        ReportRow("heuristic", 0, 8.0, 15.0, 1.1, 0.0, 2, 0),
    ]
    rel = report.improvements()["heuristic"]
    assert rel["makespan"] == pytest.approx((10 - 8) / 10)
    assert rel["pmax"] == pytest.approx((20 - 15) / 20)
    assert rel["noise"] == pytest.approx((1.0 - 1.1) / 1.0)


def test_csv_header_only_for_empty_report():
    report = BenchmarkReport(scenario="x")
    assert report_to_csv(report) == "scheduler,batch,makespan,pmax,noise,runtime_s\n"


def test_csv_single_row_field_order(tmp_path):
    report = BenchmarkReport(scenario="x")
    report.rows = [ReportRow("baseline", 0, 1.5, 2.5, 0.25, 0.125, 3, 1)]
    path = tmp_path / "r.csv"
    emit_report(report, "csv", str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "scheduler,batch,makespan,pmax,noise,runtime_s"
    assert lines[1] == "baseline,0,1.5,2.5,0.25,0.125"


def test_canonical_runtime_zeroes_column(tmp_path):
    report = BenchmarkReport(scenario="x")
    report.rows = [ReportRow("baseline", 0, 1.5, 2.5, 0.25, 0.777, 3, 1)]
    text = report_to_csv(report, canonical_runtime=True)
    assert text.splitlines()[1].endswith(",0.0")
    doc = report.to_dict(canonical_runtime=True)
    assert doc["rows"][0]["runtime_s"] == 0.0


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report(BenchmarkReport(scenario="x"), "xml", str(tmp_path / "r.xml"))


def test_golden_csv_fixture():
    scenario = small_scenario()
    report = run_benchmark(scenario, ["baseline", "heuristic"])
    golden = (DATA / "golden_report_5-7.csv").read_text()
    assert report_to_csv(report, canonical_runtime=True) == golden


def test_scenario_roundtrip():
    scenario = builtin_scenario("5-5-7")
    scenario.config.scatter.iterations = 42
    scenario.seeds.workload = 123
    doc = scenario_to_dict(scenario)
    back = scenario_from_dict(doc)
    assert scenario_to_dict(back) == doc


def test_scenario_validation_reports_field_paths():
    doc = {
        "machines": [
            {"id": "a", "capacity": 0},
            {"id": "a", "capacity": 5},
            {"capacity": 5},
        ],
        "workload": {"batchCount": -1, "qubitRange": [5, 2]},
        "config": {"preferenceTerm": "bogus", "scatter": {"eliteSolutions": 99}},
    }
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    text = "; ".join(err.value.errors)
    assert "machines[0].capacity" in text
    assert "machines[1].id" in text
    assert "machines[2].id" in text
    assert "workload.batchCount" in text
    assert "workload.qubitRange" in text
    assert "config.preferenceTerm" in text
    assert "config.scatter" in text


def test_load_scenario_builtin_and_file(tmp_path):
    assert load_scenario("builtin:5-7").name == "5-7"
    doc = scenario_to_dict(builtin_scenario("5-7"))
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    assert load_scenario(str(path)).name == "5-7"


def test_enqueued_schedules_remain_valid():
    scenario = small_scenario(batches=3)
    for name in ("baseline", "heuristic"):
        machines = scenario.build_machines()
        # run_benchmark would raise inside enqueue_schedule on an invalid
        # schedule; reaching the report proves end-to-end validity
        report = run_benchmark(scenario, [name])
        assert len(report.rows) >= 1
