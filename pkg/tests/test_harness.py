"""Scenario harness and command line checks on a tiny fixed network."""
import json

import pytest

from qnetsim.cli import main, parse_seeds
from qnetsim.harness import (
    CSV_COLUMNS, MetricsRecord, Scenario, run_once, run_scenario,
    scenario_from_dict, scenario_to_dict, sweep, write_csv,
)
from qnetsim.params import DEFAULT_PARAMS
from qnetsim.topology import Link, NetworkGraph, Node
from qnetsim.workload import WorkloadSpec


def line_json(n=4, spacing_km=20.0, slots=5) -> str:
    nodes = [Node(i, i * spacing_km, 0.0, memory_slots=slots)
             for i in range(n)]
    links = [Link(i, i + 1, spacing_km) for i in range(n - 1)]
    return NetworkGraph(nodes, links, side_km=(n - 1) * spacing_km).to_json()


TINY = Scenario(
    name="tiny",
    params=DEFAULT_PARAMS.with_updates(duration_s=2.0),
    workload=WorkloadSpec(n_requests=2, inter_arrival_s=0.5,
                          kind="fixed_count", count=2),
    policy="swap_asap",
    graph_json=line_json(),
)


def test_run_once_produces_a_result():
    res = run_once(TINY, seed=1)
    assert res.policy == "swap_asap"
    assert res.duration_s == 2.0
    assert len(res.requests) == 2
    assert res.total_delivered >= 1


def test_csv_rerun_is_byte_identical(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_csv(run_scenario(TINY, [1, 2]), str(a))
    write_csv(run_scenario(TINY, [1, 2]), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_csv_header_and_row_order(tmp_path):
    path = tmp_path / "out.csv"
    write_csv(run_scenario(TINY, [2, 1]), str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    seed_col = CSV_COLUMNS.index("seed")
    seeds = [int(line.split(",")[seed_col]) for line in lines[1:]]
    assert seeds == [1, 2]


def test_metrics_row_formats_missing_and_float_values():
    rec = MetricsRecord(
        scenario="s", policy="p", gem_mode="g", predist_mode="n",
        carrier="c", seed=1, duration_s=2.0, n_requests=1, n_done=1,
        n_terminated=0, delivered_total=3, rate_per_s=1.5,
        mean_fidelity=None, mean_latency_s=0.1, replans=0, discards=0,
        swap_attempts=0, swap_successes=0, purify_attempts=0,
        link_successes=0, directory_updates=0, classical_messages=0)
    row = dict(zip(CSV_COLUMNS, rec.to_row()))
    assert row["mean_fidelity"] == ""
    assert row["rate_per_s"] == "1.5"
    assert row["mean_latency_s"] == repr(0.1)


def test_scenario_dict_round_trip():
    doc = json.loads(json.dumps(scenario_to_dict(TINY)))
    assert scenario_from_dict(doc) == TINY


def test_scenario_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="bogus"):
        scenario_from_dict({"bogus": 1})


def test_sweep_names_arms_and_applies_dotted_overrides():
    records = sweep(TINY, {"workload.n_requests": [1, 2]}, seeds=[1])
    names = sorted(r.scenario for r in records)
    assert names == ["tiny/n_requests=1", "tiny/n_requests=2"]
    by_name = {r.scenario: r for r in records}
    assert by_name["tiny/n_requests=1"].n_requests == 1
    assert by_name["tiny/n_requests=2"].n_requests == 2


def test_sweep_grid_is_a_cartesian_product():
    records = sweep(TINY, {"policy": ["swap_asap", "oldest"],
                           "workload.count": [1, 2]}, seeds=[1])
    assert len(records) == 4
    assert len({r.scenario for r in records}) == 4


@pytest.mark.parametrize("text,expect", [
    ("7", [7]),
    ("1,2,5", [1, 2, 5]),
    ("1-4", [1, 2, 3, 4]),
    ("1,4-6", [1, 4, 5, 6]),
])
def test_parse_seeds_forms(text, expect):
    assert parse_seeds(text) == expect


def test_parse_seeds_rejects_garbage():
    with pytest.raises(ValueError):
        parse_seeds("x")


# -- command line -----------------------------------------------------------


def scenario_file(tmp_path, **extra):
    doc = {
        "name": "tiny",
        "policy": "swap_asap",
        "graph_json": line_json(),
        "params": {"duration_s": 2.0},
        "workload": {"n_requests": 2, "inter_arrival_s": 0.5,
                     "kind": "fixed_count", "count": 2},
    }
    doc.update(extra)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_cli_validate_accepts_a_sane_config(tmp_path, capsys):
    cfg = scenario_file(tmp_path)
    assert main(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ok: tiny:")


def test_cli_validate_rejects_unknown_policy(tmp_path, capsys):
    cfg = scenario_file(tmp_path, policy="vibes")
    assert main(["validate", "--config", cfg]) == 1
    assert "vibes" in capsys.readouterr().err


def test_cli_run_writes_csv(tmp_path, capsys):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "metrics.csv"
    assert main(["run", "--config", cfg, "--seeds", "1,2",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3


def test_cli_run_policy_override_lands_in_rows(tmp_path):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "metrics.csv"
    main(["run", "--config", cfg, "--seeds", "1", "--policy", "oldest",
          "--out", str(out)])
    row = out.read_text().splitlines()[1].split(",")
    assert row[CSV_COLUMNS.index("policy")] == "oldest"


def test_cli_plan_emits_plan_documents(tmp_path):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "plans.json"
    assert main(["plan", "--config", cfg, "--seeds", "1",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["scenario"] == "tiny"
    assert len(doc["plans"]) == 2
    for plan in doc["plans"]:
        assert "route" in plan and "tree" in plan


def test_cli_sweep_runs_a_grid(tmp_path, capsys):
    sweep_doc = {
        "scenario": {
            "name": "tiny",
            "graph_json": line_json(),
            "params": {"duration_s": 1.0},
            "workload": {"n_requests": 1, "kind": "fixed_count", "count": 1},
        },
        "grid": {"policy": ["swap_asap", "fixed_tree"]},
        "seeds": [1],
    }
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(sweep_doc))
    out = tmp_path / "grid.csv"
    assert main(["sweep", "--config", str(cfg), "--seeds", "1",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert "2 arms" in capsys.readouterr().out
