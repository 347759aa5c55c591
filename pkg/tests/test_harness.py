import csv
import io
import json
from fractions import Fraction

import pytest

from evacplan.behavior import DBM, NEBM
from evacplan.harness import (
    CSV_COLUMNS,
    EXIT_FILE,
    EXIT_INPUT,
    EXIT_INVALID,
    EXIT_OK,
    EXIT_USAGE,
    BenchConfig,
    _int_list,
    main,
    parse_behavior,
    records_to_csv,
    run_instance,
    summarize,
)
from evacplan.milpsolver import parse_mps


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_behavior(tmp_path):
    assert parse_behavior("dbm:2=2/5,5=3/5") == DBM(((2, Fraction(2, 5)), (5, Fraction(3, 5))))
    assert parse_behavior("nebm:7/10") == NEBM(Fraction(7, 10))
    doc = {"type": "nebm", "alpha": "1/2"}
    assert parse_behavior(json.dumps(doc)) == NEBM(Fraction(1, 2))
    path = tmp_path / "b.json"
    path.write_text(json.dumps(doc))
    assert parse_behavior(str(path)) == NEBM(Fraction(1, 2))
    assert parse_behavior(None, doc) == NEBM(Fraction(1, 2))


def test_int_list():
    assert _int_list("20:60:20") == [20, 40, 60]
    assert _int_list("30,40") == [30, 40]
    assert _int_list("7") == [7]
    assert _int_list("") == []


def test_validate_exit_codes(capsys, tmp_path):
    assert run(capsys, "validate", "example.json", "example_es.json")[0] == EXIT_OK
    es = json.loads(_data("example_es.json").read_text())
    # p1 jumps from v1 straight to the far exit
    es["schedule"]["p1"] = ["v1"] + ["v4"] * 4
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(es))
    code, out, _ = run(capsys, "validate", "example.json", str(bad), "--json")
    assert code == EXIT_INVALID
    assert json.loads(out)["weak"]["ok"] is False


def _data(name):
    from evacplan.buildinggraph import fixture_path

    return fixture_path(name)


def test_error_exit_codes(capsys, tmp_path, monkeypatch):
    assert run(capsys, "validate", "nowhere.json", "example_es.json")[0] == EXIT_FILE
    assert run(capsys, "teleport")[0] == EXIT_USAGE
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert run(capsys, "plan-ip", str(junk))[0] == EXIT_INPUT
    assert run(capsys, "plan-evac", "example.json", "--behavior", "dbm:1=1/3")[0] == EXIT_INPUT
    assert run(capsys, "plan-ip", "example.json", "--D", "6", "--t-max", "5")[0] == EXIT_USAGE
    monkeypatch.setenv("EVACPLAN_D", "soon")
    code, _, err = run(capsys, "plan-evac", "example.json")
    assert code == EXIT_USAGE and "EVACPLAN_D" in err


def test_plan_evac_example(capsys):
    code, out, _ = run(capsys, "plan-evac", "example.json", "--D", "5", "--t-max", "10", "--gamma", "1", "--json")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["evacuated"] == 7 and doc["strong"] and doc["stranded"] == []
    assert doc["method"] == "bbevac" and doc["t_max"] == 10


def test_environment_supplies_defaults(capsys, monkeypatch):
    monkeypatch.setenv("EVACPLAN_D", "5")
    monkeypatch.setenv("EVACPLAN_GAMMA", "1")
    monkeypatch.setenv("EVACPLAN_JSON", "1")
    code, out, _ = run(capsys, "plan-evac", "example.json")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["deadline"] == 5 and doc["t_max"] == 10 and doc["gamma"] == "1"


def test_plan_ip_solution_round_trip(capsys, tmp_path):
    sol = tmp_path / "plan.sol"
    code, out, _ = run(capsys, "plan-ip", "example.json", "--behavior", "dbm:0=1", "--solution-out", str(sol), "--json")
    assert code == EXIT_OK
    solved = json.loads(out)
    assert solved["objective"] == "7" and solved["mode"] == "hard"
    code, out, _ = run(capsys, "plan-ip", "example.json", "--behavior", "dbm:0=1", "--solution", str(sol), "--json")
    again = json.loads(out)
    assert code == EXIT_OK and again["status"] == "imported"
    assert again["objective"] == "7" and again["schedule"] == solved["schedule"]


def test_realize(capsys):
    code, out, _ = run(capsys, "realize", "example.json", "example_es.json", "--behavior", "nebm:7/10", "--json")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert [o["probability"] for o in doc["outcomes"]] == ["7/10", "3/10"]
    assert [o["evacuated"] for o in doc["outcomes"]] == [7, 7]
    assert doc["expected_evacuated"] == "7"


def test_gen_is_deterministic(capsys, tmp_path):
    a = run(capsys, "gen", "--nodes", "25", "--population", "20", "--seed", "3")[1]
    b = run(capsys, "gen", "--nodes", "25", "--population", "20", "--seed", "3")[1]
    c = run(capsys, "gen", "--nodes", "25", "--population", "20", "--seed", "4")[1]
    assert a == b != c
    doc = json.loads(a)
    assert len(doc["vertices"]) == 25 and len(doc["people"]) == 20
    out = tmp_path / "inst.json"
    assert run(capsys, "gen", "--nodes", "10", "--population", "5", "--out", str(out))[0] == EXIT_OK
    assert run(capsys, "plan-evac", str(out))[0] == EXIT_OK


def test_export_lp(capsys, tmp_path):
    out = tmp_path / "m.mps"
    code, msg, _ = run(capsys, "export-lp", "example.json", "--out", str(out))
    assert code == EXIT_OK
    model = parse_mps(out.read_text())
    assert f"{len(model.variables)} columns, {len(model.constraints)} rows" in msg
    assert model.maximize


def test_bench_with_no_cells_writes_only_the_header(capsys):
    code, out, _ = run(capsys, "bench", "--nodes", "")
    assert code == EXIT_OK
    assert out == ",".join(CSV_COLUMNS) + "\n"


def test_bench_small_matrix(capsys, tmp_path):
    out, summary = tmp_path / "b.csv", tmp_path / "s.csv"
    code, _, _ = run(capsys, "bench", "--nodes", "8,10", "--population", "6", "--cutoff", "60", "--out", str(out), "--summary", str(summary))
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 4 and list(rows[0]) == CSV_COLUMNS
    assert [r["method"] for r in rows] == ["bbip", "bbevac"] * 2
    for exact, heur in zip(rows[::2], rows[1::2]):
        assert exact["instance"] == heur["instance"]
        if exact["status"] == "optimal":
            assert Fraction(heur["expected"]) <= Fraction(exact["expected"])
            assert Fraction(heur["quality"]) == Fraction(heur["expected"]) / Fraction(exact["expected"])
    sums = list(csv.DictReader(io.StringIO(summary.read_text())))
    assert [s["nodes"] for s in sums] == ["8", "10"]


def test_run_instance_records_generator_errors():
    recs = run_instance({"n_vertices": 3, "population": 1000, "seed": 0}, BenchConfig())
    assert [r.status for r in recs] == ["error", "error"]
    assert all(r.error for r in recs)
    text = records_to_csv(recs)
    assert text.count("\n") == 3


def test_summarize_averages_per_size():
    cfg = BenchConfig(cutoff=60)
    recs = run_instance({"n_vertices": 8, "population": 4, "seed": 1}, cfg)
    rows = summarize(recs)
    assert len(rows) == 1 and rows[0]["nodes"] == 8
    assert rows[0]["bbip_time"] == pytest.approx(recs[0].wall_time, abs=1e-3)


def test_exact_falls_back_to_soft_when_hard_is_infeasible(monkeypatch):
    import evacplan.harness as harness

    # a bound that always passes; a deadline this tight leaves people behind
    monkeypatch.setattr(harness, "preflight", lambda g, s0, T: (True, len(s0)))
    cfg = BenchConfig(cutoff=60, deadline_scale=0.3)
    exact, heur = run_instance({"n_vertices": 10, "population": 8, "seed": 3}, cfg)
    assert exact.mode == "soft" and exact.status == "optimal", exact
    assert Fraction(exact.expected) < 8
    assert heur.status == "done" and Fraction(heur.expected) <= Fraction(exact.expected)
