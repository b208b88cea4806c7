from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import pytest

from rdfextrap.cli_harness import (CSV_FIELDS, SUITES, ConfigError, Record, Report, emit, load_scenario,
                                   main, run_suite)

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def _tiny(suites: dict, **extra) -> dict:
    sc = {"schema": "rdfextrap-scenario/1", "name": "tiny", "seed": 3,
          "grid": {"d": 1, "n": 8, "layout": "centered"}, "basis": "dyadic",
          "spaces": {"L3": {"family": "lebesgue", "p": 3, "weight": {"power": 0.2}}},
          "battery": {"size": 3}, "suites": suites}
    sc.update(extra)
    return sc


def test_weights_example_record():
    rep = run_suite(load_scenario(SCEN / "weights-example.json"), "weights-identities")
    assert rep.passed
    rec = [r for r in rep.records if r.name == "w0: [w]_p >= 1"][0]
    assert rec.constant == pytest.approx(1.25, rel=1e-14)


def test_exact_mode_records_25_16():
    rep = run_suite(load_scenario(SCEN / "weights-example.json"), "weights-identities", exact=True)
    rec = [r for r in rep.records if r.name == "w0: exact [w]_2^2"][0]
    assert "25/16" in rec.anchor and rec.passed


def test_exact_mode_rejects_large_grid():
    with pytest.raises(ConfigError):
        run_suite(_tiny({}, grid={"d": 1, "n": 16}), "weights-identities", exact=True)


def test_rdf_constant_records():
    rep = run_suite(_tiny({"rdf": {"K": 2.0}}), "rdf")
    consts = [r for r in rep.records if r.name.startswith("constant")]
    assert len(consts) >= 4 and all(r.passed for r in consts)
    assert rep.passed


def test_riesz_records():
    rep = run_suite(load_scenario(SCEN / "riesz.json"), "offdiag-riesz")
    names = [r.name for r in rep.records]
    assert any("conclusion" in n for n in names)
    assert any(n.startswith("sparse-form") for n in names)
    assert rep.passed


def test_riesz_outside_fails_by_growth():
    rep = run_suite(load_scenario(SCEN / "riesz-outside.json"), "offdiag-riesz")
    bad = [r for r in rep.records if not r.passed]
    assert len(bad) == 1 and "outside" in bad[0].name


@pytest.mark.parametrize("suite", ["basis", "sparse", "maximal", "multilinear"])
def test_small_suites_pass(suite):
    rep = run_suite(_tiny({"multilinear": {"seeds": 2}, "maximal": {"spaces": ["L3"]}}), suite)
    assert rep.records and rep.passed


def test_json_csv_counts_agree():
    rep = run_suite(_tiny({}), "sparse")
    js = json.loads(emit(rep, "json"))
    rows = list(csv.DictReader(io.StringIO(emit(rep, "csv"))))
    assert js["summary"]["checks"] == len(rows) == len(rep.records)
    assert js["schema"] == "rdfextrap-report/1"
    assert list(js["records"][0]) == list(CSV_FIELDS)


def test_empty_suite_csv_is_header_only():
    text = emit(Report("basis", {}, 0, []), "csv")
    assert text == ",".join(CSV_FIELDS) + "\n"


def test_deterministic_modulo_timestamp():
    sc = _tiny({})
    a = json.loads(emit(run_suite(sc, "sparse"), "json"))
    b = json.loads(emit(run_suite(sc, "sparse"), "json"))
    a.pop("timestamp")
    b.pop("timestamp")
    assert json.dumps(a) == json.dumps(b)


def test_threads_do_not_change_records(monkeypatch):
    sc = _tiny({})
    serial = [r.to_dict() for r in run_suite(sc, "rdf").records]
    monkeypatch.setenv("RDFEXTRAP_THREADS", "4")
    assert [r.to_dict() for r in run_suite(sc, "rdf").records] == serial


def test_record_pass_rule():
    assert Record("s", "n", "a", 1.0, 1.0, tol=0.0).passed
    assert not Record("s", "n", "a", 1.0 + 1e-9, 1.0, tol=1e-10).passed
    assert Record("s", "n", "a", float("inf"), 1.0).to_dict()["lhs"] == "inf"


def test_config_errors():
    with pytest.raises(ConfigError):
        run_suite(_tiny({}), "nope")
    with pytest.raises(ConfigError):
        run_suite(_tiny({}, grid={"d": 1, "n": 6}), "basis")
    with pytest.raises(ConfigError):
        run_suite(_tiny({"extrapolation": {}}), "extrapolation")
    sc = _tiny({})
    del sc["seed"]
    with pytest.raises(ConfigError):
        run_suite(sc, "basis")


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_tiny({})))
    assert main(["verify", "--scenario", str(good), "--suite", "basis", "--out", str(tmp_path),
                 "--format", "csv"]) == 0
    assert (tmp_path / "tiny-basis.csv").exists()
    assert main(["verify", "--scenario", str(SCEN / "riesz-outside.json"), "--suite", "offdiag-riesz",
                 "--out", str(tmp_path)]) == 1
    assert main(["verify", "--scenario", str(tmp_path / "missing.json"), "--suite", "basis"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "other"}))
    assert main(["verify", "--scenario", str(bad), "--suite", "basis"]) == 2


def test_main_list_and_describe(capsys):
    assert main(["list-suites"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in SUITES)
    assert main(["describe", "--scenario", str(SCEN / "desk.json")]) == 0
    desc = json.loads(capsys.readouterr().out)
    assert desc["grid"]["n"] == 16 and "L3_v" in desc["spaces"]


def test_seed_override_changes_battery():
    sc = _tiny({})
    a = run_suite(sc, "sparse", seed=1).records
    b = run_suite(sc, "sparse", seed=2).records
    assert [r.lhs for r in a] != [r.lhs for r in b]
