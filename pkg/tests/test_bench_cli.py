import json
import shutil

import pytest

from lexrsm import bench
from lexrsm.cli import BAD_INPUT, NEGATIVE, OK, main
from lexrsm.synthesis import Strategy
from conftest import CORPUS, DATA, PROGRAMS


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    for name in ("countUp.pp", "countUp_pl.pp", "countUp_pa.pp", "countUp.inv", "driftWalk.pp", "driftWalk.inv"):
        shutil.copy(CORPUS / name, d / name)
    return d


def test_discover_orders_variants(small_corpus):
    assert [p.stem for p in bench.discover(small_corpus)] == ["countUp", "countUp_pl", "countUp_pa", "driftWalk"]


def test_model_name_and_inv_lookup(small_corpus):
    p = small_corpus / "countUp_pa.pp"
    assert bench.model_name(p) == "countUp"
    assert bench.find_inv(p) == small_corpus / "countUp.inv"


def test_bench_rows_and_stable_table(small_corpus):
    rows = bench.run_bench(small_corpus, timeout=30, workers=1)
    assert [r.outcomes() for r in rows] == [["1"] * 4, ["1"] * 4, ["x", "2", "2", "2"], ["1"] * 4]
    assert rows[2].prob_loop and rows[2].prob_assign
    assert not bench.monotonicity_violations(rows) and not bench.roundtrip_failures(rows)
    again = bench.run_bench(small_corpus, timeout=30, workers=1)
    assert bench.to_markdown(rows) == bench.to_markdown(again)
    assert bench.to_csv(rows).splitlines()[0] == "benchmark,model,p.l.,p.a.,STR,LWN,SMC,EMC"
    assert bench.success_counts(rows) == {"STR": 3, "LWN": 4, "SMC": 4, "EMC": 4}


def test_process_pool_matches_inline(small_corpus):
    inline = bench.run_bench(small_corpus, timeout=30, workers=1, only=["countUp_pa"])
    pooled = bench.run_bench(small_corpus, timeout=30, workers=2, only=["countUp_pa"])
    assert [r.outcomes() for r in inline] == [r.outcomes() for r in pooled]


def _row(*outs):
    r = bench.BenchRow("r", "r", False, False)
    for s, o in zip(bench.STRATEGIES, outs):
        r.cells[s.value] = bench.Cell(o, 0.0, checked=True)
    return r


def test_monotonicity_audit_flags_inversions():
    assert bench.monotonicity_violations([_row("x", "3", "3", "3")]) == []
    assert bench.monotonicity_violations([_row("x", "3", "x", "3")])
    assert bench.monotonicity_violations([_row("x", "3", "3", bench.TIMEOUT)]) == []


def test_compare_tolerance():
    assert bench.compare(_row("x", "3", "3", "3"), ["x", "3", "3", "3"]) == "exact"
    assert bench.compare(_row("x", "3", "4", "4"), ["N/A", "3", "3", "3"]) == "pattern"
    assert bench.compare(_row("x", "x", "5", "5"), ["x", "x", "3", "3"]) == "differs"
    assert bench.compare(_row("x", "3", "3", "3"), ["x", "x", "4", "4"]) == "differs"
    assert bench.compare(_row("-", "3", "3", "-"), ["x", "3", "3", "3"]) == "exact"
    assert bench.compare(_row("-", "3", "-", "-"), ["x", "x", "4", "4"]) == "differs"


def test_timeout_cell():
    cell = bench.run_cell(str(CORPUS / "complex.pp"), str(CORPUS / "complex.inv"), "emc", 0.0)
    assert cell.outcome == bench.TIMEOUT


def test_threads_env(monkeypatch):
    monkeypatch.setenv("LEXRSM_THREADS", "3")
    assert bench.pool_size() == 3
    monkeypatch.setenv("LEXRSM_THREADS", "many")
    with pytest.raises(bench.InputError):
        bench.pool_size()


def test_expected_reference_shipped():
    ref = bench.load_expected(CORPUS)
    assert ref["speedDis1"] == ["x", "x", "4", "4"]
    assert ref["cousot9"] == ["x", "3", "3", "3"]


# --- command line -------------------------------------------------------------

FIG2 = [str(PROGRAMS / "fig2.pp"), str(PROGRAMS / "fig2.inv")]


def test_cli_synth_then_check(tmp_path, capsys):
    cert = tmp_path / "c.json"
    assert main(["synth", *FIG2, "--method", "smc", "--out", str(cert), "--verbatim-inv"]) == OK
    doc = json.loads(cert.read_text())
    assert doc["dimension"] <= 4
    assert main(["check", *FIG2, str(cert), "--flavor", "sc_mclc", "--verbatim-inv"]) == OK
    assert main(["check", *FIG2, str(cert), "--flavor", "st", "--verbatim-inv"]) == NEGATIVE
    # flip the sign of the x coefficient in the first component at the loop head
    coef = doc["eta"]["l1"][0]["x"]
    coef[0] = -coef[0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["check", *FIG2, str(bad), "--verbatim-inv"]) == NEGATIVE


def test_cli_synth_failure_and_bad_input(capsys):
    assert main(["synth", *FIG2, "--method", "str"]) == NEGATIVE
    assert "unranked" in capsys.readouterr().out
    assert main(["synth", "nosuch.pp"]) == BAD_INPUT
    assert main(["synth", *FIG2, "--method", "bogus"]) == BAD_INPUT


def test_cli_bundled_names_and_json(capsys):
    assert main(["synth", "fig2.pp", "--json"]) == OK
    assert json.loads(capsys.readouterr().out)["dimension"] >= 1


def test_cli_parse_error_is_bad_input(tmp_path):
    f = tmp_path / "bad.pp"
    f.write_text("while do od")
    assert main(["synth", str(f)]) == BAD_INPUT


def test_cli_fixlab(capsys):
    assert main(["fixlab", str(DATA / "fig3_h8.json"), "--eps", "1"]) == OK
    assert "not ε-fixable" in capsys.readouterr().out
    assert main(["fixlab", "fig4_h8.json", "--eps", "1", "--gamma", "0.4", "--json"]) == OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "(ε,γ)-fixable"


def test_cli_simulate(capsys):
    assert main(["simulate", "fig2.pp", "--runs", "200", "--init", "y=-100", "--json"]) == OK
    assert json.loads(capsys.readouterr().out)["frequency"] == 1.0
    assert main(["simulate", "fig2.pp", "--init", "y"]) == BAD_INPUT


def test_cli_bench(small_corpus, tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["bench", str(small_corpus), "--only", "countUp", "--out", str(out)]) == OK
    assert out.read_text().count("\n") == 4
    assert "Monotonicity audit" in capsys.readouterr().out
    assert main(["bench", str(tmp_path / "missing")]) == BAD_INPUT


def test_cli_mutate(tmp_path):
    src = tmp_path / "s"
    src.mkdir()
    (src / "p.pp").write_text("x := 0; while x < 2 do x := x + 1 od")
    assert main(["mutate", str(src), str(tmp_path / "o")]) == OK
    assert (tmp_path / "o" / "p_pa.pp").exists()
