import csv
import io
import json

import numpy as np
import pytest

from ichol_half import cli
from ichol_half.experiment import (CSV_COLUMNS, ExperimentConfig,
                                   ExperimentError, RunReport, reports_to_csv,
                                   reports_to_json, resolve_matrix,
                                   run_experiment, suitesparse_url)
from ichol_half.factorize import IcOptions
from ichol_half.fixtures import (FIXTURES, generate_fixture,
                                 parse_fixture_spec, synthetic_gram,
                                 synthetic_spd)
from ichol_half.krylov import U64
from ichol_half.sparsecore import write_matrix_market

DELTA = 1e3 * U64


def test_growth_fixture_entries():
    a = generate_fixture("paper-5x5-c1").to_dense()
    assert a[3, 3] == 9.0
    assert np.array_equal(a, a.T)
    expected = np.array([
        [3, -2, 0, 2, 0], [-2, 3, -2, 1, 0], [0, -2, 3, -2, 0],
        [2, 1, -2, 9, 2], [0, 0, 0, 2, 8]], dtype=float)
    assert np.array_equal(a, expected)
    c0 = generate_fixture("paper-5x5-c0:delta=0.25").to_dense()
    assert c0[3, 1] == 0 and c0[3, 3] == 8.5
    assert (3, 1) not in set(zip(*np.nonzero(np.tril(c0))))


def test_other_paper_fixtures():
    b3 = generate_fixture("paper-5x5-b3").to_dense()
    assert (b3[3, 3], b3[4, 3], b3[3, 4], b3[4, 4]) == (8.00007, 550, 550, 60000)
    la = generate_fixture("paper-5x5-lookahead").to_dense()
    assert np.array_equal(la, [[3, -2, 0, 1, 2], [-2, 3, -2, 0, 0], [0, -2, 3, 0, -2],
                               [1, 0, 0, 5, 0], [2, 0, -2, 0, 8]])
    assert np.linalg.eigvalsh(la).min() > 0


def test_synthetic_dense_is_spd():
    a = generate_fixture("synthetic:n=10,density=1.0,slack=-0.3,seed=3")
    d = a.to_dense()
    assert a.nnz == 55
    np.linalg.cholesky(d)


def test_synthetic_gram_is_spd_and_reproducible():
    a = synthetic_gram(60, density=0.1, small=0.05, seed=4)
    assert np.linalg.cond(a.to_dense()) <= 1e12
    assert np.array_equal(a.values, synthetic_gram(60, density=0.1, small=0.05, seed=4).values)
    with pytest.raises(Exception):
        synthetic_gram(60, density=0.3, small=1e-4, seed=1, max_cond=10.0, max_tries=2)
    assert generate_fixture("synthetic-gram:n=20,seed=1").n == 20


def test_synthetic_reproducible_and_bounded_retries():
    a = synthetic_spd(30, seed=9)
    b = synthetic_spd(30, seed=9)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(Exception):
        synthetic_spd(30, density=1.0, slack=-0.99, seed=1, max_tries=2)


def test_fixture_spec_parsing():
    assert parse_fixture_spec("laplace2d:m=7") == ("laplace2d", {"m": 7.0})
    assert generate_fixture("laplace2d:m=7").n == 49
    with pytest.raises(ValueError):
        generate_fixture("nope")
    with pytest.raises(ValueError):
        parse_fixture_spec("laplace2d:m")
    assert set(FIXTURES) >= {"paper-5x5-c1", "paper-5x5-c0", "paper-5x5-lookahead",
                             "paper-5x5-b3", "synthetic", "laplace2d"}


def test_run_growth_fixture_fp64():
    rep = run_experiment(ExperimentConfig("fixture:paper-5x5-c1", level=0,
                                          ic=IcOptions(precision="fp64")))
    assert (rep.n1, rep.n2, rep.n3, rep.alpha) == (0, 0, 0, 0.0)
    assert rep.converged and rep.res <= DELTA
    assert rep.nnz_a == rep.nnz_al == 11


def test_run_lookahead_fixture_fp16():
    rep = run_experiment(ExperimentConfig("fixture:paper-5x5-lookahead", level=0,
                                          ic=IcOptions(lookahead=True)))
    assert rep.breakdowns.split(";")[0] == "B1@3"
    assert rep.restarts >= 1 and rep.alpha == 1e-3 and rep.converged


def test_run_synthetic_fp16():
    rep = run_experiment(ExperimentConfig("fixture:synthetic:n=300,density=0.02", level=2))
    assert rep.converged and rep.res <= DELTA and rep.precision == "fp16"


def test_run_reports_factorization_failure():
    cfg = ExperimentConfig("fixture:paper-5x5-c0", level=0,
                           ic=IcOptions(precision="fp64", max_restarts=1))
    rep = run_experiment(cfg)
    assert not rep.converged and rep.error.startswith("factorize")
    assert rep.n1 == 2 and rep.res is None


def test_stage_errors_are_named(tmp_path):
    with pytest.raises(ExperimentError, match="load"):
        run_experiment(ExperimentConfig(str(tmp_path / "missing.mtx")))
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n")
    with pytest.raises(ExperimentError) as err:
        run_experiment(ExperimentConfig(str(bad)))
    assert err.value.stage == "load"


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("")
    with pytest.raises(ValueError):
        ExperimentConfig("x", level=-1)
    with pytest.raises(ValueError):
        ExperimentConfig("x", output="xml")


def test_resolve_from_cache_dir(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    d.mkdir()
    write_matrix_market(d / "msc01050.mtx", generate_fixture("laplace2d:m=3"))
    monkeypatch.setenv("ICHOL_HALF_MATRIX_DIR", str(d))
    assert resolve_matrix("Boeing/msc01050").n == 9
    monkeypatch.delenv("ICHOL_HALF_MATRIX_DIR")
    with pytest.raises(FileNotFoundError):
        resolve_matrix("Boeing/msc01050")


def test_report_schema():
    fields = ["identifier", "n", "nnz_a", "nnz_al", "its", "n1", "n2", "n3", "n4",
              "nmod", "alpha", "res", "converged", "nc", "wall_time"]
    assert set(fields) <= set(CSV_COLUMNS)
    d = RunReport("x").to_dict()
    assert list(d) == CSV_COLUMNS
    rows = list(csv.DictReader(io.StringIO(reports_to_csv([RunReport("a"), RunReport("b")]))))
    assert [r["identifier"] for r in rows] == ["a", "b"]
    assert list(rows[0]) == CSV_COLUMNS


def _strip_time(text):
    data = json.loads(text)
    for r in data:
        r.pop("wall_time")
    return json.dumps(data, sort_keys=True)


def test_json_reproducible():
    cfg = ExperimentConfig("fixture:synthetic:n=120", level=1, seed=5)
    a = reports_to_json([run_experiment(cfg)])
    b = reports_to_json([run_experiment(cfg)])
    assert _strip_time(a) == _strip_time(b)
    assert json.loads(a)[0]["identifier"] == "fixture:synthetic:n=120"


def test_seed_changes_synthetic_draw():
    r1 = run_experiment(ExperimentConfig("fixture:synthetic:n=80", level=0, seed=1))
    r2 = run_experiment(ExperimentConfig("fixture:synthetic:n=80", level=0, seed=2))
    assert r1.nnz_a != r2.nnz_a or r1.its != r2.its or r1.res != r2.res


def test_cli_run_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = cli.main(["run", "--matrix", "fixture:laplace2d:m=12", "--level", "1",
                     "--precision", "fp16", "--solver", "cg", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())[0]
    assert rep["converged"] and rep["solver"] == "cg" and rep["level"] == 1
    assert rep["lookahead"] is True


def test_cli_batch_csv(tmp_path, capsys):
    mtx = tmp_path / "g.mtx"
    write_matrix_market(mtx, generate_fixture("paper-5x5-c1"))
    code = cli.main(["run", "--matrix", str(mtx), "--matrix", "fixture:paper-5x5-b3",
                     "--level", "0", "--gmw", "1.0", "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2 and rows[0]["gmw"] == "1.0" and rows[0]["lookahead"] == "False"


def test_cli_rejects_conflicting_flags(capsys):
    with pytest.raises(SystemExit):
        cli.main(["run", "--matrix", "fixture:laplace2d", "--lookahead", "--gmw", "1"])
    assert cli.main(["run", "--matrix", "fixture:laplace2d", "--tau-u", "1e-12"]) == 2


def test_cli_missing_matrix_sets_status(capsys, monkeypatch):
    monkeypatch.delenv("ICHOL_HALF_MATRIX_DIR", raising=False)
    assert cli.main(["run", "--matrix", "HB/bcsstk11"]) == 1
    assert "not found" in capsys.readouterr().err


def test_cli_listing_commands(capsys):
    assert cli.main(["fixtures"]) == 0
    assert "paper-5x5-b3" in capsys.readouterr().out
    assert cli.main(["urls"]) == 0
    out = capsys.readouterr().out
    assert suitesparse_url("Boeing/msc01050") in out
    assert out.count("\n") == 14
