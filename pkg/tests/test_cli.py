import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from sgdab import OracleSpec, RngStream, make_bilinear
from sgdab.config import (BaselineParams, ConfigError, NoiseParams, ProblemParams, SolverParams,
                          config_from_dict, load_config)
from sgdab.harness import cli_main, mixed_partial_matrix, reproduce_dro, run_bench, spectral_norm

ROOT = Path(__file__).resolve().parent.parent


def small(**over):
    d = {"experiment": "bilinear", "methods": ["sgdab-budgeted", "gda", "agda", "tiada"], "seeds": [0, 1],
         "problem": {"m": 6, "n": 6, "L_target": 5.0},
         "solver": {"K": 300, "M": 5, "epsilon_tilde": 1e-2, "init_batch": 50, "trace_stride": 30},
         "baselines": {"iterations": 600, "record_every": 60, "tiada_grid": [1.0, 0.1]}}
    d.update(over)
    return d


def write(tmp_path, d, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


# ---- config validation ----------------------------------------------------

@pytest.mark.parametrize("solver, needle", [
    ({"epsilon": 0.0}, "solver.epsilon must be > 0"),
    ({"epsilon": -1.0}, "solver.epsilon must be > 0"),
    ({"gamma": 1.0}, "solver.gamma must lie in (0, 1)"),
    ({"gamma": 0.0}, "solver.gamma must lie in (0, 1)"),
    ({"p": 1.0}, "solver.p must lie in [0, 1)"),
    ({"p": -0.1}, "solver.p must lie in [0, 1)"),
    ({"K": 0}, "solver.K must be a positive integer"),
    ({"inner": "async"}, "solver.inner"),
])
def test_config_rejects(solver, needle):
    with pytest.raises(ConfigError) as info:
        config_from_dict(small(solver=solver))
    assert needle in str(info.value)


def test_config_messages_are_distinct(tmp_path):
    msgs = set()
    for bad in ({"epsilon": 0.0}, {"gamma": 2.0}, {"p": 1.5}):
        with pytest.raises(ConfigError) as info:
            config_from_dict(small(solver=bad))
        msgs.add(str(info.value).split(" got ")[0])
    with pytest.raises(ConfigError) as info:
        config_from_dict(small(experiment="dro-libsvm", problem={"path": str(tmp_path / "none.svm")}))
    msgs.add(str(info.value))
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "missing.json")
    msgs.add(str(info.value))
    assert len(msgs) == 5
    assert any("dataset file not found" in m for m in msgs)
    assert any("config file not found" in m for m in msgs)


@pytest.mark.parametrize("d, needle", [
    (small(methods=[]), "methods must be a non-empty list"),
    (small(methods=["sgda"]), "unknown methods"),
    (small(seeds=[]), "seeds must be a non-empty list"),
    (small(seeds=[-1]), "nonnegative"),
    (small(extra=1), "unknown top-level keys"),
    (small(solver={"eps": 1.0}), "unknown keys in solver"),
    ({"methods": ["gda"], "seeds": [0]}, "missing required key 'experiment'"),
])
def test_config_structure(d, needle):
    with pytest.raises(ConfigError, match=None) as info:
        config_from_dict(d)
    assert needle in str(info.value)


def test_libsvm_path_relative_to_config(tmp_path):
    (tmp_path / "data.svm").write_text("+1 1:0.5 2:1\n-1 1:-0.5\n")
    d = small(experiment="dro-libsvm", problem={"path": "data.svm"})
    cfg = load_config(write(tmp_path, d))
    assert Path(cfg.problem.path) == tmp_path / "data.svm"
    assert cfg.noise.noise == "minibatch"


def test_schema_lists_every_field():
    schema = json.loads((ROOT / "docs" / "config.schema.json").read_text())
    for name, cls in (("problem", ProblemParams), ("solver", SolverParams), ("noise", NoiseParams),
                      ("baselines", BaselineParams)):
        assert set(schema["properties"][name]["properties"]) == {f.name for f in dataclasses.fields(cls)}
    assert set(schema["required"]) == {"experiment", "methods", "seeds"}


def test_shipped_configs_load():
    paths = sorted((ROOT / "configs").glob("*.json"))
    assert paths
    for p in paths:
        load_config(p)


# ---- estimators -------------------------------------------------------------

def test_spectral_norm_of_bilinear_coupling():
    for seed in range(3):
        p = make_bilinear(30, 30, 10.0, 1.0, seed=seed)
        A = p.extras["A"]
        B = mixed_partial_matrix(p, np.zeros(30), np.zeros(30))
        assert np.allclose(B, A.T, atol=1e-12)
        assert abs(spectral_norm(B) - np.linalg.norm(A, 2)) <= 1e-6


# ---- CLI ----------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    assert cli_main(["bench", "--config", str(write(tmp_path, small(methods=[])))]) == 1
    assert "methods must be a non-empty list" in capsys.readouterr().err
    assert cli_main(["solve", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert cli_main([]) == 1
    assert cli_main(["solve", "--config", str(tmp_path / "nope.json")]) == 1
    capped = small(solver={"max_oracle_calls": 10})
    assert cli_main(["solve", "--config", str(write(tmp_path, capped)), "--quiet"]) == 2
    assert "solver error" in capsys.readouterr().err


def test_cli_solve_prints_summary(capsys):
    assert cli_main(["solve", "--config", str(ROOT / "configs" / "bilinear5.json"), "--seed", "7"]) == 0
    out = capsys.readouterr().out
    for key in ("certified: true", "backtracks:", "calls_total:", "seed: 7"):
        assert key in out


def test_cli_selftest(capsys):
    assert cli_main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 7


def test_bench_outputs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, small(solver={"K": 300, "M": 5, "epsilon_tilde": 1e-2, "init_batch": 50,
                                        "trace_stride": 30, "workers": 3}))
    for run in ("a", "b"):
        assert cli_main(["bench", "--config", str(cfg), "--out", str(tmp_path / run), "--quiet"]) == 0
    a, b = tmp_path / "a" / "bilinear_L5", tmp_path / "b" / "bilinear_L5"
    names = sorted(p.name for p in a.iterdir() if p.suffix in (".csv", ".gp"))
    assert {"trace.csv", "median.csv", "summary.csv", "summary_cells.csv", "tiada_grid.csv", "plot.gp"} <= set(names)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_bench_method_flag(tmp_path):
    cfg = write(tmp_path, small())
    assert cli_main(["bench", "--config", str(cfg), "--out", str(tmp_path), "--method", "gda", "--quiet"]) == 0
    with open(tmp_path / "bilinear_L5" / "summary.csv") as fh:
        assert [r["method"] for r in csv.DictReader(fh)] == ["gda"]
    assert cli_main(["bench", "--config", str(cfg), "--method", "sgdab", "--quiet"]) == 1


def test_summary_calls_equal_result_counters(tmp_path):
    reps = run_bench(config_from_dict(small(methods=["sgdab-budgeted", "gda"])), log=lambda *a: None)
    rep = reps[0]
    for c in rep.cells:
        if c["method"] == "sgdab-budgeted":
            assert c["total_calls"] == rep.results[("sgdab-budgeted", c["seed"])].calls
        else:
            assert c["total_calls"] == 600 * 2 * 5
    med = [r for r in rep.summary if r["method"] == "sgdab-budgeted"][0]["median_total_calls"]
    assert med == float(np.median([r.calls for r in rep.results.values()]))


def test_summary_schema_and_selection(tmp_path):
    rep = run_bench(config_from_dict(small()), tmp_path, log=lambda *a: None)[0]
    with open(tmp_path / "bilinear_L5" / "summary.csv") as fh:
        rd = csv.DictReader(fh)
        assert rd.fieldnames == ["method", "cells", "median_calls_to_1e-1", "reached_1e-1",
                                 "median_calls_to_1e-2", "reached_1e-2", "median_total_calls"]
        assert [r["method"] for r in rd] == ["sgdab-budgeted", "gda", "agda", "tiada"]
    assert sum(g["selected"] for g in rep.tiada_grid) == 1 and len(rep.tiada_grid) == 4
    script = (tmp_path / "bilinear_L5" / "plot.gp").read_text()
    assert str(tmp_path) not in script and '"median.csv"' in script


def test_dro_bench_emits_all_columns(tmp_path):
    d = {"experiment": "dro-synthetic", "methods": ["sgdab-budgeted", "gda"], "seeds": [0],
         "problem": {"n_data": 40, "d": 4, "model": "linear"},
         "solver": {"K": 50, "M": 10, "trace_stride": 10},
         "noise": {"estimate_samples": 100},
         "baselines": {"iterations": 100, "record_every": 10}}
    rep = reproduce_dro(config_from_dict(d), tmp_path, log=lambda *a: None)
    with open(tmp_path / "dro-synthetic" / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["method", "seed", "oracle_calls", "iter", "grad_norm_sq", "map_norm",
                             "primal_value", "train_error", "wall_ms", "epoch"]
    for r in rows:
        for col in ("grad_norm_sq", "map_norm", "primal_value", "train_error", "epoch"):
            assert r[col] != ""
        assert r["wall_ms"] == ""
        assert float(r["epoch"]) == int(r["oracle_calls"]) / 40
    assert {r["method"] for r in rows} == {"sgdab-budgeted", "gda"}
    assert rep.info["init_calls"] == 0
