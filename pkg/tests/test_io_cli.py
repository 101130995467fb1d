import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from dendi.cli import main, parse_config, UsageError
from dendi.engine import run_dendi
from dendi.exceptions import EmptyAfterFiltering, MissingColumn, NonNumericValue
from dendi.forms import FORM_TYPES, LEFT, AdditiveCombo, Linear, MultiplicativeCombo, Null, PiecewiseConstant, Tree
from dendi.io import form_from_dict, form_to_dict, load_csv, read_report, report_document, write_report
from dendi.search import make_grid, search_single_split
from dendi.simulation import ScenarioSpec, generate


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_three_rows(tmp_path):
    data = load_csv(_write(tmp_path / "d.csv", "y,x\n1,2\n2,3\n3,5\n"), "y", ["x"])
    assert (data.n, data.p, data.q) == (3, 1, 0)


def test_categorical_confounder(tmp_path):
    text = "y,x,g\n" + "".join(f"{i},{i % 7},{'abc'[i % 3]}\n" for i in range(12))
    data = load_csv(_write(tmp_path / "d.csv", text), "y", ["x"], ["g"])
    assert data.q == 2 and data.confounder_names == ("g[b]", "g[c]")


def test_binomial_outcome_out_of_range(tmp_path):
    with pytest.raises(NonNumericValue):
        load_csv(_write(tmp_path / "d.csv", "y,x\n0,1\n2,2\n1,3\n"), "y", ["x"], family="binomial")


def test_load_errors(tmp_path):
    path = _write(tmp_path / "d.csv", "y,x\n1,a\n2,3\n")
    with pytest.raises(NonNumericValue):
        load_csv(path, "y", ["x"])
    with pytest.raises(MissingColumn):
        load_csv(path, "y", ["w"])
    with pytest.raises(EmptyAfterFiltering):
        load_csv(_write(tmp_path / "e.csv", "y,x\n1,\n,3\n"), "y", ["x"])


def test_missing_rows_dropped(tmp_path):
    data = load_csv(_write(tmp_path / "d.csv", "y,x\n1,2\n,3\n3,\n4,5\n"), "y", ["x"])
    np.testing.assert_array_equal(data.y, [1, 4])


@pytest.mark.parametrize("form", [
    Null(), Linear(1), PiecewiseConstant(0, 0.1), AdditiveCombo(0, -0.3),
    MultiplicativeCombo(0, 1, 1 / 3), Tree(0, 0.0, LEFT, 1, 0.7),
])
def test_form_round_trip(form):
    assert form_from_dict(json.loads(json.dumps(form_to_dict(form, ("a", "b"))))) == form
    assert form.kind in FORM_TYPES


def test_report_round_trip(tmp_path):
    report = run_dendi(generate(ScenarioSpec(6, 200, 1.0, 0)))
    doc = report_document(report, {"mode": "analyze"}, 1.0)
    write_report(doc, tmp_path / "r.json")
    back = read_report(tmp_path / "r.json")
    assert back == json.loads(json.dumps(doc))
    for c, j in zip(back["covariates"], range(5)):
        assert form_from_dict(c["selected_form"]) == report.forms[j]
    assert list(back["coefficients"].values()) == report.coefficients.tolist()


def _scenario_csv(tmp_path, scenario, n, sigma, seed, name="d.csv"):
    data = generate(ScenarioSpec(scenario, n, sigma, seed))
    frame = pd.DataFrame(data.X, columns=list(data.names))
    frame.insert(0, "y", data.y)
    path = tmp_path / name
    frame.to_csv(path, index=False, float_format="%.17g")
    return path, data


def test_analyze_scenario2(tmp_path, capsys):
    path, data = _scenario_csv(tmp_path, 2, 800, 1.0, 7)
    out = tmp_path / "out"
    assert main(["--mode", "analyze", "--input", str(path), "--outcome", "y",
                 "--covariates", "x1", "--out", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert "piecewise constant" in summary
    want = search_single_split(PiecewiseConstant(0), data, [], make_grid(data, 0)).best_form.c
    doc = read_report(out / "report.json")
    assert doc["covariates"][0]["split_points"][0]["value"] == want
    assert abs(want) < 0.3
    curves = pd.read_csv(out / "curves.tsv", sep="\t")
    assert list(curves.columns) == ["covariate", "x", "eta", "mu"] and len(curves) == 101


def test_analyze_noise_covariate(tmp_path):
    rng = np.random.default_rng(0)
    frame = pd.DataFrame({"y": rng.standard_normal(300), "noise": rng.standard_normal(300)})
    frame.to_csv(tmp_path / "d.csv", index=False)
    assert main(["--mode", "analyze", "--input", str(tmp_path / "d.csv"), "--outcome", "y",
                 "--covariates", "noise", "--out", str(tmp_path / "o")]) == 0
    assert "no effect detected" in (tmp_path / "o" / "summary.txt").read_text()


def test_analyze_binomial_threshold(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.normal(6, 1, 800)
    y = (rng.random(800) < np.where(x > 6.5, 0.6, 0.15)).astype(int)
    pd.DataFrame({"event": y, "hba1c": x}).to_csv(tmp_path / "d.csv", index=False)
    assert main(["--mode", "analyze", "--input", str(tmp_path / "d.csv"), "--outcome", "event",
                 "--covariates", "hba1c", "--family", "binomial", "--out", str(tmp_path / "o")]) == 0
    doc = read_report(tmp_path / "o" / "report.json")
    assert doc["covariates"][0]["label"] == "P"


def test_simulate_outputs_are_byte_identical(tmp_path):
    outs = []
    for w in (1, 4):
        out = tmp_path / f"w{w}"
        assert main(["--mode", "simulate", "--scenario", "5", "--n", "200", "--sigma", "1,2",
                     "--replications", "3", "--seed", "4", "--workers", str(w),
                     "--out", str(out)]) == 0
        outs.append(out)
    for name in ("detection.tsv", "labels.tsv", "splits.tsv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    table = pd.read_csv(outs[0] / "detection.tsv", sep="\t")
    assert list(table.columns) == ["target", "n=200,sigma=1", "n=200,sigma=2"]


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["--mode", "simulate", "--scenario", "1", "--replications", "0"]) == 2
    assert main(["--mode", "simulate", "--scenario", "9"]) == 2
    assert main(["--mode", "analyze", "--outcome", "y"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_runtime_errors_exit_1(tmp_path, capsys):
    path = _write(tmp_path / "d.csv", "y,x\n1,2\n")
    assert main(["--mode", "analyze", "--input", str(path), "--outcome", "y",
                 "--covariates", "nope", "--out", str(tmp_path)]) == 1
    assert main(["--mode", "analyze", "--input", str(tmp_path / "missing.csv"), "--outcome", "y",
                 "--covariates", "x", "--out", str(tmp_path)]) == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = _write(tmp_path / "c.json", json.dumps({"mode": "simulate", "scenario": 2,
                                                   "replications": 5, "n": [300]}))
    rc = parse_config(["--config", str(cfg), "--replications", "7"])
    assert (rc.scenario, rc.replications, rc.n) == (2, 7, [300])
    bad = _write(tmp_path / "b.json", json.dumps({"colour": 1}))
    with pytest.raises(UsageError):
        parse_config(["--config", str(bad)])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dendi", "--mode", "simulate", "--scenario",
                          "1", "--replications", "0"], capture_output=True, text=True)
    assert res.returncode == 2
