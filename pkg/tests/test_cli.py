"""End-to-end CLI contract: subcommands, exit codes, run manifests."""

import json
import os

import pytest

from portsim.cli import main

CONFIG = """\
seed = 7
n_vessels = 6
weather_perturbation = 0.3
route.0 = 33.2,127.0;35.05,129.0
"""


@pytest.fixture()
def dataset(tmp_path):
    cfg = tmp_path / "traffic.kv"
    cfg.write_text(CONFIG)
    out = tmp_path / "gen"
    assert main(["generate", "--config", str(cfg), "--seed", "7",
                 "--out", str(out)]) == 0
    return out


def test_generate_writes_files_and_manifest(dataset):
    names = sorted(os.listdir(dataset))
    assert names == ["ais.csv", "arrivals.csv", "manifest.json",
                     "voyages.csv", "weather.csv"]
    manifest = json.loads((dataset / "manifest.json").read_text())
    assert manifest["seeds"] == [7]
    assert "generate" in manifest["command"]
    assert "traffic.kv" in manifest["config_hashes"]


def test_generate_missing_config_is_usage_error(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "absent.kv"),
                 "--out", str(tmp_path / "x")]) == 2


def test_generate_bad_config_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.kv"
    cfg.write_text("n_vessels = -4\nroute.0 = 33.2,127.0;35.05,129.0\n")
    assert main(["generate", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 2


def test_generate_deterministic_rerun(dataset, tmp_path):
    cfg = tmp_path / "traffic.kv"
    out2 = tmp_path / "gen2"
    assert main(["generate", "--config", str(cfg), "--seed", "7",
                 "--out", str(out2)]) == 0
    for name in ("ais.csv", "voyages.csv", "weather.csv", "arrivals.csv"):
        assert (dataset / name).read_bytes() == (out2 / name).read_bytes()


def test_fit_eval_round_trip(dataset, tmp_path, capsys):
    model_dir = tmp_path / "model"
    assert main(["fit", "--data", str(dataset), "--predictor", "ridge-tensor",
                 "--out", str(model_dir)]) == 0
    assert (model_dir / "ridge-tensor.json").exists()
    assert (model_dir / "manifest.json").exists()
    assert main(["eval", "--data", str(dataset),
                 "--model", str(model_dir)]) == 0
    rows = [json.loads(line) for line in
            capsys.readouterr().out.strip().splitlines()[-2:]]
    assert {r["predictor_id"] for r in rows} == {"kinematic", "ridge-tensor"}
    assert all(r["rmse_min"] >= 0 and r["n"] > 0 for r in rows)


def test_eval_unknown_predictor(dataset, capsys):
    assert main(["eval", "--data", str(dataset), "--predictor", "nope"]) == 1
    assert "available" in capsys.readouterr().err


def test_plan_build_and_validate(dataset, tmp_path):
    out = tmp_path / "plan"
    assert main(["plan", "build", "--data", str(dataset),
                 "--out", str(out)]) == 0
    assert main(["plan", "validate", str(out)]) == 0
    assert main(["plan", "validate", str(out / "plan.json")]) == 0


def test_simulate_deterministic_and_manifest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--seed", "3", "--rate", "30", "--with-prediction"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["artifacts"] == ["report.json"]
    assert manifest["seeds"] == [3]


def test_simulate_stdout_json(capsys):
    assert main(["simulate", "--seed", "0", "--rate", "0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["strategy"] == "without-prediction"
    assert report["rta_rate"] == 0.0


def test_sweep_csv_and_json_formats(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--rates", "5,30", "--seeds", "2",
                 "--out", str(out), "--format", "csv"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("rta_rate,strategy,")
    assert len(lines) == 1 + 4     # 2 rates x 2 strategies
    assert main(["sweep", "--rates", "5", "--seeds", "1",
                 "--out", str(out), "--format", "json"]) == 0
    rows = json.loads((out / "sweep.json").read_text())
    assert len(rows) == 2


def test_report_revenue_matches_arithmetic(tmp_path):
    out = tmp_path / "rev"
    assert main(["report", "revenue", "--without", "26.82", "--with", "27.67",
                 "--out", str(out)]) == 0
    rows = (out / "revenue.csv").read_text().splitlines()
    assert len(rows) == 16
    first = rows[1].split(",")
    assert abs(float(first[-1]) - 521220.0) <= 1.0


def test_report_punctuality_and_waiting(tmp_path, capsys):
    p = tmp_path / "punct"
    assert main(["report", "punctuality", "--seeds", "3", "--rate", "30",
                 "--out", str(p)]) == 0
    assert "reduction" in capsys.readouterr().out
    assert (p / "punctuality.csv").exists()
    w = tmp_path / "wait"
    assert main(["report", "waiting", "--seeds", "3", "--rate", "30",
                 "--out", str(w)]) == 0
    assert (w / "waiting.csv").exists()
    svg = (w / "waiting.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
