import json

import pytest

from banditrec import io as brio
from banditrec.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_genworld_then_run_files_mode(tmp_path, capsys):
    code, out, err = run_cli(
        capsys, "genworld", "--seed", "5", "--out", str(tmp_path / "world"),
        "--topics", "4", "--items-per-topic", "12", "--users", "15", "--dim", "8",
        "--sharpness", "4.0",
    )
    assert code == 0, err
    world_dir = tmp_path / "world"
    assert brio.validate_embeddings(world_dir / "embeddings.jsonl") == 48
    assert brio.validate_catalog(world_dir / "catalog.jsonl") == 4
    assert brio.validate_logs(world_dir / "logs.jsonl") > 0
    model = brio.read_simulator(world_dir / "simulator.json")
    assert len(model.user_vecs) == 15

    config = {
        "trials": 1, "iterations": 8, "rec_size": 2, "n_users": 5, "budget": 30,
        "mode": "two-stage", "policy": "s_galm_ucb", "seed": 1,
        "world": {
            "type": "files",
            "catalog": str(world_dir / "catalog.jsonl"),
            "embeddings": str(world_dir / "embeddings.jsonl"),
            "simulator": str(world_dir / "simulator.json"),
            "logs": str(world_dir / "logs.jsonl"),
        },
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = tmp_path / "out"
    code, out, err = run_cli(capsys, "run", "--config", str(cfg_path), "--out", str(out_dir))
    assert code == 0, err
    payload = json.loads(out.strip().splitlines()[-1])
    assert payload["policy"] == "s_galm_ucb"
    assert (out_dir / "summary.csv").exists()
    assert (out_dir / "curves.csv").exists()
    assert (out_dir / "config.json").exists()

    code, out, err = run_cli(capsys, "report", "--in", str(out_dir))
    assert code == 0, err
    assert json.loads(out.strip().splitlines()[-1])["mean_cum_ctr"] == payload["mean_cum_ctr"]


def test_run_with_overrides(tmp_path, capsys):
    config = {
        "trials": 1, "iterations": 5, "rec_size": 2, "n_users": 4, "budget": 20,
        "policy": "random", "seed": 0,
        "world": {"type": "synthetic", "n_topics": 3, "items_per_topic": 10,
                   "n_users": 10, "dim": 8, "cluster_sharpness": 2.0},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    code, out, err = run_cli(
        capsys, "run", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
        "--override", "policy=greedy", "--override", "iterations=3",
        "--override", "world.cluster_sharpness=1.0",
    )
    assert code == 0, err
    echoed = json.loads((tmp_path / "o" / "config.json").read_text())
    assert echoed["policy"] == "greedy"
    assert echoed["iterations"] == 3
    assert echoed["world"]["cluster_sharpness"] == 1.0


def test_simtrain_pipeline(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "genworld", "--seed", "2", "--out", str(tmp_path),
        "--topics", "3", "--items-per-topic", "10", "--users", "12", "--dim", "8",
        "--sharpness", "3.0",
    )
    assert code == 0, err
    code, out, err = run_cli(
        capsys, "simtrain", "--logs", str(tmp_path / "logs.jsonl"),
        "--out", str(tmp_path / "model.json"), "--epochs", "30", "--dim", "4",
    )
    assert code == 0, err
    model = brio.read_simulator(tmp_path / "model.json")
    assert 0.0 < model.threshold < 1.0
    assert json.loads(out.strip().splitlines()[-1])["users"] == 12


def test_bad_config_exits_nonzero_with_json_error(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"policy": "spooky"}))
    code, out, err = run_cli(capsys, "run", "--config", str(cfg_path), "--out", str(tmp_path / "o"))
    assert code != 0
    payload = json.loads(err.strip().splitlines()[-1])
    assert "error" in payload and "message" in payload


def test_missing_file_error_line(tmp_path, capsys):
    code, out, err = run_cli(capsys, "simtrain", "--logs", str(tmp_path / "nope.jsonl"),
                             "--out", str(tmp_path / "m.json"))
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"]
