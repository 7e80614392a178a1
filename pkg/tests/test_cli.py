import json

import pytest

from hcb.cli import main
from hcb.model import load_instance


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "instance": {"N": 3, "alpha": 0.5, "reward": "target-bump"},
                "algorithms": ["alg-nmc", "alg-mc"],
                "t_grid": [64, 128],
                "reps": 4,
                "seed": 3,
            }
        )
    )
    return path


def _pairs(line):
    return dict(token.split("=", 1) for token in line.split())


def test_run_without_config_is_usage_error(capsys):
    assert main(["run"]) == 2
    assert "needs --config" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_unknown_subcommand():
    assert main(["frobnicate"]) == 2


def test_bad_workers(config_file):
    assert main(["run", "--config", str(config_file), "--workers", "0"]) == 2


def test_run_emits_summary(config_file, capsys):
    assert main(["run", "--config", str(config_file)]) == 0
    row = _pairs(capsys.readouterr().out.strip())
    assert row["algorithm"] == "alg-nmc"
    assert row["T"] == "128"


def test_sweep_twice_is_identical(config_file, tmp_path, capsys):
    assert main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 8
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_gen_instance(tmp_path, capsys):
    out = tmp_path / "inst.json"
    assert main(["gen-instance", "--preset", "concentration", "--seed", "5", "--out", str(out)]) == 0
    inst = load_instance(out)
    assert (inst.K, inst.N) == (2, 5)
    assert _pairs(capsys.readouterr().out.strip())["seed"] == "5"

    assert main(["gen-instance", "--preset", "wedge"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["N"] == 8


def test_gen_instance_from_spec(tmp_path):
    spec = tmp_path / "gen.json"
    spec.write_text(json.dumps({"N": 4, "biased": 2}))
    out = tmp_path / "inst.json"
    assert main(["gen-instance", "--config", str(spec), "--out", str(out)]) == 0
    assert load_instance(out).N == 4


def test_adversary_needs_binary_context(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"instance": {"N": 4, "K": 3}, "t_grid": [256]}))
    assert main(["adversary", "--config", str(path)]) == 2


@pytest.mark.slow
def test_adversary_default_instance(tmp_path, capsys):
    status = main(["adversary", "--quick", "--out", str(tmp_path)])
    lines = capsys.readouterr().out.strip().splitlines()
    assert _pairs(lines[-1])["result"] == ("pass" if status == 0 else "fail")
    assert len(json.loads((tmp_path / "families.json").read_text())) == 3


@pytest.mark.slow
def test_verify_lemmas_quick(capsys):
    assert main(["verify-lemmas", "--seed", "7", "--quick"]) == 0
    assert "result=pass" in capsys.readouterr().out
