"""End-to-end command flows and the exit-code contract."""

import json

import numpy as np
import pytest

from mixsel.cli import RunConfig, main
from mixsel.errors import ConfigError


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    rc = run_cli("generate", "--n", "40", "--p", "8", "--beta-mode", "random",
                 "--s-star", "2", "--sigma-beta", "2.5", "--seed", "3",
                 "--out", str(root))
    assert rc == 0
    return root


def test_generate_outputs(dataset):
    for name in ("X.csv", "y.csv", "truth.json"):
        assert (dataset / name).exists()
    head = (dataset / "X.csv").read_text(encoding="utf-8").splitlines()[0]
    assert head.startswith("# mixsel")
    truth = json.loads((dataset / "truth.json").read_text(encoding="utf-8"))
    assert len(truth["gamma_star"]) == 2
    assert len(truth["beta_star"]) == 8


def test_run_and_diagnose_pipeline(dataset, tmp_path):
    out = tmp_path / "run"
    rc = run_cli("run", "--x", str(dataset / "X.csv"),
                 "--y", str(dataset / "y.csv"), "--preset", "lit1",
                 "--iters", "400", "--chains", "2", "--seed", "4",
                 "--s0", "3", "--out", str(out))
    assert rc == 0
    run_meta = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert run_meta["s0"] == 3 and run_meta["p"] == 8
    assert len(run_meta["chains"]) == 2
    for cid in (0, 1):
        assert (out / f"chain_{cid}.jsonl").exists()
        assert (out / f"rb_{cid}.csv").exists()
    rep_dir = tmp_path / "rep"
    rc = run_cli("diagnose", str(out / "chain_0.jsonl"),
                 str(out / "chain_1.jsonl"),
                 "--x", str(dataset / "X.csv"), "--y", str(dataset / "y.csv"),
                 "--s0", "3", "--truth", str(dataset / "truth.json"),
                 "--rb", str(out / "rb_0.csv"), "--rb", str(out / "rb_1.csv"),
                 "--q", "4", "--out", str(rep_dir))
    assert rc == 0
    report = json.loads((rep_dir / "report.json").read_text(encoding="utf-8"))
    assert report["n_chains"] == 2
    assert len(report["pip"]) == 8 and len(report["pip_rb"]) == 8
    assert len(report["h_max"]) == 2
    assert "t1" in report["ess"] and "t2" in report["ess"]
    for key in ("trace", "pip", "landscape"):
        assert (rep_dir / f"{key}.png").exists()


def test_run_config_file_and_overrides(dataset, tmp_path):
    cfg = RunConfig(x_path=str(dataset / "X.csv"),
                    y_path=str(dataset / "y.csv"), preset="lit2", iters=50,
                    s0=3, seed=9, out_dir=str(tmp_path / "a"))
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(cfg.to_json(), encoding="utf-8")
    rc = run_cli("run", "--config", str(cfg_path), "--iters", "80",
                 "--out", str(tmp_path / "b"))
    assert rc == 0
    meta = json.loads((tmp_path / "b" / "run.json").read_text(encoding="utf-8"))
    assert meta["config"]["preset"] == "lit2"      # from the file
    assert meta["config"]["iters"] == 80           # overridden on the line
    assert meta["config"]["out_dir"] == str(tmp_path / "b")
    with pytest.raises(ConfigError):
        RunConfig.from_json('{"preset": "lit1", "bogus": 1}')
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus": 1}', encoding="utf-8")
    assert run_cli("run", "--config", str(bad), "--out", str(tmp_path)) == 1


def test_init_modes_and_screen(dataset, tmp_path):
    out = tmp_path / "r"
    rc = run_cli("run", "--x", str(dataset / "X.csv"),
                 "--y", str(dataset / "y.csv"), "--iters", "60",
                 "--chains", "2", "--s0", "3", "--init", "random:2",
                 "--screen-budget", "5", "--out", str(out))
    assert rc == 0
    meta = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert len(meta["spec"]["screen"]) == 5
    inits = [row["init"] for row in meta["chains"]]
    assert all(len(i) == 2 for i in inits)
    out2 = tmp_path / "s"
    rc = run_cli("run", "--x", str(dataset / "X.csv"),
                 "--y", str(dataset / "y.csv"), "--iters", "60",
                 "--chains", "2", "--s0", "3", "--init", "stepwise",
                 "--out", str(out2))
    assert rc == 0
    meta2 = json.loads((out2 / "run.json").read_text(encoding="utf-8"))
    first, second = (row["init"] for row in meta2["chains"])
    assert first == second
    out3 = tmp_path / "t"
    rc = run_cli("run", "--x", str(dataset / "X.csv"),
                 "--y", str(dataset / "y.csv"), "--iters", "30",
                 "--s0", "3", "--init", "1,5", "--out", str(out3))
    assert rc == 0
    meta3 = json.loads((out3 / "run.json").read_text(encoding="utf-8"))
    assert meta3["chains"][0]["init"] == [1, 5]


def test_usage_and_data_exit_codes(dataset, tmp_path):
    # missing required option
    assert run_cli("run", "--x", str(dataset / "X.csv"),
                   "--y", str(dataset / "y.csv")) == 1
    # bad flag values
    assert run_cli("run", "--x", str(dataset / "X.csv"),
                   "--y", str(dataset / "y.csv"), "--chains", "0",
                   "--out", str(tmp_path)) == 1
    assert run_cli("run", "--x", str(dataset / "X.csv"),
                   "--y", str(dataset / "y.csv"), "--init", "random:x",
                   "--out", str(tmp_path)) == 1
    # empty traces are a data problem
    out = tmp_path / "empty"
    assert run_cli("run", "--x", str(dataset / "X.csv"),
                   "--y", str(dataset / "y.csv"), "--iters", "0",
                   "--s0", "3", "--out", str(out)) == 0
    assert run_cli("diagnose", str(out / "chain_0.jsonl"),
                   "--x", str(dataset / "X.csv"),
                   "--y", str(dataset / "y.csv"),
                   "--out", str(tmp_path / "er")) == 2
    # model space too large to enumerate
    assert run_cli("verify", "--p", "30", "--out", str(tmp_path / "v30")) == 2


def test_verify_certified_instance(tmp_path):
    out = tmp_path / "ok"
    rc = run_cli("verify", "--p", "6", "--n", "100", "--sigma-beta", "2.5",
                 "--seed", "0", "--s0", "3", "--out", str(out))
    assert rc == 0
    result = json.loads((out / "verify.json").read_text(encoding="utf-8"))
    assert result["pass"] is True
    assert result["constants"]["alpha"] < 1.0
    assert all(c["ok"] for c in result["checks"].values())
    assert (out / "verify_tv.png").exists()


def test_verify_saturated_alpha_fails(tmp_path):
    # posterior so steep the exit probability underflows: every exact check
    # runs, the restart certificate is the one that cannot be granted
    out = tmp_path / "sat"
    rc = run_cli("verify", "--p", "6", "--n", "80", "--sigma-beta", "2.5",
                 "--seed", "1", "--s0", "3", "--out", str(out))
    assert rc == 3
    result = json.loads((out / "verify.json").read_text(encoding="utf-8"))
    assert result["pass"] is False
    assert result["checks"]["restart_certificate"]["ok"] is False
    assert result["checks"]["detailed_balance"]["ok"] is True


def test_verify_example1(tmp_path):
    out = tmp_path / "ex1"
    rc = run_cli("verify", "--example1", "--nu", "0.5", "--n", "200",
                 "--n", "400", "--out", str(out))
    assert rc == 0
    result = json.loads((out / "verify.json").read_text(encoding="utf-8"))
    assert result["pass"] is True
    esc = [row["escape"] for row in result["rows"]]
    assert esc[1] < esc[0]
    assert (out / "verify_escape.png").exists()


def test_compare_summary(tmp_path):
    out = tmp_path / "cmp"
    rc = run_cli("compare", "--n", "60", "--p", "8", "--beta-mode", "random",
                 "--s-star", "2", "--sigma-beta", "2.5", "--seed", "1",
                 "--presets", "lit1,rw,lit1", "--reps", "2", "--iters", "400",
                 "--s0", "3", "--out", str(out))
    assert rc == 0
    lines = (out / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# mixsel")
    assert lines[1].split(",")[:3] == ["preset", "reps", "success"]
    assert (out / "compare.png").exists()
    payload = json.loads((out / "compare.json").read_text(encoding="utf-8"))
    labels = [row["preset"] for row in payload["summary"]]
    assert labels == ["lit1", "rw", "lit1.2"]
    for row in payload["summary"]:
        assert row["reps"] == 2
        assert 0 <= row["success"] <= 2
    assert run_cli("compare", "--n", "30", "--p", "6", "--presets", " ",
                   "--out", str(tmp_path / "x")) == 1
