import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from symforge.cli import (
    ConfigError,
    VERIFY_SUITES,
    config_hash,
    load_config,
    main,
    run_bandit_sim,
    run_discover,
    run_gen_data,
    run_verify,
)


def _write_config(tmp_path, **overrides):
    cfg = {
        "task": {"kind": "polynomial", "name": "S_I(4)", "sizes": [48, 16], "seed": 0},
        "arms": {"screen_repeats": 10},
        "bandit": {"T": 6},
        "training": {"epochs": 60},
        "output": {"dir": str(tmp_path / "runs")},
    }
    for section, values in overrides.items():
        cfg.setdefault(section, {}).update(values)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_load_config_merges_defaults(tmp_path):
    path = _write_config(tmp_path)
    cfg = load_config(path)
    assert cfg["task"]["name"] == "S_I(4)"
    assert cfg["bandit"]["nu"] == 0.5  # default preserved
    assert cfg["training"]["epochs"] == 60  # override applied


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({"task": {"flavor": "x"}}))
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text(yaml.safe_dump({"bandits": {}}))
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("task: [not, a, mapping]\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("{unbalanced\n")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_seed_override_changes_hash(tmp_path):
    path = _write_config(tmp_path)
    base = load_config(path)
    seeded = load_config(path, seed_override=7)
    assert seeded["task"]["seed"] == 7
    assert config_hash(base) != config_hash(seeded)
    assert config_hash(base) == config_hash(load_config(path))
    assert config_hash(base, tag="sgd-only") != config_hash(base)


def test_gen_data_writes_splits_and_manifest(tmp_path):
    cfg = load_config(_write_config(tmp_path))
    out = run_gen_data(cfg)
    assert (out / "train.csv").exists()
    assert (out / "val.csv").exists()
    manifest = yaml.safe_load((out / "manifest.yaml").read_text())
    assert manifest["sizes"] == {"train": 48, "val": 16}
    assert manifest["spec"] == "S_I(4)"
    header = (out / "train.csv").read_text().splitlines()[0]
    assert header == "x_1,x_2,x_3,x_4,x_5,y"


def test_gen_data_quadrangle(tmp_path):
    cfg = load_config(
        _write_config(tmp_path, task={"kind": "quadrangle", "sizes": [8, 4]})
    )
    out = run_gen_data(cfg)
    lines = (out / "train.csv").read_text().splitlines()
    assert len(lines) == 9
    assert lines[0].startswith("x_1,") and lines[0].endswith(",y")


def test_gen_data_unknown_task_name(tmp_path):
    cfg = load_config(_write_config(tmp_path, task={"name": "Q_I(9)"}))
    with pytest.raises(ConfigError):
        run_gen_data(cfg)


def test_discover_report_and_determinism(tmp_path):
    cfg = load_config(_write_config(tmp_path))
    out1, report1 = run_discover(cfg)
    pulls1 = (out1 / "pulls.csv").read_bytes()
    ranking1 = (out1 / "ranking.csv").read_bytes()
    assert (out1 / "report.yaml").exists()
    assert (out1 / "m1.csv").exists() and (out1 / "m2.csv").exists()
    assert len(report1["top3"]) == 3
    assert report1["T"] == 6
    out2, report2 = run_discover(cfg)
    assert out2 == out1  # same config hash, same directory
    assert (out2 / "pulls.csv").read_bytes() == pulls1
    assert (out2 / "ranking.csv").read_bytes() == ranking1
    assert report2["top3"] == report1["top3"]


def test_discover_sgd_only_mode(tmp_path):
    cfg = load_config(
        _write_config(tmp_path, training={"epochs": 15, "lr_initial": 0.05})
    )
    out, report = run_discover(cfg, sgd_only=True)
    assert report["mode"] == "sgd-only"
    assert "val_mae" in report
    # Dense learned matrices, in a directory separate from the bandit run.
    m1 = np.loadtxt(out / "m1.csv", delimiter=",")
    assert m1.shape == (5, 5)
    assert np.count_nonzero(np.abs(m1) > 1e-6) > 5
    bandit_out, _ = run_discover(cfg)
    assert bandit_out != out


def test_bandit_sim_writes_rates(tmp_path):
    cfg = load_config(
        _write_config(tmp_path, sim={"horizons": [20, 40], "trials": 20})
    )
    out, rates = run_bandit_sim(cfg)
    assert sorted(rates) == [20, 40]
    lines = (out / "misid.csv").read_text().splitlines()
    assert lines[0] == "T,misid_rate"
    assert len(lines) == 3
    for rate in rates.values():
        assert 0.0 <= rate <= 1.0


def test_verify_gradients_suite():
    passed, summary = run_verify("gradients")
    assert passed
    assert summary["max_relative_error"] <= 1e-4
    with pytest.raises(ConfigError):
        run_verify("everything")


def test_cli_exit_codes(tmp_path):
    runner = CliRunner()
    # Usage error: missing config file.
    result = runner.invoke(main, ["gen-data", "--config", str(tmp_path / "no.yaml")])
    assert result.exit_code == 2
    # Usage error: unknown config key.
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"task": {"flavor": "x"}}))
    result = runner.invoke(main, ["discover", "--config", str(bad)])
    assert result.exit_code == 2
    # Unknown verify suite is rejected by the option parser.
    result = runner.invoke(main, ["verify", "--suite", "everything"])
    assert result.exit_code == 2
    assert "everything" not in VERIFY_SUITES


def test_cli_gen_data_and_bandit_sim_commands(tmp_path):
    runner = CliRunner()
    path = _write_config(tmp_path, sim={"horizons": [20], "trials": 10})
    result = runner.invoke(main, ["gen-data", "--config", str(path)])
    assert result.exit_code == 0, result.output
    assert "wrote datasets" in result.output
    result = runner.invoke(main, ["bandit-sim", "--config", str(path), "--seed", "1"])
    assert result.exit_code == 0, result.output
    assert "misid=" in result.output


def test_cli_verify_command():
    runner = CliRunner()
    result = runner.invoke(main, ["verify", "--suite", "gradients"])
    assert result.exit_code == 0, result.output
    assert "suite gradients: pass" in result.output
