"""Configuration parsing, presets, and the command-line interface."""

import hashlib
import json
import os

import pytest

from catmem.cli import main
from catmem.experiments import (ConfigError, ExperimentConfig, PRESETS,
                                config_fingerprint, parse_config_text, preset)

TINY_RUN = """\
# small smoke configuration
alpha0 = 1.0
t_store = 0.02/Gm
n_samples = 64
dt = 0.1
signatures = p_distribution, p_variance
time_step_check = false
"""

TINY_SWEEP = """\
sweep.alpha0 = 1.0, 2.0
n_samples = 32
dt = 0.1
signatures = p_variance
time_step_check = false
"""


def test_parse_basics_and_two_pass_storage():
    # t_store uses the gamma_m that appears later in the same file
    cfg = parse_config_text("t_store = 0.02/Gm\ngamma_m = 2e-4\nt_write = auto\n")
    assert cfg.t_store == pytest.approx(100.0)
    assert cfg.gamma_m == 2e-4
    assert cfg.t_write is None
    cfg = parse_config_text("signatures = p_distribution,negativity\n")
    assert cfg.signatures == ("p_distribution", "negativity")


def test_parse_comments_and_blank_lines():
    cfg = parse_config_text("\n# comment\nalpha0 = 3.0  # trailing\n\n")
    assert cfg.alpha0 == 3.0


@pytest.mark.parametrize("text,fragment", [
    ("alpha0 = 2\nfrobnicate = 1\n", "line 2"),
    ("alpha0 = duck\n", "line 1"),
    ("alpha0 2\n", "line 1"),
    ("n_samples = 2.5\n", "line 1"),
    ("signatures = wigner, nope\n", "line 1"),
    ("sweep.dt = 0.1, 0.2\n", "line 1"),
    ("stratified = maybe\n", "line 1"),
])
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert fragment in str(err.value)


def test_parse_sweep_axes():
    cfg = parse_config_text(
        "sweep.alpha0 = 1, 2, 3\nsweep.t_store = 0.02/Gm, 0.1/Gm\ngamma_m = 1e-2\n")
    assert cfg.sweep[0] == ("alpha0", (1.0, 2.0, 3.0))
    assert cfg.sweep[1][0] == "t_store"
    assert cfg.sweep[1][1][0] == pytest.approx(2.0)
    assert cfg.sweep[1][1][1] == pytest.approx(10.0)


def test_fingerprint_ignores_execution_knobs():
    base = ExperimentConfig()
    assert config_fingerprint(base) == config_fingerprint(
        ExperimentConfig(workers=7, out_dir="elsewhere"))
    assert config_fingerprint(base) != config_fingerprint(
        ExperimentConfig(alpha0=2.5))


def test_presets_resolve_and_validate():
    for name in PRESETS:
        cfg = preset(name)
        cfg.validate()
    assert preset("fig10").n_samples == 200_000
    assert preset("table1").sweep[0][0] == "alpha0"
    assert preset("fig12").gamma_int == 0.05
    with pytest.raises(ConfigError):
        preset("nope")


def test_run_dry_run(capsys):
    assert main(["run", "--preset", "fig5", "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "dry run; would execute:" in out
    assert "alpha0=5" in out
    assert "manifest.json" in out and "p_distribution.csv" in out


def test_sweep_dry_run(capsys):
    assert main(["sweep", "--preset", "fig9", "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "dry run; 16 points:" in out
    assert out.count("t_store=") == 16


def test_sweep_without_axes_fails(capsys):
    assert main(["sweep", "--dry-run"]) == 2
    assert "no sweep axes" in capsys.readouterr().err


def test_oracle_queries(capsys):
    assert main(["oracle", "t_positive", "n_bar=0", "gamma=1"]) == 0
    assert "t_positive = 0.346574" in capsys.readouterr().out

    assert main(["oracle", "t_p_bound", "n_bar=0", "gamma=1"]) == 0
    assert "t_p_bound = inf" in capsys.readouterr().out

    assert main(["oracle", "transfer_amplitude", "gamma_int=0.05"]) == 0
    assert "transfer_amplitude = 0.97449" in capsys.readouterr().out

    assert main(["oracle", "decohered_density", "t=0.1", "alpha0=2", "gamma=1"]) == 0
    out = capsys.readouterr().out
    assert "amplitude = " in out and "coefficient = " in out


def test_oracle_writes_json(tmp_path, capsys):
    out = tmp_path / "oracle_out"
    assert main(["oracle", "cat_variance", "alpha0=1", "--out", str(out)]) == 0
    capsys.readouterr()
    payload = json.loads((out / "oracle.json").read_text())
    assert payload["query"] == "cat_variance"
    assert payload["values"]["cat_variance"] == pytest.approx(0.26158, abs=1e-4)


def test_oracle_error_paths(capsys):
    assert main(["oracle", "no_such_quantity"]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["oracle", "q_parameter", "gamma=1"]) == 2  # missing t
    capsys.readouterr()
    assert main(["oracle", "t_positive", "gamma"]) == 2  # not key=value
    capsys.readouterr()


def test_bad_seed_rejected(capsys):
    assert main(["run", "--preset", "fig5", "--seed", "-3", "--dry-run"]) == 2
    assert "config error" in capsys.readouterr().err


def test_validate_dry_run(capsys):
    assert main(["validate", "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "acceptance criteria:" in out
    for number in range(1, 10):
        assert f"{number}. " in out


def test_run_writes_consistent_artifacts(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(TINY_RUN)
    out1 = tmp_path / "out1"
    assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
    capsys.readouterr()

    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["scalars"]["mean_weight"] == 1.0
    assert "p_variance_out" in manifest["scalars"]
    assert manifest["config"]["alpha0"] == 1.0

    csv_path = out1 / "p_distribution.csv"
    first = csv_path.read_text().splitlines()[0]
    assert first == f"# manifest_sha256 = {manifest['config_sha256']}"
    digest = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    assert manifest["artifacts"]["p_distribution"]["sha256"] == digest

    # a rerun of the same configuration is byte-identical
    out2 = tmp_path / "out2"
    assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
    capsys.readouterr()
    assert (out2 / "p_distribution.csv").read_bytes() == csv_path.read_bytes()


def test_sweep_checkpoints_resume(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(TINY_SWEEP)
    out = tmp_path / "sweep_out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()

    csv_path = out / "sweep.csv"
    header = csv_path.read_text().splitlines()[1]
    assert header.startswith("alpha0,negativity,")
    first_bytes = csv_path.read_bytes()
    ckpts = sorted((out / "checkpoints").iterdir())
    assert [p.name for p in ckpts] == ["point_0000.json", "point_0001.json"]
    stamps = [os.stat(p).st_mtime_ns for p in ckpts]

    # second pass reuses both checkpoints untouched
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert [os.stat(p).st_mtime_ns for p in ckpts] == stamps
    assert csv_path.read_bytes() == first_bytes

    # a stale fingerprint forces that point to be recomputed
    stale = json.loads(ckpts[0].read_text())
    stale["config_sha256"] = "0" * 64
    ckpts[0].write_text(json.dumps(stale))
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert os.stat(ckpts[0]).st_mtime_ns != stamps[0]
    assert json.loads(ckpts[0].read_text())["config_sha256"] != "0" * 64
    assert csv_path.read_bytes() == first_bytes
