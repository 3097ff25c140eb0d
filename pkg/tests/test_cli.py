import csv
import io
import json

import numpy as np
import pytest

from edfagp import cli
from edfagp.config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig, config_from_dict, load_config

TINY = {
    "al": {"repository_size": 60, "max_measurements": 6, "eval_checkpoints": [3, 6]},
    "eval": {"test_size": 20},
    "gpr": {"restarts": 1, "max_iter": 40},
    "nn": {"epochs": 10},
    "methods": ["gpr-al", "nn-random"],
    "rounds": 2,
}


def write_cfg(tmp_path, name="cfg.json", **over):
    raw = {**TINY, "output_dir": str(tmp_path / "out"), **over}
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    assert config_from_dict(json.loads(cfg.to_json())) == cfg
    assert cfg.al.repository_size == 9578 and cfg.eval.test_size == 1002


def test_field_level_errors():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"al": {"batch_size": 3}, "simulator": {"noise_sigma_db": "x"}, "methods": ["lasso"], "bogus": 1})
    msgs = "\n".join(exc.value.errors)
    for fragment in ("al.batch_size", "simulator.noise_sigma_db", "bogus"):
        assert fragment in msgs


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    p = write_cfg(tmp_path)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "elsewhere"))
    assert load_config(p).output_dir == str(tmp_path / "elsewhere")


def test_bad_config_exits_nonzero_without_outputs(tmp_path, capsys):
    p = write_cfg(tmp_path, al={"batch_k": 0})
    assert cli.main(["run", "--config", str(p)]) == 2
    assert not (tmp_path / "out").exists()
    assert "al" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_run_writes_outputs_and_refuses_overwrite(tmp_path, capsys):
    p = write_cfg(tmp_path)
    assert cli.main(["run", "--config", str(p)]) == 0
    out = tmp_path / "out"
    for f in ("learning_curve.csv", "histogram.csv", "summary.json", "config.json"):
        assert (out / f).exists()
    assert len(list((out / "traces").glob("*.json"))) == 4
    rows = read_csv(out / "learning_curve.csv")
    assert {(r["method"], int(r["measurements"])) for r in rows} == {(m, n) for m in ("gpr-al", "nn-random") for n in (3, 6)}
    # two rounds with different seeds give a real spread
    assert all(float(r["rmse_std"]) > 0 for r in rows)
    for r in rows:
        assert float(r["rmse_min"]) <= float(r["rmse_mean"]) <= float(r["rmse_max"])
    hist = read_csv(out / "histogram.csv")
    per_method = {}
    for r in hist:
        per_method[r["method"]] = per_method.get(r["method"], 0) + int(r["count"])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["methods"]["gpr-al"]["final_measurements"] == 6
    assert set(per_method) == {"gpr-al", "nn-random"}

    before = (out / "learning_curve.csv").read_bytes()
    assert cli.main(["run", "--config", str(p)]) == 2
    assert "--force" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(p), "--force"]) == 0
    assert (out / "learning_curve.csv").read_bytes() == before


def test_histogram_counts_match_valid_entries(tmp_path):
    p = write_cfg(tmp_path, methods=["gpr-random"], rounds=1)
    assert cli.main(["run", "--config", str(p)]) == 0
    cfg = load_config(p)
    from edfagp.experiment import build_test_set

    n_valid = int(build_test_set(cfg).valid.sum())
    assert sum(int(r["count"]) for r in read_csv(tmp_path / "out" / "histogram.csv")) == n_valid


def test_methods_override(tmp_path):
    p = write_cfg(tmp_path)
    assert cli.main(["run", "--config", str(p), "--methods", "gpr-random", "--rounds", "1"]) == 0
    rows = read_csv(tmp_path / "out" / "learning_curve.csv")
    assert {r["method"] for r in rows} == {"gpr-random"}


def test_inspect_ripple(tmp_path, capsys):
    p = write_cfg(tmp_path)
    assert cli.main(["inspect", "ripple", "--config", str(p)]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["channel", "grid_slot", "ripple_db"] and len(rows) == 41
    assert max(abs(float(r[2])) for r in rows[1:]) > 0


def test_inspect_prior_flat_device(tmp_path):
    flat = {"ripple_amplitude_db": 0.0, "tilt_coeff_db_per_db": 0.0, "coupling_coeff_db": 0.0, "noise_sigma_db": 0.0}
    p = write_cfg(tmp_path, simulator=flat)
    out = tmp_path / "prior.csv"
    assert cli.main(["inspect", "prior", "--config", str(p), "--out", str(out)]) == 0
    vals = np.array([float(r["prior_db"]) for r in read_csv(out)])
    assert vals.shape == (40,)
    np.testing.assert_allclose(vals, 16.0, atol=1e-12)


def test_inspect_repository(tmp_path, capsys):
    p = write_cfg(tmp_path, al={"repository_size": 2000})
    assert cli.main(["inspect", "repository", "--config", str(p)]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    stats = {r[0]: r[2] for r in rows[1:] if r[0] != "deviation_count"}
    assert int(stats["size"]) == 2000
    assert abs(float(stats["occupancy_rate"]) - 0.5) < 0.02


def test_unknown_subject_is_rejected(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["inspect", "noise", "--config", str(write_cfg(tmp_path))])
    assert cli.cmd_inspect("noise", write_cfg(tmp_path)) == 2
