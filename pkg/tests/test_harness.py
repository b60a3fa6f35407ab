import json

import pytest

from nlvar.cli import main
from nlvar.errors import ConfigError
from nlvar.harness import ExperimentConfig, csv_text, load_config, run_experiment

MINIMAL_P_SWEEP = {
    "kind": "p_sweep",
    "mesh": {"n_interior": 8, "window_cells": 4},
    "exterior": {"type": "constant", "value": 1.0},
    "params": {"s": 0.5, "p_schedule": {"k_max": 4}},
}


def test_minimal_p_sweep(tmp_path):
    res = run_experiment(MINIMAL_P_SWEEP, out=tmp_path)
    assert res.status == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json", "results.csv", "summary.json"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["kind"] == "p_sweep" and "version" in manifest
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["pass"] is True


def test_missing_mesh_names_field():
    cfg = dict(MINIMAL_P_SWEEP)
    del cfg["mesh"]
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(cfg)
    assert exc.value.field == "mesh"
    assert "mesh" in str(exc.value)


@pytest.mark.parametrize("patch,field", [
    ({"kind": "bogus"}, "kind"),
    ({"params": {}}, "params.s"),
    ({"exterior": {"type": "random"}}, "seed"),
    ({"mesh": {"omega": [0, 1]}}, "mesh.n_interior"),
])
def test_config_errors(patch, field):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({**MINIMAL_P_SWEEP, **patch})
    assert exc.value.field == field


def test_seed_required_for_random_kinds():
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({"kind": "kernel"})
    assert exc.value.field == "seed"


def test_deterministic_csv(tmp_path):
    cfg = {"kind": "p_sweep", "seed": 11, "mesh": {"n_interior": 8, "window_cells": 4},
           "exterior": {"type": "random"}, "params": {"s": 0.5, "p_schedule": {"k_max": 5}, "n_random": 50}}
    a = run_experiment(cfg, out=tmp_path / "a")
    b = run_experiment(cfg, out=tmp_path / "b")
    assert (a.out_dir / "results.csv").read_bytes() == (b.out_dir / "results.csv").read_bytes()
    assert (a.out_dir / "manifest.json").read_bytes() == (b.out_dir / "manifest.json").read_bytes()


def test_csv_format():
    text = csv_text(["a", "b"], [[0.1, 1], [1e-20, True]])
    assert text == "a,b\n0.1,1\n1e-20,1\n"


def test_output_dir_resolution(tmp_path, monkeypatch):
    cfg = {**MINIMAL_P_SWEEP, "output_dir": str(tmp_path / "from_config")}
    assert run_experiment(cfg).out_dir == tmp_path / "from_config"
    monkeypatch.setenv("NLVAR_OUT", str(tmp_path / "from_env"))
    assert run_experiment(cfg).out_dir == tmp_path / "from_env"
    assert run_experiment(cfg, out=tmp_path / "flag").out_dir == tmp_path / "flag"


def test_gnuplot_table(tmp_path):
    run_experiment(MINIMAL_P_SWEEP, out=tmp_path, gnuplot=True)
    lines = (tmp_path / "results.dat").read_text().splitlines()
    assert lines[0].startswith("# p ") and len(lines) == 5


def test_seed_override(tmp_path):
    cfg = {"kind": "coarea", "seed": 1, "mesh": {"n_interior": 4}, "params": {"s": 0.5, "n_fields": 5}}
    a = run_experiment(cfg, out=tmp_path / "a", seed=2)
    manifest = json.loads((a.out_dir / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 2


def test_load_config_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_cli_run_and_check(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(MINIMAL_P_SWEEP))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "results.csv").exists()
    assert main(["check", "kernel", "--out", str(tmp_path / "k")]) == 0
    assert main(["check", "no-such-suite"]) == 2
    assert "PASS" in capsys.readouterr().out


def test_cli_strict_exit(tmp_path):
    cfg = {"kind": "pathology", "exterior": {"type": "pathology", "kind": "fgr"}, "params": {"k_max": 1024}}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", str(p), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(p), "--out", str(tmp_path / "b"), "--strict"]) == 3


def test_cli_config_error(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"kind": "p_sweep"}))
    assert main(["run", str(p)]) == 2


def test_cli_oracle(capsys):
    assert main(["oracle", "weight", "--a", "0", "1", "--b", "1", "2", "--alpha", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["quadrature"] == pytest.approx(out["closed_form"], rel=1e-10)
    assert main(["oracle", "far", "--cell", "0", "1", "--edge", "1", "--side", "right", "--alpha", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["closed_form"] == pytest.approx(4.0)


def test_cli_dense_oracle(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(MINIMAL_P_SWEEP))
    assert main(["oracle", "dense-min", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(0.0, abs=1e-12)
    assert main(["oracle", "fd-gradient", str(p), "--p", "1.5"]) == 0
