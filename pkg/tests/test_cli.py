import json

import numpy as np
import pytest

from fracns.cli import main, run
from fracns.config import ConfigError, ConfigFileMissing, ConfigMalformed, parse_config, validate_config
from fracns.fieldio import read_field, write_field
from fracns.grid import Field, GridSpec
from fracns.varlp import SpaceDomain, lebesgue_norm


def _write(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, {}))
    assert cfg.solver.tol == 1e-10 and cfg.solver.dealias is True


def test_all_violations_listed():
    with pytest.raises(ConfigError) as err:
        validate_config({"solver": {"alpha": 1.2}, "alpa": 1, "grid": {"N": 7}})
    text = " | ".join(err.value.violations)
    assert "alpha out of (0.5, 1]" in text
    assert "'alpa'" in text
    assert "N must be even" in text


def test_cross_field_check():
    with pytest.raises(ConfigError, match="grid.d = 2"):
        validate_config({"data": {"preset": "taylor_green_2d"}})


def test_file_errors(tmp_path):
    with pytest.raises(ConfigFileMissing):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigMalformed):
        parse_config(bad)


def test_exit_codes(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["norm", "--config", str(tmp_path / "nope.json"), "--out-dir", str(out), "--quiet"]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("[1,")
    assert main(["norm", "--config", str(bad), "--out-dir", str(out), "--quiet"]) == 5
    schema = _write(tmp_path, {"solver": {"alpha": 0.3}})
    assert main(["norm", "--config", str(schema), "--out-dir", str(out), "--quiet"]) == 2
    assert "alpha out of (0.5, 1]" in capsys.readouterr().err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"]["exit_code"] == 2


def test_norm_matches_classical(tmp_path):
    g = GridSpec(2, 16)
    data = np.random.default_rng(0).standard_normal((1,) + g.shape)
    write_field(tmp_path / "f.fnsv", Field(g, data))
    cfg = _write(tmp_path, {"grid": {"d": 2, "N": 16}, "data": {"preset": "random_divfree"},
                            "exponents": {"space": {"kind": "constant", "p0": 3.0}},
                            "run": {"field_path": str(tmp_path / "f.fnsv")}})
    out = tmp_path / "out"
    assert main(["norm", "--config", str(cfg), "--out-dir", str(out), "--format", "json", "--quiet"]) == 0
    res = json.loads((out / "norm.json").read_text())[0]
    assert res["luxemburg"] == pytest.approx(lebesgue_norm(Field(g, data), 3.0, SpaceDomain(g)), rel=1e-10)


def test_picard_beltrami_end_to_end(tmp_path):
    cfg = _write(tmp_path, {"grid": {"d": 3, "N": 16}, "solver": {"alpha": 0.8, "N_t": 4}})
    out = tmp_path / "out"
    assert main(["picard", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == 0
    report = json.loads((out / "picard_report.json").read_text())
    assert report["converged"]
    index = json.loads((out / "trajectory" / "trajectory.json").read_text())
    assert index["complete"] and len(index["files"]) == 4
    last = read_field(out / "trajectory" / index["files"][-1]["name"])
    first = read_field(out / "trajectory" / index["files"][0]["name"])
    assert np.allclose(last.data, np.exp(-1.0) * first.data, atol=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["trajectories"] == {"trajectory": "valid"}
    assert all(len(f["sha256"]) == 64 for f in manifest["files"])


def test_picard_divergence_exit_code(tmp_path):
    cfg = _write(tmp_path, {"grid": {"d": 3, "N": 8}, "solver": {"alpha": 0.8, "N_t": 4, "max_iter": 30},
                            "data": {"preset": "random_divfree", "amplitude": 500.0}})
    out = tmp_path / "out"
    assert main(["picard", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"]["ok"] is False and "numerical" in manifest["status"]["error"]


def test_determinism_and_seed_override(tmp_path):
    cfg = _write(tmp_path, {"grid": {"d": 2, "N": 16}, "data": {"preset": "random_divfree"},
                            "solver": {"N_t": 3, "T": 0.2}})
    outs = []
    for name, seed in (("a", "3"), ("b", "3"), ("c", "4")):
        out = tmp_path / name
        assert main(["picard", "--config", str(cfg), "--out-dir", str(out), "--seed", seed,
                     "--format", "csv", "--quiet"]) == 0
        outs.append(out)
    a, b, c = ((o / "picard_report.json").read_bytes() for o in outs)
    assert a == b and a != c
    assert (outs[0] / "trajectory" / "u_00002.fnsv").read_bytes() == (outs[1] / "trajectory" / "u_00002.fnsv").read_bytes()


def test_incomplete_trajectory_marked_invalid(tmp_path):
    from fracns.cli import Run

    out = tmp_path / "out"
    (out / "trajectory").mkdir(parents=True)
    (out / "trajectory" / "trajectory.json").write_text(json.dumps({"complete": False}))
    Run(out, "json", True).manifest(None, "picard", 0.0, {"ok": False, "exit_code": 3})
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["trajectories"]["trajectory"] == "invalid"


def test_kernel_and_report(tmp_path):
    cfg = _write(tmp_path, {"solver": {"alpha": 0.8}, "run": {"kernel": "grad_heat", "format": "csv"}})
    out = tmp_path / "out"
    assert main(["kernel", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == 0
    assert (out / "kernel.csv").read_text().startswith("t,r,value")
    assert json.loads((out / "decay.json").read_text())["drift"] < 0.01
    assert main(["report", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == 0
    assert (out / "report.csv").exists()


def test_theorem_commands(tmp_path):
    t1 = _write(tmp_path, {"grid": {"d": 3, "N": 8, "L": 62.83185307179586},
                           "solver": {"alpha": 1.0, "N_t": 9},
                           "data": {"preset": "random_divfree", "k_peak": 1.0, "amplitude": 0.01},
                           "run": {"sweep_T": [0.5, 1.0, 2.0], "cb_trials": 2}}, "t1.json")
    out = tmp_path / "t1"
    assert main(["theorem1", "--config", str(t1), "--out-dir", str(out), "--quiet"]) == 0
    res = json.loads((out / "theorem1.json").read_text())
    assert res["verdict"]["verdict"] in (True, False) and res["c_b"] > 0
    bad = _write(tmp_path, {"exponents": {"time": {"kind": "constant", "p0": 3.0}}}, "bad.json")
    assert main(["theorem1", "--config", str(bad), "--out-dir", str(tmp_path / "bad"), "--quiet"]) == 2
    t2 = _write(tmp_path, {"grid": {"d": 3, "N": 8, "L": 1.0}, "solver": {"alpha": 0.8, "N_t": 5},
                           "data": {"preset": "random_divfree", "amplitude": 0.01,
                                    "forcing": {"kind": "tensor", "preset": "bump", "amplitude": 1e-3}},
                           "run": {"sweep_T": [1.0, 4.0], "cb_trials": 2}}, "t2.json")
    out2 = tmp_path / "t2"
    assert main(["theorem2", "--config", str(t2), "--out-dir", str(out2), "--quiet"]) == 0
    assert json.loads((out2 / "theorem2.json").read_text())["verdict"]["theorem"] == 2


def test_solve_and_operators_commands(tmp_path):
    cfg = _write(tmp_path, {"grid": {"d": 2, "N": 16}, "data": {"preset": "taylor_green_2d"},
                            "solver": {"N_t": 3}, "run": {"seeds": 2, "substeps": 2}})
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out-dir", str(out), "--quiet"]) == 0
    assert json.loads((out / "solve.json").read_text())["divergence_defect"] < 1e-12
    assert main(["operators-check", "--config", str(cfg), "--out-dir", str(out), "--format", "json", "--quiet"]) == 0
    rows = json.loads((out / "operators.json").read_text())
    assert len(rows) == 2 and max(r["leray_idempotence"] for r in rows) < 1e-12


def test_default_table_format_is_csv(tmp_path):
    cfg = validate_config({"grid": {"d": 2, "N": 16}, "data": {"preset": "taylor_green_2d"},
                           "solver": {"N_t": 3}, "run": {"seeds": 2, "substeps": 2}})
    assert run("operators-check", cfg, tmp_path) == 0
    assert (tmp_path / "operators.csv").exists()
    assert json.loads((tmp_path / "manifest.json").read_text())["status"]["ok"]
    with pytest.raises(ValueError):
        run("nonsense", cfg, tmp_path)


def test_theorem2_reads_trajectory_dir(tmp_path):
    base = {"grid": {"d": 3, "N": 8, "L": 1.0}, "solver": {"alpha": 0.8, "N_t": 4},
            "data": {"preset": "random_divfree", "amplitude": 0.01},
            "run": {"sweep_T": [1.0, 2.0], "cb_trials": 2}}
    assert run("picard", validate_config(base), tmp_path / "p") == 0
    base["run"]["trajectory_dir"] = str(tmp_path / "p" / "trajectory")
    assert run("theorem2", validate_config(base), tmp_path / "t") == 0
    doc = json.loads((tmp_path / "t" / "theorem2.json").read_text())
    assert doc["trajectory_E_norm"] > 0
    # an index still marked incomplete is refused
    index = tmp_path / "p" / "trajectory" / "trajectory.json"
    index.write_text(index.read_text().replace('"complete": true', '"complete": false'))
    assert run("theorem2", validate_config(base), tmp_path / "t2") == 2
