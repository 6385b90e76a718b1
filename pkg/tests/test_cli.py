import copy
import csv
import io
import json
from pathlib import Path

import pytest

from sepstatus.cli import main, set_param

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, cfg, fmt="json", extra=()):
    out = tmp_path / f"out.{fmt}"
    code = main(["run", "--config", write(tmp_path, cfg), "--out", str(out), "--format", fmt, *extra])
    return code, (out.read_text() if out.exists() else None)


def drop_timestamp(text):
    report = json.loads(text)
    report.pop("timestamp")
    return report


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_run(tmp_path, name):
    code, text = run(tmp_path, load(name))
    assert code == 0
    report = json.loads(text)
    assert set(report) == {"config_echo", "library_version", "experiment", "metrics",
                           "assertions", "timestamp"}
    assert all(a["pass"] for a in report["assertions"])


def test_separability_report(tmp_path):
    _, text = run(tmp_path, load("separability.json"))
    metrics = json.loads(text)["metrics"]
    assert metrics["discrepancy"] <= 1e-12
    assert metrics["separation_status"]["holds"] is True


def test_bcl_and_registration_contrast(tmp_path):
    _, bcl = run(tmp_path, load("bcl.json"))
    _, reg = run(tmp_path, load("registration.json"))
    bcl_obj = json.loads(bcl)["metrics"]["objectification"]
    reg = json.loads(reg)["metrics"]
    assert bcl_obj["verdict"] == "failed"
    assert reg["objectification"]["verdict"] == "satisfied"
    assert reg["nu_squared"] == pytest.approx([2.0, 1.0], abs=1e-12)


def test_overlapping_branches_show_coherence(tmp_path):
    _, text = run(tmp_path, load("bcl_overlap.json"))
    obj = json.loads(text)["metrics"]["objectification"]
    assert obj["condition_A"] is False
    assert obj["off_diagonal_norm"] == pytest.approx(0.5, abs=1e-12)


def test_output_deterministic_apart_from_timestamp(tmp_path):
    cfg = load("registration.json")
    _, first = run(tmp_path, cfg)
    _, second = run(tmp_path, cfg)
    a, b = drop_timestamp(first), drop_timestamp(second)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_csv_format(tmp_path):
    code, text = run(tmp_path, load("separability.json"), fmt="csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["section", "name", "value", "pass", "tolerance"]
    names = {r[1] for r in rows[1:]}
    assert {"experiment", "timestamp", "discrepancy"} <= names


def test_seed_override_changes_random_observable(tmp_path):
    cfg = load("separability.json")
    _, a = run(tmp_path, cfg, extra=("--seed", "1"))
    _, b = run(tmp_path, cfg, extra=("--seed", "2"))
    assert drop_timestamp(a)["metrics"] != drop_timestamp(b)["metrics"]


def test_missing_field_exits_two(tmp_path, capsys):
    cfg = load("separability.json")
    del cfg["region"]
    code, _ = run(tmp_path, cfg)
    assert code == 2
    assert "'region'" in capsys.readouterr().err


def test_bad_value_names_field(tmp_path, capsys):
    cfg = load("registration.json")
    cfg["grid"]["spacing"] = -1
    code, _ = run(tmp_path, cfg)
    assert code == 2
    assert "grid" in capsys.readouterr().err


def test_unknown_experiment(tmp_path, capsys):
    cfg = load("bcl.json")
    cfg["experiment"] = "teleport"
    assert run(tmp_path, cfg)[0] == 2
    assert "'experiment'" in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_degenerate_absorption_exits_three(tmp_path, capsys):
    cfg = load("registration.json")
    cfg["statistics"] = "fermi"
    cfg["input"] = {"basis": 0}
    cfg["detectors"][0]["orbitals"] = [{"basis": 0}]
    code, _ = run(tmp_path, cfg)
    assert code == 3
    assert "degenerate absorption" in capsys.readouterr().err


def sweep(tmp_path, cfg, param, values, jobs="1"):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--config", write(tmp_path, cfg), "--param", param, "--values", values,
                 "--out", str(out), "--jobs", jobs])
    return code, (list(csv.DictReader(io.StringIO(out.read_text()))) if out.exists() else None)


def test_rotation_sweep_grows_from_zero(tmp_path):
    code, rows = sweep(tmp_path, load("separability_rotation.json"), "phi_rotation",
                       "0,0.25,0.5,0.75,1.0,1.25,1.5")
    assert code == 0
    values = [float(r["discrepancy"]) for r in rows]
    assert values[0] <= 1e-12
    assert all(b > a for a, b in zip(values, values[1:]))


def test_sweep_rows_keep_input_order(tmp_path):
    code, rows = sweep(tmp_path, load("separability_rotation.json"), "phi_rotation",
                       "1.0,0,0.5", jobs="3")
    assert code == 0
    assert [float(r["value"]) for r in rows] == [1.0, 0.0, 0.5]


def test_particle_sweep_nu_squared(tmp_path):
    code, rows = sweep(tmp_path, load("registration.json"), "detectors.1.particles", "0,1,2")
    assert code == 0
    assert float(rows[0]["nu2_1"]) == pytest.approx(1.0, abs=1e-12)
    assert all(float(r["nu2_1"]) >= 1.0 for r in rows)


def test_sweep_empty_values(tmp_path, capsys):
    code, _ = sweep(tmp_path, load("separability_rotation.json"), "phi_rotation", "")
    assert code == 2
    assert "'values'" in capsys.readouterr().err


def test_sweep_unknown_param(tmp_path):
    code, _ = sweep(tmp_path, load("separability_rotation.json"), "grid.bogus", "1,2")
    assert code == 2


def test_set_param_does_not_mutate():
    cfg = load("registration.json")
    before = copy.deepcopy(cfg)
    out = set_param(cfg, "detectors.1.particles", 2.0)
    assert cfg == before
    assert out["detectors"][1]["particles"] == 2


def test_absorbed_choice_from_config(tmp_path, capsys):
    cfg = load("registration.json")
    cfg["input"] = {"basis": [1, 2]}
    cfg["absorbed"] = "first_post_state"
    code, text = run(tmp_path, cfg)
    assert code == 0
    assert json.loads(text)["metrics"]["nu_squared"][0] == pytest.approx(2.0, abs=1e-12)
    cfg["absorbed"] = "phi1"
    assert run(tmp_path, cfg)[0] == 2
    assert "'absorbed'" in capsys.readouterr().err


def test_overfull_fermion_detector_exits_three(tmp_path, capsys):
    cfg = load("registration.json")
    cfg["statistics"] = "fermi"
    cfg["detectors"][1]["particles"] = 3
    assert run(tmp_path, cfg)[0] == 3
    assert "exclusion" in capsys.readouterr().err
