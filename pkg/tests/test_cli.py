import csv
import json

import pytest

from gietrenorm import diffeo
from gietrenorm.cli import main
from gietrenorm.config import OUT_ENV
from gietrenorm.fixtures import golden_iet
from gietrenorm.giet import Iet, conjugate
from gietrenorm.combinatorics import rotation_pair


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 else None), out.err


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    lines = open(path).read().splitlines()
    assert lines[0].startswith("# gietrenorm schema=")
    return list(csv.DictReader(lines[1:]))


def test_orbit_golden(tmp_path, capsys):
    code, res, _ = run(capsys, "orbit", "--steps", "30", "--out", str(tmp_path))
    assert code == 0 and res["rows"] == 30
    rows = read_csv(tmp_path / "orbit.csv")
    assert len(rows) == 30
    winners = [r["winner"] for r in rows]
    assert all(a != b for a, b in zip(winners, winners[1:]))
    state = json.loads((tmp_path / "state.json").read_text())
    assert state["schema"] == "gietrenorm/state/1" and state["config_hash"] == res["config_hash"]


def test_outputs_are_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"map": {"fixture": "random-path", "d": 4}, "seed": 3, "steps": 15})
    run(capsys, "orbit", "--config", cfg, "--out", str(tmp_path / "a"))
    run(capsys, "orbit", "--config", cfg, "--out", str(tmp_path / "b"))
    for name in ("orbit.csv", "state.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("acc", ["elementary", "good-returns"])
def test_orbit_accelerations(tmp_path, capsys, acc):
    cfg = write(tmp_path, "c.json", {"map": {"fixture": "d4-periodic"}, "acceleration": acc,
                                     "steps": 36, "precision": "extended", "dps": 120})
    code, res, _ = run(capsys, "orbit", "--config", cfg, "--out", str(tmp_path))
    assert code == 0
    if acc == "elementary":
        assert res["rows"] == 36
    else:
        rows = read_csv(tmp_path / "orbit.csv")
        assert rows and all(int(r["run"]) >= 1 for r in rows)


def test_env_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    code, res, _ = run(capsys, "boundary")
    assert code == 0
    assert (tmp_path / "env" / "boundary.json").exists()
    assert res["values"] == [0.0]


def test_boundary_of_poly_conjugate(tmp_path, capsys):
    T = conjugate(golden_iet(), diffeo.PolyPerturb(0.2, (0.0, 1.0, -1.0)))
    cfg = write(tmp_path, "c.json", {"map": json.loads(T.to_json())})
    code, res, _ = run(capsys, "boundary", "--config", cfg, "--out", str(tmp_path))
    assert code == 0 and abs(res["sum"]) < 1e-12


def test_diagram(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"map": {"pi": {"top": [1, 2, 3, 4], "bottom": [4, 3, 2, 1]}}})
    code, res, _ = run(capsys, "diagram", "--config", cfg, "--out", str(tmp_path))
    assert code == 0 and res["nodes"] == 7 and res["edges"] == 14
    dot = (tmp_path / "diagram.dot").read_text()
    assert dot.startswith("// config_hash=") and "digraph" in dot
    code, res, _ = run(capsys, "diagram", "--out", str(tmp_path))
    assert (res["nodes"], res["edges"]) == (1, 2)


def test_lyapunov_with_oracle(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"map": {"fixture": "golden"}, "steps": 500,
                                     "precision": "extended", "dps": 260})
    code, res, _ = run(capsys, "lyapunov", "--config", cfg, "--out", str(tmp_path))
    assert code == 0
    assert max(res["relative_error"]) < 0.01
    assert read_csv(tmp_path / "lyapunov_trace.csv")


def test_mesh_and_wander(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"map": {"fixture": "d4-periodic"}, "steps": 40,
                                     "precision": "extended", "dps": 200})
    code, res, _ = run(capsys, "mesh", "--config", cfg, "--out", str(tmp_path))
    assert code == 0 and res["verdict"] == "decay"
    rows = read_csv(tmp_path / "levels.csv")
    assert list(rows[0]) == ["level", "mesh", "total_nonlinearity", "mean_nonlinearity",
                             "boundary_sup", "d_eta", "schwarzian_proxy"]
    code, res, _ = run(capsys, "wander", "--config", cfg, "--out", str(tmp_path))
    assert code == 0 and res["verdict"] == "not-distorted"


def test_shadow_command(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"map": {"fixture": "divergent-aiet"}, "steps": 54,
                                     "precision": "extended", "dps": 200})
    code, res, _ = run(capsys, "shadow", "--config", cfg, "--out", str(tmp_path))
    assert code == 0 and res["case"] == "divergent"
    data = json.loads((tmp_path / "shadow.json").read_text())
    assert data["periodic_deviation"]["bounded"]


def test_config_errors_exit_2(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", {"map": {"pi": {"top": [1, 2], "bottom": [1, 3]}}})
    assert run(capsys, "diagram", "--config", bad, "--out", str(tmp_path))[0] == 2
    unknown = write(tmp_path, "u.json", {"stepz": 3})
    assert run(capsys, "orbit", "--config", unknown)[0] == 2
    fixture = write(tmp_path, "f.json", {"map": {"fixture": "nope"}})
    assert run(capsys, "orbit", "--config", fixture, "--out", str(tmp_path))[0] == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    T = Iet(rotation_pair(2), [0.25, 0.75])
    cfg = write(tmp_path, "c.json", {"map": json.loads(T.to_json()), "steps": 10})
    code, _, err = run(capsys, "orbit", "--config", cfg, "--out", str(tmp_path))
    assert code == 3 and "connection" in err


def test_budget_exit_4(tmp_path, capsys):
    T = conjugate(golden_iet(), diffeo.PolyPerturb(0.2, (0.0, 1.0, -1.0)))
    cfg = write(tmp_path, "c.json", {"map": json.loads(T.to_json()), "steps": 40,
                                     "thresholds": {"floor_budget": 500}})
    assert run(capsys, "orbit", "--config", cfg, "--out", str(tmp_path))[0] == 4


def test_precision_flag_overrides(tmp_path, capsys):
    code, res, _ = run(capsys, "orbit", "--steps", "5", "--precision", "extended",
                       "--seed", "2", "--out", str(tmp_path))
    assert code == 0
    assert res["config_hash"] != run(capsys, "orbit", "--steps", "5", "--out", str(tmp_path))[1]["config_hash"]


def test_batch(tmp_path, capsys):
    a = write(tmp_path, "a.json", {"steps": 5})
    b = write(tmp_path, "b.json", {"steps": 6})
    code = main(["batch", "orbit", a, b, "--out", str(tmp_path / "runs"), "--jobs", "2"])
    res = json.loads(capsys.readouterr().out)
    assert code == 0 and len(res["runs"]) == 2
    assert len(list((tmp_path / "runs").iterdir())) == 2
