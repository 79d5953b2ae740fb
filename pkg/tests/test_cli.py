import hashlib
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mappergw.cli import main
from mappergw.metric_measure import MetricMeasureSpace
from mappergw.sampling import load_csv


def write(path: Path, data) -> Path:
    path.write_text(json.dumps(data))
    return path


def digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def cloud(tmp_path):
    cfg = write(tmp_path / "torus.json", {"n": 1500, "p": 0.2, "q": 0.3})
    out = tmp_path / "cloud.csv"
    assert main(["sample", "--config", str(cfg), "--out", str(out)]) == 0
    return out


class TestSample:
    def test_rows_and_determinism(self, tmp_path, cloud):
        c, _ = load_csv(cloud)
        assert c.n == 1500 and c.dim == 3
        again = tmp_path / "again.csv"
        main(["sample", "--config", str(tmp_path / "torus.json"), "--out", str(again)])
        assert again.read_bytes() == cloud.read_bytes()

    def test_seed_precedence(self, tmp_path):
        base = write(tmp_path / "s.json", {"n": 50, "seed": 7})
        a, b, c, d = (tmp_path / f"{k}.csv" for k in "abcd")
        main(["sample", "--config", str(base), "--out", str(a)])
        main(["sample", "--config", str(base), "--out", str(b), "--seed", "7"])
        main(["sample", "--config", str(base), "--out", str(c), "--seed", "8"])
        main(["sample", "--config", str(write(tmp_path / "t.json", {"n": 50})), "--out", str(d), "--seed", "42"])
        default = tmp_path / "e.csv"
        main(["sample", "--config", str(tmp_path / "t.json"), "--out", str(default)])
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()
        assert d.read_bytes() == default.read_bytes()

    def test_constraint_violation_exits_2(self, tmp_path, capsys):
        cfg = write(tmp_path / "bad.json", {"p": 0.6, "q": 0.5})
        assert main(["sample", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
        assert "p + q < 1" in capsys.readouterr().err

    def test_unknown_key_exits_2_with_json(self, tmp_path, capsys):
        cfg = write(tmp_path / "bad.json", {"n": 10, "colour": "red"})
        assert main(["sample", "--config", str(cfg), "--out", str(tmp_path / "x.csv"), "--json-errors"]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["exit_code"] == 2 and "colour" in err["error"]["message"]

    def test_mesh_sampling(self, tmp_path):
        mesh = tmp_path / "m.off"
        mesh.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        cfg = write(tmp_path / "s.json", {"kind": "mesh", "mesh": str(mesh), "n": 100})
        assert main(["sample", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 0
        c, _ = load_csv(tmp_path / "o.csv")
        assert c.n == 100 and np.all(c.points[:, 2] == 0)

    def test_usage_error_exits_2(self):
        assert main(["sample", "--threads", "many"]) == 2
        assert main(["nonsense"]) == 2


class TestMapper:
    def test_stick_figure_masses(self, tmp_path):
        from mappergw.shapes import stick_figure_path

        out = tmp_path / "g.json"
        cfg = write(tmp_path / "m.json", {"r": 25, "g": 0.3})
        assert main(["mapper", str(stick_figure_path()), "--config", str(cfg), "--direction", "0,0,1",
                     "--emit-mm", "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert sum(data["masses"]) == pytest.approx(1.0, abs=1e-12)
        mm = MetricMeasureSpace.load(tmp_path / "g_mm.json")
        assert np.array_equal(mm.D, mm.D.T)
        assert (tmp_path / "g_edges.csv").read_text().startswith("u,v,mass")
        assert (tmp_path / "g.dot").read_text().startswith("graph mapper")

    def test_filter_column_from_csv(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("x0,x1,f\n0,0,0\n1,0,1\n2,0,2\n")
        cfg = write(tmp_path / "m.json", {"r": 1, "clusterer": {"kind": "epsilon", "epsilon": 1.5}})
        assert main(["mapper", str(path), "--config", str(cfg), "--out", str(tmp_path / "g.json")]) == 0
        assert json.loads((tmp_path / "g.json").read_text())["masses"] == [1.0]

    def test_missing_filter_exits_2(self, tmp_path, cloud):
        assert main(["mapper", str(cloud), "--out", str(tmp_path / "g.json")]) == 2

    def test_non_unit_direction_exits_2(self, tmp_path, cloud):
        assert main(["mapper", str(cloud), "--direction", "1,1,0", "--out", str(tmp_path / "g.json")]) == 2

    def test_missing_input_file_exits_1(self, tmp_path):
        assert main(["mapper", str(tmp_path / "nope.csv"), "--direction", "1,0,0",
                     "--out", str(tmp_path / "g.json")]) == 1


class TestGW:
    def space(self, tmp_path, name, delta):
        X = MetricMeasureSpace(("0", "1"), [[0, delta], [delta, 0]], [0.5, 0.5])
        return X.save(tmp_path / name)[1]

    def test_identical_files(self, tmp_path, capsys):
        x = self.space(tmp_path, "x", 1.7)
        assert main(["gw", str(x), str(x), "--out", str(tmp_path / "pi.csv")]) == 0
        assert float(capsys.readouterr().out) <= 1e-8
        assert (tmp_path / "pi.json").exists()

    def test_two_point_files(self, tmp_path, capsys):
        x, y = self.space(tmp_path, "x", 1.0), self.space(tmp_path, "y", 3.0)
        assert main(["gw", str(x), str(y)]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(2.0 / (2 * math.sqrt(2)), abs=1e-6)

    def test_invalid_marginals_exit_2(self, tmp_path):
        x = self.space(tmp_path, "x", 1.0)
        meta = json.loads(x.read_text())
        meta["weights"] = [0.5, 0.6]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(meta))
        assert main(["gw", str(x), str(bad)]) == 2

    def test_config_paths_and_solver(self, tmp_path, capsys):
        x, y = self.space(tmp_path, "x", 1.0), self.space(tmp_path, "y", 2.0)
        cfg = write(tmp_path / "g.json", {"x": str(x), "y": str(y), "solver": {"restarts": 2}})
        assert main(["gw", "--config", str(cfg)]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-9)
        bad = write(tmp_path / "h.json", {"x": str(x), "y": str(y), "solver": {"step": 1}})
        assert main(["gw", "--config", str(bad)]) == 2


class TestExperimentsAndMDS:
    def test_torus_grid_outputs_and_threads(self, tmp_path):
        cfg = write(tmp_path / "grid.json", {
            "grid": [["a", 1 / 12, 1 / 12], ["e", 1 / 6, 1 / 6], ["i", 1 / 3, 1 / 3]],
            "n": 1000, "r": 8, "clusterer": {"kind": "epsilon", "epsilon": 0.2}, "plots": True,
        })
        for threads in ("1", "8"):
            assert main(["experiment", "torus-grid", "--config", str(cfg), "--out", str(tmp_path / threads),
                         "--threads", threads]) == 0
        assert {"gw_matrix.csv", "mds.csv", "report.json", "mds.svg"} <= set(digest(tmp_path / "1"))
        assert digest(tmp_path / "1") == digest(tmp_path / "8")

    def test_convergence_curve(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"ns": [200, 400], "trials": 3, "solver": {"restarts": 1}})
        assert main(["experiment", "convergence", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "curve.csv").read_text().splitlines()[0] == "n,r,median_gw"

    def test_filter_sweep(self, tmp_path):
        cfg = write(tmp_path / "f.json", {"ts": [0.0, 0.5], "r": 8})
        assert main(["experiment", "filter-sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["gw_values"][0] <= 1e-6

    def test_unknown_experiment_key(self, tmp_path):
        cfg = write(tmp_path / "f.json", {"ts": [0.0], "resolution": 3})
        assert main(["experiment", "filter-sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_mds_round_trip(self, tmp_path):
        pts = np.random.default_rng(0).normal(size=(5, 2))
        D = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        path = tmp_path / "D.csv"
        path.write_text(",a,b,c,d,e\n" + "".join(
            lab + "," + ",".join(repr(float(x)) for x in row) + "\n" for lab, row in zip("abcde", D)))
        assert main(["mds", str(path), "--out", str(tmp_path / "xy.csv")]) == 0
        rows = (tmp_path / "xy.csv").read_text().splitlines()
        assert rows[0] == "label,x,y" and rows[1].startswith("a,")
        X = np.array([[float(v) for v in r.split(",")[1:]] for r in rows[1:]])
        np.testing.assert_allclose(np.linalg.norm(X[:, None] - X[None], axis=2), D, atol=1e-9)

    def test_diagnose_an(self, tmp_path, capsys):
        ref = tmp_path / "ref.csv"
        write(tmp_path / "r.json", {"n": 4000})
        main(["sample", "--config", str(tmp_path / "r.json"), "--out", str(ref), "--seed", "3"])
        write(tmp_path / "s.json", {"n": 400})
        main(["sample", "--config", str(tmp_path / "s.json"), "--out", str(tmp_path / "c.csv")])
        cfg = write(tmp_path / "d.json", {"reference": str(ref), "r": 6, "band_delta": 0.02,
                                          "clusterer": {"kind": "epsilon", "epsilon": 0.4}})
        assert main(["diagnose-an", str(tmp_path / "c.csv"), "--direction", "1,0,0", "--config", str(cfg),
                     "--out", str(tmp_path / "an.json")]) == 0
        value = float(capsys.readouterr().out)
        assert 0 < value <= json.loads((tmp_path / "an.json").read_text())["diameter"]

    def test_module_entry_point(self, tmp_path):
        cfg = write(tmp_path / "t.json", {"n": 20})
        res = subprocess.run([sys.executable, "-m", "mappergw", "sample", "--config", str(cfg),
                              "--out", str(tmp_path / "o.csv")], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        assert len((tmp_path / "o.csv").read_text().splitlines()) == 21
