import json

import pytest

from gasket_fgf.cli import main
from gasket_fgf.constants import CRITICAL_S


def rows(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")][1:]


def test_graph_m2(tmp_path):
    assert main(["graph", "--m", "2", "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "vertices_m2.csv")) == 15
    assert len(rows(tmp_path / "edges_m2.csv")) == 27
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["pass"] and set(manifest["outputs"]) == {"vertices_m2.csv", "edges_m2.csv"}


def test_graph_m0_all_boundary(tmp_path):
    main(["graph", "--m", "0", "--out", str(tmp_path)])
    r = rows(tmp_path / "vertices_m0.csv")
    assert len(r) == 3 and all(line.endswith(",1") for line in r)


def test_graph_negative_level_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["graph", "--m", "-1", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_spectrum_rows_and_determinism(tmp_path):
    main(["spectrum", "--m", "1", "--out", str(tmp_path / "a")])
    r = [tuple(l.split(",")) for l in rows(tmp_path / "a" / "spectrum_m1.csv")]
    assert [(int(a), int(b), round(float(c), 9)) for a, b, c in r] == [(1, 1, 10.0), (1, 2, 25.0), (1, 3, 25.0)]
    main(["spectrum", "--m", "4", "--out", str(tmp_path / "b"), "--vectors"])
    main(["spectrum", "--m", "4", "--out", str(tmp_path / "c"), "--vectors"])
    assert len(rows(tmp_path / "b" / "spectrum_m4.csv")) == 120
    for name in ("spectrum_m4.csv", "eigenvectors_m4.csv", "manifest.json"):
        assert (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()
    header = (tmp_path / "b" / "eigenvectors_m4.csv").read_text().splitlines()[:4]
    assert header[0] == "# level=4" and header[1] == "# N_m=120"


def test_sample_same_seed_identical(tmp_path):
    for d in ("a", "b"):
        main(["sample", "--m", "3", "--s", "0.7", "--seed", "5", "--n", "2", "--out", str(tmp_path / d)])
    for name in ("field_m3_0000.csv", "field_m3_0001.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    head = (tmp_path / "a" / "field_m3_0000.csv").read_text().splitlines()[:3]
    assert head == ["# m=3", "# s=0.7", "# seed=5"]


def test_sample_n0_and_log_flag(tmp_path):
    assert main(["sample", "--m", "2", "--s", repr(CRITICAL_S), "--n", "0", "--out", str(tmp_path)]) == 0
    assert [p.name for p in tmp_path.iterdir()] == ["manifest.json"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["log_correlated"] is True and manifest["config"]["seed"] == 0


def test_ensemble_file(tmp_path):
    main(["sample", "--m", "2", "--n", "3", "--ensemble", "--out", str(tmp_path)])
    r = rows(tmp_path / "ensemble_m2.csv")
    assert len(r) == 15 and len(r[0].split(",")) == 4


def test_lab_exit_codes(tmp_path, capsys):
    assert main(["lab", "eigsweep", "--m", "5", "--out", str(tmp_path / "ok")]) == 0
    rec = json.loads((tmp_path / "ok" / "eigsweep_m5.json").read_text())
    assert rec["pass"] is True and rec["experiment"] == "eigsweep"
    # an absurd tolerance override forces a failure with a machine-readable list
    cfg = tmp_path / "strict.cfg"
    cfg.write_text("tolerance.holder = 0.0  # impossible\n")
    code = main(["lab", "holder", "--m", "5", "--s", "1.0", "--n", "100", "--config", str(cfg),
                 "--out", str(tmp_path / "bad")])
    assert code == 1
    err = capsys.readouterr().err
    assert json.loads(err)["failures"][0]["experiment"] == "holder"
    manifest = json.loads((tmp_path / "bad" / "manifest.json").read_text())
    assert manifest["pass"] is False and manifest["config"]["tolerance"] == {"holder": 0.0}


def test_lab_precondition_failure_reported(tmp_path):
    assert main(["lab", "lipschitz", "--m", "5", "--s", "0.2", "--out", str(tmp_path)]) == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "PreconditionError" in manifest["failures"][0]["error"]


def test_lab_quadform_and_plot_data(tmp_path):
    assert main(["lab", "quadform", "--s", "0", "--m", "5", "--ref-level", "6", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "quadform_m5_levels.csv")
    assert [int(l.split(",")[0]) for l in r] == [2, 3, 4, 5]


def test_config_and_env(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("m = 3\nseed = 9\n")
    monkeypatch.setenv("GASKET_FGF_OUT", str(tmp_path / "envout"))
    assert main(["graph", "--config", str(cfg), "--m", "1"]) == 0
    assert (tmp_path / "envout" / "vertices_m1.csv").exists()
    manifest = json.loads((tmp_path / "envout" / "manifest.json").read_text())
    assert manifest["config"]["m"] == 1 and manifest["config"]["seed"] == 9
    cfg.write_text("bogus = 1\n")
    with pytest.raises(SystemExit):
        main(["graph", "--config", str(cfg)])


def test_replay_reproduces_bytes(tmp_path):
    main(["lab", "riesz-regime", "--m", "5", "--s", "0.3", "--out", str(tmp_path / "a")])
    assert main(["replay", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()
