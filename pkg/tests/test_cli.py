import csv
import json

import numpy as np
import pytest

from simvc.cli import TRACE_COLUMNS, main, parse_anchors, strip_timing
from simvc.core import ConfigError


def _synth(tmp_path, **spec):
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "d")]) == 0
    return tmp_path / "d" / "manifest.json"


@pytest.fixture
def dataset(tmp_path):
    return _synth(tmp_path, n=60, k=3, V=2, dims=[6, 8], seed=1, name="toy")


def _run(manifest, out, *extra):
    argv = ["run", "--manifest", str(manifest), "--ratio", "0.3", "--repeats", "2",
            "--max-iters", "10", "--kmeans-restarts", "2", "--out", str(out), *extra]
    return main(argv)


@pytest.mark.parametrize("spec,want", [("k", 3), ("2k", 6), ("5k", 15), ("7", 7)])
def test_parse_anchors(spec, want):
    assert parse_anchors(spec, 3) == want


def test_parse_anchors_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_anchors("lots", 3)


def test_run_writes_result(dataset, tmp_path, capsys):
    out, trace = tmp_path / "r.json", tmp_path / "t.csv"
    assert _run(dataset, out, "--anchors", "k", "--trace", str(trace)) == 0
    res = json.loads(out.read_text())
    assert res["config"]["m"] == 3 and res["config"]["repeats"] == 2
    assert set(res["metrics"]) == {"acc", "nmi", "purity", "fscore"}
    assert 0.5 < res["metrics"]["acc"]["mean"] <= 1.0
    assert len(res["traces"]) == 2 and "wall_time_ms" not in res["traces"][0][0]
    assert res["mask_stats"]["ratio"] == pytest.approx(36 / 120)
    assert "ACC" in capsys.readouterr().out
    rows = list(csv.reader(trace.open()))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert {r[0] for r in rows[1:]} == {"0", "1"}


def test_run_is_byte_deterministic(dataset, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run(dataset, a) == 0
    assert _run(dataset, b, "--workers", "3") == 0
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    assert json.dumps(strip_timing(ja), sort_keys=True) == json.dumps(strip_timing(jb), sort_keys=True)


def test_mask_then_run_with_mask_file(dataset, tmp_path, capsys):
    mask = tmp_path / "m.csv"
    assert main(["mask", "--manifest", str(dataset), "--ratio", "0.25", "--seed", "4",
                 "--out", str(mask)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["ratio"] == pytest.approx(0.25)
    a = np.loadtxt(mask, delimiter=",")
    assert a.shape == (60, 2)
    out = tmp_path / "r.json"
    assert main(["run", "--manifest", str(dataset), "--mask", str(mask), "--repeats", "1",
                 "--max-iters", "5", "--out", str(out), "--no-align"]) == 0
    assert json.loads(out.read_text())["config"]["align"] is False


def test_remask_draws_one_mask_per_repeat(dataset, tmp_path):
    out = tmp_path / "r.json"
    assert _run(dataset, out, "--remask") == 0
    assert len(json.loads(out.read_text())["mask_stats"]["per_repeat"]) == 2


def test_eval(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("1\n1\n0\n0\n")
    (tmp_path / "t.txt").write_text("7\n7\n3\n3\n")
    assert main(["eval", "--pred", str(tmp_path / "p.txt"), "--truth", str(tmp_path / "t.txt")]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores == {"acc": 1.0, "fscore": 1.0, "nmi": 1.0, "purity": 1.0}


def test_eval_length_mismatch(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("1\n0\n")
    (tmp_path / "t.txt").write_text("1\n0\n1\n")
    assert main(["eval", "--pred", str(tmp_path / "p.txt"), "--truth", str(tmp_path / "t.txt")]) == 2
    assert "error:" in capsys.readouterr().err


def test_config_errors_exit_2(dataset, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert _run(dataset, out, "--anchors", "50") == 2          # m exceeds the view dims
    assert main(["run", "--manifest", str(dataset)]) == 2     # neither mask nor ratio
    assert main(["run", "--manifest", str(tmp_path / "nope.json"), "--ratio", "0.1"]) == 2
    assert not out.exists()
    assert capsys.readouterr().err.count("error:") == 3


@pytest.mark.filterwarnings("ignore:overflow")
def test_numerical_abort_exit_3(dataset, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert _run(dataset, out, "--lambda", "1e308", "--mu", "1e308") == 3
    assert "numerical" in capsys.readouterr().err
    assert not out.exists()


def test_failed_write_leaves_previous_file(dataset, tmp_path, monkeypatch):
    import simvc.cli as cli

    out = tmp_path / "r.json"
    out.write_text("old\n")

    def boom(_):
        raise RuntimeError("disk full")

    monkeypatch.setattr(cli, "dump_result", boom)
    with pytest.raises(RuntimeError):
        _run(dataset, out)
    assert out.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".tmp-")] == []


def test_grid_sweep(tmp_path):
    manifest = _synth(tmp_path, n=30, k=2, V=2, dims=[10, 12], seed=3)
    out = tmp_path / "g.json"
    argv = ["run", "--manifest", str(manifest), "--ratio", "0.3", "--repeats", "1",
            "--max-iters", "2", "--kmeans-restarts", "1", "--grid", "--out", str(out)]
    assert main(argv) == 0
    cells = json.loads(out.read_text())
    assert len(cells) == 3 * 5 * 6
    assert {c["config"]["m"] for c in cells} == {2, 4, 10}
