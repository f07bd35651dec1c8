import csv
import json

import numpy as np
import pytest

from choiceleak import Tag, io
from choiceleak.cli import main, run_sweep
from choiceleak.config import RunConfig, config_from_dict, with_overrides
from choiceleak.pipeline import run_once
from choiceleak.side import score_side

SMALL = ["--window", "100", "--interval", "10", "--threads", "1"]


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"dataset": {"n_pool": 200, "n_outside": 100, "dim": 3}}))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_is_byte_deterministic(tmp_path, small_config):
    for name in ("a", "b"):
        assert run("simulate", "--config", small_config, "--out", tmp_path / name, "--seed", 7) == 0
    for f in ("dataset.bin", "dataset.csv", "groundtruth.csv", "shadow.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    ma, mb = (json.loads((tmp_path / n / "manifest.json").read_text()) for n in "ab")
    assert ma["config"].pop("output_dir") != mb["config"].pop("output_dir")
    assert ma == mb
    assert run("simulate", "--config", small_config, "--out", tmp_path / "c", "--seed", 8) == 0
    assert (tmp_path / "a" / "dataset.bin").read_bytes() != (tmp_path / "c" / "dataset.bin").read_bytes()


def test_manifest_reproduces_run(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("simulate", "--config", small_config, "--out", out, "--ratio", 0.4) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = config_from_dict(manifest["config"])
    assert cfg.resolved() == manifest["config"]
    (tmp_path / "m.json").write_text(json.dumps(manifest["config"]))
    assert run("simulate", "--config", tmp_path / "m.json", "--out", tmp_path / "again") == 0
    assert (out / "dataset.bin").read_bytes() == (tmp_path / "again" / "dataset.bin").read_bytes()
    gt = io.read_groundtruth(out / "groundtruth.csv")
    assert len(gt.included) == 80 and len(gt.excluded) == 120 and len(gt.outside) == 100
    assert (gt.tags[:200] != Tag.OUTSIDE).all()


def test_side_attack_ledger_matches_recount(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("simulate", "--config", small_config, "--out", out) == 0
    assert run("attack", "--config", small_config, "--out", out, "--mode", "side", *SMALL) == 0
    ds = io.read_dataset(out / "dataset.bin")
    ledger = io.read_ledger(out / "ledger.csv")
    manifest = json.loads((out / "manifest.json").read_text())
    order = np.random.default_rng(0).permutation(300)
    assert manifest["stages"]["attack"]["plan"] == {
        "N": 300, "W": 100, "interval": 10, "m": 30, "exposure": 10, "shuffle_seed": 0,
    }
    t = np.zeros(300, dtype=int)
    for start in range(0, 300, 10):
        window = [int(order[(start + j) % 300]) for j in range(100)]
        for i in sorted(window, key=lambda i: (ds.scores[i], i))[:20]:
            t[i] += 1
    np.testing.assert_array_equal(ledger.t, t)
    scores = io.read_scores_csv(out / "scores.csv")
    np.testing.assert_allclose(scores.s, score_side(t, 10), rtol=0, atol=0)


def test_black_attack_needs_no_k(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("simulate", "--config", small_config, "--out", out) == 0
    assert run("attack", "--config", small_config, "--out", out, "--mode", "black", *SMALL) == 0
    header = (out / "ledger.csv").read_text().splitlines()[0]
    assert header == "id,t,n,dbar"
    assert run("eval", "--config", small_config, "--out", out) == 0


def test_bad_inputs_exit_2(tmp_path, small_config, capsys):
    out = tmp_path / "run"
    with pytest.raises(SystemExit) as exc:
        run("attack", "--out", out, "--mode", "grey")
    assert exc.value.code == 2
    missing = tmp_path / "nope.csv"
    assert run("eval", "--out", out, "--groundtruth", missing) == 2
    assert str(missing) in capsys.readouterr().err
    assert run("attack", "--config", small_config, "--out", out) == 2  # no dataset yet
    assert run("simulate", "--out", out, "--ratio", 1.5) == 2
    assert run("simulate", "--out", out, "--interval", 7) == 2
    assert run("simulate", "--config", tmp_path / "missing.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"windw": {}}))
    assert run("simulate", "--config", bad) == 2
    assert "windw" in capsys.readouterr().err


def test_indivisible_n_then_pad(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"n_pool": 205, "n_outside": 100, "dim": 2}}))
    out = tmp_path / "run"
    assert run("simulate", "--config", cfg, "--out", out) == 0
    assert run("attack", "--config", cfg, "--out", out, *SMALL) == 2
    assert run("attack", "--config", cfg, "--out", out, "--pad-to-multiple", *SMALL) == 0
    dropped = json.loads((out / "manifest.json").read_text())["stages"]["attack"]["dropped_ids"]
    assert len(dropped) == 5
    assert run("eval", "--config", cfg, "--out", out) == 0
    rep = io.read_report_json(out / "report_sp.json")
    assert rep.n_members + rep.n_nonmembers == 300


def test_eval_outputs(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("simulate", "--config", small_config, "--out", out) == 0
    assert run("attack", "--config", small_config, "--out", out, *SMALL) == 0
    assert run("eval", "--config", small_config, "--out", out, "--surface", "tm,sp", "--fpr", 0.05) == 0
    for s in ("tm", "sp"):
        d = json.loads((out / f"report_{s}.json").read_text())
        assert list(d["tpr_at"]) == ["0.05"]
        assert _rows(out / f"roc_{s}.csv")[0] == {"fpr": "0.0", "tpr": "0.0"}


def test_baseline_modes(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("simulate", "--config", small_config, "--out", out) == 0
    for mode in ("loss", "lira"):
        assert run("attack", "--config", small_config, "--out", out, "--mode", mode) == 0
        assert run("eval", "--config", small_config, "--out", out) == 0
        assert json.loads((out / "manifest.json").read_text())["stages"]["attack"]["mode"] == mode


def test_sweep_rows(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("sweep", "--config", small_config, "--out", out, "--axis", "ratio",
               "--values", "0.2,0.4,0.6,0.8", *SMALL) == 0
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 8
    assert list(rows[0]) == ["value", "surface", "auc", "tpr@0.05"]
    assert run("sweep", "--config", small_config, "--out", out, "--axis", "k_clusters",
               "--values", "2,3") == 2


def test_sweep_k_range(tmp_path):
    cfg = with_overrides(RunConfig(), {
        "dataset.n_pool": 100, "dataset.n_outside": 50, "dataset.dim": 2,
        "window.size": 50, "window.interval": 10, "attack.mode": "black",
    })
    rows = run_sweep(cfg, "k_clusters", list(range(2, 11)))
    for s in ("tm", "sp"):
        assert [r["value"] for r in rows if r["surface"] == s] == list(range(2, 11))


def test_single_point_sweep_equals_run_once():
    cfg = with_overrides(RunConfig(), {
        "dataset.n_pool": 100, "dataset.n_outside": 50, "window.size": 50, "window.interval": 10,
    })
    rows = run_sweep(cfg, "ratio", [0.3])
    direct = run_once(with_overrides(cfg, {"ratio": 0.3}))
    assert {r["surface"]: r["auc"] for r in rows} == {s.value: rep.auc for s, rep in direct.items()}


def test_parallel_sweep_matches_serial():
    cfg = with_overrides(RunConfig(), {
        "dataset.n_pool": 100, "dataset.n_outside": 50, "window.size": 50, "window.interval": 10,
    })
    assert run_sweep(cfg, "shift", [0.0, 2.0], workers=2) == run_sweep(cfg, "shift", [0.0, 2.0])


def test_report_renders_figures(tmp_path, small_config):
    out = tmp_path / "run"
    assert run("report", "--out", out) == 2
    assert run("simulate", "--config", small_config, "--out", out) == 0
    assert run("attack", "--config", small_config, "--out", out, *SMALL) == 0
    assert run("eval", "--config", small_config, "--out", out) == 0
    assert run("sweep", "--config", small_config, "--out", out, "--axis", "shift", "--values", "0,3", *SMALL) == 0
    assert run("report", "--out", out) == 0
    for f in ("roc.png", "roc_log.png", "sweep_auc.png", "sweep_tpr_at_0.05.png"):
        data = (out / "figures" / f).read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n", f
    summary = _rows(out / "summary.csv")
    assert [r["surface"] for r in summary] == ["sp", "tm"]


def test_end_to_end_reproducible(tmp_path, small_config):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("simulate", "--config", small_config, "--out", out) == 0
        assert run("attack", "--config", small_config, "--out", out, *SMALL) == 0
        assert run("eval", "--config", small_config, "--out", out) == 0
        outs.append(out)
    for f in ("scores.csv", "ledger.csv", "report_tm.json", "report_sp.json"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_thread_count_does_not_change_scores(tmp_path, small_config, monkeypatch):
    out = tmp_path / "run"
    assert run("simulate", "--config", small_config, "--out", out) == 0
    monkeypatch.setenv("CHOICELEAK_THREADS", "4")
    assert run("attack", "--config", small_config, "--out", out, "--window", 100, "--interval", 10) == 0
    many = (out / "scores.csv").read_bytes()
    assert run("attack", "--config", small_config, "--out", out, *SMALL) == 0
    assert (out / "scores.csv").read_bytes() == many
    monkeypatch.setenv("CHOICELEAK_THREADS", "x")
    assert run("attack", "--config", small_config, "--out", out, "--window", 100, "--interval", 10) == 2
