import csv
import json
from pathlib import Path

import numpy as np
import pytest

from lfsrprune import container
from lfsrprune.cli import main
from lfsrprune.sweep import RUN_COLUMNS, STORAGE_COLUMNS, ExperimentConfig, run_sweep
from lfsrprune.tinynet import TrainConfig, run_pipeline
from lfsrprune.data import gen_synthetic

MNIST_DIR = Path(__file__).resolve().parents[1] / "data" / "mnist_subset"


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def _json(capsys, *argv):
    code, out = _run(capsys, *argv)
    assert code == 0
    return json.loads(out)


def test_lfsr_command(capsys):
    out = _json(capsys, "lfsr", "--spec", "w=4,taps=4+3,seed=0x1", "--period", "--count", "16")
    assert out["period"] == 15
    assert out["states"] == [1, 8, 4, 2, 9, 12, 6, 11, 5, 10, 13, 14, 15, 7, 3, 1]


def test_exit_codes(capsys, tmp_path):
    assert _run(capsys, "lfsr", "--spec", "w=4,taps=4+2,seed=0x1")[0] == 3
    assert _run(capsys, "lfsr", "--spec", "w=4,taps=4+3,seed=0x0")[0] == 3
    assert _run(capsys, "nonsense")[0] == 1
    assert _run(capsys, "mask", "--rows", "x")[0] == 1
    assert _run(capsys, "infer", "--model", tmp_path / "missing.lfsp")[0] == 2
    (tmp_path / "bad.lfsp").write_bytes(b"LFSQ")
    assert _run(capsys, "infer", "--model", tmp_path / "bad.lfsp")[0] == 2
    assert _run(capsys, "train", "--dataset", "mnist", "--out", tmp_path / "m")[0] == 1
    assert _run(capsys, "mask", "--rows", "2", "--cols", "2", "--sparsity", "0.9")[0] == 3
    assert _run(capsys, "--help")[0] == 0


def test_mask_command_writes_a_record(capsys, tmp_path):
    out = _json(capsys, "mask", "--rows", 300, "--cols", 100, "--sparsity", 0.9, "--show", 2,
                "--out", tmp_path / "m.json")
    assert out["stats"]["nnz"] == 3000 and len(out["kept"]) == 2
    assert json.loads((tmp_path / "m.json").read_text()) == out["record"]


def test_train_prune_retrain_encode_infer(capsys, tmp_path):
    d, p, r = tmp_path / "d.lfsp", tmp_path / "p.lfsp", tmp_path / "r.lfsp"
    assert _json(capsys, "train", "--epochs", 10, "--out", d)["test_acc"] > 0.9
    pruned = _json(capsys, "prune", "--model", d, "--sparsity", 0.7, "--out", p)
    assert len(pruned["masks"]) == 2
    retrained = _json(capsys, "retrain", "--model", p, "--out", r)
    assert retrained["retrained_acc"] >= retrained["before_acc"] - 0.05
    layers = container.load(r)
    assert all(type(layer).__name__ == "LfsrSparseLayer" for layer in layers)
    for fmt in ("lfsr", "baseline", "dense"):
        out = tmp_path / f"{fmt}.lfsp"
        _json(capsys, "encode", "--model", r, "--format", fmt, "--out", out)
        res = _json(capsys, "infer", "--model", out, "--trace-csv", tmp_path / f"{fmt}.csv")
        assert res["accuracy"] > 0.8
        if fmt == "lfsr":
            assert res["trace_per_sample"]["index_mem_reads"] == 0
    assert _run(capsys, "retrain", "--model", d, "--out", tmp_path / "x")[0] == 1


def test_commands_are_deterministic(capsys, tmp_path):
    for name in ("a", "b"):
        _run(capsys, "train", "--epochs", 3, "--out", tmp_path / f"{name}.lfsp")
        _run(capsys, "prune", "--model", tmp_path / f"{name}.lfsp", "--out", tmp_path / f"{name}p.lfsp")
    assert (tmp_path / "a.lfsp").read_bytes() == (tmp_path / "b.lfsp").read_bytes()
    assert (tmp_path / "ap.lfsp").read_bytes() == (tmp_path / "bp.lfsp").read_bytes()


def test_mnist_flags(capsys, tmp_path):
    out = _json(capsys, "train", "--dataset", "mnist", "--mnist-dir", MNIST_DIR, "--n-train", 200,
                "--n-test", 50, "--arch", "784,16,10", "--epochs", 1, "--out", tmp_path / "m.lfsp")
    assert 0.0 <= out["test_acc"] <= 1.0


def test_footprint_and_simulate(capsys, tmp_path):
    code, out = _run(capsys, "footprint", "--shapes", "300x100", "--out", tmp_path / "f.csv")
    assert code == 0 and "footprint_ratio" in out
    with open(tmp_path / "f.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 6
    (tmp_path / "t.txt").write_text("sram_read = 10\n")
    code, out = _run(capsys, "simulate", "--shapes", "300x100", "--cost-table", tmp_path / "t.txt", "--trace")
    assert code == 0 and "proposed" in out
    (tmp_path / "bad.txt").write_text("sram = 10\n")
    assert _run(capsys, "simulate", "--cost-table", tmp_path / "bad.txt")[0] == 3


def test_rank_command(capsys):
    out = _json(capsys, "rank", "--rows", 84, "--cols", 10, "--trials", 4)
    assert out["trials_within_2"] == 4


def test_sweep_command(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sparsities": [0.7], "reg_strengths": [0.1, 2, 10], "reg_kinds": ["l1", "l2"],
                               "train_epochs": 5, "reg_epochs": 3, "retrain_epochs": 2}))
    out = _json(capsys, "sweep", "--config", cfg, "--out-dir", tmp_path / "s")
    assert out["runs"] == 6
    assert _run(capsys, "sweep", "--config", tmp_path / "missing.json")[0] == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert _run(capsys, "sweep", "--config", cfg)[0] == 1


def _read(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_single_point_sweep_wraps_one_pipeline_run(tmp_path):
    config = ExperimentConfig(train_epochs=4, reg_epochs=2, retrain_epochs=2, output_dir=str(tmp_path))
    rows = run_sweep(config)
    runs = _read(tmp_path / "runs.csv")
    assert len(runs) == 1 and list(runs[0]) == list(RUN_COLUMNS)
    ds = gen_synthetic(0)
    dense = run_pipeline(ds, [8, 16, 3], TrainConfig(train_epochs=4, reg_epochs=0, retrain_epochs=0), 0.0).model
    ref = run_pipeline(ds, [8, 16, 3], TrainConfig(train_epochs=4, reg_epochs=2, retrain_epochs=2), 0.7,
                       dense_model=dense)
    assert float(runs[0]["retrained_acc"]) == ref.retrained_acc == rows[0]["retrained_acc"]
    specs = runs[0]["masks"].split(";")
    assert specs[0] == f"{ref.masks[0].row_spec}|{ref.masks[0].col_spec}"
    assert (tmp_path / "history" / "run_000.csv").exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["runs"][0]["summary"]["masks"][0]["row_spec"] == str(ref.masks[0].row_spec)


def test_lambda_sweep_is_monotone_for_both_kinds(tmp_path):
    config = ExperimentConfig(reg_strengths=[0.1, 2.0, 10.0], reg_kinds=["l1", "l2"], train_epochs=10,
                              reg_epochs=5, retrain_epochs=0, index_bits=[4], output_dir=str(tmp_path))
    run_sweep(config)
    runs = _read(tmp_path / "runs.csv")
    assert len(runs) == 6
    for kind in ("l1", "l2"):
        means = [float(r["mean_abs_pruneset_weight"]) for r in runs if r["reg_kind"] == kind]
        # L1 can clamp the prune set to exactly zero at large lambda
        assert means[0] > means[1] >= means[2]


def test_sparsity_by_bits_sweep_emits_footprint_csv(tmp_path):
    config = ExperimentConfig(sparsities=[0.4, 0.7, 0.95], train_epochs=3, reg_epochs=1, retrain_epochs=1,
                              output_dir=str(tmp_path))
    run_sweep(config)
    storage = _read(tmp_path / "storage.csv")
    assert list(storage[0]) == list(STORAGE_COLUMNS)
    assert sorted((float(r["sparsity"]), int(r["index_bits"])) for r in storage) == \
        [(sp, b) for sp in (0.4, 0.7, 0.95) for b in (4, 8)]
    for r in storage:
        assert float(r["footprint_ratio"]) > 1.0


def test_sweep_is_deterministic(tmp_path):
    for name in ("a", "b"):
        run_sweep(ExperimentConfig(train_epochs=3, reg_epochs=1, retrain_epochs=1, magnitude_baseline=True,
                                   output_dir=str(tmp_path / name)))
    for f in ("runs.csv", "storage.csv", "history/run_000.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(sparsities=[])
    with pytest.raises(ValueError):
        ExperimentConfig(dataset="mnist")
    with pytest.raises(ValueError):
        ExperimentConfig(dataset="cifar")
    cfg = ExperimentConfig.from_json('{"seeds": [1, 2]}')
    assert cfg.seeds == [1, 2]
    assert np.array_equal(cfg.load_dataset().x_train, gen_synthetic(0).x_train)
