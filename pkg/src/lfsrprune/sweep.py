"""Experiment sweeps: pipeline runs over sparsity x lambda x reg kind x seed,
followed by footprint and energy-proxy comparisons for every pruned model.

Output directory layout::

    runs.csv            one row per pipeline run (written as each run finishes)
    history/run_NNN.csv per-epoch accuracy history of run NNN
    storage.csv         footprint + energy proxy per run and index width
    summary.json        config and per-run summaries (no timestamps)
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .codec import encode_baseline, encode_lfsr, footprint
from .cost import CostTable, compare
from .data import Dataset, gen_synthetic, load_mnist
from .kernels import baseline_sparse_matvec, lfsr_sparse_matvec
from .tinynet import TrainConfig, evaluate, magnitude_prune_baseline, run_pipeline

RUN_COLUMNS = (
    "run", "seed", "sparsity", "reg_kind", "reg_strength", "dense_acc", "regularized_acc", "pruned_acc",
    "retrained_acc", "magnitude_acc", "mean_abs_pruneset_weight", "compression_rate", "masks",
)
STORAGE_COLUMNS = (
    "run", "seed", "sparsity", "reg_kind", "reg_strength", "index_bits", "value_bits", "nnz",
    "alpha", "proposed_bits", "baseline_bits", "footprint_ratio", "footprint_saving_percent",
    "proposed_energy_pj", "baseline_energy_pj", "energy_saving_percent",
)


@dataclass
class ExperimentConfig:
    architecture: list[int] = field(default_factory=lambda: [8, 16, 3])
    dataset: str = "synthetic"  # or "mnist"
    mnist_dir: str | None = None
    n_train: int | None = None
    n_test: int | None = None
    synthetic_samples: int = 600
    synthetic_classes: int = 3
    data_seed: int = 0
    sparsities: list[float] = field(default_factory=lambda: [0.7])
    reg_strengths: list[float] = field(default_factory=lambda: [2.0])
    reg_kinds: list[str] = field(default_factory=lambda: ["l2"])
    index_bits: list[int] = field(default_factory=lambda: [4, 8])
    value_bits: int = 8
    seeds: list[int] = field(default_factory=lambda: [0])
    learning_rate: float = 0.1
    batch_size: int = 32
    train_epochs: int = 20
    reg_epochs: int = 10
    retrain_epochs: int = 10
    magnitude_baseline: bool = False
    magnitude_iterations: int = 3
    output_dir: str = "sweep_out"

    def __post_init__(self):
        for name in ("sparsities", "reg_strengths", "reg_kinds", "index_bits", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if self.dataset not in ("synthetic", "mnist"):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "mnist" and not self.mnist_dir:
            raise ValueError("mnist dataset needs mnist_dir")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def load_dataset(self) -> Dataset:
        if self.dataset == "mnist":
            return load_mnist(self.mnist_dir, self.n_train, self.n_test)
        return gen_synthetic(self.data_seed, self.synthetic_samples, self.architecture[0], self.synthetic_classes)


def storage_rows(model, index_bits_list, value_bits: int, table: CostTable = CostTable()) -> list[dict]:
    """Footprint and energy proxy of a pruned model in both formats, per index width."""
    proposed = [encode_lfsr(layer, value_bits) for layer in model.layers]
    x = [np.ones(layer.shape[0]) for layer in model.layers]
    p_traces = [lfsr_sparse_matvec(p, xi)[1] for p, xi in zip(proposed, x)]
    p_trace = sum(p_traces[1:], p_traces[0])
    out = []
    for bits in index_bits_list:
        base = [encode_baseline(layer, bits, value_bits) for layer in model.layers]
        b_traces = [baseline_sparse_matvec(b, None, xi)[1] for b, xi in zip(base, x)]
        b_trace = sum(b_traces[1:], b_traces[0])
        fp = footprint(proposed, base)
        report = compare((p_trace, fp.proposed_bits), (b_trace, fp.baseline_bits), table)
        out.append({
            "index_bits": bits,
            "value_bits": value_bits,
            "nnz": sum(p.nnz for p in proposed),
            "alpha": sum(len(b.S) for b in base) / sum(b.nnz for b in base),
            "proposed_bits": fp.proposed_bits,
            "baseline_bits": fp.baseline_bits,
            "footprint_ratio": fp.ratio,
            "footprint_saving_percent": fp.saving_percent,
            "proposed_energy_pj": report.proposed_energy,
            "baseline_energy_pj": report.baseline_energy,
            "energy_saving_percent": report.energy_saving_percent,
        })
    return out


class _CsvSink:
    def __init__(self, path: Path, columns):
        self.f = open(path, "w", newline="")
        self.writer = csv.DictWriter(self.f, fieldnames=columns, extrasaction="ignore")
        self.writer.writeheader()

    def write(self, row: dict):
        self.writer.writerow(row)
        self.f.flush()

    def close(self):
        self.f.close()


def run_sweep(config: ExperimentConfig, dataset: Dataset | None = None, table: CostTable = CostTable()) -> list[dict]:
    """Run every sweep point and write the report files; returns the run rows."""
    out = Path(config.output_dir)
    (out / "history").mkdir(parents=True, exist_ok=True)
    dataset = dataset or config.load_dataset()
    runs = _CsvSink(out / "runs.csv", RUN_COLUMNS)
    storage = _CsvSink(out / "storage.csv", STORAGE_COLUMNS)
    rows, summaries = [], []
    dense_cache = {}
    run_id = 0
    try:
        for seed in config.seeds:
            for sparsity in config.sparsities:
                for kind in config.reg_kinds:
                    for lam in config.reg_strengths:
                        cfg = TrainConfig(
                            learning_rate=config.learning_rate, reg_strength=lam, reg_kind=kind,
                            batch_size=config.batch_size, train_epochs=config.train_epochs,
                            reg_epochs=config.reg_epochs, retrain_epochs=config.retrain_epochs, seed=seed,
                        )
                        if seed not in dense_cache:
                            dense_cfg = TrainConfig(**{**asdict(cfg), "reg_epochs": 0, "retrain_epochs": 0})
                            dense_cache[seed] = run_pipeline(dataset, config.architecture, dense_cfg, 0.0).model
                        report = run_pipeline(dataset, config.architecture, cfg, sparsity,
                                              dense_model=dense_cache[seed])
                        report.write_csv(out / "history" / f"run_{run_id:03d}.csv")
                        mag_acc = ""
                        if config.magnitude_baseline and sparsity > 0:
                            mag = magnitude_prune_baseline(
                                dense_cache[seed], sparsity, config.magnitude_iterations,
                                max(1, config.retrain_epochs // config.magnitude_iterations), dataset, cfg)
                            mag_acc = evaluate(mag, dataset.x_test, dataset.y_test)
                        key = {"run": run_id, "seed": seed, "sparsity": sparsity, "reg_kind": kind,
                               "reg_strength": lam}
                        row = {
                            **key,
                            "dense_acc": report.dense_acc,
                            "regularized_acc": report.regularized_acc,
                            "pruned_acc": report.pruned_acc,
                            "retrained_acc": report.retrained_acc,
                            "magnitude_acc": mag_acc,
                            "mean_abs_pruneset_weight": report.mean_abs_pruneset_weight,
                            "compression_rate": report.compression_rate,
                            "masks": ";".join(f"{m.row_spec}|{m.col_spec}" for m in report.masks),
                        }
                        runs.write(row)
                        rows.append(row)
                        if sparsity > 0:
                            for srow in storage_rows(report.model, config.index_bits, config.value_bits, table):
                                storage.write({**key, **srow})
                        summaries.append({**row, "summary": report.summary()})
                        run_id += 1
    finally:
        runs.close()
        storage.close()
    (out / "summary.json").write_text(json.dumps({"config": asdict(config), "runs": summaries}, indent=2))
    return rows
