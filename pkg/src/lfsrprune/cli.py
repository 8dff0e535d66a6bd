"""``lfsrprune`` command-line tool.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric or
validation failure. Every command is deterministic given its flags.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import container
from .codec import CodecError
from .cost import CostTable, format_table, run_grid, write_csv
from .data import DataFormatError, gen_synthetic, load_mnist
from .kernels import AccessTrace, run_network
from .lfsr import InvalidSpecError, LfsrSpec, default_spec, period, sequence, validate_spec
from .masks import MaskExhaustedError, generate_mask, mask_stats, rank_trials
from .sweep import ExperimentConfig, run_sweep
from .tinynet import ConfigError, TrainConfig, evaluate, init_model, mean_abs_pruneset, prune, run_epoch

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _floats(text):
    return [float(t) for t in text.split(",") if t]


def _ints(text):
    return [int(t) for t in text.split(",") if t]


def _shapes(text):
    out = []
    for part in text.split(","):
        r, c = part.lower().split("x")
        out.append((int(r), int(c)))
    return out


# -- shared flag groups ---------------------------------------------------------

def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--dataset", choices=("synthetic", "mnist"), default="synthetic",
                   help="data source (default: synthetic)")
    g.add_argument("--mnist-dir", help="directory holding the four MNIST IDX files (.gz accepted)")
    g.add_argument("--n-train", type=int, help="use the first N training samples (default: all)")
    g.add_argument("--n-test", type=int, help="use the first N test samples (default: all)")
    g.add_argument("--n-samples", type=int, default=600, help="synthetic sample count (default: 600)")
    g.add_argument("--n-features", type=int, default=8, help="synthetic feature count (default: 8)")
    g.add_argument("--n-classes", type=int, default=3, help="synthetic class count (default: 3)")
    g.add_argument("--data-seed", type=int, default=0, help="synthetic data seed (default: 0)")


def _add_train_flags(p, epochs_flag, epochs_default):
    g = p.add_argument_group("training")
    g.add_argument(epochs_flag, type=int, default=epochs_default, help=f"epochs (default: {epochs_default})")
    g.add_argument("--lr", type=float, default=0.1, help="learning rate (default: 0.1)")
    g.add_argument("--batch-size", type=int, default=32, help="minibatch size (default: 32)")
    g.add_argument("--seed", type=int, default=0, help="shuffling/init seed (default: 0)")


def _dataset(args):
    if args.dataset == "mnist":
        if not args.mnist_dir:
            raise UsageError("--dataset mnist needs --mnist-dir")
        return load_mnist(args.mnist_dir, args.n_train, args.n_test)
    return gen_synthetic(args.data_seed, args.n_samples, args.n_features, args.n_classes)


def _emit(obj):
    print(json.dumps(obj, indent=2))


# -- commands -------------------------------------------------------------------

def cmd_lfsr(args):
    spec = LfsrSpec.parse(args.spec) if args.spec else default_spec(args.width, args.seed)
    validate_spec(spec)
    out = {"spec": spec.to_text(), "period": period(spec) if args.period else None}
    if args.count:
        out["states"] = [int(v) for v in sequence(spec, args.count)]
    _emit(out)


def cmd_mask(args):
    row_spec = LfsrSpec.parse(args.row_spec) if args.row_spec else None
    col_spec = LfsrSpec.parse(args.col_spec) if args.col_spec else None
    mask = generate_mask(args.rows, args.cols, args.sparsity, row_spec, col_spec, seed=args.seed)
    out = {"record": mask.to_record(), "stats": mask_stats(mask).summary()}
    if args.show:
        out["kept"] = mask.kept[: args.show]
    if args.out:
        Path(args.out).write_text(json.dumps(mask.to_record(), indent=2) + "\n")
    _emit(out)


def _config(args, **over):
    base = dict(learning_rate=args.lr, batch_size=args.batch_size, seed=args.seed,
                train_epochs=0, reg_epochs=0, retrain_epochs=0)
    base.update(over)
    return TrainConfig(**base)


def cmd_train(args):
    data = _dataset(args)
    sizes = _ints(args.arch)
    if sizes[0] != data.n_features or sizes[-1] != data.n_classes:
        raise UsageError(f"--arch {args.arch} does not fit {data.n_features} features / {data.n_classes} classes")
    config = _config(args, train_epochs=args.epochs)
    model = init_model(sizes, config.seed)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.train_epochs):
        run_epoch(model, data.x_train, data.y_train, config, "train", rng)
    container.save(args.out, container.encode_model(model, "dense"))
    _emit({"arch": sizes, "test_acc": evaluate(model, data.x_test, data.y_test), "out": args.out})


def cmd_prune(args):
    data = _dataset(args)
    model = container.to_model(container.load(args.model))
    config = _config(args, reg_epochs=args.reg_epochs, reg_strength=args.lam, reg_kind=args.reg)
    dense_acc = evaluate(model, data.x_test, data.y_test)
    seed0 = config.seed + 1 if args.mask_seed is None else args.mask_seed
    for i, layer in enumerate(model.layers):
        layer.set_mask(generate_mask(*layer.shape, args.sparsity, seed=seed0 + i))
    rng = np.random.default_rng(config.seed)
    for _ in range(config.reg_epochs):
        run_epoch(model, data.x_train, data.y_train, config, "regularize", rng)
    reg_acc = evaluate(model, data.x_test, data.y_test)
    mean_abs = mean_abs_pruneset(model)
    prune(model)
    container.save(args.out, container.encode_model(model, "lfsr"))
    _emit({
        "dense_acc": dense_acc,
        "regularized_acc": reg_acc,
        "pruned_acc": evaluate(model, data.x_test, data.y_test),
        "mean_abs_pruneset_weight": mean_abs,
        "masks": [layer.mask.to_record() for layer in model.layers],
        "out": args.out,
    })


def cmd_retrain(args):
    data = _dataset(args)
    model = container.to_model(container.load(args.model))
    if any(layer.mask is None for layer in model.layers):
        raise UsageError("retrain needs an LFSR-sparse model (run prune first)")
    config = _config(args, retrain_epochs=args.epochs)
    before = evaluate(model, data.x_test, data.y_test)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.retrain_epochs):
        run_epoch(model, data.x_train, data.y_train, config, "retrain", rng)
    container.save(args.out, container.encode_model(model, "lfsr"))
    _emit({"before_acc": before, "retrained_acc": evaluate(model, data.x_test, data.y_test), "out": args.out})


def cmd_encode(args):
    model = container.to_model(container.load(args.model))
    layers = container.encode_model(model, args.format, args.value_bits, args.index_bits)
    container.save(args.out, layers)
    _emit({"format": args.format, "bytes": Path(args.out).stat().st_size, "out": args.out})


def cmd_infer(args):
    data = _dataset(args)
    layers = container.load(args.model)
    x, y = data.x_test, data.y_test
    if args.limit:
        x, y = x[: args.limit], y[: args.limit]
    correct, trace = 0, None
    for xi, yi in zip(x, y):
        probs, t = run_network(layers, xi)
        correct += int(np.argmax(probs) == yi)
        trace = t
    if args.trace_csv and trace is not None:
        Path(args.trace_csv).write_text(trace.to_csv_row(header=True))
    _emit({"samples": len(y), "accuracy": correct / len(y),
           "trace_per_sample": trace.as_row() if trace is not None else AccessTrace().as_row()})


def _grid(args):
    table = CostTable.load(args.cost_table) if args.cost_table else CostTable()
    rows = run_grid(_shapes(args.shapes), _floats(args.sparsity), _ints(args.index_bits),
                    args.value_bits, table, args.seed)
    if args.out:
        write_csv(rows, args.out)
    return rows


def cmd_footprint(args):
    rows = _grid(args)
    print(format_table(rows, "footprint_ratio", "{:.3f}"), end="")
    print(format_table(rows, "footprint_saving_percent", "{:.2f}"), end="")


def cmd_simulate(args):
    rows = _grid(args)
    print(format_table(rows, "energy_saving_percent", "{:.2f}"), end="")
    if args.trace:
        for r in rows:
            print(f"{r['rows']}x{r['cols']} sp={r['sparsity']} {r['index_bits']}b: "
                  f"proposed {r['proposed_energy_pj']:.1f} pJ, baseline {r['baseline_energy_pj']:.1f} pJ")


def cmd_rank(args):
    results = rank_trials(args.rows, args.cols, args.sparsity, args.trials, args.seed)
    full = min(args.rows, args.cols)
    _emit({
        "rows": args.rows, "cols": args.cols, "sparsity": args.sparsity,
        "dense_ranks": [d for d, _ in results],
        "masked_ranks": [m for _, m in results],
        "trials_within_2": sum(m >= full - 2 for _, m in results),
    })


def cmd_sweep(args):
    fields = json.loads(Path(args.config).read_text()) if args.config else {}
    for name, value in (("output_dir", args.out_dir), ("mnist_dir", args.mnist_dir)):
        if value is not None:
            fields[name] = value
    if args.mnist_dir and "dataset" not in fields:
        fields["dataset"] = "mnist"
    try:
        config = ExperimentConfig(**fields)
    except TypeError as exc:
        raise UsageError(f"bad sweep config: {exc}") from exc
    rows = run_sweep(config)
    _emit({"runs": len(rows), "output_dir": config.output_dir, "config": asdict(config)})


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lfsrprune", description="LFSR-generated pruning masks, codecs and energy proxy.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("lfsr", help="print or validate an LFSR sequence")
    s.add_argument("--spec", help="spec text, e.g. 'w=4,taps=4+3,seed=0x1' (default: shipped taps)")
    s.add_argument("--width", type=int, default=8, help="register width when --spec is absent (default: 8)")
    s.add_argument("--seed", type=int, default=1, help="seed when --spec is absent (default: 1)")
    s.add_argument("--count", type=int, default=16, help="states to print (default: 16)")
    s.add_argument("--period", action="store_true", help="also measure the period by iteration")
    s.set_defaults(func=cmd_lfsr)

    s = sub.add_parser("mask", help="generate one LFSR mask and print its statistics")
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--cols", type=int, required=True)
    s.add_argument("--sparsity", type=float, default=0.7, help="(default: 0.7)")
    s.add_argument("--seed", type=int, default=1, help="mask seed (default: 1)")
    s.add_argument("--row-spec", help="override the row register spec")
    s.add_argument("--col-spec", help="override the column register spec")
    s.add_argument("--show", type=int, default=0, help="print the first N kept positions (default: 0)")
    s.add_argument("--out", help="write the mask record (JSON) here")
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("train", help="train a dense model and save it")
    _add_data_flags(s)
    _add_train_flags(s, "--epochs", 20)
    s.add_argument("--arch", default="8,16,3", help="comma-separated layer sizes (default: 8,16,3)")
    s.add_argument("--out", required=True, help="output container (.lfsp)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("prune", help="mask, regularize and prune a dense model")
    _add_data_flags(s)
    _add_train_flags(s, "--reg-epochs", 10)
    s.add_argument("--model", required=True, help="dense input container")
    s.add_argument("--sparsity", type=float, default=0.7, help="(default: 0.7)")
    s.add_argument("--lam", type=float, default=2.0, help="regularization strength (default: 2.0)")
    s.add_argument("--reg", choices=("l1", "l2"), default="l2", help="(default: l2)")
    s.add_argument("--mask-seed", type=int, help="seed of layer 0's mask (default: --seed + 1)")
    s.add_argument("--out", required=True, help="output LFSR-sparse container")
    s.set_defaults(func=cmd_prune)

    s = sub.add_parser("retrain", help="retrain a pruned model with pruned weights pinned at zero")
    _add_data_flags(s)
    _add_train_flags(s, "--epochs", 10)
    s.add_argument("--model", required=True, help="LFSR-sparse input container")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_retrain)

    s = sub.add_parser("encode", help="re-encode a model container")
    s.add_argument("--model", required=True)
    s.add_argument("--format", choices=("lfsr", "baseline", "dense"), default="lfsr", help="(default: lfsr)")
    s.add_argument("--value-bits", type=int, choices=(8, 32), default=8, help="(default: 8)")
    s.add_argument("--index-bits", type=int, choices=(4, 8), default=4, help="baseline only (default: 4)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("infer", help="run the kernels over the test set")
    _add_data_flags(s)
    s.add_argument("--model", required=True)
    s.add_argument("--limit", type=int, default=0, help="first N test samples only (default: all)")
    s.add_argument("--trace-csv", help="write the per-sample access trace here")
    s.set_defaults(func=cmd_infer)

    for name, func, text in (("footprint", cmd_footprint, "footprint comparison grid"),
                             ("simulate", cmd_simulate, "energy-proxy comparison grid")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--shapes", default="300x100,400x120,2048x2048",
                       help="RxC list (default: 300x100,400x120,2048x2048)")
        s.add_argument("--sparsity", default="0.4,0.7,0.95", help="(default: 0.4,0.7,0.95)")
        s.add_argument("--index-bits", default="4,8", help="(default: 4,8)")
        s.add_argument("--value-bits", type=int, choices=(8, 32), default=8, help="(default: 8)")
        s.add_argument("--seed", type=int, default=1, help="(default: 1)")
        s.add_argument("--cost-table", help="'key = value' cost file (default: built-in table)")
        s.add_argument("--out", help="write the grid CSV here")
        if name == "simulate":
            s.add_argument("--trace", action="store_true", help="print absolute energies per point")
        s.set_defaults(func=func)

    s = sub.add_parser("rank", help="numerical rank of masked Gaussian matrices")
    s.add_argument("--rows", type=int, default=120, help="(default: 120)")
    s.add_argument("--cols", type=int, default=84, help="(default: 84)")
    s.add_argument("--sparsity", type=float, default=0.5, help="(default: 0.5)")
    s.add_argument("--trials", type=int, default=20, help="(default: 20)")
    s.add_argument("--seed", type=int, default=0, help="(default: 0)")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("sweep", help="run an experiment sweep from a JSON config")
    s.add_argument("--config", help="JSON object of ExperimentConfig fields (default: built-in config)")
    s.add_argument("--out-dir", help="override output_dir")
    s.add_argument("--mnist-dir", help="override mnist_dir (implies dataset=mnist)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CodecError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvalidSpecError, MaskExhaustedError, ConfigError, OverflowError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
