"""Train, regularize the masked-out weights, prune, retrain.

Uses the synthetic blobs by default. Pass a directory holding the four
MNIST IDX files to run the 784-64-32-10 network instead:

    python demos/03_prune_pipeline.py
    python demos/03_prune_pipeline.py data/mnist_subset
"""
import sys
from dataclasses import replace

from lfsrprune.data import gen_synthetic, load_mnist
from lfsrprune.tinynet import TrainConfig, run_pipeline

if len(sys.argv) > 1:
    data, sizes = load_mnist(sys.argv[1]), [784, 64, 32, 10]
    cfg = TrainConfig(train_epochs=30, reg_epochs=20, retrain_epochs=30)
else:
    data, sizes = gen_synthetic(0), [8, 16, 3]
    cfg = TrainConfig()

# train once, then reuse the dense model for every sparsity
dense = run_pipeline(data, sizes, replace(cfg, reg_epochs=0, retrain_epochs=0), 0.0).model
# at 90% the small output layer keeps only a handful of weights, so accuracy drops
for sp in (0.5, 0.7, 0.9):
    report = run_pipeline(data, sizes, cfg, sp, dense_model=dense)
    print(f"sparsity {sp:.0%}: dense {report.dense_acc:.3f}  regularized {report.regularized_acc:.3f}  "
          f"pruned {report.pruned_acc:.3f}  retrained {report.retrained_acc:.3f}  "
          f"compression {report.compression_rate:.1f}x")
