"""Build the small MNIST subset used by the desk-scale experiments.

The source is the 5000-sample MNIST extract shipped inside the ``mlxtend``
wheel (``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per digit). The
samples are shuffled with a fixed seed and written as gzipped IDX files:

    data/mnist_subset/train-images-idx3-ubyte.gz   (2000 images)
    data/mnist_subset/train-labels-idx1-ubyte.gz
    data/mnist_subset/t10k-images-idx3-ubyte.gz    (500 images)
    data/mnist_subset/t10k-labels-idx1-ubyte.gz

Usage:
    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

N_TRAIN = 2000
N_TEST = 500
SEED = 0
OUT = Path(__file__).resolve().parent.parent / "data" / "mnist_subset"


def write_idx(path, array):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x0800 | array.ndim
    header = struct.pack(">I", magic) + struct.pack(">%dI" % array.ndim, *array.shape)
    # mtime=0 keeps the output byte-stable
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(header + array.tobytes())


def main(wheel):
    with zipfile.ZipFile(wheel) as z:
        csv = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(csv), delimiter=",").astype(np.uint8)
    images, labels = table[:, :-1].reshape(-1, 28, 28), table[:, -1]

    order = np.random.default_rng(SEED).permutation(len(labels))
    train, test = order[:N_TRAIN], order[N_TRAIN:N_TRAIN + N_TEST]

    OUT.mkdir(parents=True, exist_ok=True)
    write_idx(OUT / "train-images-idx3-ubyte.gz", images[train])
    write_idx(OUT / "train-labels-idx1-ubyte.gz", labels[train])
    write_idx(OUT / "t10k-images-idx3-ubyte.gz", images[test])
    write_idx(OUT / "t10k-labels-idx1-ubyte.gz", labels[test])
    print("wrote", N_TRAIN, "train and", N_TEST, "test samples to", OUT)


if __name__ == "__main__":
    main(sys.argv[1])
