"""Matrix-vector kernels for the dense, LFSR-indexed and S/I/P datapaths.

Each kernel returns ``(y, AccessTrace)``. Sparse accumulation goes through
``np.bincount``, which adds contributions in input order, so the LFSR kernel
sums each output in the order its pairs come out of the register stream.

Integer mode (``integer=True``) multiplies the stored 8-bit codes by an
integer input vector with 32-bit accumulators; requantization is left to
:func:`requantize`.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .codec import BaselineCompressed, LfsrSparseLayer, baseline_positions
from .tinynet import Layer, softmax

COUNTERS = (
    "weight_mem_reads",
    "index_mem_reads",
    "pointer_mem_reads",
    "input_buffer_reads",
    "output_buffer_reads",
    "output_buffer_writes",
    "mac_ops",
    "lfsr_steps",
)


@dataclass
class AccessTrace:
    weight_mem_reads: int = 0
    index_mem_reads: int = 0
    pointer_mem_reads: int = 0
    input_buffer_reads: int = 0
    output_buffer_reads: int = 0
    output_buffer_writes: int = 0
    mac_ops: int = 0
    lfsr_steps: int = 0
    value_bits: int = 32
    index_bits: int = 0

    @property
    def cycles(self) -> int:
        """One operation per cycle."""
        return sum(getattr(self, name) for name in COUNTERS)

    def __add__(self, other: "AccessTrace") -> "AccessTrace":
        if self.value_bits != other.value_bits:
            raise ValueError("cannot add traces with different value widths")
        out = {name: getattr(self, name) + getattr(other, name) for name in COUNTERS}
        return AccessTrace(**out, value_bits=self.value_bits, index_bits=max(self.index_bits, other.index_bits))

    def scaled(self, k: int) -> "AccessTrace":
        out = {name: k * getattr(self, name) for name in COUNTERS}
        return AccessTrace(**out, value_bits=self.value_bits, index_bits=self.index_bits)

    CSV_COLUMNS = COUNTERS + ("cycles", "value_bits", "index_bits")

    def as_row(self) -> dict:
        row = asdict(self)
        row["cycles"] = self.cycles
        return {k: row[k] for k in self.CSV_COLUMNS}

    def to_csv_row(self, header: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_COLUMNS, lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerow(self.as_row())
        return buf.getvalue()


def _finish(acc, relu):
    return np.maximum(acc, 0) if relu else acc


def _check_len(x, rows):
    if len(x) != rows:
        raise ValueError(f"input length {len(x)} does not match {rows} rows")


def _int_accumulate(cols, prods, n_out, bias):
    # float64 sums of int8*int8 products are exact far beyond int32 range
    sums = np.bincount(cols, prods.astype(np.float64), minlength=n_out)
    acc = sums.astype(np.int64) + (0 if bias is None else np.asarray(bias, dtype=np.int64))
    if acc.size and (acc.max() > np.iinfo(np.int32).max or acc.min() < np.iinfo(np.int32).min):
        raise OverflowError("accumulator exceeds 32 bits")
    return acc.astype(np.int32)


def dense_matvec(layer, x, bias=None, relu: bool = True):
    """``relu(W^T x + b)`` over a dense ``rows x cols`` matrix (or :class:`Layer`)."""
    if isinstance(layer, Layer):
        weights, bias = layer.weights, layer.bias if bias is None else bias
    else:
        weights = np.asarray(layer)
    rows, cols = weights.shape
    x = np.asarray(x)
    _check_len(x, rows)
    if np.issubdtype(weights.dtype, np.integer):
        acc = x.astype(np.int32) @ weights.astype(np.int32)
        acc = acc + (np.zeros(cols, np.int32) if bias is None else np.asarray(bias, np.int32))
        value_bits = 8
    else:
        acc = x.astype(np.float64) @ weights + (0.0 if bias is None else np.asarray(bias, np.float64))
        value_bits = 32
    n = rows * cols
    trace = AccessTrace(weight_mem_reads=n, input_buffer_reads=n, mac_ops=n,
                        output_buffer_writes=cols, value_bits=value_bits)
    return _finish(acc, relu), trace


def lfsr_sparse_matvec(sparse: LfsrSparseLayer, x, bias=None, relu: bool = True, integer: bool = False):
    """Replay the register pair and accumulate ``values[k] * x[i]`` into output ``j``.

    Every kept pair costs one input read, one weight read, one MAC and a
    read-modify-write of the output buffer. No index memory is touched.
    """
    x = np.asarray(x)
    _check_len(x, sparse.rows)
    mask = sparse.mask()
    if integer:
        if sparse.value_bits != 8:
            raise ValueError("integer mode needs 8-bit values")
        prods = sparse.values.astype(np.int64) * x.astype(np.int64)[mask.kept_rows]
        acc = _int_accumulate(mask.kept_cols, prods, sparse.cols, bias)
    else:
        acc = np.array(sparse.bias if bias is None else bias, dtype=np.float64)
        acc += np.bincount(mask.kept_cols, sparse.weight_values() * x.astype(np.float64)[mask.kept_rows],
                           minlength=sparse.cols)
    n = sparse.nnz
    trace = AccessTrace(
        weight_mem_reads=n,
        input_buffer_reads=n,
        output_buffer_reads=n,
        output_buffer_writes=n,
        mac_ops=n,
        lfsr_steps=2 * mask.steps_consumed,
        value_bits=sparse.value_bits,
    )
    return _finish(acc, relu), trace


def baseline_sparse_matvec(c: BaselineCompressed, bias, x, relu: bool = True, integer: bool = False):
    """Walk columns through ``P``; each stored entry (padding included) costs an
    index read, a weight read, an input read and a MAC. Outputs are written
    once per column from a register accumulator.
    """
    x = np.asarray(x)
    _check_len(x, c.rows)
    row, col = baseline_positions(c)
    if integer:
        if c.value_bits != 8:
            raise ValueError("integer mode needs 8-bit values")
        acc = _int_accumulate(col, c.S.astype(np.int64) * x.astype(np.int64)[row], c.cols, bias)
    else:
        acc = np.zeros(c.cols) if bias is None else np.array(bias, dtype=np.float64)
        acc += np.bincount(col, c.entry_values() * x.astype(np.float64)[row], minlength=c.cols)
    n = len(c.S)
    trace = AccessTrace(
        weight_mem_reads=n,
        index_mem_reads=n,
        pointer_mem_reads=c.cols + 1,
        input_buffer_reads=n,
        output_buffer_writes=c.cols,
        mac_ops=n,
        value_bits=c.value_bits,
        index_bits=c.index_bits,
    )
    return _finish(acc, relu), trace


def requantize(acc: np.ndarray, multiplier: float, bits: int = 8) -> np.ndarray:
    """Scale 32-bit accumulators to signed ``bits``-bit codes, saturating."""
    top = (1 << (bits - 1)) - 1
    return np.clip(np.round(acc * multiplier), -top - 1, top).astype(np.int32)


def run_network(layers, x):
    """Run a stack of dense :class:`Layer`, :class:`LfsrSparseLayer` or
    :class:`BaselineCompressed` layers; ReLU on hidden layers, softmax at the end.

    Returns ``(probabilities, summed AccessTrace)``.
    """
    h = np.asarray(x, dtype=np.float64)
    total = None
    for k, layer in enumerate(layers):
        relu = k < len(layers) - 1
        if isinstance(layer, LfsrSparseLayer):
            h, trace = lfsr_sparse_matvec(layer, h, relu=relu)
        elif isinstance(layer, BaselineCompressed):
            h, trace = baseline_sparse_matvec(layer, layer.bias, h, relu=relu)
        else:
            h, trace = dense_matvec(layer, h, relu=relu)
        if total is None:
            total = trace
        else:
            counts = {name: getattr(total, name) + getattr(trace, name) for name in COUNTERS}
            total = AccessTrace(**counts, value_bits=max(total.value_bits, trace.value_bits),
                                index_bits=max(total.index_bits, trace.index_bits))
    return softmax(h), total

