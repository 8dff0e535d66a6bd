"""Sparse layer storage: LFSR-seed format and value/relative-index/pointer baseline.

Baseline gap convention
-----------------------
Columns are walked top to bottom. Every entry (value ``S[k]``, index ``I[k]``)
sits ``I[k]`` rows below the previous entry of the same column (or below row
``-1`` for the first entry), i.e. ``I[k]`` zeros are skipped and the entry
occupies the next row. A zero gap ``g`` larger than ``2**bits - 1`` is
bridged by ``g // 2**bits`` padding entries ``(S=0, I=2**bits - 1)``, each of
which covers ``2**bits - 1`` zeros plus its own (zero) slot; the real entry
then carries ``I = g % 2**bits``. Example, 4-bit, nonzeros at rows 0 and 20:
``S = [v0, 0, v20]``, ``I = [0, 15, 3]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lfsr import LfsrSpec
from .masks import Mask, mask_from_count
from .tinynet import Layer

SPEC_BITS = 64  # one stored LfsrSpec (width + taps + seed), per register
POINTER_BITS = 32
SCALE_BITS = 32


class CodecError(ValueError):
    """Malformed compressed data."""


def quantize(weights: np.ndarray) -> tuple[np.ndarray, np.float32]:
    """Symmetric per-tensor 8-bit quantization; returns ``(int8 values, float32 scale)``."""
    peak = float(np.abs(weights).max()) if weights.size else 0.0
    scale = np.float32(peak / 127.0) if peak > 0 else np.float32(1.0)
    q = np.clip(np.round(weights / np.float64(scale)), -127, 127).astype(np.int8)
    return q, scale


def dequantize(values: np.ndarray, scale) -> np.ndarray:
    return values.astype(np.float64) * np.float64(scale)


def _check_value_bits(value_bits):
    if value_bits not in (8, 32):
        raise ValueError(f"value_bits must be 8 or 32, got {value_bits}")


# -- LFSR-seed format ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LfsrSparseLayer:
    """Kept weight values in mask-generation order, plus the two register specs."""

    rows: int
    cols: int
    row_spec: LfsrSpec
    col_spec: LfsrSpec
    nnz: int
    value_bits: int
    scale: np.float32
    values: np.ndarray  # int8 when value_bits == 8, else float32
    bias: np.ndarray  # float32, stored uncompressed

    def mask(self) -> Mask:
        return mask_from_count(self.rows, self.cols, self.nnz, self.row_spec, self.col_spec)

    def weight_values(self) -> np.ndarray:
        if self.value_bits == 8:
            return dequantize(self.values, self.scale)
        return self.values.astype(np.float64)


def encode_lfsr(layer: Layer, value_bits: int = 32) -> LfsrSparseLayer:
    if layer.mask is None:
        raise ValueError("layer has no LFSR mask")
    _check_value_bits(value_bits)
    m = layer.mask
    vals = layer.weights[m.kept_rows, m.kept_cols]
    if value_bits == 8:
        values, scale = quantize(vals)
    else:
        values, scale = vals.astype(np.float32), np.float32(1.0)
    return LfsrSparseLayer(m.rows, m.cols, m.row_spec, m.col_spec, m.nnz, value_bits, scale,
                           values, np.asarray(layer.bias, dtype=np.float32))


def decode_lfsr(sparse: LfsrSparseLayer) -> Layer:
    """Replay the mask from the stored specs and scatter the values."""
    mask = sparse.mask()
    weights = np.zeros((sparse.rows, sparse.cols))
    weights[mask.kept_rows, mask.kept_cols] = sparse.weight_values()
    return Layer(weights, sparse.bias.astype(np.float64), mask=mask)


# -- baseline S/I/P format -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class BaselineCompressed:
    rows: int
    cols: int
    index_bits: int
    value_bits: int
    scale: np.float32
    nnz: int
    S: np.ndarray  # int8 or float32; zero for padding entries
    I: np.ndarray  # uint8 relative zero-gaps
    P: np.ndarray  # uint32, cols + 1 column start pointers
    bias: np.ndarray | None = field(default=None)

    @property
    def alpha(self) -> float:
        return len(self.S) / self.nnz if self.nnz else 1.0

    @property
    def n_padding(self) -> int:
        return len(self.S) - self.nnz

    def entry_values(self) -> np.ndarray:
        if self.value_bits == 8:
            return dequantize(self.S, self.scale)
        return self.S.astype(np.float64)

    def validate(self):
        if len(self.S) != len(self.I):
            raise CodecError("S and I lengths differ")
        if len(self.P) != self.cols + 1 or self.P[0] != 0 or self.P[-1] != len(self.S):
            raise CodecError("pointer vector must run from 0 to len(S) with cols + 1 entries")
        if np.any(np.diff(self.P.astype(np.int64)) < 0):
            raise CodecError("pointer vector decreases")
        if len(self.I) and int(self.I.max()) >= 1 << self.index_bits:
            raise CodecError(f"index entry exceeds {self.index_bits} bits")


def encode_baseline(layer, index_bits: int = 4, value_bits: int = 32) -> BaselineCompressed:
    """Compress the nonzeros of ``layer`` (a :class:`Layer` or a dense matrix), column-major."""
    if index_bits not in (4, 8):
        raise ValueError(f"index_bits must be 4 or 8, got {index_bits}")
    _check_value_bits(value_bits)
    weights = layer.weights if isinstance(layer, Layer) else np.asarray(layer, dtype=np.float64)
    bias = np.asarray(layer.bias, dtype=np.float32) if isinstance(layer, Layer) else None
    rows, cols = weights.shape
    span = 1 << index_bits

    nz_cols, nz_rows = np.nonzero(weights.T)  # column-major order
    vals = weights[nz_rows, nz_cols]
    if value_bits == 8:
        qvals, scale = quantize(vals)
    else:
        qvals, scale = vals.astype(np.float32), np.float32(1.0)

    prev = np.empty_like(nz_rows)
    if len(nz_rows):
        prev[0] = -1
        prev[1:] = np.where(nz_cols[1:] == nz_cols[:-1], nz_rows[:-1], -1)
    gap = nz_rows - prev - 1
    n_pad = gap // span
    real_pos = np.cumsum(n_pad + 1) - 1
    total = int(real_pos[-1]) + 1 if len(real_pos) else 0

    S = np.zeros(total, dtype=qvals.dtype)
    I = np.full(total, span - 1, dtype=np.uint8)
    S[real_pos] = qvals
    I[real_pos] = gap % span
    per_col = np.bincount(nz_cols, weights=n_pad + 1, minlength=cols).astype(np.int64)
    P = np.concatenate([[0], np.cumsum(per_col)]).astype(np.uint32)
    return BaselineCompressed(rows, cols, index_bits, value_bits, scale, len(vals), S, I, P, bias)


def baseline_positions(c: BaselineCompressed) -> tuple[np.ndarray, np.ndarray]:
    """Row and column of every stored entry (padding included)."""
    c.validate()
    counts = np.diff(c.P.astype(np.int64))
    col = np.repeat(np.arange(c.cols), counts)
    steps = c.I.astype(np.int64) + 1
    csum = np.cumsum(steps)
    starts = np.concatenate([[0], csum])[c.P[:-1].astype(np.int64)]
    row = csum - np.repeat(starts, counts) - 1
    if len(row) and row.max() >= c.rows:
        raise CodecError("index entries run past the end of a column")
    return row, col


def decode_baseline(c: BaselineCompressed) -> Layer:
    row, col = baseline_positions(c)
    weights = np.zeros((c.rows, c.cols))
    weights[row, col] = c.entry_values()
    bias = np.zeros(c.cols) if c.bias is None else c.bias.astype(np.float64)
    return Layer(weights, bias, keep=weights != 0)


# -- footprint -----------------------------------------------------------------

def footprint_bits(encoded) -> dict:
    """Storage bits of one encoded layer, itemized (bias excluded)."""
    scale_bits = SCALE_BITS if encoded.value_bits == 8 else 0
    if isinstance(encoded, LfsrSparseLayer):
        parts = {"values": encoded.nnz * encoded.value_bits, "specs": 2 * SPEC_BITS, "scale": scale_bits}
    elif isinstance(encoded, BaselineCompressed):
        parts = {
            "values": len(encoded.S) * encoded.value_bits,
            "indices": len(encoded.I) * encoded.index_bits,
            "pointers": (encoded.cols + 1) * POINTER_BITS,
            "scale": scale_bits,
        }
    else:
        raise TypeError(f"cannot size {type(encoded).__name__}")
    parts["total"] = sum(parts.values())
    return parts


@dataclass
class FootprintReport:
    layers: list[dict]
    proposed_bits: int
    baseline_bits: int

    @property
    def ratio(self) -> float:
        return self.baseline_bits / self.proposed_bits

    @property
    def saving_percent(self) -> float:
        return 100.0 * (self.baseline_bits - self.proposed_bits) / self.baseline_bits


def footprint(proposed, baseline) -> FootprintReport:
    """Compare matching lists (or single layers) of LFSR-format and baseline-format layers."""
    if not isinstance(proposed, (list, tuple)):
        proposed, baseline = [proposed], [baseline]
    if len(proposed) != len(baseline):
        raise ValueError("layer lists differ in length")
    rows = []
    for p, b in zip(proposed, baseline):
        if p.value_bits != b.value_bits:
            raise ValueError("value bit-widths differ between formats")
        fp, fb = footprint_bits(p), footprint_bits(b)
        rows.append({
            "rows": p.rows,
            "cols": p.cols,
            "nnz": p.nnz,
            "value_bits": p.value_bits,
            "index_bits": b.index_bits,
            "alpha": b.alpha,
            "proposed_bits": fp["total"],
            "baseline_bits": fb["total"],
            "baseline_pointer_bits": fb["pointers"],
            "ratio": fb["total"] / fp["total"],
        })
    return FootprintReport(rows, sum(r["proposed_bits"] for r in rows), sum(r["baseline_bits"] for r in rows))


def synthetic_sparse_layer(mask: Mask, seed: int = 0) -> Layer:
    """Layer with seeded Gaussian values on the mask's kept positions (for footprint/cost studies).

    Values are float32-representable, so the 32-bit codecs reproduce them exactly.
    """
    rng = np.random.default_rng(seed)
    weights = np.zeros((mask.rows, mask.cols))
    vals = rng.standard_normal(mask.nnz).astype(np.float32).astype(np.float64)
    vals[vals == 0] = 1.0
    weights[mask.kept_rows, mask.kept_cols] = vals
    return Layer(weights, np.zeros(mask.cols), mask=mask)
