"""The "LFSP" model container.

Little-endian throughout::

    magic        4s   b"LFSP"
    version      u16  1
    layer_count  u16
    per layer:
      kind       u8   0 dense float32, 1 LFSR-sparse, 2 baseline S/I/P
      rows       u32
      cols       u32
      payload    (below)

    kind 0:  weights f32[rows*cols] (row-major, rows = inputs), bias f32[cols]
    kind 1:  row_spec, col_spec      each: width u8, taps u32 (bit k-1 set for tap k), seed u32
             nnz u32, value_bits u8, scale f32,
             values  (i8 or f32)[nnz], bias f32[cols]
    kind 2:  index_bits u8, value_bits u8, scale f32, nnz u32, n_entries u32,
             S (i8 or f32)[n_entries],
             I packed: 8-bit -> one byte each; 4-bit -> two per byte, low nibble
                       first, odd count padded with a zero nibble,
             P u32[cols+1], bias f32[cols]

No index arrays are stored for kind 1: the mask is replayed from the specs.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .codec import (BaselineCompressed, CodecError, LfsrSparseLayer, decode_baseline, decode_lfsr,
                    encode_baseline, encode_lfsr)
from .lfsr import LfsrSpec
from .tinynet import Layer, Model

MAGIC = b"LFSP"
VERSION = 1
KIND_DENSE, KIND_LFSR, KIND_BASELINE = 0, 1, 2


class _Reader:
    def __init__(self, blob: bytes):
        self.blob, self.pos = blob, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CodecError("container truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count: int) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).astype(np.dtype(dtype).newbyteorder("="))


def _f32(a) -> bytes:
    return np.asarray(a, dtype="<f4").tobytes()


def _values(a, value_bits) -> bytes:
    return np.asarray(a, dtype="<i1" if value_bits == 8 else "<f4").tobytes()


def _pack_spec(spec: LfsrSpec) -> bytes:
    taps = 0
    for k in spec.taps:
        taps |= 1 << (k - 1)
    return struct.pack("<BII", spec.width, taps, spec.seed)


def _unpack_spec(r: _Reader) -> LfsrSpec:
    width, taps, seed = r.unpack("BII")
    return LfsrSpec(width, tuple(k + 1 for k in range(32) if taps >> k & 1), seed)


def pack_nibbles(values: np.ndarray) -> bytes:
    v = np.asarray(values, dtype=np.uint8)
    if len(v) % 2:
        v = np.append(v, np.uint8(0))
    return (v[0::2] | (v[1::2] << 4)).astype(np.uint8).tobytes()


def unpack_nibbles(blob: bytes, count: int) -> np.ndarray:
    b = np.frombuffer(blob, dtype=np.uint8)
    out = np.empty(2 * len(b), dtype=np.uint8)
    out[0::2], out[1::2] = b & 0x0F, b >> 4
    return out[:count]


def _value_dtype(value_bits):
    if value_bits not in (8, 32):
        raise CodecError(f"value_bits {value_bits} not supported")
    return np.int8 if value_bits == 8 else np.float32


def dumps(layers) -> bytes:
    """Serialize a list of :class:`Layer`, :class:`LfsrSparseLayer` or :class:`BaselineCompressed`."""
    out = [MAGIC, struct.pack("<HH", VERSION, len(layers))]
    for layer in layers:
        if isinstance(layer, LfsrSparseLayer):
            out += [
                struct.pack("<BII", KIND_LFSR, layer.rows, layer.cols),
                _pack_spec(layer.row_spec),
                _pack_spec(layer.col_spec),
                struct.pack("<IBf", layer.nnz, layer.value_bits, layer.scale),
                _values(layer.values, layer.value_bits),
                _f32(layer.bias),
            ]
        elif isinstance(layer, BaselineCompressed):
            bias = np.zeros(layer.cols) if layer.bias is None else layer.bias
            packed_i = pack_nibbles(layer.I) if layer.index_bits == 4 else layer.I.astype(np.uint8).tobytes()
            out += [
                struct.pack("<BII", KIND_BASELINE, layer.rows, layer.cols),
                struct.pack("<BBfII", layer.index_bits, layer.value_bits, layer.scale, layer.nnz, len(layer.S)),
                _values(layer.S, layer.value_bits),
                packed_i,
                np.asarray(layer.P, dtype="<u4").tobytes(),
                _f32(bias),
            ]
        elif isinstance(layer, Layer):
            rows, cols = layer.shape
            out += [struct.pack("<BII", KIND_DENSE, rows, cols), _f32(layer.weights), _f32(layer.bias)]
        else:
            raise TypeError(f"cannot serialize {type(layer).__name__}")
    return b"".join(out)


def loads(blob: bytes) -> list:
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise CodecError("not an LFSP container (bad magic)")
    version, count = r.unpack("HH")
    if version != VERSION:
        raise CodecError(f"unsupported container version {version}")
    layers = []
    for _ in range(count):
        kind, rows, cols = r.unpack("BII")
        if kind == KIND_DENSE:
            weights = r.array(np.float32, rows * cols).reshape(rows, cols).astype(np.float64)
            bias = r.array(np.float32, cols).astype(np.float64)
            layers.append(Layer(weights, bias))
        elif kind == KIND_LFSR:
            row_spec, col_spec = _unpack_spec(r), _unpack_spec(r)
            nnz, value_bits, scale = r.unpack("IBf")
            values = r.array(_value_dtype(value_bits), nnz)
            bias = r.array(np.float32, cols)
            layers.append(LfsrSparseLayer(rows, cols, row_spec, col_spec, nnz, value_bits,
                                          np.float32(scale), values, bias))
        elif kind == KIND_BASELINE:
            index_bits, value_bits, scale, nnz, n_entries = r.unpack("BBfII")
            S = r.array(_value_dtype(value_bits), n_entries)
            if index_bits == 4:
                I = unpack_nibbles(r.take((n_entries + 1) // 2), n_entries)
            elif index_bits == 8:
                I = r.array(np.uint8, n_entries)
            else:
                raise CodecError(f"index_bits {index_bits} not supported")
            P = r.array(np.uint32, cols + 1)
            bias = r.array(np.float32, cols)
            c = BaselineCompressed(rows, cols, index_bits, value_bits, np.float32(scale), nnz, S, I, P, bias)
            c.validate()
            layers.append(c)
        else:
            raise CodecError(f"unknown layer kind {kind}")
    if r.pos != len(blob):
        raise CodecError(f"{len(blob) - r.pos} trailing bytes in container")
    return layers


def save(path, layers):
    Path(path).write_bytes(dumps(layers))


def load(path) -> list:
    return loads(Path(path).read_bytes())


def encode_model(model: Model, fmt: str = "lfsr", value_bits: int = 32, index_bits: int = 4) -> list:
    """Container layers for ``model``: ``fmt`` is ``lfsr``, ``baseline`` or ``dense``.

    ``lfsr`` needs every layer to carry an LFSR mask.
    """
    out = []
    for i, layer in enumerate(model.layers):
        if fmt == "lfsr":
            if layer.mask is None:
                raise ValueError(f"layer {i} has no LFSR mask; use the baseline or dense format")
            out.append(encode_lfsr(layer, value_bits))
        elif fmt == "baseline":
            out.append(encode_baseline(layer, index_bits, value_bits))
        elif fmt == "dense":
            out.append(Layer(layer.weights.copy(), layer.bias.copy()))
        else:
            raise ValueError(f"unknown format {fmt!r}")
    return out


def to_model(layers) -> Model:
    """Decode container layers into a trainable :class:`Model` (LFSR masks are replayed)."""
    decoded = []
    for layer in layers:
        if isinstance(layer, LfsrSparseLayer):
            decoded.append(decode_lfsr(layer))
        elif isinstance(layer, BaselineCompressed):
            decoded.append(decode_baseline(layer))
        else:
            decoded.append(layer)
    return Model(decoded)
