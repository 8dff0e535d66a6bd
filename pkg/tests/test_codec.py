import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfsrprune import container
from lfsrprune.codec import (
    BaselineCompressed, CodecError, decode_baseline, decode_lfsr, dequantize, encode_baseline, encode_lfsr,
    footprint, footprint_bits, quantize, synthetic_sparse_layer,
)
from lfsrprune.masks import generate_mask
from lfsrprune.tinynet import Layer, Model, init_model

from oracles import loop_sip_decode, loop_sip_encode


def _sparse_layer(rows, cols, sparsity, seed):
    return synthetic_sparse_layer(generate_mask(rows, cols, sparsity, seed=seed), seed)


def _random_sparse(rng, rows, cols, sparsity):
    w = rng.standard_normal((rows, cols))
    w[rng.random((rows, cols)) < sparsity] = 0.0
    return w


# -- LFSR format ---------------------------------------------------------------

def test_single_weight_layer():
    mask = generate_mask(1, 1, 0.0)
    layer = Layer(np.array([[0.5]]), np.zeros(1), mask=mask)
    enc = encode_lfsr(layer)
    assert enc.nnz == 1 and enc.values.tolist() == [0.5]
    assert decode_lfsr(enc).weights.tolist() == [[0.5]]


def test_lfsr_round_trip_against_scatter_oracle():
    layer = _sparse_layer(300, 100, 0.9, seed=4)
    enc = encode_lfsr(layer)
    replay = generate_mask(300, 100, 0.9, enc.row_spec, enc.col_spec)
    ref = np.zeros((300, 100))
    for k, (i, j) in enumerate(replay.kept):
        ref[i, j] = enc.values[k]
    dec = decode_lfsr(enc)
    assert np.array_equal(dec.weights, ref)
    assert np.array_equal(dec.weights, layer.weights)
    assert dec.mask == layer.mask


def test_lfsr_values_follow_generation_order():
    layer = _sparse_layer(40, 30, 0.6, seed=1)
    enc = encode_lfsr(layer)
    m = layer.mask
    assert np.array_equal(enc.values, layer.weights[m.kept_rows, m.kept_cols].astype(np.float32))


def test_lfsr_needs_a_mask():
    with pytest.raises(ValueError):
        encode_lfsr(Layer(np.ones((2, 2)), np.zeros(2)))


def test_quantization_is_idempotent():
    layer = _sparse_layer(64, 48, 0.7, seed=9)
    once = decode_lfsr(encode_lfsr(layer, 8))
    twice_enc = encode_lfsr(once, 8)
    assert np.array_equal(decode_lfsr(twice_enc).weights, once.weights)
    assert np.array_equal(twice_enc.values, encode_lfsr(layer, 8).values)
    q, s = quantize(np.array([-2.0, 1.0, 0.5]))
    assert q.tolist() == [-127, 64, 32] and s == np.float32(2.0 / 127)
    assert dequantize(q, s)[0] == pytest.approx(-2.0, rel=1e-6)


# -- baseline format ----------------------------------------------------------

def test_long_gap_column_gets_a_padding_entry():
    w = np.zeros((21, 1))
    w[0, 0], w[20, 0] = 1.5, -2.0
    c = encode_baseline(w, index_bits=4)
    assert c.S.tolist() == [1.5, 0.0, -2.0]
    assert c.I.tolist() == [0, 15, 3]
    assert c.P.tolist() == [0, 3]
    assert c.alpha == 1.5 and c.n_padding == 1
    assert np.array_equal(decode_baseline(c).weights, w)


@pytest.mark.parametrize("bits", [4, 8])
def test_gap_boundaries(bits):
    span = 2 ** bits
    for gap, pads in [(span - 1, 0), (span, 1), (2 * span - 1, 1), (2 * span, 2), (3 * span + 5, 3)]:
        w = np.zeros((gap + 1, 1))
        w[gap, 0] = 1.0
        c = encode_baseline(w, bits)
        assert c.n_padding == pads
        assert c.I[-1] == gap % span
        assert np.all(c.I[:-1] == span - 1) and np.all(c.S[:-1] == 0)
        assert np.array_equal(decode_baseline(c).weights, w)


def test_dense_column_has_no_gaps():
    c = encode_baseline(np.arange(1.0, 13.0).reshape(4, 3), 4)
    assert np.all(c.I == 0) and c.alpha == 1.0


def test_alpha_grows_with_gap_length():
    alphas = []
    for gap in (10, 40, 100, 200):
        w = np.zeros((gap + 1, 2))
        w[0, :] = 1.0
        w[gap, :] = 1.0
        alphas.append(encode_baseline(w, 4).alpha)
    assert alphas[0] == 1.0
    assert all(a < b for a, b in zip(alphas, alphas[1:]))


def test_300x100_at_95_percent():
    layer = _sparse_layer(300, 100, 0.95, seed=1)
    c = encode_baseline(layer, 4)
    assert 1.0 < c.alpha < 3.0
    assert np.array_equal(decode_baseline(c).weights, layer.weights)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.floats(0.0, 1.0), st.sampled_from([4, 8]),
       st.integers(0, 2 ** 32 - 1))
def test_vectorized_encoder_matches_loop_oracle(rows, cols, sparsity, bits, seed):
    w = _random_sparse(np.random.default_rng(seed), rows, cols, sparsity)
    c = encode_baseline(w, bits)
    S, I, P = loop_sip_encode(w, bits)
    assert c.S.astype(np.float64).tolist() == [float(np.float32(v)) for v in S]
    assert c.I.tolist() == I and c.P.tolist() == P
    assert np.array_equal(loop_sip_decode(c.S.astype(np.float64), c.I, c.P, rows, cols),
                          w.astype(np.float32).astype(np.float64))
    assert np.array_equal(decode_baseline(c).weights, w.astype(np.float32).astype(np.float64))
    c8 = encode_baseline(w, bits, value_bits=8)
    q = decode_baseline(c8).weights
    assert np.array_equal(decode_baseline(encode_baseline(q, bits, 8)).weights, q)


@pytest.mark.parametrize("field, value", [
    ("P", np.array([0, 3], dtype=np.uint32)),
    ("I", np.array([0, 16], dtype=np.uint8)),
])
def test_malformed_baseline_is_rejected(field, value):
    c = encode_baseline(np.array([[1.0], [2.0]]), 4)
    parts = dict(c.__dict__)
    parts[field] = value
    with pytest.raises(CodecError):
        decode_baseline(BaselineCompressed(**parts))


def test_index_running_past_the_column_is_rejected():
    c = BaselineCompressed(4, 1, 4, 32, np.float32(1), 1, np.array([1.0], np.float32),
                           np.array([7], np.uint8), np.array([0, 1], np.uint32))
    with pytest.raises(CodecError):
        decode_baseline(c)


# -- footprint ----------------------------------------------------------------

def test_footprint_arithmetic():
    layer = _sparse_layer(300, 100, 0.9, seed=1)
    p = encode_lfsr(layer, 8)
    assert footprint_bits(p)["total"] == 3000 * 8 + 128 + 32
    b = encode_baseline(layer, 8, 8)
    assert footprint_bits(b)["total"] == len(b.S) * 16 + 101 * 32 + 32
    assert footprint(p, b).ratio == pytest.approx(2.1, abs=0.05)
    assert footprint_bits(encode_lfsr(layer, 32))["total"] == 3000 * 32 + 128


def test_proposed_footprint_ignores_index_width_and_baseline_grows_with_alpha():
    layer = _sparse_layer(400, 120, 0.95, seed=2)
    p = encode_lfsr(layer, 8)
    r4 = footprint(p, encode_baseline(layer, 4, 8))
    r8 = footprint(p, encode_baseline(layer, 8, 8))
    assert r4.proposed_bits == r8.proposed_bits
    sizes = []
    for gap in (10, 40, 100):
        w = np.zeros((gap + 1, 1))
        w[0, 0] = w[gap, 0] = 1.0
        sizes.append(footprint_bits(encode_baseline(w, 4))["total"])
    assert sizes[0] < sizes[1] < sizes[2]


def test_footprint_rejects_mismatched_value_widths():
    layer = _sparse_layer(20, 20, 0.5, seed=1)
    with pytest.raises(ValueError):
        footprint(encode_lfsr(layer, 8), encode_baseline(layer, 4, 32))


# -- container ----------------------------------------------------------------

def _mixed_model(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(v) for v in rng.integers(1, 40, size=4)]
    model = init_model(sizes, seed)
    layers = []
    for i, layer in enumerate(model.layers):
        kind = rng.integers(0, 3)
        value_bits = int(rng.choice([8, 32]))
        if kind == 0:
            layers.append(layer)
            continue
        sp = float(rng.uniform(0, 0.95))
        if round((1 - sp) * layer.weights.size) < 1:
            sp = 0.0
        layer.set_mask(generate_mask(*layer.shape, sp, seed=seed + i + 1))
        layer.weights[~layer.keep] = 0
        layer.bias = rng.standard_normal(layer.shape[1])
        if kind == 1:
            layers.append(encode_lfsr(layer, value_bits))
        else:
            layers.append(encode_baseline(layer, int(rng.choice([4, 8])), value_bits))
    return layers


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_container_round_trip_is_byte_exact(seed):
    blob = container.dumps(_mixed_model(seed))
    again = container.dumps(container.loads(blob))
    assert again == blob


def test_container_preserves_decoded_weights(tmp_path):
    layers = _mixed_model(11)
    container.save(tmp_path / "m.lfsp", layers)
    loaded = container.load(tmp_path / "m.lfsp")
    for a, b in zip(container.to_model(layers).layers, container.to_model(loaded).layers):
        np.testing.assert_array_equal(a.weights.astype(np.float32), b.weights.astype(np.float32))


def test_lfsr_layer_carries_its_seeds():
    layer = _sparse_layer(50, 40, 0.8, seed=3)
    blob = container.dumps([encode_lfsr(layer)])
    (loaded,) = container.loads(blob)
    assert (loaded.row_spec, loaded.col_spec) == (layer.mask.row_spec, layer.mask.col_spec)
    assert np.array_equal(decode_lfsr(loaded).weights, layer.weights)
    # header (8) + kind/rows/cols (9) + 2 specs (18) + nnz/bits/scale (9) + values + bias
    assert len(blob) == 8 + 9 + 18 + 9 + 4 * 400 + 4 * 40


def test_nibble_packing_layout():
    assert container.pack_nibbles(np.array([1, 2, 3])) == bytes([0x21, 0x03])
    assert container.unpack_nibbles(bytes([0x21, 0x03]), 3).tolist() == [1, 2, 3]


@pytest.mark.parametrize("mutate, message", [
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + b"\x02\x00" + b[6:], "version"),
    (lambda b: b[:-1], "truncated"),
    (lambda b: b + b"\x00", "trailing"),
    (lambda b: b[:8] + b"\x07" + b[9:], "kind"),
])
def test_corrupt_containers(mutate, message):
    blob = container.dumps([Layer(np.ones((2, 2)), np.zeros(2))])
    with pytest.raises(CodecError, match=message):
        container.loads(mutate(blob))


def test_encode_model_formats():
    model = Model([Layer(np.ones((3, 2)), np.zeros(2))])
    with pytest.raises(ValueError):
        container.encode_model(model, "lfsr")
    with pytest.raises(ValueError):
        container.encode_model(model, "csr")
    (b,) = container.encode_model(model, "baseline")
    assert b.nnz == 6
