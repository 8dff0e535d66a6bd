import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfsrprune.lfsr import (
    DEFAULT_TAPS, MAX_WIDTH, MIN_WIDTH, InvalidSpecError, LfsrSpec, LfsrState, LockupError, default_spec,
    full_period, is_maximal, map_to_index, period, sequence, step, validate_spec,
)

from oracles import bitlist_lfsr, brute_period


def test_four_bit_visit_order_matches_bitlist_simulation():
    spec = LfsrSpec(4, (4, 3), 1)
    expected = bitlist_lfsr(4, (4, 3), 1, 16)
    assert expected == [1, 8, 4, 2, 9, 12, 6, 11, 5, 10, 13, 14, 15, 7, 3, 1]
    state, got = LfsrState(1), []
    for _ in range(16):
        got.append(state.current)
        state = step(state, spec)
    assert got == expected
    assert state.steps_taken == 16


def test_periods_of_four_bit_polynomials():
    assert period(LfsrSpec(4, (4, 3), 1)) == 15
    assert period(LfsrSpec(4, (4, 2), 1)) == 6
    assert brute_period(4, (4, 2)) == 6


@pytest.mark.parametrize("width", range(4, 11))
def test_is_maximal_agrees_with_brute_force_on_every_tap_set(width):
    for r in range(0, width):
        for rest in itertools.combinations(range(1, width), r):
            taps = (width,) + rest
            maximal = brute_period(width, taps) == 2 ** width - 1
            assert is_maximal(width, taps) == maximal, taps


@pytest.mark.parametrize("width", range(MIN_WIDTH, MAX_WIDTH + 1))
def test_default_taps_are_primitive(width):
    assert is_maximal(width, DEFAULT_TAPS[width])
    validate_spec(default_spec(width))


@pytest.mark.parametrize("width", range(MIN_WIDTH, 17))
def test_default_sequences_cover_every_nonzero_state(width):
    states = full_period(default_spec(width))
    assert len(states) == 2 ** width - 1
    assert len(np.unique(states)) == 2 ** width - 1
    assert states.min() == 1 and states.max() == 2 ** width - 1


@pytest.mark.parametrize("width", range(MIN_WIDTH, 13))
def test_step_is_a_bijection_on_nonzero_states(width):
    spec = default_spec(width)
    successors = {step(LfsrState(s), spec).current for s in range(1, 2 ** width)}
    assert successors == set(range(1, 2 ** width))


@pytest.mark.parametrize("width", range(MIN_WIDTH, 17))
def test_vectorized_sequence_matches_oracle(width):
    taps = DEFAULT_TAPS[width]
    seed = (0x9E3779B9 % (2 ** width - 1)) + 1
    got = sequence(LfsrSpec(width, taps, seed), 300).tolist()
    assert got == bitlist_lfsr(width, taps, seed, 300)


def test_two_steps_compose():
    spec = default_spec(9, 77)
    s = LfsrState(77)
    assert step(step(s, spec), spec).current == sequence(spec, 3)[2]


def test_zero_state_locks_up():
    with pytest.raises(LockupError):
        step(LfsrState(0), LfsrSpec(4, (4, 3), 1))


@pytest.mark.parametrize("spec, message", [
    (LfsrSpec(4, (4, 3), 0), "zero seed"),
    (LfsrSpec(4, (4, 2), 1), "non-maximal period"),
    (LfsrSpec(4, (4, 3), 16), "seed"),
    (LfsrSpec(4, (3, 2), 1), "taps"),
    (LfsrSpec(4, (5, 4), 1), "taps"),
])
def test_validate_names_the_failed_invariant(spec, message):
    with pytest.raises(InvalidSpecError, match=message):
        validate_spec(spec)


@pytest.mark.parametrize("width", [1, 3, 25])
def test_width_bounds(width):
    with pytest.raises(InvalidSpecError, match="width"):
        validate_spec(LfsrSpec(width, (width,), 1))


def test_validate_returns_the_spec():
    spec = LfsrSpec(4, (4, 3), 1)
    assert validate_spec(spec) is spec


def test_map_to_index_examples():
    assert map_to_index(15, 10, 4) == 9
    assert map_to_index(1, 10, 4) == 0


def test_map_to_index_histogram_w8_n300():
    idx = map_to_index(np.arange(1, 256), 300, 8)
    counts = np.bincount(idx, minlength=300)
    assert counts.max() <= 2
    assert idx.max() < 300


@given(st.integers(4, 16), st.integers(1, 2 ** 16))
def test_map_to_index_monotone_and_surjective(width, n_items):
    states = np.arange(1, 2 ** width)
    idx = map_to_index(states, n_items, width)
    assert np.all(np.diff(idx) >= 0)
    assert idx.min() >= 0 and idx.max() < n_items
    if n_items <= 2 ** width - 1:
        assert len(np.unique(idx)) == n_items


@given(st.integers(4, 24).flatmap(
    lambda w: st.tuples(st.just(w), st.integers(1, 2 ** w - 1))))
def test_spec_text_round_trip(ws):
    width, seed = ws
    spec = default_spec(width, seed)
    assert LfsrSpec.parse(spec.to_text()) == spec
    assert LfsrSpec.parse(str(spec)) == spec


def test_spec_text_format():
    assert LfsrSpec(4, (3, 4), 1).to_text() == "w=4,taps=4+3,seed=0x1"
    with pytest.raises(InvalidSpecError):
        LfsrSpec.parse("w=4;taps=4+3")


@settings(max_examples=50)
@given(st.integers(4, 14), st.data())
def test_any_seed_traverses_the_same_cycle(width, data):
    seed = data.draw(st.integers(1, 2 ** width - 1))
    ref = full_period(default_spec(width))
    got = sequence(default_spec(width, seed), 2 ** width - 1)
    start = int(np.flatnonzero(ref == seed)[0])
    assert np.array_equal(got, np.roll(ref, -start))
