"""Fibonacci linear feedback shift registers.

Conventions used throughout the package:

* The register holds a ``width``-bit unsigned integer. Each step shifts it one
  place toward the least-significant end and the feedback bit enters the
  most-significant position.
* Taps are the exponents of the feedback polynomial, numbered like register
  stages counted from the feedback input: tap ``k`` reads the bit that has
  been in the register for ``k`` steps, i.e. bit ``width - k`` (0-indexed from
  the LSB). Tap ``width`` is therefore the bit being shifted out, which keeps
  the step map invertible. With taps ``{4, 3}`` the register has period 15.
* The state sequence of a spec starts at the seed: ``sequence(spec, n)[0]``
  is ``spec.seed``.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass

import numpy as np

MIN_WIDTH = 4
MAX_WIDTH = 24


class InvalidSpecError(ValueError):
    """An LFSR spec violates one of its invariants."""


class LockupError(RuntimeError):
    """The register reached the all-zero state."""


# Primitive feedback taps for every supported width (validated in tests).
DEFAULT_TAPS: dict[int, tuple[int, ...]] = {
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    17: (17, 14),
    18: (18, 11),
    19: (19, 6, 2, 1),
    20: (20, 17),
    21: (21, 19),
    22: (22, 21),
    23: (23, 18),
    24: (24, 23, 22, 17),
}


@dataclass(frozen=True)
class LfsrSpec:
    """Register width, feedback taps and seed.

    Construction does not validate; call :func:`validate_spec`.
    """

    width: int
    taps: tuple[int, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(sorted(set(int(t) for t in self.taps), reverse=True)))

    @property
    def tap_mask(self) -> int:
        mask = 0
        for k in self.taps:
            mask |= 1 << (self.width - k)
        return mask

    def to_text(self) -> str:
        taps = "+".join(str(t) for t in self.taps)
        return f"w={self.width},taps={taps},seed={self.seed:#x}"

    __str__ = to_text

    @classmethod
    def parse(cls, text: str) -> "LfsrSpec":
        """Parse ``w=<int>,taps=<int>[+<int>...],seed=<hex>``."""
        m = re.fullmatch(
            r"\s*w=(\d+)\s*,\s*taps=(\d+(?:\+\d+)*)\s*,\s*seed=(?:0x)?([0-9a-fA-F]+)\s*", text
        )
        if m is None:
            raise InvalidSpecError(f"cannot parse LFSR spec {text!r}")
        taps = tuple(int(t) for t in m.group(2).split("+"))
        return cls(int(m.group(1)), taps, int(m.group(3), 16))


@dataclass(frozen=True)
class LfsrState:
    current: int
    steps_taken: int = 0


def default_spec(width: int, seed: int = 1) -> LfsrSpec:
    """Spec with the shipped primitive taps; ``seed`` is reduced to ``width`` bits (0 maps to 1)."""
    if width not in DEFAULT_TAPS:
        raise InvalidSpecError(f"width {width} outside [{MIN_WIDTH}, {MAX_WIDTH}]")
    seed &= (1 << width) - 1
    return LfsrSpec(width, DEFAULT_TAPS[width], seed or 1)


def _advance(value: int, width: int, tap_mask: int) -> int:
    feedback = (value & tap_mask).bit_count() & 1
    return (value >> 1) | (feedback << (width - 1))


def step(state: LfsrState, spec: LfsrSpec) -> LfsrState:
    if state.current == 0:
        raise LockupError("LFSR is in the all-zero lockup state")
    return LfsrState(_advance(state.current, spec.width, spec.tap_mask), state.steps_taken + 1)


def period(spec: LfsrSpec) -> int:
    """Number of steps until the seed recurs, found by iterating the register."""
    _check_shape(spec)
    if spec.seed == 0:
        raise InvalidSpecError("zero seed: the all-zero state is a lockup state")
    width, mask, seed = spec.width, spec.tap_mask, spec.seed
    value, n = _advance(seed, width, mask), 1
    limit = 1 << width
    while value != seed:
        value = _advance(value, width, mask)
        n += 1
        if n > limit:
            # only reachable when the step map is not a bijection
            raise InvalidSpecError(f"{spec} never returns to its seed")
    return n


# -- GF(2) polynomial arithmetic (ints as coefficient bit vectors) -----------

def _poly_mulmod(a: int, b: int, mod: int, deg: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if (a >> deg) & 1:
            a ^= mod
    return out


def _poly_powmod(base: int, e: int, mod: int, deg: int) -> int:
    result = 1
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, mod, deg)
        base = _poly_mulmod(base, base, mod, deg)
        e >>= 1
    return result


def _prime_factors(n: int) -> list[int]:
    factors, p = [], 2
    while p * p <= n:
        if n % p == 0:
            factors.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors


def characteristic_polynomial(spec: LfsrSpec) -> int:
    """Recurrence polynomial of the output bit stream, as a coefficient bit vector."""
    poly = 1 << spec.width
    for k in spec.taps:
        poly ^= 1 << (spec.width - k)
    return poly


@functools.lru_cache(maxsize=None)
def is_maximal(width: int, taps: tuple[int, ...]) -> bool:
    """True when the feedback polynomial is primitive (period ``2**width - 1``).

    Uses the multiplicative order of ``x`` modulo the characteristic
    polynomial instead of iterating the register, so it stays cheap at width 24.
    """
    poly = characteristic_polynomial(LfsrSpec(width, taps, 1))
    order = (1 << width) - 1
    if _poly_powmod(2, order, poly, width) != 1:
        return False
    return all(_poly_powmod(2, order // q, poly, width) != 1 for q in _prime_factors(order))


def _check_shape(spec: LfsrSpec):
    if not MIN_WIDTH <= spec.width <= MAX_WIDTH:
        raise InvalidSpecError(f"width {spec.width} outside [{MIN_WIDTH}, {MAX_WIDTH}]")
    if spec.width not in spec.taps:
        raise InvalidSpecError(f"taps {spec.taps} must contain the width {spec.width}")
    if any(not 1 <= t <= spec.width for t in spec.taps):
        raise InvalidSpecError(f"taps {spec.taps} must lie in [1, {spec.width}]")
    if not 0 <= spec.seed < (1 << spec.width):
        raise InvalidSpecError(f"seed {spec.seed:#x} does not fit in {spec.width} bits")


def validate_spec(spec: LfsrSpec) -> LfsrSpec:
    """Return ``spec`` unchanged if it is usable, else raise :class:`InvalidSpecError`."""
    _check_shape(spec)
    if spec.seed == 0:
        raise InvalidSpecError("zero seed: the all-zero state is a lockup state")
    if not is_maximal(spec.width, spec.taps):
        raise InvalidSpecError(f"non-maximal period: taps {spec.taps} are not primitive for width {spec.width}")
    return spec


def map_to_index(state_value, n_items: int, width: int):
    """Scale a register value into ``[0, n_items)`` by keeping the high bits of the product.

    Accepts a scalar or an integer array.
    """
    if isinstance(state_value, np.ndarray):
        return ((state_value.astype(np.uint64) * np.uint64(n_items)) >> np.uint64(width)).astype(np.int64)
    return (state_value * n_items) >> width


# -- vectorized sequence generation ------------------------------------------

def _transition_columns(spec: LfsrSpec) -> list[int]:
    return [_advance(1 << j, spec.width, spec.tap_mask) for j in range(spec.width)]


def _apply_columns(cols: list[int], values):
    if isinstance(values, np.ndarray):
        out = np.zeros_like(values)
        for j, c in enumerate(cols):
            out ^= ((values >> j) & 1) * values.dtype.type(c)
        return out
    out = 0
    for j, c in enumerate(cols):
        if (values >> j) & 1:
            out ^= c
    return out


def _compose(outer: list[int], inner: list[int]) -> list[int]:
    return [_apply_columns(outer, c) for c in inner]


def sequence(spec: LfsrSpec, n: int) -> np.ndarray:
    """First ``n`` register states, starting with the seed, as ``uint32``.

    The step map is linear over GF(2), so after a short sequential warm-up the
    array is doubled repeatedly by applying the ``L``-step transition matrix to
    the states generated so far.
    """
    validate_spec(spec)
    if n <= 0:
        return np.zeros(0, dtype=np.uint32)
    head = min(n, 64)
    states = np.empty(head, dtype=np.uint32)
    value, mask = spec.seed, spec.tap_mask
    for t in range(head):
        states[t] = value
        value = _advance(value, spec.width, mask)
    if head == n:
        return states

    power = _transition_columns(spec)
    e = 1
    while e < head:
        power = _compose(power, power)
        e *= 2
    # head is 64 = 2**6 here, so power == A**head
    parts = [states]
    length = head
    while length < n:
        take = min(length, n - length)
        whole = np.concatenate(parts) if len(parts) > 1 else parts[0]
        parts = [whole, _apply_columns(power, whole[:take])]
        length += take
        power = _compose(power, power)
    return np.concatenate(parts)[:n]


@functools.lru_cache(maxsize=32)
def full_period(spec: LfsrSpec) -> np.ndarray:
    """One full period (``2**width - 1`` states) starting at the seed; read-only and cached."""
    states = sequence(spec, (1 << spec.width) - 1)
    states.setflags(write=False)
    return states
