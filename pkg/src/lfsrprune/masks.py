"""Pseudo-random sparsity masks driven by a pair of LFSRs.

A mask lists the KEPT (nonzero) weight positions of one layer, in the order
the LFSR pair produced them. Row indices address the layer input, column
indices the layer output. Both registers advance in lockstep; at step ``t``
the candidate is ``(map_to_index(row_t), map_to_index(col_t))`` where
``row_t``/``col_t`` are the ``t``-th states starting at the seeds. Candidates
already kept are skipped, so the kept count is exact.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .lfsr import MAX_WIDTH, InvalidSpecError, LfsrSpec, default_spec, full_period, map_to_index, validate_spec

EXHAUSTION_FACTOR = 64
COL_SEED_SALT = 0x5A5A5A


class MaskExhaustedError(RuntimeError):
    """The LFSR pair did not yield enough distinct positions."""


def kept_count(rows: int, cols: int, sparsity: float) -> int:
    # round half up; Python's round() would round half to even
    return int(math.floor((1.0 - sparsity) * rows * cols + 0.5))


def default_widths(rows: int, cols: int) -> tuple[int, int]:
    """Register widths with two bits of oversampling over each dimension.

    The column width is bumped until it is coprime with the row width: two
    lockstep registers of widths ``a`` and ``b`` repeat their joint state
    after ``lcm(2**a - 1, 2**b - 1)`` steps, and ``gcd(2**a - 1, 2**b - 1)``
    is ``2**gcd(a, b) - 1``.
    """
    w_r = max(4, (rows - 1).bit_length() + 2)
    w_c = max(4, (cols - 1).bit_length() + 2)
    while math.gcd(w_r, w_c) != 1:
        w_c += 1
    if max(w_r, w_c) > MAX_WIDTH:
        raise InvalidSpecError(f"layer {rows}x{cols} needs a register wider than {MAX_WIDTH} bits")
    return w_r, w_c


def default_specs(rows: int, cols: int, seed: int = 1) -> tuple[LfsrSpec, LfsrSpec]:
    """Row/column specs for a layer, both derived from one user seed."""
    w_r, w_c = default_widths(rows, cols)
    row_spec = default_spec(w_r, seed)
    col_spec = default_spec(w_c, row_spec.seed ^ COL_SEED_SALT)
    return row_spec, col_spec


@dataclass(frozen=True, eq=False)
class Mask:
    rows: int
    cols: int
    kept_rows: np.ndarray
    kept_cols: np.ndarray
    row_spec: LfsrSpec
    col_spec: LfsrSpec
    target_sparsity: float
    steps_consumed: int

    @property
    def nnz(self) -> int:
        return len(self.kept_rows)

    @property
    def kept(self) -> list[tuple[int, int]]:
        return list(zip(self.kept_rows.tolist(), self.kept_cols.tolist()))

    @property
    def achieved_sparsity(self) -> float:
        return 1.0 - self.nnz / (self.rows * self.cols)

    def keep_matrix(self) -> np.ndarray:
        keep = np.zeros((self.rows, self.cols), dtype=bool)
        keep[self.kept_rows, self.kept_cols] = True
        return keep

    def prune_matrix(self) -> np.ndarray:
        return ~self.keep_matrix()

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return (
            self.to_record() == other.to_record()
            and np.array_equal(self.kept_rows, other.kept_rows)
            and np.array_equal(self.kept_cols, other.kept_cols)
        )

    def to_record(self) -> dict:
        """Persisted form: everything needed to regenerate the kept list."""
        return {
            "rows": self.rows,
            "cols": self.cols,
            "sparsity": self.target_sparsity,
            "row_spec": self.row_spec.to_text(),
            "col_spec": self.col_spec.to_text(),
            "steps_consumed": self.steps_consumed,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Mask":
        mask = generate_mask(
            record["rows"],
            record["cols"],
            record["sparsity"],
            LfsrSpec.parse(record["row_spec"]),
            LfsrSpec.parse(record["col_spec"]),
        )
        if "steps_consumed" in record and record["steps_consumed"] != mask.steps_consumed:
            raise ValueError("replayed mask does not match the recorded step count")
        return mask


@functools.lru_cache(maxsize=16)
def _mapped_period(spec: LfsrSpec, n_items: int) -> np.ndarray:
    idx = map_to_index(full_period(spec), n_items, spec.width)
    idx.setflags(write=False)
    return idx


@functools.lru_cache(maxsize=128)
def replay(rows: int, cols: int, n_keep: int, row_spec: LfsrSpec, col_spec: LfsrSpec):
    """Kept ``(rows, cols)`` index arrays and the number of LFSR steps consumed.

    Results are cached and returned read-only.
    """
    validate_spec(row_spec)
    validate_spec(col_spec)
    if n_keep < 1 or n_keep > rows * cols:
        raise ValueError(f"cannot keep {n_keep} of {rows * cols} positions")
    r_map = _mapped_period(row_spec, rows)
    c_map = _mapped_period(col_spec, cols)
    limit = EXHAUSTION_FACTOR * n_keep

    visited = np.zeros(rows * cols, dtype=bool)
    owner = np.empty(rows * cols, dtype=np.int64)
    accepted = []
    have, t0, steps = 0, 0, 0
    while have < n_keep:
        if t0 >= limit:
            raise MaskExhaustedError(
                f"only {have} of {n_keep} distinct positions after {t0} steps "
                f"(row {row_spec}, col {col_spec})"
            )
        size = min(max(4096, 2 * (n_keep - have)), limit - t0)
        t = np.arange(t0, t0 + size, dtype=np.int64)
        lin = r_map[t % len(r_map)] * cols + c_map[t % len(c_map)]
        pos = np.flatnonzero(~visited[lin])
        cand = lin[pos]
        # earliest position of each still-free cell within this chunk
        owner[cand] = size
        np.minimum.at(owner, cand, pos)
        first = pos[owner[cand] == pos][: n_keep - have]
        if len(first):
            chosen = lin[first]
            visited[chosen] = True
            accepted.append(chosen)
            have += len(first)
            steps = t0 + int(first[-1]) + 1
        t0 += size

    lin = np.concatenate(accepted)
    kept_rows, kept_cols = lin // cols, lin % cols
    kept_rows.setflags(write=False)
    kept_cols.setflags(write=False)
    return kept_rows, kept_cols, steps


def generate_mask(
    rows: int,
    cols: int,
    sparsity: float,
    row_spec: LfsrSpec | None = None,
    col_spec: LfsrSpec | None = None,
    seed: int = 1,
) -> Mask:
    """Generate the kept positions for a ``rows x cols`` layer at ``sparsity``.

    When the specs are omitted they come from :func:`default_specs` with
    ``seed``.
    """
    if not 0.0 <= sparsity < 1.0:
        raise ValueError(f"sparsity {sparsity} outside [0, 1)")
    n_keep = kept_count(rows, cols, sparsity)
    if n_keep < 1:
        raise ValueError(f"sparsity {sparsity} leaves no weights in a {rows}x{cols} layer")
    if row_spec is None or col_spec is None:
        d_row, d_col = default_specs(rows, cols, seed)
        row_spec = row_spec or d_row
        col_spec = col_spec or d_col
    kept_rows, kept_cols, steps = replay(rows, cols, n_keep, row_spec, col_spec)
    return Mask(rows, cols, kept_rows, kept_cols, row_spec, col_spec, float(sparsity), steps)


def mask_from_count(rows: int, cols: int, nnz: int, row_spec: LfsrSpec, col_spec: LfsrSpec) -> Mask:
    """Rebuild a mask from its stored kept count (as the sparse codecs do)."""
    kept_rows, kept_cols, steps = replay(rows, cols, nnz, row_spec, col_spec)
    return Mask(rows, cols, kept_rows, kept_cols, row_spec, col_spec, 1.0 - nnz / (rows * cols), steps)


@dataclass(frozen=True)
class MaskStats:
    achieved_sparsity: float
    nnz: int
    row_counts: np.ndarray
    col_counts: np.ndarray
    steps_consumed: int

    @property
    def duplicate_overhead(self) -> float:
        return self.steps_consumed / self.nnz

    @property
    def row_cv(self) -> float:
        return float(self.row_counts.std() / self.row_counts.mean())

    def summary(self) -> dict:
        return {
            "achieved_sparsity": self.achieved_sparsity,
            "nnz": self.nnz,
            "row_min": int(self.row_counts.min()),
            "row_max": int(self.row_counts.max()),
            "row_mean": float(self.row_counts.mean()),
            "col_min": int(self.col_counts.min()),
            "col_max": int(self.col_counts.max()),
            "col_mean": float(self.col_counts.mean()),
            "steps_consumed": self.steps_consumed,
            "duplicate_overhead": self.duplicate_overhead,
        }


def mask_stats(mask: Mask) -> MaskStats:
    return MaskStats(
        achieved_sparsity=mask.achieved_sparsity,
        nnz=mask.nnz,
        row_counts=np.bincount(mask.kept_rows, minlength=mask.rows),
        col_counts=np.bincount(mask.kept_cols, minlength=mask.cols),
        steps_consumed=mask.steps_consumed,
    )


def numerical_rank(matrix, tol: float = 1e-8) -> int:
    """Rank by Gaussian elimination with partial pivoting.

    A pivot counts when its magnitude exceeds
    ``tol * max|A| * max(rows, cols)`` (using the input's largest entry).
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("numerical_rank expects a 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    m, n = a.shape
    if a.size == 0:
        return 0
    threshold = tol * np.abs(a).max() * max(m, n)
    rank = 0
    for col in range(n):
        if rank == m:
            break
        pivot = rank + int(np.argmax(np.abs(a[rank:, col])))
        if abs(a[pivot, col]) <= threshold:
            continue
        if pivot != rank:
            a[[rank, pivot]] = a[[pivot, rank]]
        factors = a[rank + 1:, col] / a[rank, col]
        a[rank + 1:, col:] -= np.outer(factors, a[rank, col:])
        rank += 1
    return rank


def rank_trials(rows: int, cols: int, sparsity: float, trials: int = 20, seed: int = 0) -> list[tuple[int, int]]:
    """(dense rank, masked rank) of seeded Gaussian matrices, one pair per trial.

    Trial ``k`` uses Gaussian seed ``seed + k`` and mask seed ``seed + k + 1``.
    """
    out = []
    for k in range(trials):
        w = np.random.default_rng(seed + k).standard_normal((rows, cols))
        mask = generate_mask(rows, cols, sparsity, seed=seed + k + 1)
        out.append((numerical_rank(w), numerical_rank(w * mask.keep_matrix())))
    return out
