"""Masks from a pair of registers: balance, replay, and rank.

Run: python demos/02_masks_and_rank.py
"""
import numpy as np

from lfsrprune.masks import generate_mask, mask_stats, rank_trials, replay

mask = generate_mask(300, 100, 0.9, seed=7)
stats = mask_stats(mask)
print(f"{mask.rows}x{mask.cols} at 90%: nnz={stats.nnz}, row cv={stats.row_cv:.3f}, "
      f"steps per kept weight={stats.duplicate_overhead:.3f}")
print("specs:", mask.row_spec, "|", mask.col_spec)

# the specs and the count are all a decoder needs
rows, cols, _ = replay(300, 100, mask.nnz, mask.row_spec, mask.col_spec)
print("replay reproduces the mask:",
      np.array_equal(rows, mask.kept_rows) and np.array_equal(cols, mask.kept_cols))

for shape in ((120, 84), (84, 10)):
    for sp in (0.5, 0.9):
        pairs = rank_trials(*shape, sp, trials=10)
        drop = max(d - m for d, m in pairs)
        print(f"{shape[0]}x{shape[1]} at {sp:.0%}: largest rank drop over 10 trials = {drop}")
