"""Storage and energy: register specs versus relative-index S/I/P.

Run: python demos/04_formats_and_energy.py
"""
import numpy as np

from lfsrprune import container
from lfsrprune.codec import decode_baseline, decode_lfsr, encode_baseline, encode_lfsr, footprint, \
    synthetic_sparse_layer
from lfsrprune.cost import run_grid, format_table
from lfsrprune.kernels import baseline_sparse_matvec, lfsr_sparse_matvec
from lfsrprune.masks import generate_mask

layer = synthetic_sparse_layer(generate_mask(300, 100, 0.9, seed=1), seed=1)
prop, base = encode_lfsr(layer, 8), encode_baseline(layer, 4, 8)
fp = footprint(prop, base)
print(f"300x100 at 90%, 8-bit values: lfsr {fp.proposed_bits} bits, S/I/P {fp.baseline_bits} bits, "
      f"ratio {fp.ratio:.2f}")
print("both decode to the same matrix:", np.array_equal(decode_lfsr(prop).weights, decode_baseline(base).weights))

x = np.random.default_rng(0).standard_normal(300)
_, t_lfsr = lfsr_sparse_matvec(prop, x)
_, t_base = baseline_sparse_matvec(base, None, x)
print(f"index reads: lfsr {t_lfsr.index_mem_reads}, S/I/P {t_base.index_mem_reads}")

blob = container.dumps([prop])
print(f"container: {len(blob)} bytes, round-trip exact: {container.dumps(container.loads(blob)) == blob}")

rows = run_grid([(300, 100), (400, 120)], (0.4, 0.7, 0.95), (4, 8))
print()
print(format_table(rows))
print()
print(format_table(rows, "footprint_ratio"))
