"""A 4-bit register, its period, and how a state becomes an index.

Run: python demos/01_lfsr_basics.py
"""
from lfsrprune.lfsr import DEFAULT_TAPS, LfsrSpec, is_maximal, map_to_index, period, sequence

spec = LfsrSpec.parse("w=4,taps=4+3,seed=0x1")
states = sequence(spec, 16)
print("states:", [f"{s:04b}" for s in states])
print("period:", period(spec))

# x^4 + x^2 + 1 factors, so it cycles early
bad = LfsrSpec(4, (4, 2), 1)
print("taps 4+2 period:", period(bad), "maximal:", is_maximal(4, (4, 2)))

# the top bits of state * n pick an index in [0, n)
print("indices into 10 rows:", map_to_index(states[:15], 10, 4).tolist())

print("default taps are maximal for every width:",
      all(is_maximal(w, taps) for w, taps in DEFAULT_TAPS.items()))
