"""Structured pruning with LFSR-generated masks.

The kept weight positions of every layer come from a pair of linear feedback
shift registers, so a sparse layer stores only its values plus two register
specs. The package also carries a small numpy MLP for the
regularize-prune-retrain flow, a relative-index (S/I/P) baseline codec,
access-counting kernels and an energy proxy.
"""
from .codec import (BaselineCompressed, CodecError, LfsrSparseLayer, decode_baseline, decode_lfsr,
                    encode_baseline, encode_lfsr, footprint)
from .cost import CostTable, compare, energy
from .data import Dataset, DataFormatError, gen_synthetic, load_mnist, parse_idx
from .kernels import AccessTrace, baseline_sparse_matvec, dense_matvec, lfsr_sparse_matvec
from .lfsr import (InvalidSpecError, LfsrSpec, LfsrState, LockupError, default_spec, is_maximal, map_to_index,
                   period, sequence, step, validate_spec)
from .masks import Mask, MaskExhaustedError, generate_mask, mask_stats, numerical_rank
from .tinynet import ConfigError, Layer, Model, TrainConfig, init_model, run_pipeline

__version__ = "0.1.0"
