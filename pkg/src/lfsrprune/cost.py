"""Energy-proxy and storage comparison between the LFSR and S/I/P designs.

The proxy is linear in the access-trace counters:

* weight, index and pointer memory reads are SRAM reads, priced per 32-bit
  word and scaled by the bits actually read (8-bit weight = 1/4 word);
* input/output buffer accesses go to small register-file buffers and are
  priced as ``register_op``;
* MACs as ``mac``, register steps as ``lfsr_step``.

``dram_read`` and ``bank_bytes`` are carried for reporting only.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .codec import encode_baseline, encode_lfsr, footprint, synthetic_sparse_layer
from .kernels import AccessTrace, baseline_sparse_matvec, lfsr_sparse_matvec
from .masks import generate_mask

WORD_BITS = 32
POINTER_BITS = 32


@dataclass(frozen=True)
class CostTable:
    """Per-operation energies in picojoules."""

    sram_read: float = 5.0  # 32-bit word, assumed; not given by the source
    sram_write: float = 5.0
    dram_read: float = 640.0  # 32-bit DRAM access, 45 nm
    mac: float = 0.9  # 32-bit float add, 45 nm
    register_op: float = 0.1
    lfsr_step: float = 0.1  # a few flip-flops and XORs: same as register_op
    bank_bytes: int = 1024

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def scaled(self, k: float) -> "CostTable":
        vals = {f.name: getattr(self, f.name) * k for f in fields(self) if f.name != "bank_bytes"}
        return CostTable(**vals, bank_bytes=self.bank_bytes)

    @classmethod
    def parse(cls, text: str) -> "CostTable":
        """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
        known = {f.name: f.type for f in fields(cls)}
        values = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ValueError(f"line {n}: unknown key {key!r}")
            values[key] = int(value) if key == "bank_bytes" else float(value)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "CostTable":
        return cls.parse(Path(path).read_text())

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


def energy_breakdown(trace: AccessTrace, table: CostTable) -> dict:
    word = table.sram_read / WORD_BITS
    return {
        "weight_mem_reads": trace.weight_mem_reads * word * trace.value_bits,
        "index_mem_reads": trace.index_mem_reads * word * trace.index_bits,
        "pointer_mem_reads": trace.pointer_mem_reads * word * POINTER_BITS,
        "input_buffer_reads": trace.input_buffer_reads * table.register_op,
        "output_buffer_reads": trace.output_buffer_reads * table.register_op,
        "output_buffer_writes": trace.output_buffer_writes * table.register_op,
        "mac_ops": trace.mac_ops * table.mac,
        "lfsr_steps": trace.lfsr_steps * table.lfsr_step,
    }


def energy(trace: AccessTrace, table: CostTable = CostTable()) -> float:
    """Energy proxy in picojoules."""
    return float(sum(energy_breakdown(trace, table).values()))


@dataclass
class CostReport:
    proposed_energy: float
    baseline_energy: float
    proposed_breakdown: dict
    baseline_breakdown: dict
    proposed_bits: int
    baseline_bits: int

    @property
    def energy_saving_percent(self) -> float:
        return 100.0 * (self.baseline_energy - self.proposed_energy) / self.baseline_energy

    @property
    def footprint_saving_percent(self) -> float:
        return 100.0 * (self.baseline_bits - self.proposed_bits) / self.baseline_bits

    @property
    def footprint_ratio(self) -> float:
        return self.baseline_bits / self.proposed_bits


def compare(proposed: tuple[AccessTrace, int], baseline: tuple[AccessTrace, int],
            table: CostTable = CostTable()) -> CostReport:
    """Each side is ``(trace, footprint_bits)``."""
    (p_trace, p_bits), (b_trace, b_bits) = proposed, baseline
    p_break, b_break = energy_breakdown(p_trace, table), energy_breakdown(b_trace, table)
    b_energy = float(sum(b_break.values()))
    if b_energy == 0 or b_bits == 0:
        raise ValueError("baseline totals are zero; savings are undefined")
    return CostReport(float(sum(p_break.values())), b_energy, p_break, b_break, p_bits, b_bits)


GRID_COLUMNS = (
    "rows", "cols", "sparsity", "index_bits", "value_bits", "nnz", "alpha", "steps_consumed",
    "proposed_bits", "baseline_bits", "footprint_ratio", "footprint_saving_percent",
    "proposed_energy_pj", "baseline_energy_pj", "energy_saving_percent",
)


def grid_point(rows: int, cols: int, sparsity: float, index_bits: int, value_bits: int = 8,
               table: CostTable = CostTable(), seed: int = 1) -> dict:
    """Build one seeded layer, encode it both ways, run both kernels and compare."""
    mask = generate_mask(rows, cols, sparsity, seed=seed)
    layer = synthetic_sparse_layer(mask, seed=seed)
    proposed = encode_lfsr(layer, value_bits)
    base = encode_baseline(layer, index_bits, value_bits)
    x = np.random.default_rng(seed).standard_normal(rows)
    _, p_trace = lfsr_sparse_matvec(proposed, x)
    _, b_trace = baseline_sparse_matvec(base, layer.bias, x)
    fp = footprint(proposed, base)
    report = compare((p_trace, fp.proposed_bits), (b_trace, fp.baseline_bits), table)
    return {
        "rows": rows,
        "cols": cols,
        "sparsity": sparsity,
        "index_bits": index_bits,
        "value_bits": value_bits,
        "nnz": mask.nnz,
        "alpha": base.alpha,
        "steps_consumed": mask.steps_consumed,
        "proposed_bits": fp.proposed_bits,
        "baseline_bits": fp.baseline_bits,
        "footprint_ratio": fp.ratio,
        "footprint_saving_percent": fp.saving_percent,
        "proposed_energy_pj": report.proposed_energy,
        "baseline_energy_pj": report.baseline_energy,
        "energy_saving_percent": report.energy_saving_percent,
    }


def run_grid(shapes, sparsities, index_bits_list, value_bits: int = 8, table: CostTable = CostTable(),
             seed: int = 1) -> list[dict]:
    return [
        grid_point(r, c, sp, ib, value_bits, table, seed)
        for (r, c) in shapes
        for sp in sparsities
        for ib in index_bits_list
    ]


def write_csv(rows: list[dict], path, columns=GRID_COLUMNS):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def format_table(rows: list[dict], value: str = "energy_saving_percent", fmt: str = "{:.2f}") -> str:
    """Aligned text table: one block per layer shape, sparsity rows x index-width columns."""
    shapes = sorted({(r["rows"], r["cols"]) for r in rows}, key=lambda s: s[0] * s[1])
    bits = sorted({r["index_bits"] for r in rows})
    sps = sorted({r["sparsity"] for r in rows})
    lookup = {(r["rows"], r["cols"], r["sparsity"], r["index_bits"]): r[value] for r in rows}
    head = ["sparsity"] + [f"{r}x{c} {b}b" for (r, c) in shapes for b in bits]
    body = []
    for sp in sps:
        cells = [f"{100 * sp:.0f}%"]
        for (r, c) in shapes:
            for b in bits:
                v = lookup.get((r, c, sp, b))
                cells.append("-" if v is None else fmt.format(v))
        body.append(cells)
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    line = lambda cells: " | ".join(cell.rjust(w) for cell, w in zip(cells, widths))  # noqa: E731
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([f"{value}", line(head), sep] + [line(row) for row in body]) + "\n"
