"""Bandwidth model next to a measured host throughput.

The model counts bytes per cell update (19 populations read and written
plus two flags) and divides the device bandwidth by it.
"""
from dolb.bridge import mirror_to_accelerated
from dolb.cases import CaseConfig, init_tgv
from dolb.perfmodel import (
    A100, bytes_per_cell, max_L, measure_mlups, memory_fraction, peak_glups, scaling_sizes,
)

for bits in (32, 64):
    print(f"{bits}-bit: {bytes_per_cell(bits)} B/cell, A100 peak {peak_glups(A100, bits):.3f} GLUPS, "
          f"L=500 uses {memory_fraction(A100, bits, 500):.2%}, largest L {max_L(A100, bits)}")
print("weak scaling sizes  ", scaling_sizes(590, 4, "weak"))
print("strong scaling sizes", scaling_sizes(590, 4, "strong"))

cfg = CaseConfig(kind="tgv", L=64, collision="bgk")
lat = mirror_to_accelerated(init_tgv(64, 0.2, cfg))
rep = measure_mlups(lat.run, lat.n_cells, warmup=2, steps=10)
print(f"this machine, TGV 64^3 BGK: {rep.mlups:.2f} MLUPS "
      f"(repetitions {', '.join(f'{r:.2f}' for r in rep.repetitions)})")
