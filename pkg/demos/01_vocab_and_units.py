"""Unified vocabulary + k-means unit extraction on toy features.

The id line is [text | 2 specials | units]. We fit a small codebook with
seeded k-means and quantize frames into unit ids that live in the unit
region of the vocabulary.
"""
import numpy as np

from unitweave import build_layout, fit_kmeans, modality_of, quantize, unit_to_id
from unitweave.vocab import layout_hash

layout = build_layout(text_size=100, unit_count=10000)
print("correspond id:", layout.correspond_id)        # 100
print("continue id:  ", layout.continue_id)          # 101
print("unit 0 id:    ", unit_to_id(layout, 0))       # 102
print("highest id:   ", layout.total_size - 1)       # 10101
print("layout hash:  ", f"{layout_hash(layout):016x}")

# four 1-D "frames" in two obvious clumps
frames = np.array([[0.0], [1.0], [9.0], [10.0]])
codebook = fit_kmeans(frames, k=2, seed=1)
print("centroids:", sorted(codebook.centroids[:, 0].tolist()))  # [0.5, 9.5]
print("inertia per iteration:", [round(x, 3) for x in codebook.inertia_history])

units = quantize(frames, codebook)
print("units:", units.tolist())  # [0, 0, 1, 1]
ids = [unit_to_id(build_layout(100, 2), int(u)) for u in units]
print("as token ids:", ids, "->", [modality_of(build_layout(100, 2), i) for i in ids])
