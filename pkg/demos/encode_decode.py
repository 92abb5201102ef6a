"""Encode a synthetic table into dense target maps and decode it back.

Run: python demos/encode_decode.py
"""
import numpy as np

from tablekit.geometry import Deformation
from tablekit.pipeline import decode_maps
from tablekit.synthgen import SynthConfig, generate_table, table_bounds
from tablekit.targets import TargetMaps, encode_annotation

# a 5x4 table with a couple of merged cells, tilted by 8 degrees
base = generate_table(SynthConfig(rows=5, cols=4, merge_prob=0.25, seed=11))
x0, y0, x1, y1 = table_bounds(base)
cfg = SynthConfig(rows=5, cols=4, merge_prob=0.25, seed=11,
                  deformation=Deformation.rotation(8, ((x0 + x1) / 2, (y0 + y1) / 2)))
gt = generate_table(cfg)
print("ground truth:", len(gt.cells), "cells, image", gt.image_size)

# stride 4 maps: 2 heatmaps, 2 offsets, 8 center->vertex, 8 vertex->center, masks
maps = encode_annotation(gt, stride=4)
print("map size", (maps.height, maps.width), "planes", maps.planes().shape[0])
print("centers", int(maps.cv_mask.sum()), "vertex pixels", int((maps.vc_mask.sum(0) > 0).sum()),
      "center/vertex pairs", len(maps.pairs))

# through the binary container, as a network's output would arrive
blob = maps.to_bytes()
print("binary size", len(blob), "bytes")
maps = TargetMaps.from_bytes(blob)

decoded = decode_maps(maps, image_size=gt.image_size)
pred = decoded.annotation
print("decoded:", len(pred.tables), "table(s),", len(pred.cells), "cells")

by_span = {c.spans: c for c in gt.cells}
err = max(np.abs(c.quad.vertices - by_span[c.spans].quad.vertices).max() for c in pred.cells)
print("all spans recovered:", {c.spans for c in pred.cells} == set(by_span))
print(f"worst corner error {err:.4f} px")
