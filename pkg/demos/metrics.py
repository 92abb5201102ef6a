"""Physical, adjacency and tree-edit scores for a slightly wrong prediction.

Run: python demos/metrics.py
"""
from tablekit.annotation import Annotation, Cell, Table
from tablekit.geometry import CellQuad
from tablekit.metrics import aggregate, evaluate_image, tree_from_grid, grids_of

# ground truth: a 2x3 grid
gt_cells = [Cell(r * 3 + c, CellQuad.from_box(20 + 50 * c, 20 + 30 * r, 70 + 50 * c, 50 + 30 * r), r, r, c, c)
            for r in range(2) for c in range(3)]
gt = Annotation((200, 100), [Table(0, gt_cells)])

# prediction: the two right cells of the top row were merged, one box is loose
pred_cells = [
    Cell(0, CellQuad.from_box(20, 20, 70, 50), 0, 0, 0, 0),
    Cell(1, CellQuad.from_box(70, 20, 170, 50), 0, 0, 1, 2),
    Cell(2, CellQuad.from_box(20, 50, 70, 80), 1, 1, 0, 0),
    Cell(3, CellQuad.from_box(70, 50, 120, 80), 1, 1, 1, 1),
    Cell(4, CellQuad.from_box(122, 52, 172, 84), 1, 1, 2, 2),
]
pred = Annotation((200, 100), [Table(0, pred_cells)])

rep = aggregate([evaluate_image(pred, gt)])
for t in rep.ious:
    p, r, f = rep.physical[t]
    ap, ar, af = rep.adjacency[t]
    print(f"IoU {t}: physical P/R/F1 {p:.2f}/{r:.2f}/{f:.2f}   adjacency {ap:.2f}/{ar:.2f}/{af:.2f}")
print(f"TEDS {rep.teds:.4f}, weighted-average adjacency F1 {rep.weighted_avg_f1:.4f}")

# the structure trees behind TEDS
def show(node, depth=0):
    print("  " * depth + " ".join(map(str, node.label)))
    for ch in node.children:
        show(ch, depth + 1)

show(tree_from_grid(grids_of(pred)[0]))
