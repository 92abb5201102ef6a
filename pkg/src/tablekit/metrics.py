"""Table evaluation: physical cell P/R/F1 at an IoU threshold, adjacency
relations, structure-only tree-edit-distance similarity and the
IoU-weighted average F1.

Cell matching is greedy by descending IoU (not an optimal assignment); it
only differs from the optimum in contrived near-tie cases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .annotation import Annotation, Cell
from .geometry import quad_iou
from .structure import TableGrid
from .ted import Node, tree_edit_distance

STANDARD_IOUS = (0.6, 0.7, 0.8, 0.9)
HORIZONTAL, VERTICAL = "horizontal", "vertical"


@dataclass(frozen=True, order=True)
class AdjacencyRelation:
    cell_a: int
    cell_b: int
    direction: str

    def __post_init__(self):
        if self.cell_a >= self.cell_b:
            raise ValueError("adjacency relations are stored with cell_a < cell_b")

    @classmethod
    def of(cls, a: int, b: int, direction: str) -> "AdjacencyRelation":
        return cls(min(a, b), max(a, b), direction)


def prf(correct: int, n_pred: int, n_gt: int) -> tuple[float, float, float]:
    """Precision, recall, F1 from counts; empty-vs-empty scores 1."""
    if n_pred == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    p = correct / n_pred if n_pred else 0.0
    r = correct / n_gt if n_gt else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def match_cells(pred: Sequence[Cell], gt: Sequence[Cell], iou_thresh: float) -> dict[int, int]:
    """Greedy one-to-one matching; returns ``{pred id: gt id}``.

    Candidate pairs are taken by descending IoU, ties by (gt id, pred id);
    pairs below ``iou_thresh`` never match.
    """
    if not 0 < iou_thresh <= 1:
        raise ValueError("iou_thresh must lie in (0, 1]")
    cands = []
    if pred and gt:
        pb = np.array([[*c.quad.vertices.min(0), *c.quad.vertices.max(0)] for c in pred])
        gb = np.array([[*c.quad.vertices.min(0), *c.quad.vertices.max(0)] for c in gt])
        overlap = ((pb[:, None, 0] < gb[None, :, 2]) & (gb[None, :, 0] < pb[:, None, 2])
                   & (pb[:, None, 1] < gb[None, :, 3]) & (gb[None, :, 1] < pb[:, None, 3]))
        for i, j in zip(*np.nonzero(overlap)):
            iou = quad_iou(pred[i].quad, gt[j].quad)
            if iou >= iou_thresh:
                cands.append((-iou, gt[j].id, pred[i].id))
    cands.sort()
    out, used = {}, set()
    for _, g, p in cands:
        if p in out or g in used:
            continue
        out[p] = g
        used.add(g)
    return out


def physical_prf(pred: Sequence[Cell], gt: Sequence[Cell], iou_thresh: float = 0.9):
    return prf(len(match_cells(pred, gt, iou_thresh)), len(pred), len(gt))


def adjacency_relations(grid: TableGrid) -> set[AdjacencyRelation]:
    """Immediate horizontal and vertical neighbors in index space."""
    rels = set()
    cells = grid.cells
    for a in cells:
        for b in cells:
            if a.id == b.id:
                continue
            rows_overlap = a.start_row <= b.end_row and b.start_row <= a.end_row
            cols_overlap = a.start_col <= b.end_col and b.start_col <= a.end_col
            if a.end_col + 1 == b.start_col and rows_overlap:
                rels.add(AdjacencyRelation.of(a.id, b.id, HORIZONTAL))
            if a.end_row + 1 == b.start_row and cols_overlap:
                rels.add(AdjacencyRelation.of(a.id, b.id, VERTICAL))
    return rels


def _relations(grids: Sequence[TableGrid]) -> set[AdjacencyRelation]:
    out = set()
    for g in grids:
        out |= adjacency_relations(g)
    return out


def adjacency_counts(pred: Sequence[TableGrid], gt: Sequence[TableGrid], iou: float = 0.6):
    """``(correct, n_pred_relations, n_gt_relations)`` over all tables of an image."""
    mapping = match_cells([c for g in pred for c in g.cells], [c for g in gt for c in g.cells], iou)
    pred_rels, gt_rels = _relations(pred), _relations(gt)
    correct = 0
    for r in pred_rels:
        if r.cell_a in mapping and r.cell_b in mapping:
            if AdjacencyRelation.of(mapping[r.cell_a], mapping[r.cell_b], r.direction) in gt_rels:
                correct += 1
    return correct, len(pred_rels), len(gt_rels)


def adjacency_prf(pred: Sequence[TableGrid], gt: Sequence[TableGrid], iou: float = 0.6):
    """Adjacency-relation P/R/F1; a predicted relation counts when both cells
    match ground-truth cells at ``iou`` and the mapped relation exists."""
    if isinstance(pred, TableGrid):
        pred = [pred]
    if isinstance(gt, TableGrid):
        gt = [gt]
    return prf(*adjacency_counts(pred, gt, iou))


def tree_from_grid(grid: TableGrid) -> Node:
    """``table -> row* -> cell(row_span, col_span)*``; one row node per row index."""
    root = Node(("table",))
    rows = [Node(("row",)) for _ in range(grid.n_rows)]
    for c in sorted(grid.cells, key=lambda c: (c.start_row, c.start_col)):
        rows[c.start_row].add(Node(("cell", c.row_span, c.col_span)))
    root.children = rows
    return root


def teds(a: Node, b: Node) -> float:
    """Structure-only tree-edit-distance similarity in [0, 1].

    The unit-cost distance can exceed the larger tree's size when shapes
    disagree badly, so the score is floored at 0.
    """
    n = max(a.size(), b.size())
    return max(0.0, 1.0 - tree_edit_distance(a, b) / n)


def weighted_avg_f1(f1s: Sequence[float], ious: Sequence[float] = STANDARD_IOUS) -> float:
    """Average of per-threshold F1 weighted by the IoU threshold itself."""
    if len(f1s) != len(ious):
        raise ValueError("need one F1 per IoU threshold")
    return float(sum(t * f for t, f in zip(ious, f1s)) / sum(ious))


# --------------------------------------------------------------------------
# image-level evaluation

def grids_of(a: Annotation) -> list[TableGrid]:
    """Tables with complete spans as grids; tables without spans are skipped."""
    return [TableGrid.from_table(t) for t in a.tables if t.cells and all(c.has_spans for c in t.cells)]


def pair_tables(pred: Sequence[TableGrid], gt: Sequence[TableGrid], iou: float = 0.6) -> dict[int, int | None]:
    """Map each ground-truth table (by position) to the predicted table sharing most matched cells."""
    mapping = match_cells([c for g in pred for c in g.cells], [c for g in gt for c in g.cells], iou)
    table_of_pred = {c.id: ti for ti, g in enumerate(pred) for c in g.cells}
    out = {}
    for gi, g in enumerate(gt):
        ids = {c.id for c in g.cells}
        votes: dict[int, int] = {}
        for p, gid in mapping.items():
            if gid in ids:
                votes[table_of_pred[p]] = votes.get(table_of_pred[p], 0) + 1
        out[gi] = max(votes, key=lambda t: (votes[t], -t)) if votes else None
    return out


def table_teds(pred: Sequence[TableGrid], gt: Sequence[TableGrid], iou: float = 0.6) -> list[float]:
    """TEDS per ground-truth table against its paired prediction (0 when unpaired)."""
    pairs = pair_tables(pred, gt, iou)
    return [teds(tree_from_grid(pred[p]), tree_from_grid(g)) if p is not None else 0.0
            for g, p in zip(gt, (pairs[i] for i in range(len(gt))))]


@dataclass
class ImageEval:
    name: str
    physical: dict  # iou -> (matches, n_pred, n_gt)
    adjacency: dict  # iou -> (correct, n_pred, n_gt)
    teds: float | None


@dataclass
class EvalReport:
    ious: tuple
    physical: dict  # iou -> (P, R, F1)
    adjacency: dict
    teds: float | None
    weighted_avg_f1: float | None
    images: list[ImageEval] = field(default_factory=list)


def evaluate_image(pred: Annotation, gt: Annotation, ious: Sequence[float] = STANDARD_IOUS,
                   metrics: Sequence[str] = ("physical", "adjacency", "teds"), name: str = "") -> ImageEval:
    pc, gc = pred.cells, gt.cells
    pg, gg = grids_of(pred), grids_of(gt)
    phys = {t: (len(match_cells(pc, gc, t)), len(pc), len(gc)) for t in ious} if "physical" in metrics else {}
    adj = {t: adjacency_counts(pg, gg, t) for t in ious} if "adjacency" in metrics else {}
    score = None
    if "teds" in metrics:
        per = table_teds(pg, gg)
        score = float(np.mean(per)) if per else (1.0 if not pg else 0.0)
    return ImageEval(name, phys, adj, score)


def aggregate(images: Sequence[ImageEval], ious: Sequence[float] = STANDARD_IOUS) -> EvalReport:
    """Micro-averaged P/R/F1 over all images; TEDS is the mean over images."""
    def fold(attr):
        out = {}
        for t in ious:
            rows = [getattr(im, attr)[t] for im in images if t in getattr(im, attr)]
            if rows:
                out[t] = prf(*np.sum(rows, axis=0).tolist())
        return out

    phys, adj = fold("physical"), fold("adjacency")
    scores = [im.teds for im in images if im.teds is not None]
    wavg = None
    if adj and all(t in adj for t in ious):
        wavg = weighted_avg_f1([adj[t][2] for t in ious], ious)
    return EvalReport(tuple(ious), phys, adj, float(np.mean(scores)) if scores else None, wavg, list(images))
