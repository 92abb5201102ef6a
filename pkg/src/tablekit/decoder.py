"""Decode predicted maps into cells grouped into tables.

Cells come from center peaks plus the center-to-vertex offsets.  A cell
corner is tied to a vertex peak only when both branches agree: the corner
lands near the vertex, and one of the vertex's center offsets lands near the
cell center.  Cells tied through a common vertex belong to the same table.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import is_convex_clockwise

logger = logging.getLogger(__name__)

CENTER, VERTEX = "center", "vertex"


@dataclass(frozen=True)
class Peak:
    x: float
    y: float
    score: float
    kind: str
    pixel: tuple[int, int]  # (col, row) on the map

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class DecodedCell:
    id: int
    center: Peak
    corners: np.ndarray  # (4, 2) image px, corner order TL, TR, BR, BL
    vertex_ids: list = field(default_factory=lambda: [None] * 4)


@dataclass
class CellGroup:
    table_id: int
    cell_ids: list[int]
    vertex_ids: list[int]


@dataclass(frozen=True)
class DecodeConfig:
    center_threshold: float = 0.3
    vertex_threshold: float = 0.3
    max_peaks: int = 2000
    tau: float | None = None  # None -> 0.75 * stride
    mutual: bool = True

    def tau_for(self, stride: int) -> float:
        return 0.75 * stride if self.tau is None else self.tau


def extract_peaks(plane, offset_map, stride: int, threshold: float, max_peaks: int = 2000,
                  kind: str = CENTER) -> list[Peak]:
    """Strict 3x3 local maxima scoring at least ``threshold``, best first.

    Position is ``(pixel + offset) * stride`` in image pixels.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    plane = np.asarray(plane, dtype=float)
    ring = np.ones((3, 3), bool)
    ring[1, 1] = False
    neigh = maximum_filter(plane, footprint=ring, mode="constant", cval=-np.inf)
    ys, xs = np.nonzero((plane > neigh) & (plane >= threshold))
    scores = plane[ys, xs]
    order = np.lexsort((xs, ys, -scores))[:max_peaks]
    out = []
    for i in order:
        y, x = int(ys[i]), int(xs[i])
        dx, dy = offset_map[0, y, x], offset_map[1, y, x]
        out.append(Peak(float((x + dx) * stride), float((y + dy) * stride), float(scores[i]), kind, (x, y)))
    return out


def decode_cells(center_peaks: list[Peak], cv_map, stride: int) -> list[DecodedCell]:
    """Corner k of each cell is the center minus the k-th offset pair times ``stride``.

    Cells whose corners do not form a convex clockwise quad are dropped.
    Surviving cells are numbered consecutively in peak order.
    """
    cells = []
    for peak in center_peaks:
        x, y = peak.pixel
        d = np.asarray(cv_map[:, y, x], dtype=float).reshape(4, 2)
        corners = peak.position[None, :] - d * stride
        if not is_convex_clockwise(corners):
            logger.info("dropping cell at (%.1f, %.1f): corners not a convex quad", peak.x, peak.y)
            continue
        cells.append(DecodedCell(len(cells), peak, corners))
    return cells


def cycle_match(cells: list[DecodedCell], vertex_peaks: list[Peak], vc_map, stride: int, tau: float,
                mutual: bool = True) -> list[tuple[int, int, int]]:
    """Match cell corners to vertex peaks; returns ``(cell id, corner k, vertex index)``.

    A pair is accepted when the corner lies within ``tau`` of the vertex and
    some vertex-to-center slot points within ``tau`` of the cell center.
    With ``mutual=False`` either condition suffices.  Among acceptable
    vertices the nearest wins, ties going to the higher score and then the
    lower vertex index.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    if not cells or not vertex_peaks:
        return []
    vpos = np.array([[p.x, p.y] for p in vertex_peaks])
    vscore = np.array([p.score for p in vertex_peaks])
    # where each vertex's 4 slots point, (n_vertices, 4, 2)
    pointed = np.stack([
        p.position - np.asarray(vc_map[:, p.pixel[1], p.pixel[0]], dtype=float).reshape(4, 2) * stride
        for p in vertex_peaks
    ])

    matches = []
    for cell in cells:
        back = np.linalg.norm(pointed - cell.center.position, axis=2).min(axis=1) <= tau
        for k in range(4):
            dist = np.linalg.norm(vpos - cell.corners[k], axis=1)
            near = dist <= tau
            ok = (near & back) if mutual else (near | back)
            cand = np.nonzero(ok)[0]
            if len(cand) == 0:
                continue
            best = min(cand, key=lambda v: (dist[v], -vscore[v], v))
            matches.append((cell.id, k, int(best)))
    return matches


def group_and_snap(cells: list[DecodedCell], matches: list[tuple[int, int, int]]):
    """Group cells that share a matched vertex and snap shared corners together.

    Every corner matched to a vertex moves to the mean of all corners matched
    to that vertex.  Returns ``(groups, cells)`` with new :class:`DecodedCell`
    objects; groups are numbered by the top-left-most cell center.
    """
    by_id = {c.id: i for i, c in enumerate(cells)}
    new_cells = [DecodedCell(c.id, c.center, c.corners.copy(), [None] * 4) for c in cells]
    members: dict[int, list[tuple[int, int]]] = {}
    for cid, k, v in matches:
        members.setdefault(v, []).append((by_id[cid], k))
    for v, pts in members.items():
        ref = cells[pts[0][0]].corners[pts[0][1]]
        offsets = np.array([cells[i].corners[k] - ref for i, k in pts])
        snapped = ref + offsets.mean(axis=0)
        for i, k in pts:
            new_cells[i].corners[k] = snapped
            new_cells[i].vertex_ids[k] = v

    n = len(cells)
    rows, cols = [], []
    for pts in members.values():
        for i, _ in pts[1:]:
            rows.append(pts[0][0])
            cols.append(i)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)

    comps: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        comps.setdefault(int(lab), []).append(i)

    def anchor(idx):
        return min(tuple(new_cells[i].center.position[::-1]) for i in idx)

    groups = []
    for tid, idx in enumerate(sorted(comps.values(), key=anchor)):
        vids = sorted({v for i in idx for v in new_cells[i].vertex_ids if v is not None})
        groups.append(CellGroup(tid, sorted(new_cells[i].id for i in idx), vids))
    return groups, new_cells
