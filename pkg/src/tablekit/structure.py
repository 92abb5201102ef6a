"""Recover row/column indices of grouped cells.

Every cell is split into its up, down, left and right edges.  Edges of one
orientation that share a vertex belong to the same grid line.  Lines are
then ordered by the containment relation the cells define (a cell's up line
lies above its down line) and indexed from 0; cells take their spans from
the indices of their bounding lines.

Lines the cells leave unrelated are ordered by a local geometric comparison
in the table's own (deskewed) frame.  Such lines can also be two pieces of
one grid line interrupted by a spanning cell; those share an index.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .annotation import Cell, Table
from .geometry import CellQuad
from .targets import DEFAULT_MERGE_TOL, collect_shared_vertices

HORIZONTAL, VERTICAL = "horizontal", "vertical"

# side -> (corner a, corner b), ordered along the line direction
SIDES = {
    "up": (0, 1),
    "down": (3, 2),
    "left": (0, 3),
    "right": (1, 2),
}
_ORIENT_SIDES = {HORIZONTAL: ("up", "down"), VERTICAL: ("left", "right")}

# fraction of the smallest cell extent under which two unrelated line pieces
# are taken as the same grid line
COINCIDENCE_FRACTION = 0.4


class StructureError(ValueError):
    def __init__(self, message: str, cells: Sequence[int] = ()):
        super().__init__(f"{message} (cells {sorted(cells)})" if cells else message)
        self.cells = sorted(cells)


@dataclass
class ParseCell:
    """A cell ready for parsing: corners plus shared-vertex identities.

    ``vertex_ids[k]`` is the identity of corner k; ``None`` means the corner
    is shared with nobody.
    """

    id: int
    corners: np.ndarray
    vertex_ids: list = field(default_factory=lambda: [None] * 4)

    def vertex_key(self, k: int):
        v = self.vertex_ids[k]
        return ("own", self.id, k) if v is None else ("v", v)


@dataclass
class GridLine:
    orientation: str
    edges: list[tuple[int, str]]
    index: int | None = None


@dataclass
class TableGrid:
    """Logical structure of one table.

    Span invariants are checked on construction: indices are in range and no
    two cells cover the same (row, col) slot.
    """

    table_id: int
    cells: list[Cell]
    n_rows: int
    n_cols: int

    def __post_init__(self):
        seen = {}
        for c in self.cells:
            if not c.has_spans:
                raise StructureError("grid cell without spans", [c.id])
            if not (0 <= c.start_row <= c.end_row < self.n_rows and 0 <= c.start_col <= c.end_col < self.n_cols):
                raise StructureError(f"span {c.spans} outside {self.n_rows}x{self.n_cols} grid", [c.id])
            for r in range(c.start_row, c.end_row + 1):
                for col in range(c.start_col, c.end_col + 1):
                    if (r, col) in seen:
                        raise StructureError(f"slot {(r, col)} covered twice", [seen[(r, col)], c.id])
                    seen[(r, col)] = c.id

    @classmethod
    def from_table(cls, table: Table) -> "TableGrid":
        n_rows = max((c.end_row + 1 for c in table.cells), default=0)
        n_cols = max((c.end_col + 1 for c in table.cells), default=0)
        return cls(table.id, list(table.cells), n_rows, n_cols)

    def slot_owner(self) -> dict[tuple[int, int], int]:
        return {(r, col): c.id for c in self.cells
                for r in range(c.start_row, c.end_row + 1) for col in range(c.start_col, c.end_col + 1)}


def parse_cells_from_quads(quads: Sequence[CellQuad], ids: Sequence[int] | None = None,
                           tol: float = DEFAULT_MERGE_TOL) -> list[ParseCell]:
    """Attach shared-vertex identities to exact (annotated) quads."""
    ids = list(range(len(quads))) if ids is None else list(ids)
    out = [ParseCell(i, q.vertices.copy()) for i, q in zip(ids, quads)]
    for vi, v in enumerate(collect_shared_vertices(list(quads), tol)):
        if len(v.slots) < 2:
            continue
        for cell, k in v.slots.values():
            out[cell].vertex_ids[k] = vi
    return out


def build_lines(cells: Sequence[ParseCell]) -> dict[str, list[GridLine]]:
    """Merge cell edges into unindexed horizontal and vertical lines."""
    result = {}
    for orient, sides in _ORIENT_SIDES.items():
        edges = [(c.id, s) for c in cells for s in sides]
        parent = list(range(len(edges)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        by_cell = {c.id: c for c in cells}
        at_vertex: dict = {}
        for i, (cid, side) in enumerate(edges):
            c = by_cell[cid]
            for k in SIDES[side]:
                at_vertex.setdefault(c.vertex_key(k), []).append(i)
        for idx in at_vertex.values():
            for i in idx[1:]:
                ra, rb = find(idx[0]), find(i)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

        groups: dict[int, list] = {}
        for i, e in enumerate(edges):
            groups.setdefault(find(i), []).append(e)
        lines = [GridLine(orient, members) for members in groups.values()]
        line_of = {e: li for li, ln in enumerate(lines) for e in ln.edges}
        bad = [c.id for c in cells if line_of[(c.id, sides[0])] == line_of[(c.id, sides[1])]]
        if bad:
            raise StructureError(f"opposite {orient} edges of a cell fall on one line", bad)
        result[orient] = lines
    return result


def _table_angle(cells: Sequence[ParseCell]) -> float:
    vec = np.zeros(2)
    for c in cells:
        for a, b in (SIDES["up"], SIDES["down"]):
            vec += c.corners[b] - c.corners[a]
        for a, b in (SIDES["left"], SIDES["right"]):
            d = c.corners[b] - c.corners[a]
            vec += (d[1], -d[0])
    return math.atan2(vec[1], vec[0])


class _LineGeometry:
    """A line's vertices in the deskewed frame as ``along -> across`` samples."""

    def __init__(self, pts: np.ndarray):
        order = np.argsort(pts[:, 0], kind="stable")
        self.along = pts[order, 0]
        self.across = pts[order, 1]
        self.lo, self.hi = float(self.along[0]), float(self.along[-1])

    def at(self, t: float) -> float:
        a, c = self.along, self.across
        if len(a) == 1 or a[-1] - a[0] < 1e-9:
            return float(c.mean())
        if t <= a[0]:
            i, j = 0, int(np.argmax(a > a[0] + 1e-9))
        elif t >= a[-1]:
            j = len(a) - 1
            i = int(np.nonzero(a < a[-1] - 1e-9)[0][-1])
        else:
            return float(np.interp(t, a, c))
        return float(c[i] + (c[j] - c[i]) * (t - a[i]) / (a[j] - a[i]))


def _offset(p: _LineGeometry, q: _LineGeometry) -> float:
    """Across-coordinate of ``q`` minus that of ``p`` where they come closest."""
    lo, hi = max(p.lo, q.lo), min(p.hi, q.hi)
    t = 0.5 * (lo + hi)
    return q.at(t) - p.at(t)


def order_lines(lines: dict[str, list[GridLine]], cells: Sequence[ParseCell]) -> dict[str, list[GridLine]]:
    """Assign dense indices to the lines of each orientation, top/left first."""
    by_cell = {c.id: c for c in cells}
    theta = _table_angle(cells)
    rot = np.array([[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]])

    for orient, sides in _ORIENT_SIDES.items():
        group = lines[orient]
        n = len(group)
        line_of = {e: li for li, ln in enumerate(group) for e in ln.edges}
        succ = [set() for _ in range(n)]
        for c in cells:
            succ[line_of[(c.id, sides[0])]].add(line_of[(c.id, sides[1])])

        indeg = [0] * n
        for s in succ:
            for t in s:
                indeg[t] += 1
        topo, stack, deg = [], [i for i in range(n) if indeg[i] == 0], indeg[:]
        while stack:
            i = stack.pop()
            topo.append(i)
            for t in succ[i]:
                deg[t] -= 1
                if deg[t] == 0:
                    stack.append(t)
        if len(topo) != n:
            stuck = {cid for li in range(n) if deg[li] > 0 for cid, _ in group[li].edges}
            raise StructureError(f"cyclic {orient} line order", stuck)

        geoms = []
        for ln in group:
            pts = np.array([by_cell[cid].corners[k] for cid, side in ln.edges for k in SIDES[side]])
            local = pts @ rot.T
            if orient == VERTICAL:
                local = local[:, ::-1]
            geoms.append(_LineGeometry(local))

        across_extent = []
        for c in cells:
            local = c.corners @ rot.T
            axis = 1 if orient == HORIZONTAL else 0
            a, b = _ORIENT_SIDES[orient]
            ia, ib = SIDES[a], SIDES[b]
            across_extent.append(abs(0.5 * (local[ib[0], axis] + local[ib[1], axis])
                                     - 0.5 * (local[ia[0], axis] + local[ia[1], axis])))
        thresh = COINCIDENCE_FRACTION * min(across_extent)

        def cmp(i, j):
            d = _offset(geoms[i], geoms[j])
            return -1 if d > 0 else (1 if d < 0 else (i > j) - (i < j))

        deg = indeg[:]
        avail = {i for i in range(n) if deg[i] == 0}
        index = 0
        while avail:
            first = sorted(avail, key=functools.cmp_to_key(cmp))[0]
            level = {first}
            grew = True
            while grew:
                grew = False
                for m in sorted(avail - level):
                    if any(abs(_offset(geoms[g], geoms[m])) < thresh for g in level):
                        level.add(m)
                        grew = True
            for i in level:
                group[i].index = index
            avail -= level
            for i in sorted(level):
                for t in succ[i]:
                    deg[t] -= 1
                    if deg[t] == 0:
                        avail.add(t)
            index += 1
    return lines


def assign_rc(cells: Sequence[ParseCell], lines: dict[str, list[GridLine]], table_id: int = 0,
              quads: dict | None = None) -> TableGrid:
    """Spans from line indices: ``start_row`` is the up line, ``end_row`` the down line minus one."""
    idx = {}
    for orient, group in lines.items():
        for ln in group:
            if ln.index is None:
                raise StructureError("unindexed line")
            for e in ln.edges:
                idx[e] = ln.index
    out = []
    for c in cells:
        up, down, left, right = idx[(c.id, "up")], idx[(c.id, "down")], idx[(c.id, "left")], idx[(c.id, "right")]
        if down <= up or right <= left:
            raise StructureError("cell bounded by misordered lines", [c.id])
        quad = quads[c.id] if quads is not None else CellQuad(c.corners)
        out.append(Cell(c.id, quad, up, down - 1, left, right - 1))
    n_rows = max((ln.index for ln in lines[HORIZONTAL]), default=0)
    n_cols = max((ln.index for ln in lines[VERTICAL]), default=0)
    return TableGrid(table_id, out, n_rows, n_cols)


def parse_table(cells: Sequence[ParseCell], table_id: int = 0, quads: dict | None = None) -> TableGrid:
    """build_lines -> order_lines -> assign_rc."""
    if not cells:
        return TableGrid(table_id, [], 0, 0)
    lines = order_lines(build_lines(cells), cells)
    return assign_rc(cells, lines, table_id, quads)
