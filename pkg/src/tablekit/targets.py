"""Ground-truth target maps: keypoint heatmaps, sub-pixel offsets and the
center-to-vertex / vertex-to-center offset planes.

Map-scale coordinates are image coordinates divided by the stride.  A
keypoint lives at the map pixel ``floor(coord + 0.5)``.

Plane layout (all ``float32``, shape ``(channels, height, width)``):

========================  ========  ===========================================
field                     channels  content
========================  ========  ===========================================
``keypoint_heatmap``      2         0 = cell centers, 1 = shared vertices
``offset_map``            2         sub-pixel (dx, dy), shared by both classes
``cv_map``                8         center minus corner k, channels (2k, 2k+1)
``vc_map``                8         vertex minus center of incident slot j
``cv_mask``               1         1 at annotated center pixels
``vc_mask``               4         1 per filled incident-cell slot
========================  ========  ===========================================

Vertex slots are ordered by where the incident cell lies relative to the
vertex: up-left, up-right, down-left, down-right.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import CellQuad

MAGIC = b"CCTM"
FORMAT_VERSION = 1
PLANE_FIELDS = (
    ("keypoint_heatmap", 2),
    ("offset_map", 2),
    ("cv_map", 8),
    ("vc_map", 8),
    ("cv_mask", 1),
    ("vc_mask", 4),
)
N_PLANES = sum(n for _, n in PLANE_FIELDS)

# corner index k of a cell -> vertex slot the cell occupies at that corner.
# A vertex that is the cell's bottom-right corner sees the cell up-left of it.
CORNER_TO_SLOT = (3, 2, 0, 1)
SLOT_TO_CORNER = tuple(CORNER_TO_SLOT.index(j) for j in range(4))

DEFAULT_MERGE_TOL = 3.0


class EncodingError(ValueError):
    pass


@dataclass
class SharedVertex:
    """A table vertex together with the cells meeting there.

    ``slots`` maps vertex slot (0..3) to ``(cell id, corner index)``.
    """

    position: tuple[float, float]
    slots: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def incident_cells(self) -> list[tuple[int, int]]:
        return [self.slots[j] for j in sorted(self.slots)]


def collect_shared_vertices(cells: Sequence[CellQuad], tol: float = DEFAULT_MERGE_TOL) -> list[SharedVertex]:
    """Merge cell corners lying within ``tol`` pixels of each other.

    Returns vertices in order of their first corner (cell order, then corner
    order).  Raises :class:`EncodingError` if more than 4 corners merge, or if
    two merged corners claim the same slot.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if not cells:
        return []
    corners = np.concatenate([c.vertices for c in cells])
    n = len(corners)
    if tol == 0:
        _, inv = np.unique(corners, axis=0, return_inverse=True)
        labels = inv.ravel()
    else:
        pairs = cKDTree(corners).query_pairs(tol, output_type="ndarray")
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)

    order: dict[int, list[int]] = {}
    for idx, lab in enumerate(labels):
        order.setdefault(int(lab), []).append(idx)

    out = []
    for members in order.values():
        if len(members) > 4:
            raise EncodingError(f"{len(members)} corners merge into one vertex near {corners[members[0]].tolist()}")
        v = SharedVertex(position=tuple(float(t) for t in corners[members].mean(axis=0)))
        for idx in members:
            cell, k = divmod(idx, 4)
            slot = CORNER_TO_SLOT[k]
            if slot in v.slots:
                raise EncodingError(
                    f"cells {v.slots[slot][0]} and {cell} both occupy slot {slot} at vertex {v.position}")
            v.slots[slot] = (cell, k)
        out.append(v)
    return out


def keypoint_pixel(x: float, y: float) -> tuple[int, int]:
    """Map-scale coordinate -> (col, row) of the pixel holding it (round half up)."""
    return int(math.floor(x + 0.5)), int(math.floor(y + 0.5))


def splat_gaussian(plane: np.ndarray, center, radius: float) -> np.ndarray:
    """Draw a Gaussian peak into ``plane`` in place, keeping the elementwise max.

    The peak sits at the rounded ``center`` (map-scale ``(x, y)``) with value
    exactly 1 and ``sigma = radius / 3``.  Contributions outside the plane
    are clipped.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    cx, cy = keypoint_pixel(*center)
    sigma = radius / 3.0
    r = int(math.ceil(radius))
    h, w = plane.shape
    x0, x1 = max(cx - r, 0), min(cx + r + 1, w)
    y0, y1 = max(cy - r, 0), min(cy + r + 1, h)
    if x0 >= x1 or y0 >= y1:
        return plane
    ys, xs = np.ogrid[y0:y1, x0:x1]
    g = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma * sigma))
    np.maximum(plane[y0:y1, x0:x1], g.astype(plane.dtype), out=plane[y0:y1, x0:x1])
    return plane


@dataclass
class TargetMaps:
    """Dense per-pixel planes for one image (see module docstring for layout).

    ``pairs`` lists the supervised center/vertex pairs as rows
    ``(center_row, center_col, corner_k, vertex_row, vertex_col, slot_j)``.
    It is derived data: :func:`encode_targets` fills it directly and
    :meth:`from_bytes` reconstructs it from the planes.
    """

    stride: int
    keypoint_heatmap: np.ndarray
    offset_map: np.ndarray
    cv_map: np.ndarray
    vc_map: np.ndarray
    cv_mask: np.ndarray
    vc_mask: np.ndarray
    pairs: np.ndarray | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.keypoint_heatmap.shape[1]

    @property
    def width(self) -> int:
        return self.keypoint_heatmap.shape[2]

    @classmethod
    def zeros(cls, height: int, width: int, stride: int) -> "TargetMaps":
        planes = {name: np.zeros((n, height, width), dtype=np.float32) for name, n in PLANE_FIELDS}
        return cls(stride=stride, **planes)

    def planes(self) -> np.ndarray:
        return np.concatenate([getattr(self, name) for name, _ in PLANE_FIELDS])

    @property
    def keypoint_mask(self) -> np.ndarray:
        """Pixels carrying an offset target (any center or vertex)."""
        return (self.cv_mask[0] > 0) | (self.vc_mask.max(axis=0) > 0)

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack("<HHII", FORMAT_VERSION, self.stride, self.height, self.width)
        return header + self.planes().astype("<f4").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "TargetMaps":
        if data[:4] != MAGIC:
            raise ValueError("not a TargetMaps file (bad magic)")
        version, stride, h, w = struct.unpack_from("<HHII", data, 4)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported TargetMaps version {version}")
        body = np.frombuffer(data, dtype="<f4", offset=16)
        if body.size != N_PLANES * h * w:
            raise ValueError(f"TargetMaps body has {body.size} values, expected {N_PLANES * h * w}")
        body = body.reshape(N_PLANES, h, w).astype(np.float32)
        planes, i = {}, 0
        for name, n in PLANE_FIELDS:
            planes[name] = body[i:i + n].copy()
            i += n
        maps = cls(stride=stride, **planes)
        maps.pairs = pairs_from_maps(maps)
        return maps

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TargetMaps":
        return cls.from_bytes(Path(path).read_bytes())


def pairs_from_maps(maps: TargetMaps) -> np.ndarray:
    """Recover supervised center/vertex pairs from the planes alone.

    Each annotated center points at its corners through ``cv_map``; the
    corner's pixel must carry the matching vertex slot in ``vc_mask``.
    """
    rows = []
    ys, xs = np.nonzero(maps.cv_mask[0] > 0)
    for cy, cx in zip(ys, xs):
        ox, oy = maps.offset_map[:, cy, cx]
        for k in range(4):
            dx, dy = maps.cv_map[2 * k:2 * k + 2, cy, cx]
            vx, vy = keypoint_pixel(cx + ox - dx, cy + oy - dy)
            j = CORNER_TO_SLOT[k]
            if 0 <= vy < maps.height and 0 <= vx < maps.width and maps.vc_mask[j, vy, vx] > 0:
                rows.append((cy, cx, k, vy, vx, j))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 6)


def _cell_radius(q: CellQuad, stride: int) -> float:
    v = q.vertices / stride
    w = 0.5 * (np.linalg.norm(v[1] - v[0]) + np.linalg.norm(v[2] - v[3]))
    h = 0.5 * (np.linalg.norm(v[3] - v[0]) + np.linalg.norm(v[2] - v[1]))
    return max(2.0, min(w, h) / 2.0)


def map_shape(image_size: tuple[int, int], stride: int) -> tuple[int, int]:
    """(height, width) of the maps for an image of size ``(width, height)``.

    Large enough that every point inside the image, border included, rounds
    onto the maps.
    """
    width, height = image_size
    return keypoint_pixel(height / stride, 0)[0] + 1, keypoint_pixel(width / stride, 0)[0] + 1


def encode_targets(tables: Sequence[Sequence[CellQuad]], image_size: tuple[int, int], stride: int,
                   tol: float = DEFAULT_MERGE_TOL) -> TargetMaps:
    """Encode annotated cells (grouped by table) into :class:`TargetMaps`.

    ``image_size`` is ``(width, height)`` in pixels; see :func:`map_shape`
    for the map extent.  Offsets are in map-scale units.
    Raises :class:`EncodingError` when two keypoints of one class quantize to
    the same pixel or a keypoint falls outside the maps.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    h, w = map_shape(image_size, stride)
    maps = TargetMaps.zeros(h, w, stride)

    cells = [c for table in tables for c in table]
    # tables never share vertices, so merging per table keeps them apart
    vertices: list[SharedVertex] = []
    base = 0
    for table in tables:
        for v in collect_shared_vertices(list(table), tol):
            v.slots = {j: (cell + base, k) for j, (cell, k) in v.slots.items()}
            vertices.append(v)
        base += len(table)

    vertex_of_corner: dict[tuple[int, int], int] = {}
    for vi, v in enumerate(vertices):
        for cell, k in v.slots.values():
            vertex_of_corner[(cell, k)] = vi

    def locate(x, y, what):
        px, py = keypoint_pixel(x, y)
        if not (0 <= px < w and 0 <= py < h):
            raise EncodingError(f"{what} at map ({x:.3f}, {y:.3f}) falls outside {w}x{h} maps")
        return px, py

    radii = [_cell_radius(c, stride) for c in cells]
    centers = [c.vertices.mean(axis=0) / stride for c in cells]
    vpos = [np.asarray(v.position) / stride for v in vertices]

    center_px = {}
    for i, c in enumerate(centers):
        px = locate(*c, f"center of cell {i}")
        if px in center_px:
            raise EncodingError(f"cells {center_px[px]} and {i} share center pixel {px}; stride too coarse")
        center_px[px] = i
    vertex_px = {}
    for vi, p in enumerate(vpos):
        px = locate(*p, f"vertex {vi}")
        if px in vertex_px:
            raise EncodingError(f"vertices {vertex_px[px]} and {vi} share pixel {px}; stride too coarse")
        vertex_px[px] = vi

    pairs = []
    for (px, py), i in center_px.items():
        c = centers[i]
        splat_gaussian(maps.keypoint_heatmap[0], c, radii[i])
        maps.cv_mask[0, py, px] = 1.0
        maps.offset_map[:, py, px] = c - (px, py)
        for k in range(4):
            vi = vertex_of_corner[(i, k)]
            maps.cv_map[2 * k:2 * k + 2, py, px] = c - vpos[vi]
    for (px, py), vi in vertex_px.items():
        p = vpos[vi]
        v = vertices[vi]
        splat_gaussian(maps.keypoint_heatmap[1], p, min(radii[cell] for cell, _ in v.slots.values()))
        if (px, py) in center_px:
            maps.diagnostics.append(
                f"offset collision at pixel {(px, py)}: vertex {vi} overrides center {center_px[(px, py)]}")
        maps.offset_map[:, py, px] = p - (px, py)
        for j, (cell, k) in v.slots.items():
            maps.vc_mask[j, py, px] = 1.0
            maps.vc_map[2 * j:2 * j + 2, py, px] = p - centers[cell]
            cx, cy = keypoint_pixel(*centers[cell])
            pairs.append((cy, cx, k, py, px, j))
    maps.pairs = np.asarray(sorted(pairs), dtype=np.int64).reshape(-1, 6)
    return maps


def encode_annotation(annotation, stride: int, tol: float = DEFAULT_MERGE_TOL) -> TargetMaps:
    """Convenience wrapper taking an :class:`~tablekit.annotation.Annotation`."""
    return encode_targets([[c.quad for c in t.cells] for t in annotation.tables],
                          annotation.image_size, stride, tol)
