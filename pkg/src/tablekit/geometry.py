"""Points, convex cell quadrilaterals, polygon overlap and deformations.

Coordinates are image pixels with ``y`` pointing down, so a clockwise
polygon on screen has positive signed area under the shoelace formula used
here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_EPS_AREA = 1e-9


class GeometryError(ValueError):
    """Raised for invalid geometric input (non-convex quads, bad transforms)."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def signed_area(poly) -> float:
    """Shoelace area; positive for clockwise order in y-down coordinates."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def canonical_order(vertices) -> np.ndarray:
    """Return the 4 vertices as top-left, top-right, bottom-right, bottom-left.

    Vertices are sorted by angle around their centroid (clockwise on screen),
    then rotated so the vertex with minimal ``x + y`` comes first, ties going
    to the smaller ``y``.
    """
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    c = v.mean(axis=0)
    ang = np.arctan2(v[:, 1] - c[1], v[:, 0] - c[0])
    v = v[np.argsort(ang, kind="stable")]
    keys = [(p[0] + p[1], p[1]) for p in v]
    first = min(range(len(v)), key=lambda i: keys[i])
    return np.roll(v, -first, axis=0)


def is_convex_clockwise(vertices, tol: float = 1e-9) -> bool:
    """True if the polygon is strictly convex, clockwise on screen and non-degenerate."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3 or not np.all(np.isfinite(v)):
        return False
    for i in range(n):
        a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross <= tol:
            return False
    return signed_area(v) > _EPS_AREA


@dataclass(frozen=True, eq=False)
class CellQuad:
    """One table cell as a convex quadrilateral.

    ``vertices`` is a (4, 2) float array in canonical corner order
    (top-left, top-right, bottom-right, bottom-left).  Construct through
    :meth:`from_points` to canonicalize arbitrary input order.
    """

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(4, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if not is_convex_clockwise(v):
            raise GeometryError(f"quad is not convex/clockwise/non-degenerate: {v.tolist()}")

    @classmethod
    def from_points(cls, points: Iterable) -> "CellQuad":
        pts = np.asarray([tuple(p) for p in points], dtype=float)
        if pts.shape != (4, 2):
            raise GeometryError(f"a quad needs exactly 4 points, got shape {pts.shape}")
        if len({(float(x), float(y)) for x, y in pts}) < 4:
            raise GeometryError(f"quad has repeated vertices: {pts.tolist()}")
        return cls(canonical_order(pts))

    @classmethod
    def from_box(cls, x0: float, y0: float, x1: float, y1: float) -> "CellQuad":
        return cls([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    @property
    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.vertices]

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def __eq__(self, other):
        return isinstance(other, CellQuad) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def __repr__(self):
        pts = ", ".join(f"({x:g}, {y:g})" for x, y in self.vertices)
        return f"CellQuad({pts})"


def quad_center(q: CellQuad) -> Point:
    c = np.asarray(q.vertices if isinstance(q, CellQuad) else q, dtype=float).mean(axis=0)
    return Point(float(c[0]), float(c[1]))


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` against convex ``clip``.

    Both polygons must be clockwise in y-down coordinates.  Returns the
    intersection polygon as an (n, 2) array, possibly empty.
    """
    out = [tuple(p) for p in np.asarray(subject, dtype=float)]
    cp = np.asarray(clip, dtype=float)
    n = len(cp)
    for i in range(n):
        if not out:
            break
        a, b = cp[i], cp[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(p):
            # >= 0 means inside (right-hand side on screen) for clockwise clip polygons
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

        inp, out = out, []
        s = inp[-1]
        ds = side(s)
        for e in inp:
            de = side(e)
            if de >= 0:
                if ds < 0:
                    t = ds / (ds - de)
                    out.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
                out.append(e)
            elif ds >= 0:
                t = ds / (ds - de)
                out.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            s, ds = e, de
    return np.asarray(out, dtype=float).reshape(-1, 2)


def _as_poly(q) -> np.ndarray:
    return np.asarray(q.vertices if isinstance(q, CellQuad) else q, dtype=float)


def quad_iou(a, b, *, with_flag: bool = False):
    """Intersection over union of two convex polygons.

    Accepts :class:`CellQuad` or clockwise (n, 2) arrays.  A zero-area input
    yields 0; with ``with_flag=True`` the return value is ``(iou, degenerate)``.
    """
    pa, pb = _as_poly(a), _as_poly(b)
    area_a, area_b = abs(signed_area(pa)), abs(signed_area(pb))
    if area_a <= _EPS_AREA or area_b <= _EPS_AREA:
        logger.debug("degenerate polygon in quad_iou")
        return (0.0, True) if with_flag else 0.0
    if (pa[:, 0].max() <= pb[:, 0].min() or pb[:, 0].max() <= pa[:, 0].min()
            or pa[:, 1].max() <= pb[:, 1].min() or pb[:, 1].max() <= pa[:, 1].min()):
        return (0.0, False) if with_flag else 0.0
    inter = abs(signed_area(clip_convex(pa, pb)))
    union = area_a + area_b - inter
    iou = min(max(inter / union, 0.0), 1.0)
    return (iou, False) if with_flag else iou


# --------------------------------------------------------------------------
# Deformations

@dataclass(frozen=True, eq=False)
class Deformation:
    """A point warp: identity, affine (2x3), perspective (3x3) or sinusoidal curve.

    For ``curve`` the displaced coordinate is ``axis`` and the phase is taken
    from the other coordinate: with ``axis="y"``,
    ``y += amplitude * sin(2*pi*(x - origin) / period)``.
    """

    kind: str = "identity"
    matrix: np.ndarray | None = None
    amplitude: float = 0.0
    period: float = 1.0
    axis: str = "y"
    origin: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "affine", "perspective", "curve"):
            raise GeometryError(f"unknown deformation kind {self.kind!r}")
        if self.kind == "affine":
            m = np.asarray(self.matrix, dtype=float)
            if m.shape != (2, 3):
                raise GeometryError("affine deformation needs a 2x3 matrix")
            object.__setattr__(self, "matrix", m)
        elif self.kind == "perspective":
            m = np.asarray(self.matrix, dtype=float)
            if m.shape != (3, 3):
                raise GeometryError("perspective deformation needs a 3x3 matrix")
            if abs(np.linalg.det(m)) < 1e-12:
                raise GeometryError("perspective matrix is singular")
            object.__setattr__(self, "matrix", m)
        elif self.kind == "curve":
            if self.amplitude < 0:
                raise GeometryError("curve amplitude must be >= 0")
            if self.period <= 0:
                raise GeometryError("curve period must be > 0")
            if self.axis not in ("x", "y"):
                raise GeometryError("curve axis must be 'x' or 'y'")

    @classmethod
    def identity(cls) -> "Deformation":
        return cls("identity")

    @classmethod
    def affine(cls, matrix) -> "Deformation":
        return cls("affine", matrix=matrix)

    @classmethod
    def rotation(cls, degrees: float, center=(0.0, 0.0)) -> "Deformation":
        """Rotation by ``degrees`` (clockwise on screen) about ``center``."""
        t = math.radians(degrees)
        c, s = math.cos(t), math.sin(t)
        cx, cy = center
        m = [[c, -s, cx - c * cx + s * cy],
             [s, c, cy - s * cx - c * cy]]
        return cls("affine", matrix=m)

    @classmethod
    def perspective(cls, matrix) -> "Deformation":
        return cls("perspective", matrix=matrix)

    @classmethod
    def curve(cls, amplitude: float, period: float, axis: str = "y", origin: float = 0.0) -> "Deformation":
        return cls("curve", amplitude=amplitude, period=period, axis=axis, origin=origin)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.matrix is not None:
            d["matrix"] = np.asarray(self.matrix).tolist()
        if self.kind == "curve":
            d.update(amplitude=self.amplitude, period=self.period, axis=self.axis, origin=self.origin)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Deformation":
        return cls(d.get("kind", "identity"), matrix=d.get("matrix"),
                   amplitude=d.get("amplitude", 0.0), period=d.get("period", 1.0),
                   axis=d.get("axis", "y"), origin=d.get("origin", 0.0))


def warp_points(pts, d: Deformation) -> np.ndarray:
    """Vectorized :func:`apply_deformation` over an (n, 2) array."""
    p = np.asarray(pts, dtype=float).reshape(-1, 2)
    if d.kind == "identity":
        return p.copy()
    if d.kind == "affine":
        return p @ d.matrix[:, :2].T + d.matrix[:, 2]
    if d.kind == "perspective":
        h = np.c_[p, np.ones(len(p))] @ d.matrix.T
        w = h[:, 2]
        scale = np.abs(h[:, :2]).max(axis=1, initial=0.0) + 1.0
        if np.any(np.abs(w) < 1e-12 * scale):
            raise GeometryError("homography maps a point to infinity")
        return h[:, :2] / w[:, None]
    out = p.copy()
    if d.axis == "y":
        out[:, 1] += d.amplitude * np.sin(2 * np.pi * (p[:, 0] - d.origin) / d.period)
    else:
        out[:, 0] += d.amplitude * np.sin(2 * np.pi * (p[:, 1] - d.origin) / d.period)
    return out


def apply_deformation(p, d: Deformation) -> Point:
    x, y = warp_points([tuple(p)], d)[0]
    return Point(float(x), float(y))


def deform_quad(q: CellQuad, d: Deformation) -> CellQuad:
    """Warp the four corners, keeping corner identity (no re-sorting)."""
    return CellQuad(warp_points(q.vertices, d))


def homography_from_points(src: Sequence, dst: Sequence) -> np.ndarray:
    """3x3 homography mapping 4 source points onto 4 destination points (DLT)."""
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    _, _, vt = np.linalg.svd(np.asarray(rows, dtype=float))
    h = vt[-1].reshape(3, 3)
    return h / h[2, 2]
