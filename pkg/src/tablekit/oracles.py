"""Slow, independent reference implementations used to cross-check the fast paths."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .metrics import HORIZONTAL, VERTICAL, AdjacencyRelation
from .structure import TableGrid
from .ted import Node


def _freeze(node: Node):
    return (node.label, tuple(_freeze(c) for c in node.children))


def _size(forest) -> int:
    return sum(1 + _size(t[1]) for t in forest)


@lru_cache(maxsize=None)
def _forest_distance(f, g) -> int:
    if not f and not g:
        return 0
    if not f:
        return _size(g)
    if not g:
        return _size(f)
    (lv, cv), (lw, cw) = f[-1], g[-1]
    return min(
        _forest_distance(f[:-1] + cv, g) + 1,
        _forest_distance(f, g[:-1] + cw) + 1,
        _forest_distance(cv, cw) + _forest_distance(f[:-1], g[:-1]) + (lv != lw),
    )


def brute_tree_distance(a: Node, b: Node) -> int:
    """Ordered tree edit distance by the memoized rightmost-root forest recursion."""
    return _forest_distance((_freeze(a),), (_freeze(b),))


def brute_adjacency(grid: TableGrid) -> set[AdjacencyRelation]:
    """Neighbors found by walking every occupied slot of the index grid."""
    owner = grid.slot_owner()
    rels = set()
    for (r, c), a in owner.items():
        for (dr, dc), direction in (((0, 1), HORIZONTAL), ((1, 0), VERTICAL)):
            b = owner.get((r + dr, c + dc))
            if b is not None and b != a:
                rels.add(AdjacencyRelation.of(a, b, direction))
    return rels


def monte_carlo_iou(a, b, n: int = 1_000_000, rng: np.random.Generator | None = None) -> float:
    """IoU estimated from uniform samples over the joint bounding box of two convex polygons."""
    rng = rng or np.random.default_rng(0)
    pa = np.asarray(getattr(a, "vertices", a), dtype=float)
    pb = np.asarray(getattr(b, "vertices", b), dtype=float)
    lo = np.minimum(pa.min(0), pb.min(0))
    hi = np.maximum(pa.max(0), pb.max(0))
    pts = rng.uniform(lo, hi, size=(n, 2))

    def inside(poly):
        mask = np.ones(n, bool)
        for i in range(len(poly)):
            p, q = poly[i], poly[(i + 1) % len(poly)]
            mask &= (q[0] - p[0]) * (pts[:, 1] - p[1]) - (q[1] - p[1]) * (pts[:, 0] - p[0]) >= 0
        return mask

    ia, ib = inside(pa), inside(pb)
    union = np.count_nonzero(ia | ib)
    return np.count_nonzero(ia & ib) / union if union else 0.0
