"""Oracle suites shared by the ``selftest`` command and the test-suite.

Each check returns a :class:`CheckResult`; random instances come from a
seeded numpy generator so runs are repeatable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annotation import Cell
from .geometry import CellQuad, quad_iou
from .loss import gradient_report, pair_weight
from .metrics import adjacency_relations, teds, weighted_avg_f1
from .oracles import brute_adjacency, brute_tree_distance, monte_carlo_iou
from .structure import TableGrid
from .synthgen import _try_merge
from .ted import Node, tree_edit_distance

TAB5_OURS = (80.8, 51.1, 31.9, 11.2)
TAB5_OURS_WAVG = 40.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


# --------------------------------------------------------------------------
# random instances

def random_tree(rng: np.random.Generator, max_nodes: int = 12) -> Node:
    """Random ordered tree of 1..max_nodes nodes labeled with table-structure tags."""
    n = int(rng.integers(1, max_nodes + 1))
    labels = [("table",), ("row",), ("cell", 1, 1), ("cell", 1, 2), ("cell", 2, 1)]
    nodes = [Node(labels[int(rng.integers(len(labels)))]) for _ in range(n)]
    for i in range(1, n):
        nodes[int(rng.integers(0, i))].add(nodes[i])
    return nodes[0]


def random_structure_tree(rng: np.random.Generator, max_nodes: int = 12) -> Node:
    root = Node(("table",))
    budget = int(rng.integers(0, max_nodes))
    while budget > 0:
        row = Node(("row",))
        root.add(row)
        budget -= 1
        for _ in range(int(rng.integers(0, budget + 1))):
            row.add(Node(("cell", int(rng.integers(1, 3)), int(rng.integers(1, 3)))))
            budget -= 1
    return root


def random_grid(rng: np.random.Generator, max_size: int = 6) -> TableGrid:
    """Random rectangular-merge grid up to ``max_size`` x ``max_size``; some slots may stay empty."""
    rows, cols = (int(v) for v in rng.integers(1, max_size + 1, size=2))
    owner = np.arange(rows * cols).reshape(rows, cols)
    for _ in range(int(rng.integers(0, rows * cols + 1))):
        r0, c0 = int(rng.integers(rows)), int(rng.integers(cols))
        _try_merge(owner, r0, c0, r0 + int(rng.integers(0, 3)), c0 + int(rng.integers(0, 3)), 3, check_lines=False)
    drop = set(rng.choice(owner.ravel(), size=int(rng.integers(0, 3)), replace=True).tolist()) if rng.random() < 0.3 else set()
    cells = []
    for i in sorted(set(owner.ravel().tolist()) - drop):
        rr, cc = np.nonzero(owner == i)
        quad = CellQuad.from_box(cc.min() * 10, rr.min() * 10, cc.max() * 10 + 10, rr.max() * 10 + 10)
        cells.append(Cell(int(i), quad, int(rr.min()), int(rr.max()), int(cc.min()), int(cc.max())))
    return TableGrid(0, cells, rows, cols)


def random_convex_quad(rng: np.random.Generator, center=(0.0, 0.0), scale: float = 10.0) -> CellQuad:
    """Four points on a random ellipse, so the quad is convex."""
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 4))
        gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
        if gaps.min() < 0.3:
            continue
        ax, ay = rng.uniform(0.5, 1.5, 2) * scale
        rot = rng.uniform(0, np.pi)
        pts = np.c_[ax * np.cos(ang), ay * np.sin(ang)]
        c, s = math.cos(rot), math.sin(rot)
        pts = pts @ np.array([[c, s], [-s, c]]) + center
        try:
            return CellQuad.from_points(pts)
        except ValueError:
            continue


# --------------------------------------------------------------------------
# checks

def check_gradients_suite(n: int = 20, tol: float = 1e-4, seed: int = 0) -> CheckResult:
    rep = gradient_report(np.random.default_rng(seed), n_instances=n, size=16, step=1e-4)
    ok = rep["pairing_loss"] <= tol and rep["total_loss"] <= tol
    return CheckResult("gradients", ok,
                       f"max rel err pairing={rep['pairing_loss']:.2e} total={rep['total_loss']:.2e} "
                       f"over {n} instances (tol {tol:g})")


def check_pair_weight() -> CheckResult:
    grid = np.arange(0, 1001) / 1000
    w = pair_weight(grid)
    ok = (pair_weight(0.0) == 0.0 and abs(pair_weight(1.0) - (1 - math.exp(-math.pi))) <= 1e-9
          and bool(np.all(np.diff(w) > 0)))
    return CheckResult("pair_weight", ok, f"w(0)={pair_weight(0.0)}, w(1)={pair_weight(1.0):.12f}, monotone on 1e-3 grid")


def check_weighted_avg() -> CheckResult:
    v = weighted_avg_f1(TAB5_OURS)
    ok = abs(v - TAB5_OURS_WAVG) <= 0.05
    return CheckResult("weighted_avg_f1", ok, f"{v:.4f} vs reported {TAB5_OURS_WAVG}")


def check_teds_oracle(n: int = 100, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(n):
        gen = random_tree if i % 2 else random_structure_tree
        a, b = gen(rng), gen(rng)
        if tree_edit_distance(a, b) != brute_tree_distance(a, b):
            bad += 1
        elif teds(a, b) != max(0.0, 1 - brute_tree_distance(a, b) / max(a.size(), b.size())):
            bad += 1
    return CheckResult("teds_oracle", bad == 0, f"{n - bad}/{n} tree pairs agree exactly")


def check_adjacency_oracle(n: int = 100, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = sum(adjacency_relations(g) != brute_adjacency(g) for g in (random_grid(rng) for _ in range(n)))
    return CheckResult("adjacency_oracle", bad == 0, f"{n - bad}/{n} grids agree exactly")


def check_iou_oracle(n: int = 50, samples: int = 1_000_000, tol: float = 1e-2, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        a = random_convex_quad(rng)
        b = random_convex_quad(rng, center=rng.uniform(-8, 8, 2))
        worst = max(worst, abs(quad_iou(a, b) - monte_carlo_iou(a, b, samples, rng)))
    sq = CellQuad.from_box(0, 0, 1, 1)
    fixtures = (quad_iou(sq, sq) == 1.0
                and abs(quad_iou(sq, CellQuad.from_box(0.5, 0, 1.5, 1)) - 1 / 3) < 1e-12
                and quad_iou(sq, CellQuad.from_box(2, 2, 3, 3)) == 0.0)
    return CheckResult("iou_oracle", worst <= tol and fixtures,
                       f"max |exact - MC| = {worst:.4f} over {n} pairs; analytic fixtures {'ok' if fixtures else 'WRONG'}")


def run_all(quick: bool = False) -> list[CheckResult]:
    return [
        check_gradients_suite(5 if quick else 20),
        check_pair_weight(),
        check_weighted_avg(),
        check_teds_oracle(20 if quick else 100),
        check_adjacency_oracle(20 if quick else 100),
        check_iou_oracle(10 if quick else 50, 100_000 if quick else 1_000_000, 2e-2 if quick else 1e-2),
    ]
