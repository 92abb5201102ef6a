"""Zhang-Shasha edit distance between ordered labeled trees.

Unit insert/delete costs; relabel costs 0 for equal labels and 1 otherwise.
Runs in O(|A| |B| min(depth, leaves)^2) time.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Node:
    label: object
    children: list["Node"] = field(default_factory=list)

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def add(self, child: "Node") -> "Node":
        self.children.append(child)
        return self


class _Annotated:
    def __init__(self, root: Node):
        self.labels = []
        self.lmd = []  # leftmost leaf descendant, postorder index
        stack = [(root, False)]
        lmd_of = {}
        while stack:
            node, done = stack.pop()
            if not done:
                stack.append((node, True))
                for c in reversed(node.children):
                    stack.append((c, False))
                continue
            i = len(self.labels)
            self.labels.append(node.label)
            lmd_of[id(node)] = lmd_of[id(node.children[0])] if node.children else i
            self.lmd.append(lmd_of[id(node)])
        seen = set()
        keyroots = []
        for i in range(len(self.lmd) - 1, -1, -1):
            if self.lmd[i] not in seen:
                keyroots.append(i)
                seen.add(self.lmd[i])
        self.keyroots = sorted(keyroots)


def tree_edit_distance(a: Node, b: Node) -> int:
    ta, tb = _Annotated(a), _Annotated(b)
    la, lb = ta.lmd, tb.lmd
    n, m = len(ta.labels), len(tb.labels)
    td = [[0] * m for _ in range(n)]

    for i in ta.keyroots:
        for j in tb.keyroots:
            li, lj = la[i], lb[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = [[0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, rows):
                ia = li + x - 1
                for y in range(1, cols):
                    jb = lj + y - 1
                    if la[ia] == li and lb[jb] == lj:
                        cost = 0 if ta.labels[ia] == tb.labels[jb] else 1
                        fd[x][y] = min(fd[x - 1][y] + 1, fd[x][y - 1] + 1, fd[x - 1][y - 1] + cost)
                        td[ia][jb] = fd[x][y]
                    else:
                        p, q = la[ia] - li, lb[jb] - lj
                        fd[x][y] = min(fd[x - 1][y] + 1, fd[x][y - 1] + 1, fd[p][q] + td[ia][jb])
    return td[n - 1][m - 1]
