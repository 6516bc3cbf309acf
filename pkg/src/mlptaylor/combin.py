"""Combinatorics for the rooted-tree derivative expansion.

Integer partitions with their symmetry factors, distinct index-block
assignments, and the set of adjacency matrices encoding the directed
rooted trees (arborescences) that contribute to higher derivatives of a
layered network.

Conventions: vertices are numbered 1..N with vertex 1 the root; an
adjacency matrix is strictly upper triangular, entry A[i,j] > 0 meaning
the j-th vertex hangs off the i-th through its A[i,j]-th outgoing edge
bundle (the number of arrow heads drawn on that edge).  The step
function used for saturation gating satisfies theta(0) = 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


def theta(x) -> int:
    """Step function with theta(0) = 0: 1 for x > 0, else 0."""
    return 1 if x > 0 else 0


@dataclass(frozen=True)
class Partition:
    """Non-increasing positive integer parts."""

    parts: tuple[int, ...]

    def __post_init__(self):
        if not self.parts or any(p < 1 for p in self.parts):
            raise ValueError(f"parts must be positive, got {self.parts}")
        if any(a < b for a, b in zip(self.parts, self.parts[1:])):
            raise ValueError(f"parts must be non-increasing, got {self.parts}")

    @property
    def total(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)


def partitions(n: int, length: int | None = None) -> list[Partition]:
    """All partitions of ``n``, optionally restricted to a fixed length.

    Results are non-increasing tuples, ordered lexicographically
    descending (so (n,) first, (1,...,1) last).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if length is not None and not 1 <= length <= n:
        raise ValueError(f"length must be in 1..{n}, got {length}")

    def gen(remaining: int, cap: int, prefix: tuple[int, ...]):
        if remaining == 0:
            yield prefix
            return
        for part in range(min(cap, remaining), 0, -1):
            yield from gen(remaining - part, part, prefix + (part,))

    out = [Partition(p) for p in gen(n, n, ())]
    if length is not None:
        out = [p for p in out if p.length == length]
    return out


def symmetry_factor(pi: Partition) -> int:
    """Combinatorial weight of a partition under index-permutation symmetry.

    Product of the factorials of the parts times the factorials of the
    multiplicities of equal parts; N!/symmetry_factor counts the distinct
    index-block assignments of shape ``pi``.
    """
    mult: dict[int, int] = {}
    for p in pi.parts:
        mult[p] = mult.get(p, 0) + 1
    out = 1
    for p in pi.parts:
        out *= math.factorial(p)
    for m in mult.values():
        out *= math.factorial(m)
    return out


def block_assignments(n: int, pi: Partition) -> list[tuple[tuple[int, ...], ...]]:
    """Distinct ways to split indices 1..n into blocks of sizes ``pi``.

    Order inside a block is irrelevant and blocks of equal size are
    unordered among themselves; exactly n!/symmetry_factor(pi)
    assignments are produced.  Blocks come out sorted internally, sizes
    non-increasing.
    """
    if pi.total != n:
        raise ValueError(f"partition sums to {pi.total}, expected {n}")

    def gen(remaining: frozenset[int], sizes: tuple[int, ...], prev: tuple[int, ...] | None):
        if not sizes:
            yield ()
            return
        size = sizes[0]
        for block in itertools.combinations(sorted(remaining), size):
            # equal-size blocks are interchangeable: force ascending minima
            if prev is not None and len(prev) == size and block[0] < prev[0]:
                continue
            for rest in gen(remaining - set(block), sizes[1:], block):
                yield (block,) + rest

    return list(gen(frozenset(range(1, n + 1)), pi.parts, None))


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Strictly upper-triangular non-negative integer matrix encoding one
    arborescence; every column but the first has exactly one non-zero
    entry (the incoming edge of that vertex)."""

    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        for row in self.entries:
            if len(row) != n:
                raise ValueError("matrix must be square")
        for i in range(n):
            for j in range(n):
                v = self.entries[i][j]
                if v < 0:
                    raise ValueError("entries must be non-negative")
                if j <= i and v != 0:
                    raise ValueError("matrix must be strictly upper triangular")
        for j in range(1, n):
            if sum(1 for i in range(n) if self.entries[i][j] != 0) != 1:
                raise ValueError(f"column {j + 1} must have exactly one non-zero entry")
        for i in range(n):
            row = self.entries[i]
            for j in range(n):
                # bundle indices in a row must appear in consecutive order
                if row[j] > 1 and row[j] - 1 not in row[:j]:
                    raise ValueError(
                        f"entry {row[j]} at ({i + 1},{j + 1}) lacks predecessor {row[j] - 1}"
                    )

    @property
    def n(self) -> int:
        return len(self.entries)

    def entry(self, i: int, j: int) -> int:
        """A[i,j] with 1-based vertex indices."""
        return self.entries[i - 1][j - 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=int)

    @classmethod
    def from_array(cls, arr) -> "AdjacencyMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in np.asarray(arr)))


def alpha(a: AdjacencyMatrix) -> int:
    """Saturation threshold: the largest matrix entry (0 for one vertex).

    An arborescence contributes to a layer-l derivative tensor only when
    l exceeds this threshold.
    """
    return max(max(row) for row in a.entries)


def beta(a: AdjacencyMatrix, c: int) -> int:
    """Parent vertex of c (1-based); 0 for the root, which has no parent."""
    if not 1 <= c <= a.n:
        raise ValueError(f"vertex {c} out of range 1..{a.n}")
    return sum(i * theta(a.entry(i, c)) for i in range(1, a.n + 1))


def multiplicity(a: AdjacencyMatrix, b: int, c: int) -> int:
    """Number of children attached through the b-th edge bundle of vertex c.

    The corresponding propagator order is 1 + multiplicity.
    """
    if b < 1:
        raise ValueError(f"bundle index must be >= 1, got {b}")
    return sum(1 for j in range(1, a.n + 1) if a.entry(c, j) == b)


def out_degree(a: AdjacencyMatrix, c: int) -> int:
    """Number of distinct edge bundles leaving vertex c (max entry of its row)."""
    return max(a.entries[c - 1])


def children_by_bundle(a: AdjacencyMatrix, c: int) -> dict[int, list[int]]:
    """Map bundle index -> child vertices of c (ascending), 1-based."""
    out: dict[int, list[int]] = {}
    for j in range(1, a.n + 1):
        b = a.entry(c, j)
        if b > 0:
            out.setdefault(b, []).append(j)
    return out


def extensions(a: AdjacencyMatrix, c: int) -> list[AdjacencyMatrix]:
    """All ways to attach vertex n+1 to vertex c: either through a new edge
    bundle or by raising an existing bundle's multiplicity."""
    n = a.n
    out = []
    for b in range(1, out_degree(a, c) + 2):
        rows = [row + (b if i == c - 1 else 0,) for i, row in enumerate(a.entries)]
        rows.append((0,) * (n + 1))
        out.append(AdjacencyMatrix(tuple(rows)))
    return out


def enumerate_adjacency(n: int) -> list[AdjacencyMatrix]:
    """All arborescence adjacency matrices with n vertices.

    Built inductively: every (n-1)-vertex matrix is extended by hanging
    the new vertex off each existing vertex in every allowed way.  The
    extension sets are pairwise disjoint, so no de-duplication is needed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    current = [AdjacencyMatrix(((0,),))]
    for size in range(2, n + 1):
        nxt = []
        for a in current:
            for c in range(1, a.n + 1):
                nxt.extend(extensions(a, c))
        current = nxt
    return current


def enumerate_adjacency_bruteforce(n: int) -> list[AdjacencyMatrix]:
    """Independent enumeration by filtering all candidate upper-triangular
    matrices with entries <= n against the allowedness conditions.

    Exponential; intended as a cross-check for small n only.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return [AdjacencyMatrix(((0,),))]

    # each column j >= 2 has exactly one non-zero entry: a row i < j and a value
    column_choices = []
    for j in range(2, n + 1):
        column_choices.append([(i, v) for i in range(1, j) for v in range(1, n + 1)])

    out = []
    for combo in itertools.product(*column_choices):
        m = [[0] * n for _ in range(n)]
        for (i, v), j in zip(combo, range(2, n + 1)):
            m[i - 1][j - 1] = v
        ok = True
        for i in range(n):
            for j in range(n):
                v = m[i][j]
                if v > 1 and v - 1 not in m[i][:j]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(AdjacencyMatrix.from_array(m))
    return out


def to_dot(a: AdjacencyMatrix) -> str:
    """Deterministic DOT rendering; edge labels carry the bundle index."""
    lines = ["digraph arborescence {"]
    for c in range(1, a.n + 1):
        lines.append(f"  v{c};")
    for i in range(1, a.n + 1):
        for j in range(1, a.n + 1):
            b = a.entry(i, j)
            if b > 0:
                lines.append(f'  v{i} -> v{j} [label="{b}"];')
    lines.append("}")
    return "\n".join(lines)


def adjacency_to_json(matrices) -> str:
    """Export a set of adjacency matrices as a JSON array of integer matrices."""
    import json

    return json.dumps([[list(row) for row in a.entries] for a in matrices])
