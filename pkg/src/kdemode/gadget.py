"""Box-kernel instances built from regular graphs, and an exact desk-scale verifier.

A graph's incidence rows, scaled by ``1/sqrt(A)`` with
``A = (1 - 1/k)(deg - 1)``, put ``k`` centers inside one unit ball exactly
when the graph has a ``k``-clique.  The verifier checks that correspondence
by brute force on small graphs.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, DomainError
from .kde import Dataset, KdeInstance
from .kernels import KernelKind, KernelSpec

__all__ = [
    "RegularGraph",
    "GadgetInstance",
    "DegenerateScaleError",
    "load_edge_list",
    "incidence_embed",
    "build_gadget",
    "min_enclosing_ball",
    "max_covered",
    "has_clique",
    "verify_gadget",
    "gadget_report",
    "MAX_COVER_N",
]

MAX_COVER_N = 25
RADIUS_TOL = 1e-9


class DegenerateScaleError(DomainError):
    """``A = (1 - 1/k)(deg - 1)`` is not positive."""


@dataclass(frozen=True)
class RegularGraph:
    vertex_count: int
    edges: tuple
    degree: int

    @classmethod
    def from_edges(cls, edges, vertex_count=None):
        norm = []
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
            if u < 0 or v < 0:
                raise DomainError("vertex labels must be non-negative")
            norm.append((min(u, v), max(u, v)))
        if len(set(norm)) != len(norm):
            raise DomainError("duplicate edge")
        if vertex_count is None:
            vertex_count = 1 + max((v for e in norm for v in e), default=-1)
        deg = [0] * vertex_count
        for u, v in norm:
            if v >= vertex_count:
                raise DomainError(f"vertex {v} out of range")
            deg[u] += 1
            deg[v] += 1
        if vertex_count == 0 or len(set(deg)) != 1:
            raise DomainError("graph is not regular")
        return cls(vertex_count, tuple(norm), deg[0])

    def adjacency(self):
        adj = [set() for _ in range(self.vertex_count)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


@dataclass(frozen=True)
class GadgetInstance:
    instance: KdeInstance
    scale_A: float
    k: int


def load_edge_list(path) -> RegularGraph:
    """``u v`` per line, 0-indexed; blank lines and ``#`` comments are ignored."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DomainError(f"{path}:{lineno}: expected 'u v'")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DomainError(f"{path}:{lineno}: non-integer vertex label") from None
    return RegularGraph.from_edges(edges)


def incidence_embed(g: RegularGraph) -> Dataset:
    B = np.zeros((g.vertex_count, len(g.edges)))
    for j, (u, v) in enumerate(g.edges):
        B[u, j] = 1.0
        B[v, j] = 1.0
    return Dataset(B)


def build_gadget(g: RegularGraph, k: int) -> GadgetInstance:
    if k < 2:
        raise DomainError(f"k must be at least 2, got {k}")
    if g.degree < 2:
        raise DegenerateScaleError(f"degree {g.degree} < 2 gives a non-positive scale")
    A = (1.0 - 1.0 / k) * (g.degree - 1)
    data = Dataset(incidence_embed(g).points / math.sqrt(A))
    return GadgetInstance(KdeInstance(data, KernelSpec(KernelKind.BOX)), A, k)


def _circumball(support):
    p0 = support[0]
    if len(support) == 1:
        return p0.copy(), 0.0
    A = np.asarray(support[1:]) - p0
    G = A @ A.T
    b = 0.5 * np.diag(G)
    lam = np.linalg.lstsq(G, b, rcond=None)[0]
    c = p0 + lam @ A
    return c, float(np.sum((c - p0) ** 2))


def min_enclosing_ball(points, seed=0):
    """Exact smallest enclosing ball (Welzl); returns ``(center, radius_squared)``.

    The support set never exceeds the affine dimension of the input, and the
    circumcenter is solved inside the span of the support, so high ambient
    dimension costs nothing.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise DomainError("need a non-empty (m, D) array")
    order = np.random.default_rng(seed).permutation(len(pts))
    pts = pts[order]
    max_support = min(pts.shape[1] + 1, len(pts))

    def inside(p, c, r2):
        return np.sum((p - c) ** 2) <= r2 * (1.0 + 1e-12) + 1e-15

    def welzl(m, support):
        if m == 0 or len(support) == max_support:
            if not support:
                return None, -1.0
            return _circumball(support)
        c, r2 = welzl(m - 1, support)
        p = pts[m - 1]
        if c is not None and inside(p, c, r2):
            return c, r2
        return welzl(m - 1, support + [p])

    return welzl(len(pts), [])


def max_covered(gadget: GadgetInstance) -> int:
    """Largest number of centers that fit in one ball of radius 1.

    Subsets are tried from the largest size down; a pair farther apart than
    the diameter rules a subset out before the exact ball is computed.
    """
    pts = gadget.instance.data.points
    n = len(pts)
    if n > MAX_COVER_N:
        raise BudgetExceeded(n, MAX_COVER_N, what="centers for subset enumeration")
    sq = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    close = sq <= 4.0 * (1.0 + RADIUS_TOL)
    for size in range(n, 1, -1):
        for combo in itertools.combinations(range(n), size):
            if not all(close[i, j] for i, j in itertools.combinations(combo, 2)):
                continue
            _, r2 = min_enclosing_ball(pts[list(combo)])
            if r2 <= 1.0 + RADIUS_TOL:
                return size
    return 1


def has_clique(g: RegularGraph, k: int) -> bool:
    """Backtracking search for a complete subgraph on ``k`` vertices."""
    adj = g.adjacency()

    def extend(size, cands):
        if size == k:
            return True
        for i, v in enumerate(cands):
            if size + len(cands) - i < k:
                return False
            if extend(size + 1, [u for u in cands[i + 1:] if u in adj[v]]):
                return True
        return False

    return extend(0, list(range(g.vertex_count)))


def verify_gadget(g: RegularGraph, k: int) -> bool:
    return (max_covered(build_gadget(g, k)) >= k) == has_clique(g, k)


def gadget_report(g: RegularGraph, k: int, verify: bool = True) -> dict:
    gad = build_gadget(g, k)
    out = {"A": gad.scale_A, "n": gad.instance.data.n, "d": gad.instance.data.d}
    if verify:
        mc = max_covered(gad)
        hc = has_clique(g, k)
        out.update(max_covered=mc, has_clique=hc, consistent=(mc >= k) == hc)
    return out
