"""Looptrees: each vertex with k >= 1 children becomes a cycle of length k + 1
through itself and its children (a double edge when k = 1).

Distances use the cactus structure: every vertex other than the root sits on
the cycle of its parent, so its distance to the root is the parent's plus the
shorter arc min(r, k + 1 - r), r being its rank among the k siblings.  A
generic BFS over the explicit multigraph (scipy.sparse.csgraph) serves as the
oracle and is used for the one graft whose shape is not a subtree.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .tree import PlaneTree, subtree_end

__all__ = [
    "LooptreeGraph",
    "CircleProximity",
    "build_looptree",
    "edge_list",
    "bfs_distances",
    "radius_and_decomposition",
    "circle_proximity",
    "LOOP_CSV_COLUMNS",
]

LOOP_CSV_COLUMNS = ("n", "seed", "cycle_len_ratio", "max_graft_radius_ratio", "gh_upper_bound")


def _accumulate_up(parents: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sum of w over the vertex and all its strict ancestors but the root."""
    acc = w.astype(np.int64).copy()
    anc = parents.copy()
    while np.any(anc >= 0):
        live = anc >= 0
        a = anc[live]
        acc[live] += acc[a]
        anc[live] = anc[a]
    return acc


@dataclass
class LooptreeGraph:
    """Cycle registry of Loop(tree).

    For a non-root vertex v: ``parent[v]``, its rank ``rank[v]`` in 1..k among
    the children of the parent, and ``kpar[v]`` = k.  The cycle of u is
    (u, first child, ..., last child, u).
    """

    tree: PlaneTree
    parent: np.ndarray
    rank: np.ndarray
    kpar: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.tree.size

    @property
    def n_edges(self) -> int:
        k = self.tree.child_counts
        return int(np.sum(k[k >= 1] + 1))

    def cycle(self, u: int) -> np.ndarray:
        """Vertices of the cycle of u: u followed by its children in order."""
        return np.concatenate([[u], self.tree.children(u)])

    def cycle_lengths(self) -> np.ndarray:
        k = self.tree.child_counts
        return k[k >= 1] + 1

    def root_distances(self) -> np.ndarray:
        step = np.minimum(self.rank, self.kpar + 1 - self.rank)
        step[0] = 0
        return _accumulate_up(self.parent, step)

    def radius(self) -> int:
        """Eccentricity of the root."""
        return int(self.root_distances().max())


def build_looptree(tree: PlaneTree) -> LooptreeGraph:
    par = tree.parents
    n = tree.size
    rank = np.zeros(n, dtype=np.int64)
    kpar = np.zeros(n, dtype=np.int64)
    if n > 1:
        p = par[1:]
        order = np.argsort(p, kind="stable")     # groups by parent, in DFS order
        ps = p[order]
        first = np.r_[True, ps[1:] != ps[:-1]]
        start = np.maximum.accumulate(np.where(first, np.arange(ps.size), 0))
        r = np.empty(n - 1, dtype=np.int64)
        r[order] = np.arange(ps.size) - start + 1
        rank[1:] = r
        kpar[1:] = tree.child_counts[p]
    return LooptreeGraph(tree=tree, parent=par, rank=rank, kpar=kpar)


def edge_list(loop: LooptreeGraph, mask=None) -> np.ndarray:
    """Edges (with multiplicity) as an (m, 2) array.

    Vertex v joins its previous sibling (or the parent when it is the first
    child); the last child also closes the cycle back to the parent.  With a
    boolean vertex ``mask`` only edges inside the mask are kept.
    """
    n = loop.n_vertices
    if n == 1:
        return np.empty((0, 2), dtype=np.int64)
    v = np.arange(1, n)
    p = loop.parent[1:]
    r = loop.rank[1:]
    # previous sibling is the previous vertex with the same parent
    order = np.argsort(p, kind="stable")
    prev = np.empty(n - 1, dtype=np.int64)
    vs = v[order]
    prev_sorted = np.r_[-1, vs[:-1]]
    prev[order] = prev_sorted
    prev = np.where(r == 1, p, prev)
    e1 = np.column_stack([prev, v])
    last = r == loop.kpar[1:]
    e2 = np.column_stack([v[last], p[last]])
    E = np.vstack([e1, e2])
    if mask is not None:
        E = E[mask[E[:, 0]] & mask[E[:, 1]]]
    return E


def bfs_distances(loop: LooptreeGraph, source: int, mask=None) -> np.ndarray:
    """Graph distances from ``source`` by BFS on the explicit multigraph.

    Unreachable vertices (outside ``mask``) get -1."""
    n = loop.n_vertices
    E = edge_list(loop, mask)
    A = sparse.coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(n, n)).tocsr()
    d = csgraph.shortest_path(A, directed=False, unweighted=True, indices=source)
    return np.where(np.isfinite(d), d, -1).astype(np.int64)


def radius_and_decomposition(loop: LooptreeGraph, center_vertex=None) -> dict:
    """Root radius and the radii of the components hanging off the cycle of
    ``center_vertex`` (default: first vertex of maximal out-degree).

    The component at a child c of the center is the looptree of c's subtree,
    of radius max(dist) - dist(c) over that subtree.  The component at the
    center itself is everything outside its strict subtree; its radius comes
    from a BFS restricted to that vertex set.
    """
    tree = loop.tree
    k = tree.child_counts
    u = int(np.argmax(k)) if center_vertex is None else int(center_vertex)
    dist = loop.root_distances()
    out = {"radius": int(dist.max()), "center": u, "cycle_len": int(k[u] + 1) if k[u] else 0}
    if k[u] == 0:
        out["graft_radii"] = np.array([out["radius"]], dtype=np.int64)
        return out
    W = tree.W
    end = subtree_end(W, u)
    kids = tree.children(u)
    seg_max = np.maximum.reduceat(dist[u + 1:end], kids - (u + 1))
    child_r = seg_max - dist[kids]
    mask = np.ones(tree.size, dtype=bool)
    mask[u + 1:end] = False
    idx = np.flatnonzero(mask)
    if idx.size == 1:
        center_r = 0
    else:
        sub = np.full(tree.size, -1, dtype=np.int64)
        sub[idx] = np.arange(idx.size)
        E = edge_list(loop, mask)
        m = idx.size
        A = sparse.coo_matrix((np.ones(len(E)), (sub[E[:, 0]], sub[E[:, 1]])), shape=(m, m)).tocsr()
        d = csgraph.shortest_path(A, directed=False, unweighted=True, indices=int(sub[u]))
        center_r = int(d[np.isfinite(d)].max())
    out["graft_radii"] = np.r_[center_r, child_r].astype(np.int64)
    return out


@dataclass
class CircleProximity:
    cycle_len_ratio: float
    max_graft_radius_ratio: float
    gh_upper_bound: float

    def to_dict(self):
        return asdict(self)


def circle_proximity(loop: LooptreeGraph, b_n: float, decomposition=None) -> CircleProximity:
    """Scaled cycle length, largest graft radius and GH upper bound.

    Collapsing each graft onto its attachment point moves points by at most
    the largest graft radius R, and the cycle of length L with its graph
    metric is within 1/2 of the circle of circumference L, so the distance
    between Loop/|b_n| and that circle is at most (R + 1/2)/|b_n|.
    """
    dec = decomposition or radius_and_decomposition(loop)
    s = abs(float(b_n))
    R = float(dec["graft_radii"].max())
    return CircleProximity(cycle_len_ratio=dec["cycle_len"] / s,
                           max_graft_radius_ratio=R / s,
                           gh_upper_bound=(R + 0.5) / s)
