"""Plane trees in depth-first child-count form, the Lukasiewicz bijection,
BGW samplers and per-tree statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .offspring import OffspringLaw, StepLaw
from .scaling import compute_constants
from .walk import (
    BudgetExceeded, ExcursionStream, WalkPath, build_vecZ_n, sample_Z_n, sample_steps,
    vervaat_shift,
)

__all__ = [
    "PlaneTree",
    "TreeStats",
    "InvalidExcursion",
    "CapExceeded",
    "decode_lukasiewicz",
    "encode_lukasiewicz",
    "parents_from_W",
    "depths_from_parents",
    "min_record_count",
    "depth_by_parent_chasing",
    "subtree_end",
    "sample_bgw_free",
    "sample_tree_exact_n",
    "sample_exact_n_batch",
    "sample_tree_approx_Zn",
    "sample_tree_tail",
    "tree_stats",
    "stream_stats",
]


class InvalidExcursion(ValueError):
    pass


class CapExceeded(RuntimeError):
    pass


def _offspring(law) -> OffspringLaw:
    return law.law if isinstance(law, StepLaw) else law


class PlaneTree:
    """Rooted plane tree given by its child counts in lexicographic order."""

    __slots__ = ("child_counts", "_W", "_parents", "_depths")

    def __init__(self, child_counts, validate=True):
        k = np.asarray(child_counts, dtype=np.int64)
        self.child_counts = k
        self._W = None
        self._parents = None
        self._depths = None
        if validate:
            _check_excursion(self.W)

    @property
    def size(self) -> int:
        return self.child_counts.size

    def __len__(self):
        return self.size

    @property
    def W(self) -> np.ndarray:
        """Lukasiewicz path W_0..W_size."""
        if self._W is None:
            W = np.empty(self.size + 1, dtype=np.int64)
            W[0] = 0
            np.cumsum(self.child_counts - 1, out=W[1:])
            self._W = W
        return self._W

    @property
    def parents(self) -> np.ndarray:
        if self._parents is None:
            self._parents = parents_from_W(self.W)
        return self._parents

    @property
    def depths(self) -> np.ndarray:
        if self._depths is None:
            self._depths = depths_from_parents(self.parents)
        return self._depths

    @property
    def height(self) -> int:
        return int(self.depths.max())

    def children(self, u: int) -> np.ndarray:
        """Children of u in lexicographic order."""
        return np.flatnonzero(self.parents == u)

    def __eq__(self, other):
        return isinstance(other, PlaneTree) and np.array_equal(self.child_counts, other.child_counts)

    def __repr__(self):
        return f"PlaneTree(size={self.size})"


def _check_excursion(W: np.ndarray):
    n = W.size - 1
    if n < 1:
        raise InvalidExcursion("empty path")
    if np.any(np.diff(W) < -1):
        i = int(np.flatnonzero(np.diff(W) < -1)[0])
        raise InvalidExcursion(f"step below -1 at index {i}")
    neg = np.flatnonzero(W[:-1] < 0)
    if neg.size:
        raise InvalidExcursion(f"path negative at index {int(neg[0])}")
    if W[-1] != -1:
        raise InvalidExcursion(f"path ends at {int(W[-1])}, not -1 (index {n})")


def decode_lukasiewicz(path: WalkPath) -> PlaneTree:
    """Tree whose child counts are increments + 1."""
    _check_excursion(path.W)
    t = PlaneTree(path.increments + 1, validate=False)
    t._W = path.W
    return t


def encode_lukasiewicz(tree: PlaneTree) -> WalkPath:
    return WalkPath(tree.child_counts - 1)


# ---------------------------------------------------------------------------
# parents and depths

def parents_from_W(W: np.ndarray) -> np.ndarray:
    """parent(j) = max{i < j : W_i <= W_j} for vertices j = 1..n-1; -1 for
    the root.  Binary lifting over a sparse table of range minima."""
    n = W.size - 1
    if n <= 1:
        return np.full(max(n, 1), -1, dtype=np.int64)
    V = W[:n]
    dt = np.int32 if np.abs(V).max() < 2**31 - 1 else np.int64
    levels = [V.astype(dt)]
    while (1 << len(levels)) <= n:
        prev = levels[-1]
        h = 1 << (len(levels) - 1)
        levels.append(np.minimum(prev[:-h], prev[h:]))
    j = np.arange(1, n, dtype=np.int64)
    target = V[1:]
    pos = j.copy()                     # exclusive right end of the skipped run
    for k in range(len(levels) - 1, -1, -1):
        step = 1 << k
        lvl = levels[k]
        start = pos - step
        ok = start >= 0
        idx = np.where(ok, start, 0)
        idx = np.minimum(idx, lvl.size - 1)
        skip = ok & (lvl[idx] > target)
        pos = np.where(skip, start, pos)
    out = np.empty(n, dtype=np.int64)
    out[0] = -1
    out[1:] = pos - 1
    return out


def depths_from_parents(parents: np.ndarray) -> np.ndarray:
    """Depth of every vertex by pointer jumping (doubling along ancestors)."""
    depth = (parents >= 0).astype(np.int64)
    anc = parents.copy()
    while np.any(anc >= 0):
        live = anc >= 0
        a = anc[live]
        depth[live] += depth[a]
        anc[live] = anc[a]
    return depth


def min_record_count(W: np.ndarray, u: int) -> int:
    """#{0 <= i < u : W_i = min W[i..u]}, the depth of vertex u."""
    if u == 0:
        return 0
    seg = W[: u + 1]
    sufmin = np.minimum.accumulate(seg[::-1])[::-1]
    return int(np.count_nonzero(seg[:u] <= sufmin[1:]))


def depth_by_parent_chasing(W: np.ndarray, u: int) -> int:
    """Depth of u by walking up parent(j) = max{i < j : W_i <= W_j}."""
    d = 0
    j = int(u)
    while j > 0:
        j = int(np.flatnonzero(W[:j] <= W[j])[-1])
        d += 1
    return d


def subtree_end(W: np.ndarray, u: int) -> int:
    """One past the last descendant of u: first j > u with W_j < W_u."""
    below = np.flatnonzero(W[u + 1:] < W[u])
    return int(u + 1 + below[0])


# ---------------------------------------------------------------------------
# samplers

def _walk_until_negative(law, rng, cap, first_block=64):
    """Increments of a free walk up to and including its first step to -1."""
    parts = []
    w = 0
    t = 0
    block = first_block
    while True:
        x = sample_steps(law, rng, block)
        W = w + np.cumsum(x)
        neg = np.flatnonzero(W < 0)
        if neg.size:
            parts.append(x[: neg[0] + 1])
            return np.concatenate(parts)
        parts.append(x)
        t += block
        w = int(W[-1])
        if t > cap:
            raise CapExceeded(f"tree larger than {cap} vertices")
        block = min(block * 2, 1 << 20)


def sample_bgw_free(law, rng: np.random.Generator, height_cap=None, size_cap=10**8) -> PlaneTree:
    """Unconditioned BGW tree: free walk until it first hits -1."""
    inc = _walk_until_negative(law, rng, size_cap, first_block=8)
    tree = PlaneTree(inc + 1, validate=False)
    if height_cap is not None and tree.height > height_cap:
        raise CapExceeded(f"height {tree.height} above {height_cap}")
    return tree


def sample_exact_n_batch(law, n: int, m: int, rng: np.random.Generator, budget=10**10,
                         return_info=False):
    """m exact draws of the child counts of T_n (rows), by bridge rejection.

    Candidates are n-1 free steps, completed with probability
    P(X = -1 - W_{n-1}) / max_x P(X = x); the resulting bridge goes through
    Vervaat.  Acceptance per candidate is P(W_n = -1) / max_x P(X = x).
    """
    mu = _offspring(law)
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        out = np.zeros((m, 1), dtype=np.int64)
        return (out, {"candidates": m, "accepted": m}) if return_info else out
    pmax = float(mu.head.max())
    if mu.has_tail:
        pmax = max(pmax, float(mu.pmf(mu.k_min)))
    out = np.empty((m, n), dtype=np.int64)
    got = 0
    tried = 0
    rows = max(1, (1 << 21) // n)
    while got < m:
        x = sample_steps(mu, rng, rows * (n - 1)).reshape(rows, n - 1)
        tried += rows
        last = -1 - x.sum(axis=1)
        acc = rng.random(rows) * pmax < mu.pmf(last + 1)
        for row, l in zip(x[acc], last[acc]):
            inc = np.append(row, l)
            W = np.concatenate([[0], np.cumsum(inc)])
            out[got] = np.roll(inc, -vervaat_shift(W)) + 1
            got += 1
            if got == m:
                break
        if got < m and tried * (n - 1) > budget:
            raise BudgetExceeded(f"exact-n rejection used {tried * (n - 1)} steps")
    if return_info:
        return out, {"candidates": tried, "accepted": got}
    return out


def sample_tree_exact_n(law, n: int, rng: np.random.Generator, budget=10**10,
                        return_info=False):
    """Exact draw of T_n (BGW conditioned on n vertices)."""
    k, info = sample_exact_n_batch(law, n, 1, rng, budget=budget, return_info=True)
    tree = PlaneTree(k[0], validate=False)
    return (tree, info) if return_info else tree


def sample_tree_approx_Zn(law, n: int, rng: np.random.Generator, return_info=False):
    """decode(Z^(n)), redrawn until Z^(n) is an excursion."""
    path, tries, on_E = sample_Z_n(law, n, rng)
    tree = PlaneTree(path.increments + 1, validate=False)
    tree._W = path.W
    if return_info:
        return tree, {"tries": tries, "on_E_n": on_E}
    return tree


def sample_tree_tail(law, n: int, rng: np.random.Generator, strategy="vecZ",
                     constants=None, budget=10**10, store_cap=1 << 24, return_info=False):
    """T_{>=n}: BGW conditioned on at least n vertices.

    ``rejection`` redraws free walks until zeta >= n; ``vecZ`` decodes the
    tail coupling run until it first hits -1.  Returns None for the tree when
    the excursion is longer than ``store_cap`` (statistics are still in the
    info dict when ``return_info``)."""
    mu = _offspring(law)
    n = int(n)
    if strategy == "rejection":
        used = 0
        attempts = 0
        while True:
            attempts += 1
            inc = _walk_until_negative(mu, rng, cap=budget, first_block=8)
            used += inc.size
            if inc.size >= n:
                tree = PlaneTree(inc + 1, validate=False)
                info = {"attempts": attempts, "steps": used}
                return (tree, info) if return_info else tree
            if used > budget:
                raise BudgetExceeded(f"tail rejection used {used} steps")
    if strategy != "vecZ":
        raise ValueError(f"unknown strategy {strategy!r}")
    k = constants or compute_constants(mu, n)
    tw = build_vecZ_n(mu, k, n, rng, strategy="reversal", store_cap=store_cap)
    inc = tw.stream.increments()
    tree = None if inc is None else PlaneTree(inc + 1, validate=False)
    if return_info:
        return tree, {"tail_walk": tw}
    return tree


# ---------------------------------------------------------------------------
# statistics

@dataclass
class TreeStats:
    size: int
    degrees: np.ndarray          # sorted descending (possibly only the top ones)
    u_star: int
    h_star: int
    height: int | None

    def record(self, top=32) -> dict:
        return {"size": int(self.size), "deg": [int(d) for d in self.degrees[:top]],
                "u_star": int(self.u_star), "h_star": int(self.h_star),
                "height": None if self.height is None else int(self.height)}


def tree_stats(tree: PlaneTree, top=None, with_height=True, check=True) -> TreeStats:
    """Sorted out-degrees, first max-degree vertex U*, its depth H*, height.

    H* is the min-record count on the Lukasiewicz path; with ``check`` it is
    recomputed by parent chasing and the two must agree."""
    k = tree.child_counts
    u = int(np.argmax(k))
    W = tree.W
    h = min_record_count(W, u)
    if check:
        h2 = depth_by_parent_chasing(W, u)
        if h != h2:
            raise AssertionError(f"H* mismatch: min-record {h} vs parents {h2}")
    if top is None:
        deg = np.sort(k)[::-1]
    else:
        t = min(top, k.size)
        deg = np.sort(np.partition(k, k.size - t)[k.size - t:])[::-1]
    height = tree.height if with_height else None
    return TreeStats(size=tree.size, degrees=deg, u_star=u, h_star=h, height=height)


def stream_stats(stream: ExcursionStream, height=None) -> TreeStats:
    """Tree statistics read off a streamed excursion."""
    return TreeStats(size=int(stream.hit), degrees=stream.top + 1, u_star=int(stream.u_star),
                     h_star=int(stream.h_star), height=height)
