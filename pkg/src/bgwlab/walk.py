"""Random-walk engine: paths, fluctuation markers, Vervaat transform and the
couplings Z^(n) (local regime) and vec-Z^(n) (tail regime).

Steps are X = offspring - 1 >= -1.  Paths are int64 prefix sums W_0 = 0, W_1, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .offspring import OffspringLaw, StepLaw
from .scaling import ScalingConstants, compute_constants, slowly_varying_L, tail_prob

__all__ = [
    "WalkPath",
    "Markers",
    "BudgetExceeded",
    "sample_steps",
    "sample_walk",
    "fluctuation_markers",
    "markers_batch",
    "ladder_epochs_record",
    "ladder_epochs_chained",
    "first_negative",
    "last_ladder_epoch",
    "time_reverse",
    "vervaat",
    "vervaat_shift",
    "is_excursion",
    "build_Z_n",
    "sample_Z_n",
    "ExcursionStream",
    "TailWalk",
    "build_vecZ_n",
    "sample_big_jump",
    "estimate_fluctuation_tails",
    "survival_counts",
    "CHUNK",
]

CHUNK = 1 << 20


class BudgetExceeded(RuntimeError):
    """A rejection sampler ran past its step budget."""


def _offspring(law) -> OffspringLaw:
    return law.law if isinstance(law, StepLaw) else law


def sample_steps(law, rng: np.random.Generator, size: int) -> np.ndarray:
    """i.i.d. steps X = offspring - 1 as int64."""
    x = _offspring(law).sample(rng, size)
    x -= 1
    return x


@dataclass
class Markers:
    zeta: int | None
    ladder_epochs: np.ndarray
    I_n: int
    H_n: int


class WalkPath:
    """Increment sequence with cached prefix sums and lazy markers."""

    __slots__ = ("increments", "_W", "_markers")

    def __init__(self, increments):
        inc = np.asarray(increments, dtype=np.int64)
        if inc.ndim != 1:
            raise ValueError("increments must be 1-d")
        if inc.size and inc.min() < -1:
            raise ValueError("increments must be >= -1")
        self.increments = inc
        self._W = None
        self._markers = None

    @classmethod
    def _unchecked(cls, inc):
        # used for Z^(n) before the cycle lemma applies (last step may be < -1)
        obj = cls.__new__(cls)
        obj.increments = np.asarray(inc, dtype=np.int64)
        obj._W = None
        obj._markers = None
        return obj

    @property
    def W(self) -> np.ndarray:
        if self._W is None:
            W = np.empty(self.increments.size + 1, dtype=np.int64)
            W[0] = 0
            np.cumsum(self.increments, out=W[1:])
            self._W = W
        return self._W

    prefix_sums = W

    def __len__(self):
        return self.increments.size

    @property
    def markers(self) -> Markers:
        if self._markers is None:
            self._markers = fluctuation_markers(self)
        return self._markers

    def __eq__(self, other):
        return isinstance(other, WalkPath) and np.array_equal(self.increments, other.increments)

    def __repr__(self):
        return f"WalkPath(n={len(self)}, W_n={int(self.W[-1])})"


def sample_walk(law, n: int, rng: np.random.Generator) -> WalkPath:
    return WalkPath._unchecked(sample_steps(law, rng, int(n)))


# ---------------------------------------------------------------------------
# fluctuation functionals

def first_negative(W: np.ndarray):
    """zeta = first i >= 1 with W_i < 0, or None."""
    neg = np.flatnonzero(W[1:] < 0)
    return int(neg[0]) + 1 if neg.size else None


def ladder_epochs_record(W: np.ndarray) -> np.ndarray:
    """Weak ladder epochs: j with W_j >= max_{k<j} W_k (0 always included)."""
    if W.size == 1:
        return np.zeros(1, dtype=np.int64)
    prev_max = np.maximum.accumulate(W[:-1])
    return np.concatenate([[0], np.flatnonzero(W[1:] >= prev_max) + 1]).astype(np.int64)


def ladder_epochs_chained(W) -> list:
    """T_{i+1} = inf{j > T_i : W_j >= W_{T_i}} literally (test oracle)."""
    out = [0]
    t = 0
    for j in range(1, len(W)):
        if W[j] >= W[t]:
            out.append(j)
            t = j
    return out


def last_ladder_epoch(W: np.ndarray) -> int:
    """Last weak ladder epoch: the last time the overall maximum is attained."""
    return int(W.size - 1 - np.argmax(W[::-1]))


def fluctuation_markers(path: WalkPath) -> Markers:
    W = path.W
    epochs = ladder_epochs_record(W)
    return Markers(zeta=first_negative(W), ladder_epochs=epochs,
                   I_n=int(epochs[-1]), H_n=int(epochs.size))


def markers_batch(inc: np.ndarray):
    """Row-wise (zeta or len+1, I_n, H_n) for a 2-d array of increments."""
    inc = np.asarray(inc, dtype=np.int64)
    m, n = inc.shape
    W = np.zeros((m, n + 1), dtype=np.int64)
    np.cumsum(inc, axis=1, out=W[:, 1:])
    neg = W[:, 1:] < 0
    zeta = np.where(neg.any(axis=1), np.argmax(neg, axis=1) + 1, n + 1)
    I = n - np.argmax(W[:, ::-1], axis=1)
    if n:
        prev_max = np.maximum.accumulate(W[:, :-1], axis=1)
        H = 1 + np.count_nonzero(W[:, 1:] >= prev_max, axis=1)
    else:
        H = np.ones(m, dtype=np.int64)
    return zeta, I, H


def time_reverse(path: WalkPath) -> WalkPath:
    """W^[n]_i = W_n - W_{n-i}: increments read right to left."""
    return WalkPath._unchecked(path.increments[::-1].copy())


def vervaat_shift(W: np.ndarray) -> int:
    """First argmin of W_0..W_n."""
    return int(np.argmin(W))


def vervaat(path: WalkPath) -> WalkPath:
    """Cyclic shift of the increments starting after the first minimum."""
    if len(path) == 0:
        raise ValueError("vervaat needs a nonempty path")
    k = vervaat_shift(path.W)
    return WalkPath._unchecked(np.roll(path.increments, -k))


def is_excursion(path: WalkPath) -> bool:
    """W_i >= 0 for i < n and W_n = -1."""
    W = path.W
    return bool(W[-1] == -1 and (W.size == 1 or W[:-1].min() >= 0))


def build_Z_n(law, n: int, rng: np.random.Generator) -> WalkPath:
    """Z^(n): n-1 free steps, the point -1 appended, then Vervaat.

    The result ends at -1.  It is an excursion iff W_{n-1} <= 0, i.e. iff the
    appended step is >= -1.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    inc = np.empty(n, dtype=np.int64)
    inc[: n - 1] = sample_steps(law, rng, n - 1)
    w_last = int(inc[: n - 1].sum())
    inc[n - 1] = -1 - w_last
    return vervaat(WalkPath._unchecked(inc))


def event_E_n(path_before_vervaat_increments: np.ndarray) -> bool:
    """max of the first n-1 increments < -1 - W_{n-1}."""
    inc = path_before_vervaat_increments
    if inc.size <= 1:
        return True
    return bool(inc[:-1].max() < inc[-1])


def sample_Z_n(law, n: int, rng: np.random.Generator, max_tries: int = 10**6):
    """Z^(n) redrawn until it is an excursion (W_{n-1} <= 0).

    Returns (path, tries, on_E_n) where on_E_n flags the event that the
    appended step is the unique largest one.
    """
    n = int(n)
    for tries in range(1, max_tries + 1):
        inc = np.empty(n, dtype=np.int64)
        inc[: n - 1] = sample_steps(law, rng, n - 1)
        w_last = int(inc[: n - 1].sum())
        if w_last > 0:
            continue
        inc[n - 1] = -1 - w_last
        on_E = event_E_n(inc)
        k = vervaat_shift(np.concatenate([[0], np.cumsum(inc)]))
        return WalkPath._unchecked(np.roll(inc, -k)), tries, on_E
    raise BudgetExceeded(f"no valid Z^(n) in {max_tries} tries")


# ---------------------------------------------------------------------------
# streaming excursion statistics

class ExcursionStream:
    """Consume increments chunk by chunk until the walk first hits -1.

    Tracks the hitting time, the ``top_k`` largest increments, the first
    position of the largest increment (u_star) and the number of
    min-records H*(u_star) = #{i < u : W_i = min W[i..u]}, and keeps
    W_0..W_keep.  The full increment sequence is retained while its length
    stays below ``store_cap``.
    """

    def __init__(self, top_k=32, keep=0, store_cap=1 << 24):
        self.top_k = top_k
        self.keep = keep
        self.store_cap = store_cap
        self.t = 0                    # number of increments consumed
        self.w = 0                    # current W_t
        self.hit = None
        self.top = np.empty(0, dtype=np.int64)
        self.max_inc = None
        self.u_star = None
        self.h_star = None
        self.stack = np.zeros(1, dtype=np.int64)   # suffix-min records of W_0..W_t
        self.head = [np.zeros(1, dtype=np.int64)]
        self._kept = 1
        self.chunks = []
        self.stored = True

    @property
    def done(self):
        return self.hit is not None

    def feed(self, inc: np.ndarray) -> bool:
        """Feed increments; returns True once -1 has been reached.  Increments
        after the hitting time are ignored."""
        if self.done or inc.size == 0:
            return self.done
        W = self.w + np.cumsum(inc)
        neg = np.flatnonzero(W < 0)
        if neg.size:
            m = int(neg[0]) + 1
            inc = inc[:m]
            W = W[:m]
        # top-k and first maximum
        cmax_pos = int(np.argmax(inc))
        cmax = int(inc[cmax_pos])
        if self.max_inc is None or cmax > self.max_inc:
            self.max_inc = cmax
            self.u_star = self.t + cmax_pos
            # H* = (#stack entries <= min over W_{t+1..u}) + in-chunk records
            seg = W[:cmax_pos]                  # W_{t+1} .. W_u
            if seg.size:
                lo = int(seg.min())
                below = int(np.searchsorted(self.stack, lo, side="right"))
                # r in chunk, r < u, with W_r <= min W(r..u]
                sufmin = np.minimum.accumulate(seg[::-1])[::-1]
                after = np.concatenate([sufmin[1:], [np.iinfo(np.int64).max]])
                # the last entry of seg is W_u itself, which is not counted
                self.h_star = below + int(np.count_nonzero((seg <= after)[:-1]))
            else:
                self.h_star = int(self.stack.size) - 1
        if self.top_k:
            k = min(self.top_k, inc.size)
            part = -np.partition(-inc, k - 1)[:k]
            self.top = np.sort(np.concatenate([self.top, part]))[::-1][: self.top_k]
        # update the suffix-min stack
        lo = int(W.min())
        keep_old = self.stack[: np.searchsorted(self.stack, lo, side="right")]
        sufmin = np.minimum.accumulate(W[::-1])[::-1]
        after = np.concatenate([sufmin[1:], [np.iinfo(np.int64).max]])
        self.stack = np.concatenate([keep_old, W[W <= after]])
        # retained prefix of W
        if self._kept <= self.keep:
            take = min(self.keep + 1 - self._kept, W.size)
            self.head.append(W[:take].copy())
            self._kept += take
        if self.stored:
            if self.t + inc.size <= self.store_cap:
                self.chunks.append(inc.copy())
            else:
                self.stored = False
                self.chunks = []
        self.t += inc.size
        self.w = int(W[-1])
        if neg.size:
            self.hit = self.t
        return self.done

    def head_values(self) -> np.ndarray:
        return np.concatenate(self.head)

    def increments(self):
        if not self.stored:
            return None
        return np.concatenate(self.chunks) if self.chunks else np.empty(0, np.int64)


# ---------------------------------------------------------------------------
# tail coupling

@dataclass
class TailWalk:
    """vec-Z^(n), possibly without its full path.

    The prefix occupies W_0..W_I (all >= 0), the big jump is increment I,
    then a free walk runs until it first hits -1 at time ``hit``.
    """
    n: int
    I: int
    jump: int
    hit: int | None
    stream: ExcursionStream
    strategy: str
    budget_used: int = 0
    fallback: bool = False

    @property
    def path(self) -> WalkPath | None:
        inc = self.stream.increments()
        return None if inc is None else WalkPath._unchecked(inc)


def sample_big_jump(law, threshold: float, rng: np.random.Generator, size=None):
    """X conditioned on X >= threshold, by inversion of the offspring tail."""
    mu = _offspring(law)
    x0 = int(math.ceil(threshold))
    k0 = x0 + 1                       # offspring >= k0
    m = 1 if size is None else int(size)
    s0 = float(mu.survival(k0))
    if s0 <= 0:
        raise ValueError("no mass above threshold")
    v = (1.0 - rng.random(m)) * s0    # target survival levels in (0, s0]
    out = np.empty(m, dtype=np.int64)
    if mu.has_tail and k0 >= mu.K_head:
        ratio = v / float(mu.survival(mu.k_min))
        out[:] = mu._invert_tail(ratio)
    else:
        # generic: largest k >= k0 with survival(k) >= v
        kmax = mu.K_head + 1
        ks = np.arange(k0, kmax)
        sv = mu.survival(ks)
        idx = np.searchsorted(-sv, -v, side="right") - 1
        out[:] = ks[np.maximum(idx, 0)]
        if mu.has_tail:
            far = idx >= ks.size - 1
            if far.any():
                out[far] = mu._invert_tail(v[far] / float(mu.survival(mu.k_min)))
    out -= 1
    return int(out[0]) if size is None else out


def _rejection_prefix(law, j: int, rng, budget: int):
    """A j-step walk conditioned on W_1..W_j >= 0, by rejection."""
    used = 0
    while True:
        inc_parts = []
        w = 0
        t = 0
        block = 16
        ok = True
        while t < j:
            b = min(block, j - t)
            x = sample_steps(law, rng, b)
            used += b
            W = w + np.cumsum(x)
            if W.min() < 0:
                ok = False
                break
            inc_parts.append(x)
            w = int(W[-1])
            t += b
            block *= 2
        if used > budget:
            raise BudgetExceeded(f"prefix rejection used {used} steps")
        if ok:
            inc = np.concatenate(inc_parts) if inc_parts else np.empty(0, np.int64)
            return inc, used


def build_vecZ_n(law, constants: ScalingConstants | None, n: int, rng: np.random.Generator,
                 strategy: str = "reversal", *, top_k=32, keep=None, store_cap=1 << 24,
                 max_steps=10**10, budget=10**9, chunk=CHUNK, horizon=None) -> TailWalk:
    """vec-Z^(n): prefix, jump X | X >= |b_n|, then a free walk to -1.

    ``strategy="reversal"`` reuses the auxiliary walk's reversed pre-I_n block
    as the prefix; ``"definitional"`` draws the prefix by rejection and falls
    back to reversal when the step budget is exhausted.

    With ``horizon`` the walk is only run for that many steps; ``hit`` is
    then None unless -1 was reached earlier, and the stream statistics cover
    the simulated part only.
    """
    n = int(n)
    if constants is None:
        constants = compute_constants(_offspring(law), n)
    if strategy not in ("reversal", "definitional"):
        raise ValueError(f"unknown strategy {strategy!r}")
    aux = sample_steps(law, rng, n)
    W = np.concatenate([[0], np.cumsum(aux)])
    I = last_ladder_epoch(W)
    used = 0
    fallback = False
    if strategy == "definitional":
        try:
            prefix, used = _rejection_prefix(law, I, rng, budget)
        except BudgetExceeded:
            fallback = True
            prefix = aux[:I][::-1].copy()
    else:
        prefix = aux[:I][::-1].copy()
    del W, aux
    jump = sample_big_jump(law, abs(constants.b_n), rng)
    stream = ExcursionStream(top_k=top_k, keep=n if keep is None else keep, store_cap=store_cap)
    stream.feed(np.concatenate([prefix, [jump]]).astype(np.int64))
    while not stream.done:
        if stream.t > max_steps:
            raise BudgetExceeded(f"tail walk exceeded {max_steps} steps")
        if horizon is not None:
            if stream.t >= horizon:
                break
            stream.feed(sample_steps(law, rng, min(chunk, horizon - stream.t)))
        else:
            stream.feed(sample_steps(law, rng, chunk))
    return TailWalk(n=n, I=I, jump=jump, hit=stream.hit, stream=stream,
                    strategy=strategy, budget_used=used, fallback=fallback)


# ---------------------------------------------------------------------------
# Monte Carlo fluctuation tails

def survival_counts(law, n_grid, reps, rng, kind, batch=1 << 18):
    """Counts of walks with zeta > n (kind='zeta') or T_1 > n (kind='T1') for
    every n in n_grid, simulated in blocks of doubling length."""
    n_grid = np.asarray(n_grid, dtype=np.int64)
    nmax = int(n_grid.max())
    counts = np.zeros(n_grid.size, dtype=np.int64)
    done = 0
    while done < reps:
        m = min(batch, reps - done)
        done += m
        w = np.zeros(m, dtype=np.int64)
        alive_to = np.full(m, -1, dtype=np.int64)   # death time, -1 = alive
        active = np.arange(m)
        t = 0
        block = 8
        while active.size and t < nmax:
            b = min(block, nmax - t)
            x = sample_steps(law, rng, active.size * b).reshape(active.size, b)
            W = w[active, None] + np.cumsum(x, axis=1)
            bad = (W < 0) if kind == "zeta" else (W >= 0)
            hit = bad.any(axis=1)
            first = np.argmax(bad, axis=1)
            dead = active[hit]
            alive_to[dead] = t + first[hit] + 1
            w[active[~hit]] = W[~hit, -1]
            active = active[~hit]
            t += b
            # keep the work per block roughly constant as walks die
            block = min(block * 2, max(8, (1 << 22) // max(active.size, 1)))
        life = np.where(alive_to < 0, np.iinfo(np.int64).max, alive_to)
        counts += (life[:, None] > n_grid[None, :]).sum(axis=0)
    return counts


def estimate_fluctuation_tails(law, n_grid, reps, rng, reps_T1=None, z=1.96):
    """Monte Carlo P(zeta > n), P(zeta >= n), P(T_1 > n) with Wilson intervals,
    and the diagnostic ratios

        r1 = P(zeta > n) |b_n| / (L(|b_n|) Lambda(n))
        r2 = P(T_1 > n) Lambda(n)
        r3 = P(X >= |b_n|) / (P(zeta >= n) P(T_1 > n))
    """
    mu = _offspring(law)
    n_grid = np.asarray(sorted(int(v) for v in n_grid), dtype=np.int64)
    reps_T1 = reps if reps_T1 is None else reps_T1
    grid_all = np.concatenate([n_grid, n_grid - 1])
    cz = survival_counts(mu, grid_all, reps, rng, "zeta")
    ct = survival_counts(mu, n_grid, reps_T1, rng, "T1")
    rows = []
    for i, n in enumerate(n_grid):
        k = compute_constants(mu, int(n))
        p_gt = cz[i] / reps
        p_ge = cz[i + n_grid.size] / reps
        p_t1 = ct[i] / reps_T1
        b = abs(k.b_n)
        bi = max(int(round(b)), 1)
        L = float(slowly_varying_L(mu, bi))
        lam = k.lambda_n
        jump = float(tail_prob(mu, math.ceil(b)))
        rows.append({
            "n": int(n),
            "p_zeta_gt": p_gt, "p_zeta_gt_ci": _wilson(cz[i], reps, z),
            "p_zeta_ge": p_ge, "p_zeta_ge_ci": _wilson(cz[i + n_grid.size], reps, z),
            "p_T1_gt": p_t1, "p_T1_gt_ci": _wilson(ct[i], reps_T1, z),
            "r1": p_gt * b / (L * lam) if L > 0 else math.nan,
            "r2": p_t1 * lam,
            "r3": jump / (p_ge * p_t1) if p_ge * p_t1 > 0 else math.inf,
            "reps": int(reps), "reps_T1": int(reps_T1),
        })
    return rows


def _wilson(k, n, z=1.96):
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))
