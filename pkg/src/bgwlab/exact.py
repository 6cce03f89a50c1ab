"""Exact small-n oracles for walks with steps >= -1.

Dynamic programs give the laws of W_k, zeta, I_n, the ladder indicators and
P(W_k >= 0) for k <= 14.  Enumeration over support^n gives full path laws for
the total-variation checks at n <= 10.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .offspring import OffspringLaw, StepLaw

__all__ = [
    "FiniteStep",
    "finite_step",
    "ExactTables",
    "exact_functional_law",
    "enumerate_walks",
    "iter_walks",
    "path_law",
    "excursion_law",
    "Zn_law",
    "bridge_vervaat_law",
    "reversal_prefix_law",
    "conditioned_prefix_mixture",
    "tv_distance",
    "all_sum_minus_one",
]

N_MAX = 14


@dataclass(frozen=True)
class FiniteStep:
    """Step law on -1..K as a probability vector p[i + 1] = P(X = i)."""

    probs: np.ndarray
    lumped: float = 0.0        # tail mass moved onto the top value

    @property
    def K(self) -> int:
        return self.probs.size - 2

    @property
    def values(self) -> np.ndarray:
        return np.arange(-1, self.K + 1)


def finite_step(law, K: int | None = None) -> FiniteStep:
    """Exact step law for finite support, or truncation at K with P(X >= K)
    lumped onto K."""
    mu = law.law if isinstance(law, StepLaw) else law
    if not mu.has_tail and (K is None or K >= mu.K_head - 1):
        return FiniteStep(np.asarray(mu.head, dtype=float).copy())
    if K is None:
        raise ValueError("a law with a tail needs a truncation level K")
    p = mu.pmf(np.arange(0, K + 1)).astype(float)   # X = -1..K-1
    lumped = float(mu.survival(K + 1))
    p = np.concatenate([p, [lumped]])
    return FiniteStep(p, lumped)


@dataclass
class ExactTables:
    n_max: int
    step: FiniteStep
    w_pmf: list = field(default_factory=list)     # (offset, array) per k
    zeta_pmf: np.ndarray = None                   # index k: P(zeta = k)
    zeta_surv: np.ndarray = None                  # index k: P(zeta > k)
    nonneg: np.ndarray = None                     # index k: P(W_k >= 0)
    ladder: np.ndarray = None                     # index j: P(j is a ladder epoch)
    I_pmf: list = field(default_factory=list)     # index n: array over j
    T1_surv: np.ndarray = None                    # index m: P(T_1 > m)
    joint_zeta_I: dict = None                     # n -> array [zeta_or_n+1, j]
    escaped: float = 0.0

    def w_prob(self, k: int, v: int) -> float:
        off, arr = self.w_pmf[k]
        i = v - off
        return float(arr[i]) if 0 <= i < arr.size else 0.0


def exact_functional_law(law, n_max: int, K: int | None = None,
                         value_band: tuple | None = None, joint: bool = False) -> ExactTables:
    """Exact laws of walk functionals up to time n_max <= 14.

    ``value_band=(lo, hi)`` restricts the lattice; mass leaving it is
    accumulated in ``escaped``.  With ``joint=True`` the joint law of
    (zeta ^ (n+1), I_n) is also computed for every n <= n_max.
    """
    if n_max > N_MAX:
        raise ValueError(f"n_max <= {N_MAX}")
    st = law if isinstance(law, FiniteStep) else finite_step(law, K)
    p = st.probs
    Kx = st.K
    lo, hi = value_band if value_band is not None else (-n_max, n_max * Kx)
    out = ExactTables(n_max=n_max, step=st)
    escaped = 0.0

    # free walk: W_k pmf over [lo, hi]
    size = hi - lo + 1
    cur = np.zeros(size)
    cur[-lo] = 1.0
    out.w_pmf.append((lo, cur.copy()))
    nonneg = [1.0]
    for k in range(1, n_max + 1):
        nxt = np.zeros(size)
        for i, pi in enumerate(p):
            x = i - 1
            if pi == 0:
                continue
            if x >= 0:
                nxt[x:] += pi * cur[: size - x]
                escaped += pi * cur[size - x:].sum() if x else 0.0
            else:
                nxt[:-1] += pi * cur[1:]
                escaped += pi * cur[0]
        cur = nxt
        out.w_pmf.append((lo, cur.copy()))
        nonneg.append(cur[-lo:].sum())
    out.nonneg = np.array(nonneg)

    # killed walk: alive mass on [0, hi]
    alive = np.zeros(hi + 1)
    alive[0] = 1.0
    zeta_pmf = [0.0]
    zeta_surv = [1.0]
    for k in range(1, n_max + 1):
        nxt = np.zeros(hi + 1)
        died = p[0] * alive[0]
        for i, pi in enumerate(p):
            x = i - 1
            if pi == 0:
                continue
            if x >= 0:
                nxt[x:] += pi * alive[: hi + 1 - x]
            else:
                nxt[:-1] += pi * alive[1:]
        alive = nxt
        zeta_pmf.append(died)
        zeta_surv.append(alive.sum())
    out.zeta_pmf = np.array(zeta_pmf)
    out.zeta_surv = np.array(zeta_surv)

    # ladder DP over (D = running max - W, last ladder epoch); D <= n_max
    Dmax = n_max + 1
    state = np.zeros((Dmax + 1, n_max + 1))
    state[0, 0] = 1.0
    ladder = [1.0]
    out.I_pmf.append(np.array([1.0]))
    for t in range(1, n_max + 1):
        nxt = np.zeros_like(state)
        lad = 0.0
        for i, pi in enumerate(p):
            x = i - 1
            if pi == 0:
                continue
            for D in range(Dmax + 1):
                row = state[D]
                if not row.any():
                    continue
                if D - x <= 0:                      # new weak record
                    mass = pi * row.sum()
                    nxt[0, t] += mass
                    lad += mass
                else:
                    nxt[min(D - x, Dmax)] += pi * row
        state = nxt
        ladder.append(lad)
        out.I_pmf.append(state.sum(axis=0)[: t + 1].copy())
    out.ladder = np.array(ladder)
    out.T1_surv = np.array([pm[0] for pm in out.I_pmf])

    if joint:
        out.joint_zeta_I = {n: _joint_zeta_I(p, n) for n in range(1, n_max + 1)}
    out.escaped = float(escaped)
    return out


def _joint_zeta_I(p: np.ndarray, n: int) -> np.ndarray:
    """Array A[z, j] = P(zeta ^ (n+1) = z, I_n = j), by a DP over
    (W, running max, zeta-so-far, last ladder epoch)."""
    Kx = p.size - 2
    lo, hi = -n, n * Kx
    nw = hi - lo + 1
    nm = hi + 1
    # state[w, m, z, j]; z = 0 means not yet negative
    state = {(0, 0, 0, 0): 1.0}
    for t in range(1, n + 1):
        nxt = {}
        for (w, m, z, j), pr in state.items():
            for i, pi in enumerate(p):
                if pi == 0:
                    continue
                w2 = w + i - 1
                m2 = max(m, w2)
                j2 = t if w2 >= m else j
                z2 = z if z else (t if w2 < 0 else 0)
                key = (w2, m2, z2, j2)
                nxt[key] = nxt.get(key, 0.0) + pr * pi
        state = nxt
    A = np.zeros((n + 2, n + 1))
    for (w, m, z, j), pr in state.items():
        A[z if z else n + 1, j] += pr
    del nw, nm
    return A


# ---------------------------------------------------------------------------
# enumeration

def iter_walks(step: FiniteStep, n: int, chunk: int = 1 << 20):
    """Yield (inc [m, n] int8, prob [m]) blocks covering support^n."""
    support = np.flatnonzero(step.probs > 0)
    vals = (support - 1).astype(np.int8)
    pv = step.probs[support]
    s = support.size
    total = s**n
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        inc = np.empty((codes.size, n), dtype=np.int8)
        prob = np.ones(codes.size)
        for k in range(n):
            digit = (codes // s ** (n - 1 - k)) % s
            inc[:, k] = vals[digit]
            prob *= pv[digit]
        yield inc, prob


def enumerate_walks(step: FiniteStep, n: int):
    """All increment sequences in support^n with their probabilities.

    Returns (inc [N, n] int8, prob [N])."""
    s = int(np.count_nonzero(step.probs > 0))
    if s**n > 4 * 10**6:
        raise ValueError("enumeration too large; use iter_walks")
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8), np.ones(1)
    return next(iter_walks(step, n, chunk=s**n))


def path_law(inc: np.ndarray, prob: np.ndarray) -> dict:
    """Aggregate probabilities per distinct increment row."""
    inc = np.ascontiguousarray(inc, dtype=np.int16)
    keys = inc.view(np.dtype((np.void, inc.dtype.itemsize * inc.shape[1]))).ravel()
    uniq, inv = np.unique(keys, return_inverse=True)
    tot = np.bincount(inv, weights=prob)
    return {bytes(u): float(t) for u, t in zip(uniq, tot)}


def _normalize(d: dict) -> dict:
    z = sum(d.values())
    return {k: v / z for k, v in d.items()}


def _rows_W(inc):
    W = np.zeros((inc.shape[0], inc.shape[1] + 1), dtype=np.int64)
    np.cumsum(inc, axis=1, out=W[:, 1:])
    return W


def excursion_law(step: FiniteStep, n: int) -> dict:
    """Law of (X_1..X_n) given zeta = n."""
    inc, prob = enumerate_walks(step, n)
    W = _rows_W(inc)
    ok = (W[:, -1] == -1) & (W[:, :-1].min(axis=1) >= 0)
    return _normalize(path_law(inc[ok], prob[ok]))


def _vervaat_rows(inc):
    W = _rows_W(inc)
    k = np.argmin(W, axis=1)
    n = inc.shape[1]
    cols = (k[:, None] + np.arange(n)[None, :]) % n
    return np.take_along_axis(inc, cols, axis=1)


def Zn_law(step: FiniteStep, n: int, valid_only: bool = False) -> dict:
    """Exact law of Z^(n) (optionally conditioned on being an excursion)."""
    pre, prob = enumerate_walks(step, n - 1)
    last = -1 - pre.astype(np.int64).sum(axis=1)
    inc = np.concatenate([pre.astype(np.int64), last[:, None]], axis=1)
    if valid_only:
        keep = last >= -1
        inc, prob = inc[keep], prob[keep]
    out = path_law(_vervaat_rows(inc), prob)
    return _normalize(out) if valid_only else out


def bridge_vervaat_law(step: FiniteStep, n: int) -> dict:
    """Law of vervaat(X_1..X_n) given W_n = -1."""
    inc, prob = enumerate_walks(step, n)
    ok = inc.astype(np.int64).sum(axis=1) == -1
    return _normalize(path_law(_vervaat_rows(inc[ok]), prob[ok]))


def reversal_prefix_law(step: FiniteStep, n: int) -> dict:
    """Law of the reversed block before the last ladder epoch of an n-step walk.

    Keys encode (I_n, reversed increments) as the increment row padded with a
    sentinel value 99."""
    inc, prob = enumerate_walks(step, n)
    W = _rows_W(inc)
    I = n - np.argmax(W[:, ::-1], axis=1)
    rows = np.full((inc.shape[0], n), 99, dtype=np.int64)
    for j in np.unique(I):
        sel = I == j
        if j:
            rows[sel, :j] = inc[sel, :j][:, ::-1]
    return path_law(rows, prob)


def conditioned_prefix_mixture(step: FiniteStep, n: int, I_pmf: np.ndarray) -> dict:
    """sum_j P(I_n = j) law(j-step walk | W_1..W_j >= 0), same keys as above."""
    out = {}
    for j, pj in enumerate(I_pmf):
        if pj == 0:
            continue
        inc, prob = enumerate_walks(step, j)
        W = _rows_W(inc)
        ok = W.min(axis=1) >= 0
        rows = np.full((int(ok.sum()), n), 99, dtype=np.int64)
        if j:
            rows[:, :j] = inc[ok]
        law = _normalize(path_law(rows, prob[ok]))
        for k, v in law.items():
            out[k] = out.get(k, 0.0) + pj * v
    return out


def tv_distance(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def all_sum_minus_one(n: int) -> np.ndarray:
    """Every sequence of n integers >= -1 with sum -1 (there are C(2n-2, n-1))."""
    # y_i = x_i + 1 >= 0 with sum n - 1: compositions via stars and bars
    from itertools import combinations
    m = n - 1
    rows = []
    for bars in combinations(range(m + n - 1), n - 1):
        prev = -1
        y = []
        for b in bars:
            y.append(b - prev - 1)
            prev = b
        y.append(m + n - 1 - prev - 1)
        rows.append(y)
    return np.array(rows, dtype=np.int64) - 1
