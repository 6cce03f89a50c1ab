"""Scaling constants a_n, b_n and the slowly varying functions L, ell*, Lambda."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .offspring import OffspringLaw, StepLaw

__all__ = [
    "ScalingConstants",
    "tail_prob",
    "point_prob",
    "slowly_varying_L",
    "ell_star",
    "truncated_mean",
    "compute_constants",
    "lambda_closed_form",
    "lambda_wiener_hopf",
    "wiener_hopf_coefficients",
    "ladder_survival_from_nonneg",
]


def _law(law) -> OffspringLaw:
    return law.law if isinstance(law, StepLaw) else law


@dataclass(frozen=True)
class ScalingConstants:
    n: int
    a_n: int
    b_n: float
    ell_star_a_n: float
    lambda_n: float

    def to_dict(self):
        return asdict(self)


def tail_prob(law, x):
    """P(X >= x) for the step law X = offspring - 1."""
    return _law(law).survival(np.asarray(x, dtype=np.int64) + 1)


def point_prob(law, i):
    """P(X = i)."""
    return _law(law).pmf(np.asarray(i, dtype=np.int64) + 1)


def slowly_varying_L(law, x):
    """L(x) = x P(X >= x), the operational slowly varying function."""
    x = np.asarray(x, dtype=np.int64)
    return x * tail_prob(law, x)


def ell_star(law, x) -> float:
    """ell*(x) = sum_{k>=x} P(X >= k), for integer x >= 1.

    Rewritten as sum_{j>=x+1} (j - x) mu(j) so only the two tail series are
    needed.
    """
    x = int(x)
    if x < 1:
        raise ValueError("ell_star needs x >= 1")
    mu = _law(law)
    return mu.partial_moment(x + 1) - x * float(mu.survival(x + 1))


def truncated_mean(law, a: int) -> float:
    """sum_{i=-1}^{a} i P(X = i)."""
    mu = _law(law)
    a = int(a)
    if a < -1:
        return 0.0
    m = a + 2                     # offspring values 0..a+1
    K = mu.K_head
    if m <= K:
        js = np.arange(m)
        return math.fsum((js - 1) * mu.head[:m])
    head = math.fsum((np.arange(K) - 1) * mu.head)
    if not mu.has_tail:
        return head
    # tail block k_min..a+1 via differences of the tail series
    moment = mu.partial_moment(K) - mu.partial_moment(m)
    mass = float(mu.survival(K)) - float(mu.survival(m))
    return head + (moment - mass)


def _a_n(mu: OffspringLaw, n: int) -> int:
    # smallest a with n P(X >= a) <= 1
    def ok(a):
        return n * float(mu.survival(a + 1)) <= 1.0
    if ok(-1):
        return -1
    lo, hi = -1, 1
    while not ok(hi):
        lo, hi = hi, 2 * hi
        if hi > 2**62:
            raise ValueError("no bracket for a_n")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@lru_cache(maxsize=4096)
def _constants_cached(law_json: str, n: int) -> ScalingConstants:
    mu = OffspringLaw.from_json(law_json)
    return _compute(mu, n)


def _compute(mu: OffspringLaw, n: int) -> ScalingConstants:
    a = _a_n(mu, n)
    b = n * truncated_mean(mu, a)
    es = ell_star(mu, max(a, 1))
    lam = 1.0 / es if es > 0 else math.inf
    return ScalingConstants(n=n, a_n=a, b_n=b, ell_star_a_n=es, lambda_n=lam)


def compute_constants(law, n) -> ScalingConstants:
    """a_n, b_n, ell*(a_n) and Lambda(n) = 1/ell*(a_n).

    a_n is the canonical bracket inf{a : n P(X >= a) <= 1}; ell* is evaluated
    at max(a_n, 1).
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return _constants_cached(_law(law).to_json(), n)


def lambda_closed_form(law, m) -> np.ndarray:
    """Lambda(m) = 1/ell*(a_m); Lambda(0) is set to Lambda(1)."""
    m = np.atleast_1d(np.asarray(m, dtype=np.int64))
    out = np.empty(m.shape)
    cache = {}
    for i, v in np.ndenumerate(m):
        v = max(int(v), 1)
        if v not in cache:
            cache[v] = compute_constants(law, v).lambda_n
        out[i] = cache[v]
    return out


def wiener_hopf_coefficients(nonneg_probs) -> np.ndarray:
    """Coefficients p_0..p_m of exp(sum_k P(W_k >= 0) s^k / k).

    ``nonneg_probs[k-1]`` is P(W_k >= 0).  The result is P(zeta > k).
    """
    q = np.asarray(nonneg_probs, dtype=float)
    if np.any((q < 0) | (q > 1)) or np.any(~np.isfinite(q)):
        raise ValueError("probabilities must lie in [0, 1]")
    m = q.size
    p = np.empty(m + 1)
    p[0] = 1.0
    # (k+1) p_{k+1} = sum_{j=0}^{k} P(W_{j+1} >= 0) p_{k-j}
    for k in range(m):
        p[k + 1] = np.dot(q[: k + 1], p[k::-1]) / (k + 1)
    return p


def ladder_survival_from_nonneg(nonneg_probs) -> np.ndarray:
    """P(T_1 > k), k = 0..m, as coefficients of 1/((1-s) p(s))."""
    p = wiener_hopf_coefficients(nonneg_probs)
    m = p.size - 1
    # r = 1/p by the reciprocal recurrence, then partial sums for 1/(1-s)
    r = np.empty(m + 1)
    r[0] = 1.0
    for k in range(1, m + 1):
        r[k] = -np.dot(p[1 : k + 1], r[k - 1 :: -1])
    return np.cumsum(r)


def lambda_wiener_hopf(nonneg_probs, n: int) -> float:
    """Sum_{k=0}^{n} P(zeta > k) recovered through the Wiener-Hopf series."""
    q = np.asarray(nonneg_probs, dtype=float)
    if n > q.size:
        raise ValueError("n exceeds the number of supplied probabilities")
    p = wiener_hopf_coefficients(q[:n])
    return float(p.sum())
