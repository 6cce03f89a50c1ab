"""Generating function G(s) = sum mu(k) s^k, the height tail
Q_n = P(H(T) >= n) through 1 - Q_{n+1} = G(1 - Q_n), and the comparison
recursion Qhat_{n+1} = Qhat_n (1 - Qhat_n^{1/2} / 2).

1 - G(1 - q) is evaluated as q * r(q) with

    r(q) = sum_k mu(k) (1 - (1 - q)^k) / q,

summed term by term with expm1/log1p, so no cancellation occurs however
small q gets.  The recursion is carried on log Q, because for the Cauchy-type
laws Q_n decays like exp(-sqrt(2 c n)) and leaves double range near n = 10^6.
Beyond k = K_CUT the tail of r is an Euler-Maclaurin sum whose integral, in
the variable u = ln k, is closed form up to a window around the cutoff
u = ln(1/lambda) and Gauss-Legendre inside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .offspring import K_CUT, OffspringLaw

__all__ = [
    "HeightTailTable",
    "gen_fn",
    "one_minus_G",
    "decrement_ratio",
    "height_tail",
    "comparison_rho_tail",
    "derivative_at_one",
]

_WINDOW = 40.0           # e^{-40} is below double resolution
_PANELS = 32
_NODES = 24


@lru_cache(maxsize=1)
def _gl_window():
    x, w = np.polynomial.legendre.leggauss(_NODES)
    edges = np.linspace(-_WINDOW, _WINDOW, _PANELS + 1)
    h = np.diff(edges) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    v = (mid[:, None] + h[:, None] * x[None, :]).ravel()
    wt = (h[:, None] * w[None, :]).ravel()
    return v, wt


def _g(v):
    """(1 - exp(-e^v)) e^{-v}, continuous with g(-inf) = 1."""
    ev = np.exp(v)
    return np.where(v < -30, 1.0 - ev / 2, -np.expm1(-ev) / np.where(v < -30, 1.0, ev))


def _lambda_terms(logq):
    """lambda = -log1p(-q) as (L = -ln lambda, lambda / q)."""
    if logq < -690:
        return -logq, 1.0
    q = np.exp(logq)
    lam = -np.log1p(-q)
    return -np.log(lam), lam / q


def _A(lam_L, k):
    """(1 - e^{-lambda k}) / lambda and its k-derivative e^{-lambda k}."""
    if lam_L > 690:
        k = np.asarray(k, dtype=float)
        return k, np.ones_like(k)
    lam = np.exp(-lam_L)
    return -np.expm1(-lam * k) / lam, np.exp(-lam * k)


def _tail_scaled(c, L):
    """sum_{k >= K_CUT} c (1 - e^{-lambda k}) / (lambda k^2 ln^2 k)."""
    K = float(K_CUT)
    lnK = np.log(K)
    # integral over u = ln x in [ln K, inf) of g(u - L)/u^2
    lo, hi = L - _WINDOW, L + _WINDOW
    total = 0.0
    if lo > lnK:
        total += 1.0 / lnK - 1.0 / lo          # g = 1 to double precision
    v, wt = _gl_window()
    u = L + v
    keep = u > lnK
    if keep.all():
        total += float(np.sum(wt * _g(v) / u ** 2))
    else:
        # window straddles ln K: integrate the clipped part on its own grid
        a = max(lo, lnK)
        x, w = np.polynomial.legendre.leggauss(_NODES)
        edges = np.linspace(a, hi, _PANELS + 1)
        h = np.diff(edges) / 2
        mid = (edges[1:] + edges[:-1]) / 2
        uu = (mid[:, None] + h[:, None] * x[None, :]).ravel()
        ww = (h[:, None] * w[None, :]).ravel()
        total += float(np.sum(ww * _g(uu - L) / uu ** 2))
    # Euler-Maclaurin corrections at K
    A, dA = _A(L, K)
    lk = np.log(K)
    B = 1.0 / (K * K * lk * lk)
    dB = -2.0 * (lk + 1.0) / (K ** 3 * lk ** 3)
    f = A * B
    df = dA * B + A * dB
    return c * (total + f / 2 - df / 12)


@lru_cache(maxsize=16)
def _weights(law_json: str):
    """k = 1..K-1 and mu(k) for the directly summed range."""
    law = OffspringLaw.from_json(law_json)
    top = K_CUT if law.has_tail else law.K_head
    k = np.arange(1, top)
    w = law.pmf(k)
    return k.astype(float), np.asarray(w, dtype=float)


def decrement_ratio(law: OffspringLaw, logq: float) -> float:
    """r(q) = (1 - G(1 - q)) / q for q = exp(logq) in (0, 1]."""
    if logq >= 0:
        return float(1.0 - law.pmf(0))
    k, w = _weights(law.to_json())
    return _ratio(k, w, law.c if law.has_tail else None, logq)


def _ratio(k, w, c, logq):
    L, lam_over_q = _lambda_terms(logq)
    A, _ = _A(L, k)
    s = float(np.dot(w, A))
    if c is not None:
        s += _tail_scaled(c, L)
    return s * lam_over_q


def one_minus_G(law: OffspringLaw, q):
    """1 - G(1 - q), vectorized over q in [0, 1]."""
    q = np.asarray(q, dtype=float)
    out = np.array([0.0 if x == 0 else x * decrement_ratio(law, np.log(x)) for x in q.ravel()])
    return out.reshape(q.shape)[()]


def gen_fn(law: OffspringLaw, s):
    """G(s) for s in [0, 1]; G(1) = 1 exactly."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("s must lie in [0, 1]")
    return 1.0 - one_minus_G(law, 1.0 - s)


def derivative_at_one(law: OffspringLaw, eps=(1e-4, 1e-5)) -> dict:
    """Left derivative G'(1-) from difference quotients at 1 - eps,
    extrapolated linearly in 1/ln(1/eps) (the tail makes the error decay
    like 1/ln(1/eps))."""
    e1, e2 = eps
    d1 = decrement_ratio(law, np.log(e1))
    d2 = decrement_ratio(law, np.log(e2))
    x1, x2 = 1 / np.log(1 / e1), 1 / np.log(1 / e2)
    ext = d2 - x2 * (d1 - d2) / (x1 - x2)
    return {"quotients": (d1, d2), "extrapolated": float(ext), "mean": law.mean()}


@dataclass
class HeightTailTable:
    """Q[n] = P(H(T) >= n) for n = 0..n_max, with log Q kept for the
    range where Q underflows."""

    law_tag: str
    logQ: np.ndarray

    @property
    def n_max(self) -> int:
        return self.logQ.size - 1

    @property
    def Q(self) -> np.ndarray:
        return np.exp(self.logQ)

    @property
    def nQ(self) -> np.ndarray:
        n = np.arange(self.logQ.size)
        with np.errstate(divide="ignore"):
            return np.exp(np.log(n) + self.logQ)

    def rows(self):
        Q, nQ = self.Q, self.nQ
        for n in range(self.logQ.size):
            yield n, float(Q[n]), float(nQ[n])


def height_tail(law: OffspringLaw, n_max: int) -> HeightTailTable:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    logQ = np.empty(n_max + 1)
    logQ[0] = 0.0
    k, w = _weights(law.to_json())
    c = law.c if law.has_tail else None
    for n in range(n_max):
        r = float(1.0 - law.pmf(0)) if n == 0 else _ratio(k, w, c, logQ[n])
        logQ[n + 1] = logQ[n] + np.log(r) if r > 0 else -np.inf
    return HeightTailTable(law_tag=law.hash(), logQ=logQ)


def comparison_rho_tail(n_max: int) -> np.ndarray:
    """Qhat with Qhat[0] = 1 and Qhat[n+1] = Qhat[n] (1 - sqrt(Qhat[n]) / 2),
    the height tail under G(s) = s + (1 - s)^{3/2} / 2."""
    Q = np.empty(n_max + 1)
    Q[0] = 1.0
    for n in range(n_max):
        Q[n + 1] = Q[n] * (1.0 - 0.5 * np.sqrt(Q[n]))
    return Q
