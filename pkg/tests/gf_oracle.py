"""Independent evaluation of 1 - G(1 - q) for the analytic tests.

Exact head terms in mpmath, a compensated float sum up to a much larger
cutoff than the library uses, then an mpmath quadrature with a three-term
Euler-Maclaurin correction beyond it.
"""

import math

import mpmath as mp
import numpy as np


def one_minus_G_oracle(law, q, K2=200000):
    mp.mp.dps = 30
    q = mp.mpf(q)
    s = mp.mpf(0)
    for k in range(1, law.K_head):
        s += mp.mpf(float(law.head[k])) * (-mp.expm1(k * mp.log1p(-q)))
    if not law.has_tail:
        return s
    ks = np.arange(law.K_head, K2, dtype=float)
    lq = float(mp.log1p(-q))
    s += mp.mpf(math.fsum(law.c * (-np.expm1(ks * lq)) / (ks ** 2 * np.log(ks) ** 2)))
    c = mp.mpf(law.c)
    lam = -mp.log1p(-q)
    f = lambda x: c * (-mp.expm1(-lam * x)) / (x ** 2 * mp.log(x) ** 2)
    L = -mp.log(lam)
    a = mp.log(K2)
    pts = sorted({a, max(a, L - 5), max(a, L + 5), max(a, L + 80)})
    integral = mp.quad(lambda u: f(mp.e ** u) * mp.e ** u, pts)
    # the integrand is O(e^{-80}) past the last breakpoint
    return s + integral + f(K2) / 2 - mp.diff(f, K2) / 12 + mp.diff(f, K2, 3) / 720
