"""Exact identities checked against the dynamic programs and enumerations.

Each check returns a dict with the largest violation found and a boolean
``holds`` (violation <= ``slack``).  The checks run on a finite-support law
(or a truncation of it) and are meant to be exact up to rounding.
"""

from __future__ import annotations

import numpy as np

from .exact import (
    Zn_law, all_sum_minus_one, exact_functional_law, excursion_law, finite_step, tv_distance,
)
from .scaling import wiener_hopf_coefficients
from .tree import CapExceeded, decode_lukasiewicz, encode_lukasiewicz, sample_bgw_free
from .walk import WalkPath, is_excursion, vervaat

__all__ = ["CHECKS", "SLACK", "run_check"]

SLACK = 1e-9


def _result(name, n_max, err, slack=SLACK, **extra):
    out = {"check": name, "n_max": int(n_max), "max_error": float(err), "slack": slack,
           "holds": bool(err <= slack)}
    out.update(extra)
    return out


def _step(law, K):
    return finite_step(law, None if not law.has_tail else K)


def check_kemperman(law, n_max=14, K=24, rng=None):
    """P(zeta = n) = P(W_n = -1)/n."""
    E = exact_functional_law(_step(law, K), n_max)
    err = max(abs(E.zeta_pmf[n] - E.w_prob(n, -1) / n) for n in range(1, n_max + 1))
    return _result("kemperman", n_max, err)


def check_duality(law, n_max=14, K=24, rng=None):
    """P(n is a weak ladder epoch) = P(zeta > n)."""
    E = exact_functional_law(_step(law, K), n_max)
    err = max(abs(E.ladder[n] - E.zeta_surv[n]) for n in range(1, n_max + 1))
    return _result("duality", n_max, err)


def check_in_pmf(law, n_max=12, K=24, rng=None):
    """P(I_n = j) = P(zeta > j) P(T_1 > n - j) for all j <= n <= n_max."""
    E = exact_functional_law(_step(law, K), n_max)
    err = 0.0
    for n in range(1, n_max + 1):
        for j in range(n + 1):
            err = max(err, abs(E.I_pmf[n][j] - E.zeta_surv[j] * E.T1_surv[n - j]))
    return _result("in-pmf", n_max, err)


def check_vervaat(law=None, n_max=10, K=None, rng=None):
    """Every sequence of n values >= -1 summing to -1 has exactly one cyclic
    shift that is an excursion, and vervaat() returns it (exhaustive)."""
    bad = 0
    count = 0
    for n in range(1, n_max + 1):
        rows = all_sum_minus_one(n)
        count += rows.shape[0]
        shifts = np.stack([np.roll(rows, -k, axis=1) for k in range(n)], axis=1)
        W = np.cumsum(shifts, axis=2)
        exc = W[..., -1] == -1
        if n > 1:
            exc &= W[..., :-1].min(axis=2) >= 0
        bad += int(np.sum(exc.sum(axis=1) != 1))
        for r, row in enumerate(rows):
            v = vervaat(WalkPath(row))
            if not (is_excursion(v) and np.array_equal(v.increments, shifts[r, np.argmax(exc[r])])):
                bad += 1
    return _result("vervaat", n_max, bad, slack=0, sequences=count)


def check_dtv_local(law, n_max=8, K=8, rng=None, grid=(4, 6, 8)):
    """TV(law(W | zeta = n), law(Z^(n))) by enumeration; ``holds`` means
    nonincreasing over the grid."""
    st = _step(law, K)
    grid = [n for n in grid if n <= n_max]
    tv = [tv_distance(Zn_law(st, n), excursion_law(st, n)) for n in grid]
    tv_valid = [tv_distance(Zn_law(st, n, valid_only=True), excursion_law(st, n)) for n in grid]
    rise = max([b - a for a, b in zip(tv, tv[1:])] + [0.0])
    return _result("dtv-local", max(grid), rise, grid=grid, tv=tv,
                   tv_given_excursion=tv_valid)


def check_wiener_hopf(law, n_max=12, K=24, rng=None):
    """exp(sum_k P(W_k >= 0) s^k / k) has coefficients P(zeta > k)."""
    E = exact_functional_law(_step(law, K), n_max)
    p = wiener_hopf_coefficients(E.nonneg[1:])
    err = float(np.max(np.abs(p - E.zeta_surv)))
    return _result("wiener-hopf", n_max, err)


def check_lukasiewicz(law, n_max=10**4, K=None, rng=None):
    """decode/encode round trip on n_max BGW trees; draws hitting the size cap
    of 10^5 are redrawn and counted in ``capped``."""
    rng = np.random.default_rng(0) if rng is None else rng
    bad = 0
    capped = 0
    checked = 0
    while checked < int(n_max):
        try:
            t = sample_bgw_free(law, rng, size_cap=10**5)
        except CapExceeded:
            capped += 1
            continue
        checked += 1
        path = encode_lukasiewicz(t)
        if not (decode_lukasiewicz(path) == t and encode_lukasiewicz(decode_lukasiewicz(path)) == path):
            bad += 1
    return _result("lukasiewicz", n_max, bad, slack=0, capped=capped)


CHECKS = {
    "kemperman": check_kemperman,
    "vervaat": check_vervaat,
    "in-pmf": check_in_pmf,
    "dtv-local": check_dtv_local,
    "duality": check_duality,
    "wiener-hopf": check_wiener_hopf,
    "lukasiewicz": check_lukasiewicz,
}


def run_check(name, law, n_max=None, rng=None):
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
    fn = CHECKS[name]
    if n_max is None:
        return fn(law, rng=rng)
    return fn(law, n_max=int(n_max), rng=rng)

