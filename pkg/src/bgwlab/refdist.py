"""Limit laws of the condensation theorems.

``Cauchy1`` is the spectrally positive 1-stable law C1 with
E[exp(-lam C1)] = exp(lam ln lam) (Levy measure dx/x^2 on x > 0).  It is drawn
by the Chambers-Mallows-Stuck recipe (alpha = 1, beta = 1), rescaled by pi/2
and shifted by ``CAUCHY1_SHIFT``.  The shift equals ln(pi/2); see
``scripts/calibrate_cauchy1.py`` for the Laplace-transform fit that confirms it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.special import exp1

__all__ = [
    "CAUCHY1_SHIFT",
    "ReferenceLaw",
    "sample_cauchy1",
    "cauchy1_laplace",
    "cauchy1_cdf",
    "cauchy1_reference_table",
    "sample_J",
    "cdf_J",
    "sample_exp",
    "cdf_exp",
    "cdf_frechet",
    "cdf_J_mixed_frechet",
    "top_ppp_atoms",
    "laplace_check",
]

CAUCHY1_SHIFT = float(np.log(np.pi / 2))
REFERENCE_FILE = "cauchy1_reference.csv"


def _cms_totally_skewed(rng, size):
    # S1(1, beta=1, 0) in the Samorodnitsky-Taqqu parametrization
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    half = np.pi / 2 + v
    return (2 / np.pi) * (half * np.tan(v) - np.log((np.pi / 2) * w * np.cos(v) / half))


def sample_cauchy1(rng: np.random.Generator, size=None):
    """Draws of C1, with E[exp(-lam C1)] = exp(lam ln lam)."""
    return (np.pi / 2) * _cms_totally_skewed(rng, size) + CAUCHY1_SHIFT


def cauchy1_laplace(lam):
    lam = np.asarray(lam, dtype=float)
    return np.exp(lam * np.log(lam))


def laplace_check(sample, lams=(0.5, 1.0, 2.0)):
    """Monte Carlo Laplace transform against exp(lam ln lam).

    Returns a list of dicts with estimate, target, standard error and z.
    """
    sample = np.asarray(sample, dtype=float)
    out = []
    for lam in lams:
        e = np.exp(-lam * sample)
        est = e.mean()
        se = e.std(ddof=1) / np.sqrt(e.size)
        target = float(cauchy1_laplace(lam))
        out.append({"lam": lam, "estimate": float(est), "target": target,
                    "se": float(se), "z": float((est - target) / se)})
    return out


@lru_cache(maxsize=1)
def cauchy1_reference_table():
    """Frozen (x, F) quantile table of C1 generated from 10^7 draws."""
    with resources.files("bgwlab.data").joinpath(REFERENCE_FILE).open() as fh:
        data = np.loadtxt(fh, delimiter=",", skiprows=1)
    x, F = data[:, 0], data[:, 1]
    x.setflags(write=False)
    F.setflags(write=False)
    return x, F


def cauchy1_cdf(x):
    """CDF of C1 by linear interpolation in the frozen table.

    Outside the table the CDF is clamped to 0 and 1; the table covers
    probabilities in [1e-4, 1 - 1e-4], so the clamp error is below 1e-4.
    """
    xs, F = cauchy1_reference_table()
    return np.interp(x, xs, F, left=0.0, right=1.0)


def sample_J(rng: np.random.Generator, size=None):
    """Pareto: P(J >= x) = 1/x for x >= 1."""
    u = 1.0 - rng.random(size)          # (0, 1]
    return 1.0 / u


def cdf_J(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x >= 1, 1.0 - 1.0 / np.maximum(x, 1.0), 0.0)


def sample_exp(rng: np.random.Generator, size=None):
    return rng.standard_exponential(size)


def cdf_exp(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, -np.expm1(-np.maximum(x, 0.0)), 0.0)


def cdf_frechet(x, a: float):
    """exp(-a/x) for x > 0: law of the top atom of the intensity-a PPP."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(-a / np.where(x > 0, x, 1.0)), 0.0)


def cdf_J_mixed_frechet(x):
    """E[exp(-J/x)] with J Pareto(1) = exp(-1/x) - E1(1/x)/x."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xp = np.where(pos, x, 1.0)
    val = np.exp(-1 / xp) - exp1(1 / xp) / xp
    return np.where(pos, val, 0.0)


def top_ppp_atoms(a: float, m: int, rng: np.random.Generator):
    """The m largest x-coordinates of a Poisson measure on [0, a] x (0, inf)
    with intensity dt dx/x^2, in decreasing order."""
    if not a > 0 or m < 1:
        raise ValueError("need a > 0 and m >= 1")
    gaps = rng.standard_exponential(m)
    return a / np.cumsum(gaps)


@dataclass(frozen=True)
class ReferenceLaw:
    """Tagged limit law with sampler and CDF."""

    tag: str
    a: float = 1.0

    def sample(self, rng, size=None):
        if self.tag == "Cauchy1":
            return sample_cauchy1(rng, size)
        if self.tag == "ParetoJ":
            return sample_J(rng, size)
        if self.tag == "Exp1":
            return sample_exp(rng, size)
        if self.tag == "FrechetScale":
            # inverse CDF of exp(-a/x)
            u = 1.0 - rng.random(size)
            return -self.a / np.log(u)
        raise ValueError(self.tag)

    def cdf(self, x):
        if self.tag == "Cauchy1":
            return cauchy1_cdf(x)
        if self.tag == "ParetoJ":
            return cdf_J(x)
        if self.tag == "Exp1":
            return cdf_exp(x)
        if self.tag == "FrechetScale":
            return cdf_frechet(x, self.a)
        raise ValueError(self.tag)
