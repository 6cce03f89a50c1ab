"""Critical offspring laws with a tabulated head and an analytic c/(k^2 ln^2 k) tail.

The tail series are evaluated by direct summation up to a fixed cutoff
``K_CUT`` and an Euler-Maclaurin remainder beyond it (integral in closed form
through the exponential integral, plus the first two boundary corrections).
"""

from __future__ import annotations

import hashlib
import json
import math
from functools import lru_cache

import numpy as np
from scipy.special import exp1

__all__ = [
    "InfeasibleParameters",
    "InvalidLaw",
    "OffspringLaw",
    "StepLaw",
    "build_critical_tail_law",
    "build_head_only_law",
    "q_star_boundary_law",
    "sample_offspring",
    "tail_mass",
    "tail_first_moment",
    "TAIL_FAMILY",
]

TAIL_FAMILY = "c_over_k2_log2k"
K_CUT = 4096          # direct summation below, Euler-Maclaurin at and above
MAX_K = 2**62         # sampler never returns a larger offspring count


class InvalidLaw(ValueError):
    """A head/tail specification that violates the law invariants."""


class InfeasibleParameters(InvalidLaw):
    """The criticality solve produced a negative probability."""


# ---------------------------------------------------------------------------
# unit-c tail series: f(k) = 1/(k^2 ln^2 k), g(k) = k f(k) = 1/(k ln^2 k)

def _f(k):
    k = np.asarray(k, dtype=float)
    lk = np.log(k)
    return 1.0 / (k * k * lk * lk)


def _g(k):
    k = np.asarray(k, dtype=float)
    lk = np.log(k)
    return 1.0 / (k * lk * lk)


def _mass_remainder(k):
    """sum_{j>=k} f(j) for k >= K_CUT (Euler-Maclaurin, error < 1e-19)."""
    k = np.asarray(k, dtype=float)
    lk = np.log(k)
    integral = 1.0 / (k * lk) - exp1(lk)
    f = 1.0 / (k * k * lk * lk)
    fprime = -2.0 * f / k * (1.0 + 1.0 / lk)
    return integral + 0.5 * f - fprime / 12.0


def _mean_remainder(k):
    """sum_{j>=k} g(j) for k >= K_CUT."""
    k = np.asarray(k, dtype=float)
    lk = np.log(k)
    g = 1.0 / (k * lk * lk)
    gprime = -g / k * (1.0 + 2.0 / lk)
    return 1.0 / lk + 0.5 * g - gprime / 12.0


@lru_cache(maxsize=None)
def _base_tables():
    """Tail sums of f and g from every k in [2, K_CUT] (index k)."""
    ks = np.arange(3, K_CUT, dtype=float)
    # reverse cumulative sums add small terms first
    sf = np.cumsum(_f(ks)[::-1])[::-1] + float(_mass_remainder(K_CUT))
    sg = np.cumsum(_g(ks)[::-1])[::-1] + float(_mean_remainder(K_CUT))
    mass = np.zeros(K_CUT + 1)
    mean = np.zeros(K_CUT + 1)
    mass[3:K_CUT] = sf
    mean[3:K_CUT] = sg
    mass[K_CUT] = _mass_remainder(K_CUT)
    mean[K_CUT] = _mean_remainder(K_CUT)
    mass.setflags(write=False)
    mean.setflags(write=False)
    return mass, mean


def tail_mass(c: float, k) -> np.ndarray:
    """Sum over j >= k of c/(j^2 ln^2 j), for integer k >= 3 (vectorized)."""
    k = np.asarray(k, dtype=np.int64)
    if np.any(k < 3):
        raise ValueError("tail series defined for k >= 3")
    mass, _ = _base_tables()
    out = np.where(k < K_CUT, mass[np.minimum(k, K_CUT)],
                   _mass_remainder(np.maximum(k, K_CUT)))
    return c * out


def tail_first_moment(c: float, k) -> np.ndarray:
    """Sum over j >= k of j * c/(j^2 ln^2 j), for integer k >= 3."""
    k = np.asarray(k, dtype=np.int64)
    if np.any(k < 3):
        raise ValueError("tail series defined for k >= 3")
    _, mean = _base_tables()
    out = np.where(k < K_CUT, mean[np.minimum(k, K_CUT)],
                   _mean_remainder(np.maximum(k, K_CUT)))
    return c * out


# ---------------------------------------------------------------------------

class OffspringLaw:
    """Offspring distribution mu on {0, 1, 2, ...}.

    ``head[k]`` holds mu(k) for k < K_head.  When ``c`` is not None the law
    has mu(k) = c/(k^2 ln^2 k) for k >= k_min = K_head.
    """

    def __init__(self, head, c=None, k_min=None, mean_tol=1e-10):
        head = np.array(head, dtype=float)
        if head.ndim != 1 or head.size == 0:
            raise InvalidLaw("head must be a non-empty 1-d array")
        if np.any(~np.isfinite(head)) or np.any(head < 0):
            bad = head[~(head >= 0)]
            raise InvalidLaw(f"negative or non-finite head entry: {bad[0]!r}")
        if (c is None) != (k_min is None):
            raise InvalidLaw("tail needs both c and k_min")
        if c is not None:
            c = float(c)
            k_min = int(k_min)
            if not c > 0:
                raise InvalidLaw(f"tail constant must be positive, got {c}")
            if k_min < 3:
                raise InvalidLaw(f"k_min must be >= 3, got {k_min}")
            if head.size > k_min:
                raise InvalidLaw("head overlaps the tail")
            head = np.concatenate([head, np.zeros(k_min - head.size)])
        self._head = head
        self._head.setflags(write=False)
        self.c = c
        self.k_min = k_min
        self.mean_tol = float(mean_tol)

        ks = np.arange(head.size)
        self._head_suffix = np.array([math.fsum(head[i:]) for i in range(head.size + 1)])
        self._tail_S = float(tail_mass(c, k_min)) if c is not None else 0.0
        self._tail_M = float(tail_first_moment(c, k_min)) if c is not None else 0.0
        self.mass_error = math.fsum(head) + self._tail_S - 1.0
        self.mean_error = math.fsum(ks * head) + self._tail_M - 1.0
        self._validate()

        # head CDF used for inverse-CDF sampling; the tail is entered by a
        # second uniform so that tiny tail probabilities keep full precision
        self._head_cdf = np.cumsum(head)
        if c is None:
            self._head_cdf[-1] = 1.0
        self._sampler_table = None

    # -- validation ---------------------------------------------------------
    def _validate(self):
        tol = self.mean_tol
        problems = []
        if not self._head[0] > 0:
            problems.append("mu(0) must be positive")
        p01 = self._head[0] + (self._head[1] if self._head.size > 1 else 0.0)
        if not p01 < 1:
            problems.append("mu(0) + mu(1) < 1 violated")
        if abs(self.mass_error) > tol:
            problems.append(f"total mass off by {self.mass_error:.3e} (tol {tol:g})")
        if abs(self.mean_error) > tol:
            problems.append(f"mean off by {self.mean_error:.3e} (tol {tol:g}); law is not critical")
        if problems:
            raise InvalidLaw("; ".join(problems))

    # -- basic accessors ----------------------------------------------------
    @property
    def head(self) -> np.ndarray:
        return self._head

    @property
    def K_head(self) -> int:
        return self._head.size

    @property
    def has_tail(self) -> bool:
        return self.c is not None

    @property
    def max_offspring(self) -> float:
        if self.has_tail:
            return math.inf
        return int(np.flatnonzero(self._head)[-1])

    def pmf(self, k):
        """mu(k), vectorized over integer k (zero for k < 0)."""
        k = np.asarray(k, dtype=np.int64)
        out = np.zeros(k.shape)
        inh = (k >= 0) & (k < self.K_head)
        out[inh] = self._head[k[inh]]
        if self.has_tail:
            tl = k >= self.K_head
            out[tl] = self.c * _f(k[tl])
        return out[()] if out.ndim == 0 else out

    def survival(self, k):
        """mu([k, infinity)), vectorized over integer k."""
        k = np.asarray(k, dtype=np.int64)
        kk = np.clip(k, 0, self.K_head)
        out = self._head_suffix[kk] + self._tail_S
        if self.has_tail:
            far = k > self.K_head
            if np.any(far):
                out = np.where(far, tail_mass(self.c, np.maximum(k, 3)), out)
        else:
            out = np.where(k >= self.K_head, 0.0, out)
        out = np.where(k <= 0, 1.0, out)
        return out[()] if out.ndim == 0 else out

    def partial_moment(self, k):
        """Sum over j >= k of j mu(j), for integer k >= 0."""
        k = int(k)
        if k < self.K_head:
            js = np.arange(max(k, 0), self.K_head)
            return math.fsum(js * self._head[max(k, 0):]) + self._tail_M
        if self.has_tail:
            return float(tail_first_moment(self.c, k))
        return 0.0

    def mass(self) -> float:
        return 1.0 + self.mass_error

    def mean(self) -> float:
        return 1.0 + self.mean_error

    @property
    def step(self) -> "StepLaw":
        return StepLaw(self)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        head = self._head.tolist()
        if self.has_tail:
            tail = {"family": TAIL_FAMILY, "c": self.c, "kmin": self.k_min}
        else:
            tail = None
        return {"head": head, "tail": tail, "mean_tol": self.mean_tol}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "OffspringLaw":
        tail = d.get("tail")
        tol = d.get("mean_tol", 1e-10)
        if tail is None:
            return cls(d["head"], mean_tol=tol)
        if tail.get("family") != TAIL_FAMILY:
            raise InvalidLaw(f"unknown tail family {tail.get('family')!r}")
        return cls(d["head"], c=tail["c"], k_min=tail["kmin"], mean_tol=tol)

    @classmethod
    def from_json(cls, text: str) -> "OffspringLaw":
        return cls.from_dict(json.loads(text))

    def hash(self) -> str:
        """Short content hash, logged with every run."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, OffspringLaw) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.to_json())

    def __repr__(self):
        if self.has_tail:
            return f"OffspringLaw(c={self.c:g}, k_min={self.k_min}, mu0={self._head[0]:.6g}, mu2={self._head[2]:.6g})"
        return f"OffspringLaw(head={self._head.tolist()})"

    def __reduce__(self):
        return (OffspringLaw.from_dict, (self.to_dict(),))

    # -- sampling -----------------------------------------------------------
    def _tail_table(self):
        # survival of the tail restricted to [k_min, K_CUT], normalized;
        # stored decreasing, so searchsorted runs on its negation
        if self._sampler_table is None:
            ks = np.arange(self.k_min, K_CUT + 1)
            surv = tail_mass(self.c, ks) / self._tail_S
            self._sampler_table = -surv
        return self._sampler_table

    def _tail_survival_ratio(self, k):
        return tail_mass(self.c, k) / self._tail_S

    def _invert_tail(self, v: np.ndarray) -> np.ndarray:
        """Largest k >= k_min with mu([k,inf))/mu([k_min,inf)) >= v, v in (0,1]."""
        table = self._tail_table()
        # index of the last table entry with surv >= v
        idx = np.searchsorted(table, -v, side="right") - 1
        k = self.k_min + idx
        far = idx >= table.size - 1
        if np.any(far):
            k[far] = self._invert_far(v[far])
        return k

    def _invert_far(self, v):
        # geometric bracket growth, then bisection on the analytic survival
        lo = np.full(v.shape, K_CUT, dtype=np.int64)
        hi = lo * 2
        while True:
            grow = (self._tail_survival_ratio(hi) >= v) & (hi < MAX_K)
            if not grow.any():
                break
            lo = np.where(grow, hi, lo)
            hi = np.where(grow, np.minimum(hi * 2, MAX_K), hi)
        # invariant: surv(lo) >= v > surv(hi)
        while True:
            open_ = hi - lo > 1
            if not open_.any():
                return lo
            mid = lo + (hi - lo) // 2
            ok = self._tail_survival_ratio(mid) >= v
            lo = np.where(open_ & ok, mid, lo)
            hi = np.where(open_ & ~ok, mid, hi)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Exact i.i.d. draws from mu (int64)."""
        u = rng.random(size)
        return self.invert(u, rng)

    def invert(self, u, rng: np.random.Generator | None = None):
        """Inverse CDF of mu.  Uniforms landing in the tail mass consume one
        fresh uniform each from ``rng`` to locate the tail value."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        k = np.searchsorted(self._head_cdf, u, side="right").astype(np.int64)
        if self.has_tail:
            tail = k >= self.K_head
            m = int(tail.sum())
            if m:
                if rng is None:
                    raise ValueError("tail draws need an rng")
                v = 1.0 - rng.random(m)          # in (0, 1]
                k[tail] = self._invert_tail(v)
        else:
            k = np.minimum(k, self.max_offspring)
        return int(k[0]) if scalar else k


class StepLaw:
    """Step law of the Lukasiewicz walk: P(X = i) = mu(i + 1), i >= -1."""

    def __init__(self, law: OffspringLaw):
        self.law = law

    def pmf(self, i):
        return self.law.pmf(np.asarray(i) + 1)

    def tail_prob(self, x):
        """P(X >= x)."""
        return self.law.survival(np.asarray(x) + 1)

    @property
    def min_value(self) -> int:
        return -1

    @property
    def max_value(self):
        m = self.law.max_offspring
        return m - 1 if m != math.inf else math.inf

    def mean(self) -> float:
        return self.law.mean() - 1.0

    def sample(self, rng, size=None):
        return self.law.sample(rng, size) - 1


# ---------------------------------------------------------------------------

def build_critical_tail_law(c: float, k_min: int = 3, mean_tol: float = 1e-10) -> OffspringLaw:
    """Law with mu(k) = c/(k^2 ln^2 k) for k >= k_min, mu(1) = 0, and mu(0),
    mu(2) fixed by total mass 1 and mean 1."""
    if int(k_min) != k_min or k_min < 3:
        raise InvalidLaw(f"k_min must be an integer >= 3, got {k_min}")
    if not c > 0:
        raise InvalidLaw(f"c must be positive, got {c}")
    k_min = int(k_min)
    S = float(tail_mass(c, k_min))
    M = float(tail_first_moment(c, k_min))
    mu2 = (1.0 - M) / 2.0
    mu0 = 1.0 - S - mu2
    if mu2 < 0:
        raise InfeasibleParameters(f"mu(2) = {mu2:.6g} < 0: tail mean {M:.6g} exceeds 1")
    if mu0 <= 0:
        raise InfeasibleParameters(f"mu(0) = {mu0:.6g} is not positive")
    head = np.zeros(k_min)
    head[0] = mu0
    head[2] = mu2
    return OffspringLaw(head, c=c, k_min=k_min, mean_tol=mean_tol)


def build_head_only_law(head, mean_tol: float = 1e-10) -> OffspringLaw:
    """Finite-support law from its probability vector mu(0..K-1)."""
    return OffspringLaw(head, mean_tol=mean_tol)


def q_star_boundary_law(mean_tol: float = 1e-10) -> OffspringLaw:
    """c = 1 member of the family with the smallest feasible k_min.

    This is the critical law whose survival behaves like 1/(k ln^2 k), as
    for the boundary of the Boltzmann map built on the 6^{1-k} weights.
    """
    for k_min in range(3, 10_000):
        try:
            return build_critical_tail_law(1.0, k_min, mean_tol=mean_tol)
        except InfeasibleParameters:
            continue
    raise InfeasibleParameters("no feasible k_min below 10000")


def sample_offspring(law: OffspringLaw, rng: np.random.Generator) -> int:
    """One exact draw from ``law``."""
    return int(law.sample(rng, 1)[0])
