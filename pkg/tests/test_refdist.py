import numpy as np
import pytest
from scipy import stats

from bgwlab.refdist import (
    ReferenceLaw, cauchy1_cdf, cauchy1_reference_table, cdf_J, cdf_J_mixed_frechet,
    cdf_exp, cdf_frechet, laplace_check, sample_J, sample_cauchy1, top_ppp_atoms,
)


def test_cauchy1_laplace(rng):
    z = sample_cauchy1(rng, 10**6)
    for row in laplace_check(z, (0.5, 1.0, 2.0)):
        assert abs(row["z"]) < 3, row
    assert [round(r["target"], 4) for r in laplace_check(z)] == [0.7071, 1.0, 4.0]


def test_cauchy1_tail(rng):
    z = sample_cauchy1(rng, 4 * 10**6)
    t = 1e3
    assert np.isfinite(np.median(z))
    assert np.mean(z > t) * t == pytest.approx(1.0, rel=0.2)


def test_reference_table_consistent(rng):
    x, F = cauchy1_reference_table()
    assert np.all(np.diff(x) > 0) and np.all(np.diff(F) > 0)
    z = sample_cauchy1(np.random.default_rng(99), 2 * 10**5)
    d = stats.kstest(z, cauchy1_cdf).statistic
    assert d < 0.005


def test_J(rng):
    x = sample_J(rng, 10**6)
    assert np.median(x) == pytest.approx(2, rel=0.01)
    assert cdf_J(1) == 0 and cdf_J(0.5) == 0 and cdf_J(2) == 0.5
    p = np.mean(x >= 10)
    se = np.sqrt(0.1 * 0.9 / x.size)
    assert abs(p - 0.1) < 3 * se
    y = sample_J(rng, 10**5)
    assert stats.kstest(y, cdf_J).pvalue > 1e-3


def test_ppp_top_atom_against_direct_ppp(rng):
    # direct construction above a threshold eps: Poisson(a/eps) atoms with
    # P(x > y) = eps/y
    a, eps, reps = 1.5, 0.05, 20000
    tops = np.empty(reps)
    counts = rng.poisson(a / eps, reps)
    for i, k in enumerate(counts):
        tops[i] = eps / rng.random(k).min() if k else 0.0
    ours = np.array([top_ppp_atoms(a, 1, rng)[0] for _ in range(reps)])
    grid = np.array([0.3, 0.5, 1.0, 2.0, 5.0])
    exact = cdf_frechet(grid, a)
    for sample in (tops, ours):
        emp = np.array([np.mean(sample <= g) for g in grid])
        assert np.max(np.abs(emp - exact)) < 0.015


def test_ppp_counts(rng):
    runs = 10**5
    x = 0.5
    # 60 atoms are plenty: P(60th atom > 0.5) is negligible for a = 1
    counts = np.array([np.sum(top_ppp_atoms(1.0, 60, rng) > x) for _ in range(runs)])
    se = counts.std() / np.sqrt(runs)
    assert abs(counts.mean() - 2) < 3 * se


def test_ppp_small_a(rng):
    tops = np.array([top_ppp_atoms(1e-3, 1, rng)[0] for _ in range(10**4)])
    assert np.mean(tops > 0.1) < 0.03
    assert 1 - cdf_frechet(0.1, 1e-3) < 0.011


def test_ppp_lln(rng):
    k = 1000
    vals = np.array([top_ppp_atoms(2.0, k, rng)[-1] * k for _ in range(1000)])
    assert np.mean(np.abs(vals / 2.0 - 1) < 0.1) > 0.99
    atoms = top_ppp_atoms(1.0, 50, rng)
    assert np.all(np.diff(atoms) < 0)


def test_mixed_frechet_closed_form(rng):
    J = sample_J(rng, 2 * 10**5)
    top = J / rng.standard_exponential(J.size)
    for x in (0.5, 1.0, 3.0):
        assert np.mean(top <= x) == pytest.approx(cdf_J_mixed_frechet(x), abs=0.005)


@pytest.mark.parametrize("tag", ["Cauchy1", "ParetoJ", "Exp1", "FrechetScale"])
def test_cdfs_monotone(tag, rng):
    law = ReferenceLaw(tag, a=2.0)
    grid = np.linspace(-50, 5000, 20001)
    F = law.cdf(grid)
    assert np.all(np.diff(F) >= 0)
    assert F[0] <= 1e-4 and F[-1] >= 1 - 1e-3
    s = law.sample(rng, 20000)
    assert stats.kstest(s, law.cdf).statistic < 0.02
    assert cdf_exp(0) == 0 and cdf_exp(np.inf) == 1
