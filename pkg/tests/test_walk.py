import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import FULL
from bgwlab.exact import (
    all_sum_minus_one, bridge_vervaat_law, conditioned_prefix_mixture, enumerate_walks,
    exact_functional_law, excursion_law, finite_step, iter_walks, reversal_prefix_law, tv_distance,
)
from bgwlab.refdist import cauchy1_reference_table, cdf_J, sample_J
from bgwlab.scaling import compute_constants
from bgwlab.walk import (
    ExcursionStream, WalkPath, build_Z_n, build_vecZ_n, estimate_fluctuation_tails,
    event_E_n, fluctuation_markers, is_excursion, ladder_epochs_chained,
    ladder_epochs_record, markers_batch, sample_big_jump, sample_steps, sample_walk,
    time_reverse, vervaat,
)


def test_markers_example():
    m = fluctuation_markers(WalkPath([-1, 2, -1, 1]))
    assert m.zeta == 1 and list(m.ladder_epochs) == [0, 2, 4]
    assert m.I_n == 4 and m.H_n == 3
    m = fluctuation_markers(WalkPath([-1] * 6))
    assert m.zeta == 1 and list(m.ladder_epochs) == [0] and m.H_n == 1 and m.I_n == 0


def test_empty_walk(toy, rng):
    p = sample_walk(toy, 0, rng)
    assert len(p) == 0 and list(p.W) == [0]
    assert p.markers.zeta is None and p.markers.I_n == 0


def test_mean_increment(toy, rng):
    x = sample_walk(toy, 10**6, rng).increments
    assert abs(x.mean()) < 4 * x.std() / 1000


def test_record_equals_chained(rng, toy, cauchy_law):
    count = 10**5 if FULL else 10**4
    lens = rng.integers(0, 1001, count)
    for i, n in enumerate(lens):
        law = toy if i % 2 else cauchy_law
        W = sample_walk(law, n, rng).W
        assert list(ladder_epochs_record(W)) == ladder_epochs_chained(W.tolist())


def test_time_reverse():
    assert list(time_reverse(WalkPath([-1, 2, -1, 1])).increments) == [1, -1, 2, -1]


def test_time_reverse_involution(rng, cauchy_law):
    for _ in range(10**4):
        p = sample_walk(cauchy_law, int(rng.integers(0, 50)), rng)
        assert time_reverse(time_reverse(p)) == p


def test_vervaat_examples():
    v = vervaat(WalkPath([-1, 2, -1, -1]))
    assert list(v.increments) == [2, -1, -1, -1] and list(v.W) == [0, 2, 1, 0, -1]
    ex = WalkPath([1, 0, -1, -1])
    assert vervaat(ex) == ex


def test_cycle_lemma_exhaustive():
    for n in range(1, 11):
        rows = all_sum_minus_one(n)
        assert rows.shape[0] == math.comb(2 * n - 2, n - 1)
        # count excursion shifts of every row at once
        shifts = np.stack([np.roll(rows, -k, axis=1) for k in range(n)], axis=1)
        W = np.cumsum(shifts, axis=2)
        exc = (W[..., -1] == -1) & ((W[..., :-1].min(axis=2) >= 0) if n > 1 else True)
        assert np.all(exc.sum(axis=1) == 1)
        for r, row in enumerate(rows):
            v = vervaat(WalkPath(row))
            assert is_excursion(v)
            assert np.array_equal(v.increments, shifts[r, np.argmax(exc[r])])


def test_exact_dp_examples(toy):
    E = exact_functional_law(toy, 14)
    assert E.zeta_pmf[1] == pytest.approx(0.5, abs=1e-15)
    assert E.w_prob(1, -1) == pytest.approx(0.5)
    assert E.zeta_pmf[2] == pytest.approx(0.05, abs=1e-15)
    assert E.w_prob(2, -1) / 2 == pytest.approx(0.05, abs=1e-15)
    assert E.escaped == 0
    n = 12
    assert E.I_pmf[n].sum() == pytest.approx(1, abs=1e-14)
    for j in range(n + 1):
        assert E.I_pmf[n][j] == pytest.approx(E.zeta_surv[j] * E.T1_surv[n - j], abs=1e-15)


def test_dp_against_enumeration(toy):
    st_ = finite_step(toy)
    E = exact_functional_law(toy, 8)
    for n in range(1, 9):
        inc, prob = enumerate_walks(st_, n)
        zeta, I, H = markers_batch(inc)
        W = np.cumsum(inc.astype(np.int64), axis=1)
        assert np.dot(prob, zeta == n) == pytest.approx(E.zeta_pmf[n], abs=1e-14)
        assert np.dot(prob, W[:, -1] >= 0) == pytest.approx(E.nonneg[n], abs=1e-14)
        for j in range(n + 1):
            assert np.dot(prob, I == j) == pytest.approx(E.I_pmf[n][j], abs=1e-14)


def test_joint_zeta_I_matches_dp(toy):
    E = exact_functional_law(toy, 12, joint=True)
    st_ = finite_step(toy)
    for n in range(1, 13):
        A = np.zeros((n + 2, n + 1))
        for inc, prob in iter_walks(st_, n):
            if n <= 7:
                marks = [fluctuation_markers(WalkPath._unchecked(r)) for r in inc]
                zeta = np.array([m.zeta if m.zeta is not None else n + 1 for m in marks])
                I = np.array([m.I_n for m in marks])
            else:
                zeta, I, _ = markers_batch(inc)
            np.add.at(A, (zeta, I), prob)
        assert 0.5 * np.abs(A - E.joint_zeta_I[n]).sum() < 1e-9


def test_duality_and_kemperman(toy):
    E = exact_functional_law(toy, 14)
    for n in range(1, 15):
        assert abs(E.zeta_pmf[n] - E.w_prob(n, -1) / n) < 1e-9
        assert abs(E.ladder[n] - E.zeta_surv[n]) < 1e-9


def test_dp_truncated_heavy_law(cauchy_law):
    E = exact_functional_law(cauchy_law, 8, K=60)
    assert E.step.lumped == pytest.approx(cauchy_law.survival(61))
    assert E.step.probs.sum() == pytest.approx(1, abs=1e-12)
    for n in range(1, 9):
        assert abs(E.zeta_pmf[n] - E.w_prob(n, -1) / n) < 1e-12
        assert abs(E.ladder[n] - E.zeta_surv[n]) < 1e-12


def test_dp_band_escape(toy):
    E = exact_functional_law(toy, 6, value_band=(-6, 3))
    assert E.escaped > 0


def test_vervaat_bridge_equals_excursion(toy):
    st_ = finite_step(toy)
    for n in range(1, 9):
        assert tv_distance(bridge_vervaat_law(st_, n), excursion_law(st_, n)) < 1e-12


def test_Z_n_basic(toy, cauchy_law, rng):
    p = build_Z_n(toy, 1, rng)
    assert list(p.W) == [0, -1]
    for _ in range(200):
        p = build_Z_n(cauchy_law, 50, rng)
        assert len(p) == 50 and p.W[-1] == -1


def test_event_E_n_increases(cauchy_law):
    def freq(n, N, seed):
        rng = np.random.default_rng(seed)
        hits = 0
        for _ in range(N):
            inc = sample_steps(cauchy_law, rng, n - 1)
            last = -1 - inc.sum()
            hits += event_E_n(np.append(inc, last))
        return hits / N
    lo = freq(10**4, 2000, 1)
    hi = freq(10**6, 400, 2)
    # unconditional P(E_n): about 0.77 at 1e4 and 0.84 at 1e6
    assert hi > lo


def test_reversal_prefix_law(toy):
    st_ = finite_step(toy)
    E = exact_functional_law(toy, 10)
    for n in range(1, 11):
        a = reversal_prefix_law(st_, n)
        b = conditioned_prefix_mixture(st_, n, E.I_pmf[n])
        assert tv_distance(a, b) <= 1e-9


def test_big_jump(cauchy_law, rng):
    for n in (10**3, 10**5):
        b = abs(compute_constants(cauchy_law, n).b_n)
        y = sample_big_jump(cauchy_law, b, rng, size=5000)
        assert y.min() >= b
        # conditional law: P(Y >= 2b | Y >= b) = P(X >= 2b)/P(X >= b)
        p = cauchy_law.survival(math.ceil(2 * b) + 1) / cauchy_law.survival(math.ceil(b) + 1)
        assert abs(np.mean(y >= math.ceil(2 * b)) - p) < 4 * math.sqrt(p * (1 - p) / 5000)


def test_big_jump_toy(toy, rng):
    y = sample_big_jump(toy, 1, rng, size=4000)
    assert set(np.unique(y)) == {1, 2}
    assert np.mean(y == 2) == pytest.approx(0.25, abs=0.03)


def test_vecZ_structure(cauchy_law, rng):
    n = 2000
    k = compute_constants(cauchy_law, n)
    for strategy in ("reversal", "definitional"):
        for _ in range(20):
            t = build_vecZ_n(cauchy_law, k, n, rng, strategy=strategy)
            p = t.path
            W = p.W
            assert W[t.hit] == -1 and W[: t.hit].min() >= 0
            assert p.increments[t.I] == t.jump >= abs(k.b_n)
            assert W[: t.I + 1].min() >= 0


def test_vecZ_strategies_agree(cauchy_law):
    n = 300
    k = compute_constants(cauchy_law, n)
    res = {}
    for s in ("reversal", "definitional"):
        rng = np.random.default_rng(7)
        vals = [build_vecZ_n(cauchy_law, k, n, rng, strategy=s, keep=0) for _ in range(1500)]
        res[s] = np.array([v.stream.head_values()[-1] if False else v.path.W[v.I] for v in vals])
    assert stats.ks_2samp(res["reversal"], res["definitional"]).pvalue > 1e-3


def _hits(law, n, N, seed):
    k = compute_constants(law, n)
    rng = np.random.default_rng(seed)
    return np.array([build_vecZ_n(law, k, n, rng, keep=0, store_cap=0).hit for _ in range(N)]), k


def test_vecZ_hitting_time_normalization(cauchy_law):
    # time to reach -1 is of order J n, not J |b_n|
    n = 10**4
    hits, k = _hits(cauchy_law, n, 400, 11)
    d_n = stats.kstest(hits / n, cdf_J).statistic
    d_b = stats.kstest(hits / abs(k.b_n), cdf_J).statistic
    assert d_n < 0.35 and d_b > 0.8


@pytest.mark.xfail(strict=True, reason="KS(hit/n, J) is about 0.30, 0.25, 0.23 at n = 1e3, 1e4, 1e5: "
                                       "descent is slowed by jumps of order a_n, and a_n/|b_n| decays like 1/ln n")
def test_vecZ_hitting_time_vs_J_literal(cauchy_law):
    n, N = (10**5, 2000) if FULL else (10**4, 400)
    hits, _ = _hits(cauchy_law, n, N, 11)
    J = sample_J(np.random.default_rng(12), N)
    assert stats.ks_2samp(hits / n, J).statistic <= 0.1


def _stream_reference(inc):
    W = np.concatenate([[0], np.cumsum(inc)])
    hit = int(np.flatnonzero(W < 0)[0])
    inc = inc[:hit]
    u = int(np.argmax(inc))
    Wu = W[: u + 1]
    h = sum(1 for i in range(u) if Wu[i] == Wu[i:].min())
    return hit, u, h, np.sort(inc)[::-1][:5]


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), chunk=st.integers(1, 40))
def test_stream_chunking(seed, chunk):
    rng = np.random.default_rng(seed)
    # a random excursion: prefix of the walk until it first hits -1
    inc = rng.choice([-1, 0, 1, 3, 7], p=[0.55, 0.1, 0.2, 0.1, 0.05], size=400)
    W = np.cumsum(inc)
    if not (W < 0).any():
        inc = np.append(inc, [-1] * (int(W[-1]) + 1))
    ref = _stream_reference(inc)
    s = ExcursionStream(top_k=5, keep=10)
    pos = 0
    while not s.done:
        s.feed(inc[pos: pos + chunk])
        pos += chunk
    assert (s.hit, s.u_star, s.h_star) == ref[:3]
    assert list(s.top) == list(ref[3])
    assert np.array_equal(s.increments(), inc[: ref[0]])
    full = np.concatenate([[0], np.cumsum(inc)])
    assert np.array_equal(s.head_values(), full[: min(11, ref[0] + 1)])


def test_walk_cauchy_band(cauchy_law):
    # (W_n - b_n)/a_n inside the central 99.9% band of C1, shifted by 1 - gamma
    n = 10**6
    N = 10**4 if FULL else 400
    k = compute_constants(cauchy_law, n)
    x, F = cauchy1_reference_table()
    lo, hi = np.interp([0.0005, 0.9995], F, x)
    rng = np.random.default_rng(3)
    inside = 0
    for _ in range(N):
        w = sample_steps(cauchy_law, rng, n).sum()
        z = (w - k.b_n) / k.a_n
        inside += lo <= z <= hi
    assert inside / N >= 0.995


def test_fluctuation_tails_toy(toy):
    rng = np.random.default_rng(5)
    E = exact_functional_law(toy, 12)
    rows = estimate_fluctuation_tails(toy, [3, 6, 12], 40000, rng)
    for r in rows:
        n = r["n"]
        lo, hi = r["p_zeta_gt_ci"]
        assert lo - 0.005 <= E.zeta_surv[n] <= hi + 0.005
        lo, hi = r["p_T1_gt_ci"]
        assert lo - 0.005 <= E.T1_surv[n] <= hi + 0.005


def test_fluctuation_tails_heavy(cauchy_law):
    rng = np.random.default_rng(8)
    rows = estimate_fluctuation_tails(cauchy_law, [10**3, 10**4], 200000, rng, reps_T1=4000)
    for r in rows:
        assert 0 < r["p_zeta_ge"] < 1 and 0 < r["p_T1_gt"] < 1
        assert r["p_zeta_ge"] >= r["p_zeta_gt"]
