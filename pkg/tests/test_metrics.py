import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbm_twins.cohort import CohortArrays
from crbm_twins.errors import ConfigError
from crbm_twins.metrics import (MetricReport, adversary_auc, auc, autocorrelation, autocov_r2, evaluate,
                                ks_normal_distance, lag_autocov, minimax_select, moments_per_visit, phi_calibration,
                                phi_values, rank_matrix, relapse_auc, t_cdw, t_edss, t_statistic, theil_sen,
                                weighted_ls, write_report)
from crbm_twins.metrics.report import read_table
from oracles import auc_pairs, autocov_loops, minimax_trace, t_stat_direct, theil_sen_pairs, weighted_ls_normal_equations


def hand_cohort():
    X = np.array([[[1.0, 2.0], [2.0, np.nan], [4.0, 1.0]],
                  [[0.5, 3.0], [1.5, 2.5], [3.0, 0.0]]])
    return X, np.isfinite(X)


def test_lag_autocov_matches_double_loop():
    X, M = hand_cohort()
    for lag in range(3):
        C, N = lag_autocov(X, M, lag)
        ref = autocov_loops(X, M, lag)
        assert np.allclose(C, ref, atol=1e-12, equal_nan=True)
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.standard_normal((5, 4, 3))
        M = rng.random(X.shape) > 0.3
        for lag in range(4):
            for start in (0, 1):
                C, _ = lag_autocov(np.where(M, X, np.nan), M, lag, start)
                assert np.allclose(C, autocov_loops(X, M, lag, start), atol=1e-12, equal_nan=True)


def test_lag_autocov_trivial_cases():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 1, 3))
    C, N = lag_autocov(X, np.ones_like(X, bool), 0)
    assert np.allclose(C, np.cov(X[:, 0].T, bias=True), atol=1e-12)
    assert np.all(N == 50)
    X[:, :, 1] = 7.0
    C, _ = lag_autocov(X, np.ones_like(X, bool), 0)
    assert np.allclose(C[1], 0) and np.allclose(C[:, 1], 0)
    M = np.ones_like(X, bool)
    M[:, :, 2] = False
    C, N = lag_autocov(X, M, 0)
    assert np.isnan(C[2]).all() and N[2].sum() == 0


def test_autocov_r2_identity_and_shuffle():
    rng = np.random.default_rng(2)
    C = np.cov(rng.standard_normal((4, 30)))
    assert autocov_r2(C, C) == 1.0
    iu = np.triu_indices(4)
    vals = C[iu]
    worse = []
    for _ in range(50):
        S = np.zeros_like(C)
        S[iu] = rng.permutation(vals)
        worse.append(autocov_r2(S, C))
    assert np.median(worse) <= 0
    assert np.isnan(autocov_r2(C, np.ones((4, 4))))


def test_relapse_auc_hand_case():
    scores, labels = [0.9, 0.2, 0.6, 0.6], [1, 0, 1, 0]
    assert auc(scores, labels) == pytest.approx(auc_pairs(scores, labels), abs=1e-12)
    assert auc(scores, labels) == pytest.approx(0.875)
    data = np.array([[np.nan, 1], [np.nan, 0], [np.nan, 1], [np.nan, 0]], dtype=float)
    twins = np.zeros((4, 10, 2))
    for i, s in enumerate(scores):
        twins[i, : int(round(10 * s)), 1] = 1
    assert relapse_auc(data, twins, 1) == pytest.approx(0.875)
    assert np.isnan(auc([0.1, 0.2], [1, 1]))
    assert auc([0.3] * 4, [1, 0, 1, 0]) == 0.5
    assert auc([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.booleans()), min_size=2, max_size=30))
def test_auc_properties(pairs):
    s = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs])
    a = auc(s, y)
    if y.all() or not y.any():
        assert np.isnan(a)
        return
    assert 0 <= a <= 1
    assert a + auc(-s, y) == pytest.approx(1.0, abs=1e-12)
    assert a == pytest.approx(auc_pairs(s, y), abs=1e-12)


def test_t_statistics_hand_cases():
    d = [1.0, 0.0, 2.0]
    tw = [[0.5, 1.5, 1.0], [0.0, 0.5, 1.0], [2.0, 2.5, 1.0]]
    assert t_statistic(d, tw) == pytest.approx(t_stat_direct(d, tw), abs=1e-12)
    assert t_statistic([1.0, 2.0], [[1.0, 1.0], [2.5, 1.5]]) == 0.0
    assert np.isnan(t_statistic([1.0, 1.0, 1.0], [[0.0], [1.0], [2.0]]))
    assert np.isnan(t_statistic([], np.zeros((0, 3))))
    labels = [1.0, 0.0, 1.0, 0.0]
    tw = [[1, 0, 0, 1], [0, 0, 0, 1], [1, 1, 1, 1], [0, 0, 0, 0]]
    assert t_statistic(labels, tw) == pytest.approx(t_stat_direct(labels, tw), abs=1e-12)


def test_t_edss_and_cdw_on_trajectories():
    # visits every 3 months, 18-month change is column 6
    d = np.array([[2.0] * 7, [3.0] * 6 + [4.0], [1.0] * 6 + [2.0]])
    tw = np.repeat(d[:, None], 4, axis=1)
    assert t_edss(d, tw) == 0.0
    tw2 = tw.copy()
    tw2[:, :, 6] -= 0.5
    changes = [0.0, 1.0, 1.0]
    want = t_stat_direct(changes, [[-0.5] * 4, [0.5] * 4, [0.5] * 4])
    assert t_edss(d, tw2) == pytest.approx(want, abs=1e-12)
    # non-computable CDW rows drop out of n
    e = np.array([[2.0, 3.0, 3.0, 3.0, 3.0], [2.0, 2.0, 2.0, 2.0, 2.0], [2.0, np.nan, np.nan, np.nan, np.nan]])
    te = np.stack([e, e], axis=1)
    te[0, 1] = 2.0
    got = t_cdw(e, te, "a")
    assert got == pytest.approx(t_stat_direct([1.0, 0.0], [[1.0, 0.0], [0.0, 0.0]]), abs=1e-12)


def test_theil_sen_examples():
    x = np.arange(6.0)
    assert theil_sen(x, 2 * x + 1) == pytest.approx((2.0, 1.0))
    y = x.copy()
    y[3] = 100
    assert theil_sen(x, y)[0] == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    s, i = theil_sen(x, y)
    rs, ri = theil_sen_pairs(x, y)
    assert abs(s - rs) < 1e-12 and abs(i - ri) < 1e-12
    assert np.isnan(theil_sen([1.0, 1.0], [0.0, 2.0])[0])


def test_weighted_ls_examples():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    a, b, r2 = weighted_ls(3 - 2 * x, x, np.ones(4))
    assert (a, b, r2) == pytest.approx((3.0, -2.0, 1.0))
    rng = np.random.default_rng(4)
    x, y, w = rng.standard_normal(6), rng.standard_normal(6), rng.random(6)
    assert np.allclose(weighted_ls(y, x, w), weighted_ls_normal_equations(y, x, w), atol=1e-12)
    w = np.ones(6)
    w[2] = 1e6
    a, b, _ = weighted_ls(y, x, w)
    assert a + b * x[2] == pytest.approx(y[2], abs=1e-4)
    assert np.isnan(weighted_ls(y, x, np.zeros(6))[0])


def test_autocorrelation_normalization():
    C0 = np.array([[4.0, 1.0], [1.0, 9.0]])
    C1 = np.array([[2.0, 3.0], [0.0, 4.5]])
    assert np.allclose(autocorrelation(C1, C0), [[0.5, 0.5], [0.0, 0.5]])


def test_moments_per_visit():
    X, M = hand_cohort()
    mu, sd = moments_per_visit(X, M)
    assert mu[1, 1] == 2.5 and sd[1, 1] == 0.0
    assert mu[0, 0] == pytest.approx(0.75) and sd[0, 0] == pytest.approx(0.25)
    rng = np.random.default_rng(5)
    Y = rng.standard_normal((40, 3, 2))
    Mk = rng.random(Y.shape) < 0.5
    mu, sd = moments_per_visit(np.where(Mk, Y, np.nan), Mk)
    for t in range(3):
        for a in range(2):
            v = Y[Mk[:, t, a], t, a]
            assert mu[t, a] == pytest.approx(v.mean(), abs=1e-12)
            assert sd[t, a] == pytest.approx(v.std(), abs=1e-12)


HAND_RANKS = np.array([
    # r2_0 r2_1 relapse t_edss
    [1, 8, 3, 2],
    [2, 2, 5, 6],
    [3, 3, 1, 7],
    [4, 1, 4, 3],
    [5, 4, 2, 1],
    [6, 5, 6, 4],
    [7, 6, 7, 5],
    [8, 7, 8, 8],
])


def test_minimax_hand_trace():
    names = ["r2_0", "r2_1", "relapse_auc_3", "t_edss"]
    # worst ranks 8,6,7,4,5,6,7,8 -> keep models 3 and 4; clinical worst ranks 4 and 2 -> model 4
    assert minimax_select(HAND_RANKS, names) == 4
    assert minimax_select(HAND_RANKS, names) == minimax_trace(HAND_RANKS.tolist(), [2, 3])
    with pytest.raises(ConfigError):
        minimax_select(HAND_RANKS, names, clinical=[])
    best = np.vstack([np.ones(4, int), HAND_RANKS[:3] + 1])
    assert minimax_select(best, names) == 0


def reports_from(values):
    out = []
    for row in values:
        out.append(MetricReport(r2={0: row[0], 1: row[1]}, relapse_auc={3: row[2]}, t_edss=row[3],
                                t_cdw={"a": row[4]}))
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 12), st.integers(0, 10_000))
def test_ranks_are_permutations_and_monotone_invariant(n, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((n, 5)).round(1)
    names, M = rank_matrix(reports_from(vals))
    assert all(sorted(M[:, j]) == list(range(1, n + 1)) for j in range(M.shape[1]))
    warped = vals.copy()
    warped[:, :3] = np.exp(3 * warped[:, :3]) - 5           # strictly increasing
    warped[:, 3:] = warped[:, 3:] ** 3 + 2
    names2, M2 = rank_matrix(reports_from(warped))
    assert names == names2 and np.array_equal(M, M2)
    assert minimax_select(M, names) == minimax_select(M2, names2)
    assert minimax_select(M, names) == minimax_trace(M.tolist(), [j for j, m in enumerate(names) if j >= 2])


def test_rank_matrix_orders_directions_and_failures():
    reps = reports_from([[0.9, 0.8, 0.7, 1.0, 0.5], [0.5, 0.9, 0.6, 0.2, 2.0], [0.9, 0.1, 0.9, 3.0, 0.1]])
    reps.append(MetricReport.failed())
    names, M = rank_matrix(reps)
    assert names == ["r2_0", "r2_1", "relapse_auc_3", "t_edss", "t_cdw_a"]
    assert M[:, 0].tolist() == [1, 3, 2, 4]        # tie broken by model id
    assert M[:, 3].tolist() == [2, 1, 3, 4]        # smaller t is better
    assert M[3].tolist() == [4] * 5


def test_phi_values_and_clipping():
    data = np.array([[[0.0]], [[10.0]], [[-10.0]]])
    twins = np.broadcast_to(np.linspace(-1, 1, 100)[None, :, None, None], (3, 100, 1, 1))
    phi = phi_values(data, twins, np.ones_like(data, bool))
    assert phi[0, 0, 0] == pytest.approx(0.0, abs=0.02)
    assert phi[1, 0, 0] == pytest.approx(2.5758293, abs=1e-6)      # clipped at 1 - 1/200
    assert phi[2, 0, 0] == pytest.approx(-2.5758293, abs=1e-6)
    shifted = phi_values(np.zeros((500, 1, 1)), np.random.default_rng(0).normal(0.5, 1, (500, 100, 1, 1)) + 0,
                         np.ones((500, 1, 1), bool))
    assert np.nanmean(shifted) < 0


def test_phi_self_consistency_and_bonferroni():
    rng = np.random.default_rng(6)
    data = rng.standard_normal((500, 2, 3))
    twins = rng.standard_normal((500, 1000, 2, 3))
    rows = phi_calibration(phi_values(data, twins, np.ones_like(data, bool)))
    for r in rows:
        assert abs(r["mean"]) < 3 * np.sqrt(1 / 500)
        assert abs(r["var"] - 1) < 0.2
        assert not r["significant"]
    rows = phi_calibration(np.zeros((5, 12, 12)))
    assert len(rows) == 144


def test_ks_normal_distance_against_grid():
    x = np.linspace(-10, 10, 200_001)
    from scipy.stats import norm
    for m, v in [(0.3, 1.0), (0.0, 2.0), (-0.4, 0.5), (0.1, 1.3)]:
        grid = np.abs(norm.cdf(x, m, np.sqrt(v)) - norm.cdf(x)).max()
        assert ks_normal_distance(m, v) == pytest.approx(grid, abs=1e-6)


def test_adversary_auc_copies_and_shift():
    rng = np.random.default_rng(7)
    data = rng.standard_normal((200, 3, 2))
    mask = np.ones_like(data, bool)
    copies = np.repeat(data[:, None], 2, axis=1)
    mean, _ = adversary_auc(data, mask, copies, 1, n_sims=3)
    assert mean == pytest.approx(0.5, abs=0.05)
    shifted = copies.copy()
    shifted[..., 0] += 5
    mean, _ = adversary_auc(data, mask, shifted, 1, n_sims=3)
    assert mean > 0.99
    assert adversary_auc(data, mask, copies, 0) is None
    assert adversary_auc(data[:5], mask[:5], copies[:5], 1) is None


def test_evaluate_writes_all_tables(tmp_path):
    rng = np.random.default_rng(8)
    n, T = 60, 4
    vals = rng.standard_normal((n, T, 2))
    mask = rng.random(vals.shape) > 0.1
    data = CohortArrays([f"S{i}" for i in range(n)], ["a", "b"], np.where(mask, vals, np.nan), mask,
                        np.full(n, T), {})
    twins = rng.standard_normal((n, 20, T, 2))
    report = evaluate(data, twins, n_sims=2)
    write_report(report, tmp_path)
    for name in ("summary.json", "moments.csv", "phi.csv", "adversary.csv"):
        assert (tmp_path / name).exists(), name
    assert len(read_table(tmp_path / "phi.csv")) == (T - 1) * 2
