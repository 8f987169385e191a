import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from crbm_twins.crbm import (BlockLayout, CrbmParams, cond_hidden, cond_visible, energy, exact_log_probs,
                             free_energy, free_energy_grad, init_params)
from crbm_twins.crbm.layout import GAUSSIAN
from oracles import binary_states, joint_enumeration, toy_params


def mixed_params(seed=0, n_hidden=3, hidden="relu"):
    rng = np.random.default_rng(seed)
    layout = BlockLayout.flat(["gaussian", "bernoulli", ("onehot", 3), "gaussian"])
    nv = layout.n_visible
    return CrbmParams(layout, 0.5 * rng.standard_normal((nv, n_hidden)), rng.standard_normal(nv),
                      0.3 * rng.standard_normal(nv), rng.standard_normal(n_hidden),
                      0.3 * rng.standard_normal(n_hidden), hidden=hidden)


MIXED_V = np.array([[0.3, 1, 0, 1, 0, -0.7], [-1.2, 0, 1, 0, 0, 2.0], [0.0, 1, 0, 0, 1, 0.1]])


def test_energy_zero_state_is_zero():
    p = toy_params(3, 2, 0)
    p = p.with_arrays({"vbias": np.zeros(3), "hbias": np.zeros(2)})
    assert energy(np.zeros(3), np.zeros(2), p) == 0.0


def test_energy_hand_example():
    layout = BlockLayout.flat(["bernoulli", "bernoulli"])
    p = CrbmParams(layout, np.array([[1.0], [-1.0]]), np.zeros(2), np.zeros(2), np.zeros(1), np.zeros(1),
                   hidden="bernoulli")
    assert energy(np.array([1.0, 1.0]), np.array([1.0]), p) == 0.0


def test_energy_hand_value_with_coupling_sign():
    layout = BlockLayout.flat(["bernoulli"])
    p = CrbmParams(layout, np.array([[2.0]]), np.array([0.5]), np.zeros(1), np.array([-1.0]), np.zeros(1),
                   hidden="bernoulli")
    # -0.5*1 - 2*1*1 + 1*1
    assert energy(np.array([1.0]), np.array([1.0]), p) == pytest.approx(-1.5)


def test_zero_weights_make_energy_separable():
    p = mixed_params().with_arrays({"W": np.zeros((6, 3))})
    h = np.array([0.4, 0.0, 1.3])
    v = MIXED_V[0]
    zero_h = energy(v, np.zeros(3), p) - (p.hbias**2 / (2 * p.hvar)).sum()
    zero_v = energy(np.zeros(6), h, p) - (p.vbias**2 / (2 * p.vvar))[p.layout.kinds == GAUSSIAN].sum()
    assert energy(v, h, p) == pytest.approx(zero_h + zero_v)


def test_shape_mismatch_rejected():
    p = mixed_params()
    with pytest.raises(ValueError):
        energy(np.zeros(5), np.zeros(3), p)
    with pytest.raises(ValueError):
        cond_hidden(np.zeros(7), p, mode="mean")
    with pytest.raises(ValueError):
        cond_visible(np.zeros(2), p, mode="mean")
    with pytest.raises(ValueError):
        CrbmParams(p.layout, np.zeros((5, 3)), p.vbias, p.vlogscale, p.hbias, p.hlogscale)


def test_relu_mean_at_zero_input():
    layout = BlockLayout.flat(["gaussian"])
    for log_eps in (0.0, 0.7):
        p = CrbmParams(layout, np.zeros((1, 1)), np.zeros(1), np.zeros(1), np.zeros(1), np.array([log_eps]))
        mean = cond_hidden(np.zeros(1), p, mode="mean")[0]
        assert mean == pytest.approx(math.exp(log_eps) * math.sqrt(2 / math.pi), rel=1e-12)


def test_relu_mean_matches_quadrature():
    p = mixed_params()
    for v in MIXED_V:
        mean = cond_hidden(v, p, mode="mean")
        loc = p.hbias + (v / p.vvar) @ p.W
        eps = np.sqrt(p.hvar)
        for mu in range(3):
            dens = lambda h: math.exp(-((h - loc[mu]) ** 2) / (2 * eps[mu] ** 2))
            num = quad(lambda h: h * dens(h), 0, np.inf)[0]
            den = quad(dens, 0, np.inf)[0]
            assert mean[mu] == pytest.approx(num / den, rel=1e-8)


def test_relu_samples_match_mean_and_are_nonnegative():
    p = mixed_params()
    rng = np.random.default_rng(1)
    v = np.repeat(MIXED_V[:1], 200_000, axis=0)
    h = cond_hidden(v, p, rng=rng)
    assert h.min() >= 0
    se = h.std(axis=0) / math.sqrt(len(h))
    assert np.all(np.abs(h.mean(axis=0) - cond_hidden(MIXED_V[0], p, mode="mean")) < 4 * se)


def test_strongly_negative_preactivation_gives_zero():
    layout = BlockLayout.flat(["gaussian"])
    p = CrbmParams(layout, np.zeros((1, 1)), np.zeros(1), np.zeros(1), np.array([-40.0]), np.zeros(1))
    h = cond_hidden(np.zeros((10_000, 1)), p, rng=np.random.default_rng(0))
    # truncated at 0 the sample is ~ Exp(rate 40): P(h > 0.25) = e^-10
    assert np.all(np.isfinite(h)) and np.mean(h < 0.25) > 0.999 and h.mean() < 0.03


def test_bernoulli_hidden_is_logistic():
    p = toy_params(4, 3, 2)
    v = np.array([1.0, 0.0, 1.0, 1.0])
    expected = 1 / (1 + np.exp(-(p.hbias + v @ p.W)))
    assert np.allclose(cond_hidden(v, p, mode="mean"), expected, atol=1e-15)


def test_full_clamp_returns_clamp_values():
    p = mixed_params()
    h = np.abs(np.random.default_rng(0).standard_normal((3, 3)))
    out = cond_visible(h, p, np.ones(6, dtype=bool), MIXED_V, rng=np.random.default_rng(0))
    assert np.array_equal(out, MIXED_V)


def test_zero_weight_gaussian_mean_is_location():
    p = mixed_params().with_arrays({"W": np.zeros((6, 3))})
    out = cond_visible(np.ones(3), p, mode="mean")
    assert out[0] == p.vbias[0] and out[5] == p.vbias[5]


def test_onehot_probabilities_sum_to_one_and_samples_are_onehot():
    p = mixed_params()
    h = np.abs(np.random.default_rng(0).standard_normal((50, 3))) * 5
    means = cond_visible(h, p, mode="mean")
    assert np.allclose(means[:, 2:5].sum(axis=1), 1.0, atol=1e-12)
    samples = cond_visible(h, p, rng=np.random.default_rng(3))
    assert np.all(samples[:, 2:5].sum(axis=1) == 1)
    assert set(np.unique(samples[:, 1])) <= {0.0, 1.0}


def test_free_energy_zero_coupling_is_bias_term_plus_constant():
    p = mixed_params().with_arrays({"W": np.zeros((6, 3))})
    F = free_energy(MIXED_V, p)
    a = np.where(p.layout.kinds == GAUSSIAN, (MIXED_V - p.vbias) ** 2 / (2 * p.vvar), -p.vbias * MIXED_V).sum(1)
    assert np.allclose(F - a, (F - a)[0], atol=1e-12)


def test_free_energy_matches_numerical_integration():
    p = mixed_params()
    for v in MIXED_V:
        a = np.where(p.layout.kinds == GAUSSIAN, (v - p.vbias) ** 2 / (2 * p.vvar), -p.vbias * v).sum()
        inp = (v / p.vvar) @ p.W
        log_int = 0.0
        for mu in range(3):
            f = lambda h: math.exp(-((h - p.hbias[mu]) ** 2) / (2 * p.hvar[mu]) + h * inp[mu] / p.hvar[mu])
            log_int += math.log(quad(f, 0, np.inf)[0])
        assert free_energy(v, p) == pytest.approx(a - log_int, abs=1e-8)


def test_free_energy_enumeration_toy():
    p = toy_params(6, 4, 5)
    states, logp = exact_log_probs(p, binary_states(6))
    _, p_enum = joint_enumeration(p)
    assert np.max(np.abs(np.exp(logp) - p_enum)) < 1e-9


def test_strengthening_aligned_weight_lowers_free_energy():
    p = mixed_params()
    v = MIXED_V[0]
    W = p.W.copy()
    W[1, 0] += 0.1    # v[1] = 1, so this raises the hidden input of unit 0
    assert free_energy(v, p.with_arrays({"W": W})) < free_energy(v, p)


@pytest.mark.parametrize("hidden", ["relu", "bernoulli"])
def test_free_energy_gradient_matches_finite_differences(hidden):
    p = mixed_params(seed=3, hidden=hidden)
    g = free_energy_grad(MIXED_V, p)
    for name in ("W", "vbias", "vlogscale", "hbias", "hlogscale"):
        base = getattr(p, name)
        fd = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            e = np.zeros_like(base)
            e[idx] = 1e-6
            up = free_energy(MIXED_V, p.with_arrays({name: base + e})).mean()
            dn = free_energy(MIXED_V, p.with_arrays({name: base - e})).mean()
            fd[idx] = (up - dn) / 2e-6
        if name == "vlogscale":
            fd[p.layout.kinds != GAUSSIAN] = 0
        if name == "hlogscale" and hidden == "bernoulli":
            fd[:] = 0
        assert np.allclose(g[name], fd, atol=1e-7), name


def test_tempered_gaussian_variance_scales_with_beta():
    p = mixed_params().with_arrays({"W": np.zeros((6, 3))})
    rng = np.random.default_rng(0)
    h = np.zeros((100_000, 3))
    x = cond_visible(h, p, rng=rng, beta=0.25)[:, 0]
    assert x.var() == pytest.approx(p.vvar[0] / 0.25, rel=0.02)


def test_init_params_matches_marginals():
    layout = BlockLayout.flat(["bernoulli", "gaussian", ("onehot", 2)])
    V = np.array([[1, 2.0, 1, 0], [0, 4.0, 1, 0], [1, 0.0, 0, 1], [1, 0.0, 1, 0]])
    p = init_params(layout, 2, np.random.default_rng(0), data=(V, np.ones_like(V, dtype=bool)))
    assert p.vbias[0] == pytest.approx(math.log(0.75 / 0.25))
    assert p.vbias[1] == pytest.approx(1.5)
    assert p.vbias[2] - p.vbias[3] == pytest.approx(math.log(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0))
def test_property_conditional_clamp_and_support(seed, beta):
    p = mixed_params(seed % 7)
    rng = np.random.default_rng(seed)
    h = cond_hidden(MIXED_V, p, rng=rng, beta=beta)
    assert np.all(h >= 0)
    per_var = rng.random((3, 4)) < 0.5          # whole one-hot groups are clamped together
    mask = per_var[:, [0, 1, 2, 2, 2, 3]]
    v = cond_visible(h, p, mask, MIXED_V, rng=rng, beta=beta)
    assert np.array_equal(v[mask], MIXED_V[mask])
    assert np.all(v[:, 2:5].sum(axis=1) == 1)
