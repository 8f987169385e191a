import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbm_twins.cohort import Encoder, SynthConfig, fit_normalizers, synth_cohort
from crbm_twins.crbm import BlockLayout, init_params
from crbm_twins.errors import ConfigError, DataError
from crbm_twins.sampling import (AnnealSchedule, BetaProcess, GibbsChain, beta_next, beta_stationary,
                                 generate_digital_subject, generate_digital_subjects, generate_digital_twins,
                                 gibbs_step, run_schedule)
from oracles import binary_states, joint_enumeration, toy_params


def beta_series(sigma, phi, n, seed=0):
    rng = np.random.default_rng(seed)
    b = beta_stationary(sigma, 1, rng)
    out = np.empty(n)
    for i in range(n):
        b = beta_next(b, sigma, phi, rng)
        out[i] = b[0]
    return out


def test_beta_is_one_without_driving():
    rng = np.random.default_rng(0)
    assert np.all(beta_next(np.full(5, 1.7), 0.0, 0.9, rng) == 1.0)
    assert np.all(beta_stationary(0.0, 4, rng) == 1.0)


def test_beta_process_moments():
    # many parallel short chains give the same stationary contract quickly
    rng = np.random.default_rng(1)
    b = beta_stationary(0.15, 20_000, rng)
    prev = b
    xs, ys = [], []
    for _ in range(50):
        nxt = beta_next(prev, 0.15, 0.9, rng)
        xs.append(prev)
        ys.append(nxt)
        prev = nxt
    x, y = np.concatenate(xs), np.concatenate(ys)
    assert abs(y.mean() - 1) < 0.005
    assert abs(y.std() - 0.15) < 0.01
    assert abs(np.corrcoef(x, y)[0, 1] - 0.9) < 0.02


def test_beta_process_uncorrelated_at_zero_autocorr():
    s = beta_series(0.3, 0.0, 100_000)
    assert abs(np.corrcoef(s[:-1], s[1:])[0, 1]) < 0.015


def test_beta_process_validation():
    with pytest.raises(ConfigError):
        BetaProcess(-0.1, 0.5)
    with pytest.raises(ConfigError):
        BetaProcess(0.1, 1.0)


def test_anneal_schedule_ends_at_zero():
    s = AnnealSchedule(100, 50, 0.3).sigmas()
    assert s[0] == 0.3 and s[49] == 0.3 and s[-1] == 0.0
    assert np.all(np.diff(s[50:]) < 0)
    assert AnnealSchedule(3, 0, 0.3).sigmas()[-1] == 0.0
    with pytest.raises(ConfigError):
        AnnealSchedule(10, 11, 0.1)


def test_gibbs_stationary_frequencies_match_enumeration():
    p = toy_params(4, 3, seed=11)
    V, probs = joint_enumeration(p)
    rng = np.random.default_rng(2)
    n_chains, n_steps = 2000, 250
    chain = GibbsChain(rng.integers(0, 2, (n_chains, 4)).astype(float))
    for _ in range(20):
        gibbs_step(chain, p, rng)
    codes = np.zeros((n_chains, 16))
    weights = 2 ** np.arange(3, -1, -1)
    for _ in range(n_steps):
        gibbs_step(chain, p, rng)
        codes[np.arange(n_chains), (chain.v @ weights).astype(int)] += 1
    freq = codes / n_steps
    est = freq.mean(axis=0)
    se = freq.std(axis=0, ddof=1) / np.sqrt(n_chains)
    order = (V @ weights).astype(int)
    assert np.all(np.abs(est[order] - probs) < 3.5 * se + 1e-12)


def test_low_beta_increases_visited_entropy():
    p = toy_params(4, 3, seed=3, scale=2.0)
    def entropy(beta):
        rng = np.random.default_rng(0)
        chain = GibbsChain(np.zeros((500, 4)), beta=BetaProcess(0.0, 0.0, np.full(500, beta)))
        counts = np.zeros(16)
        for _ in range(100):
            b = chain.beta.state
            chain = gibbs_step(chain, p, rng)
            chain.beta.state = b          # hold the temperature fixed
            np.add.at(counts, (chain.v @ 2 ** np.arange(4)).astype(int), 1)
        q = counts / counts.sum()
        return -(q[q > 0] * np.log(q[q > 0])).sum()
    assert entropy(0.05) > entropy(1.0) + 0.1


def test_full_clamp_never_changes():
    p = toy_params(5, 2, seed=0)
    v0 = np.array([[1.0, 0, 1, 1, 0]] * 3)
    chain = GibbsChain(v0, clamp_mask=np.ones(5, bool), clamp_values=v0,
                       beta=BetaProcess.stationary(0.3, 0.9, 3, np.random.default_rng(0)))
    rng = np.random.default_rng(0)
    for _ in range(50):
        gibbs_step(chain, p, rng)
    assert np.array_equal(chain.v, v0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.0, 0.4))
def test_property_partial_clamps_bit_identical(seed, sigma):
    p = toy_params(6, 3, seed=seed % 5)
    rng = np.random.default_rng(seed)
    mask = rng.random((4, 6)) < 0.5
    values = rng.integers(0, 2, (4, 6)).astype(float)
    chain = GibbsChain(np.zeros((4, 6)), clamp_mask=mask, clamp_values=values)
    run_schedule(chain, p, AnnealSchedule(10, 5, sigma), rng)
    assert np.array_equal(chain.v[mask], values[mask])


def test_sigma_zero_reduces_to_plain_gibbs():
    p = toy_params(5, 3, seed=4)
    a = GibbsChain(np.zeros((6, 5)))
    b = GibbsChain(np.zeros((6, 5)), beta=BetaProcess(0.0, 0.7))
    ra, rb = np.random.default_rng(9), np.random.default_rng(9)
    for _ in range(10):
        gibbs_step(a, p, ra)
        gibbs_step(b, p, rb)
    assert np.array_equal(a.v, b.v) and np.all(b.beta.state == 1.0)


@pytest.fixture(scope="module")
def small_model():
    truth = synth_cohort(SynthConfig(n_subjects=40), 3)
    schema = truth.schema
    norm = fit_normalizers(truth.records, schema)
    enc = Encoder(schema, norm)
    layout = BlockLayout.from_schema(schema)
    params = init_params(layout, 8, np.random.default_rng(0), weight_scale=0.2)
    return truth, enc, params


def test_digital_subject_indicator_and_length(small_model):
    truth, enc, params = small_model
    sched = AnnealSchedule(6, 3, 0.1)
    visits, static = generate_digital_subjects(params, 5, 12, sched, np.random.default_rng(0),
                                               indicator=enc.indicator_slice())
    assert visits.shape == (5, 5, params.layout.n_block)
    ind = visits[:, :, enc.indicator_slice()][..., 0]
    assert np.all(ind[:, 0] == 1) and np.all(ind[:, 1:] == 0)
    base, _ = generate_digital_subject(params, 0, sched, np.random.default_rng(0))
    assert base.shape == (1, params.layout.n_block)
    with pytest.raises(ConfigError):
        generate_digital_subject(params, 4, sched, np.random.default_rng(0))


def test_twins_keep_observed_baseline_and_diverge(small_model):
    truth, enc, params = small_model
    subjects = truth.records[:3]
    ts = generate_digital_twins(params, enc, subjects, 9, 4, AnnealSchedule(6, 3, 0.1), seed=5)
    assert ts.visits.shape == (3, 4, 4, params.layout.n_block)
    for i, rec in enumerate(subjects):
        b, m = enc.encode_visit(rec.visits[0], 0)
        s, sm = enc.encode_static(rec.static_values)
        assert np.array_equal(ts.visits[i][:, 0][:, m], np.broadcast_to(b[m], (4, m.sum())))
        assert np.array_equal(ts.static[i][:, sm], np.broadcast_to(s[sm], (4, sm.sum())))
    assert not np.array_equal(ts.visits[0, 0, 1:], ts.visits[0, 1, 1:])


def test_twins_deterministic_and_independent_of_jobs(small_model):
    truth, enc, params = small_model
    sched = AnnealSchedule(4, 2, 0.1)
    a = generate_digital_twins(params, enc, truth.records[:5], 6, 3, sched, seed=1, chunk_size=2)
    b = generate_digital_twins(params, enc, truth.records[:5], 6, 3, sched, seed=1, chunk_size=2, jobs=2)
    assert np.array_equal(a.visits, b.visits) and np.array_equal(a.static, b.static)


def test_twin_requires_baseline(small_model):
    truth, enc, params = small_model
    rec = truth.records[0]
    from crbm_twins.cohort import SubjectRecord
    empty = SubjectRecord("x", rec.static_values, {3: rec.visits[3]})
    with pytest.raises(DataError):
        generate_digital_twins(params, enc, [empty], 3, 2, AnnealSchedule(2, 1), seed=0)
