"""Rao-Blackwellized estimates against brute-force conditionals."""

import itertools
import math

import numpy as np
import pytest
from scipy.special import expit

from mixsel import estimators
from mixsel.errors import ConfigError
from mixsel.estimators import (RBEstimate, beta_hat, rb_point, rb_update,
                               read_pip_csv, sample_beta, sample_beta_gamma,
                               shrinkage, write_pip_csv)
from mixsel.posterior import make_state
from mixsel.proposals import (add_distribution, joint_distribution, preset,
                              swap_distribution)
from mixsel.sampler import run_chain

from conftest import dense_beta_ls, dense_log_post


def brute_conditionals(data, hp, gamma):
    """Per-covariate (pip, mean) given the rest of gamma, from dense fits."""
    shrink = shrinkage(hp)
    lp0 = dense_log_post(data, hp, gamma)
    pip = np.zeros(data.p)
    mean = np.zeros(data.p)
    for j in range(data.p):
        if j in gamma:
            reduced = tuple(k for k in gamma if k != j)
            lp_minus = dense_log_post(data, hp, reduced)
            pip[j] = expit(lp0 - lp_minus)
            coef = dense_beta_ls(data, gamma)[gamma.index(j)]
            mean[j] = pip[j] * shrink * coef
        elif len(gamma) < hp.s0:
            bigger = tuple(sorted(gamma + (j,)))
            lp_plus = dense_log_post(data, hp, bigger)
            pip[j] = expit(lp_plus - lp0)
            coef = dense_beta_ls(data, bigger)[bigger.index(j)]
            mean[j] = pip[j] * shrink * coef
    return pip, mean


def test_rb_point_matches_dense(tiny):
    data, hp, _, _ = tiny
    for gamma in [(), (1,), (0, 4), (0, 1, 4)]:
        state = make_state(data, hp, gamma)
        pip, beta = rb_point(state, data, hp)
        want_pip, want_beta = brute_conditionals(data, hp, gamma)
        assert np.allclose(pip, want_pip, atol=1e-10)
        assert np.allclose(beta, want_beta, atol=1e-10)


def test_rb_point_at_cap_zeroes_outside(tiny):
    data, hp, _, _ = tiny
    state = make_state(data, hp, (0, 1, 4))
    assert state.size == hp.s0
    pip, _ = rb_point(state, data, hp)
    outside = [j for j in range(data.p) if j not in state.gamma]
    assert np.all(pip[outside] == 0.0)
    assert np.all(pip[list(state.gamma)] > 0.0)


def test_rb_update_add_payload_matches_point(tiny):
    data, hp, _, _ = tiny
    state = make_state(data, hp, (0, 4))
    payload = add_distribution(state, data, hp, preset("lit1"))
    est = RBEstimate.empty(data.p)
    rb_update(est, state, payload, data, hp)
    pip, beta = rb_point(state, data, hp)
    assert np.all(est.counts == 1)
    assert np.allclose(est.pip_rb, pip, atol=1e-12)
    assert np.allclose(est.beta_rb, beta, atol=1e-12)


def test_rb_update_joint_payload_matches_point(tiny):
    data, hp, _, _ = tiny
    spec = preset("lb2")
    for gamma in [(), (2, 5), (0, 1, 4)]:
        state = make_state(data, hp, gamma)
        payload = joint_distribution(state, data, hp, spec)
        est = RBEstimate.empty(data.p)
        rb_update(est, state, payload, data, hp)
        pip, beta = rb_point(state, data, hp)
        assert np.all(est.counts == 1)
        assert np.allclose(est.pip_rb, pip, atol=1e-12)
        assert np.allclose(est.beta_rb, beta, atol=1e-12)


def test_rb_update_none_payload_is_cap_hold(tiny):
    data, hp, _, _ = tiny
    state = make_state(data, hp, (0, 1, 4))
    est = RBEstimate.empty(data.p)
    rb_update(est, state, None, data, hp)
    pip, beta = rb_point(state, data, hp)
    assert np.all(est.counts == 1)
    assert np.allclose(est.pip_rb, pip, atol=1e-12)
    assert np.allclose(est.beta_rb, beta, atol=1e-12)


def test_rb_update_rejects_swap_payload(tiny):
    data, hp, _, _ = tiny
    state = make_state(data, hp, (0, 4))
    payload = swap_distribution(state, data, hp, preset("lit1"))
    with pytest.raises(ConfigError):
        rb_update(RBEstimate.empty(data.p), state, payload, data, hp)


def test_chain_rb_matches_enumeration(tiny):
    data, hp, _, _ = tiny
    logps, supports = [], []
    for size in range(hp.s0 + 1):
        for gamma in itertools.combinations(range(data.p), size):
            logps.append(dense_log_post(data, hp, gamma))
            supports.append(gamma)
    w = np.exp(np.asarray(logps) - max(logps))
    w /= w.sum()
    exact = np.zeros(data.p)
    for prob, gamma in zip(w, supports):
        for j in gamma:
            exact[j] += prob
    tr = run_chain(data, hp, preset("lit1"), (), 20000, seed=17)
    assert np.max(np.abs(tr.rb.pip_rb - exact)) < 0.02


def test_beta_hat_is_shrunk_least_squares(tiny):
    data, hp, _, _ = tiny
    gamma = (1, 3)
    state = make_state(data, hp, gamma)
    bh = beta_hat(state, data, hp)
    dense = shrinkage(hp) * dense_beta_ls(data, gamma)
    assert np.allclose(bh[list(gamma)], dense, atol=1e-10)
    off = [j for j in range(data.p) if j not in gamma]
    assert np.all(bh[off] == 0.0)
    empty = make_state(data, hp, ())
    assert np.all(beta_hat(empty, data, hp) == 0.0)


def test_sample_beta_gamma_moments(tiny):
    data, hp, _, _ = tiny
    gamma = (0, 4)
    state = make_state(data, hp, gamma)
    rng = np.random.default_rng(3)
    draws = np.array([sample_beta_gamma(state, data, hp, rng)[1]
                      for _ in range(4000)])
    phis = np.array([sample_beta_gamma(state, data, hp, rng)[0]
                     for _ in range(4000)])
    target = shrinkage(hp) * dense_beta_ls(data, gamma)
    se = draws.std(axis=0) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - target) < 5 * se)
    rate = shrinkage(hp) * (data.yty / hp.g + state.fit.rss) / 2.0
    phi_mean = 0.5 * data.n / rate
    phi_se = math.sqrt(0.5 * data.n) / rate / math.sqrt(len(phis))
    assert abs(phis.mean() - phi_mean) < 5 * phi_se
    full = sample_beta(state, data, hp, np.random.default_rng(4))
    off = [j for j in range(data.p) if j not in gamma]
    assert np.all(full[off] == 0.0) and np.all(full[list(gamma)] != 0.0)


def test_pip_csv_round_trip(tmp_path):
    est = RBEstimate(pip_sum=np.array([0.4, 1.8, 0.0]),
                     beta_sum=np.array([0.1, -2.0, 0.0]),
                     counts=np.array([2, 2, 0], dtype=np.int64))
    path = tmp_path / "pip.csv"
    write_pip_csv(path, est, meta={"seed": 5})
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first.startswith("# mixsel") and '"seed": 5' in first
    back = read_pip_csv(path)
    assert np.allclose(back, est.pip_rb, atol=1e-9)


def test_rbestimate_merge_and_empty():
    a = RBEstimate.empty(3)
    assert a.count == 0
    assert np.all(a.pip_rb == 0.0) and np.all(a.beta_rb == 0.0)
    b = RBEstimate(pip_sum=np.ones(3), beta_sum=np.ones(3),
                   counts=np.ones(3, dtype=np.int64))
    m = b.merge(b)
    assert m.count == 2
    assert np.allclose(m.pip_rb, 1.0)
    with pytest.raises(ConfigError):
        b.merge(RBEstimate.empty(4))
