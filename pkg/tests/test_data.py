"""Synthetic generation, screening, and delimited I/O."""

import math

import numpy as np
import pytest

from mixsel.data import (
    FIXED_BETA_PATTERN,
    RegressionData,
    SyntheticSpec,
    gen_design,
    gen_response,
    load_csv,
    load_truth,
    make_dataset,
    marginal_screen,
    save_truth,
    save_xy,
)
from mixsel.errors import (
    ConfigError,
    DimensionMismatch,
    ParseError,
    ZeroVarianceColumn,
)


def test_generation_is_deterministic():
    spec = SyntheticSpec(n=50, p=12, beta_mode="random", s_star=3, seed=11)
    d1, b1, g1 = make_dataset(spec)
    d2, b2, g2 = make_dataset(spec)
    assert np.array_equal(d1.x, d2.x)
    assert np.array_equal(d1.y, d2.y)
    assert np.array_equal(b1, b2)
    assert g1 == g2


def test_seed_changes_data():
    a = gen_design(SyntheticSpec(n=20, p=5, beta_mode="random", s_star=2, seed=0))
    b = gen_design(SyntheticSpec(n=20, p=5, beta_mode="random", s_star=2, seed=1))
    assert not np.allclose(a, b)


def test_fixed10_signal_pattern():
    spec = SyntheticSpec(n=200, p=15, snr=3.0, beta_mode="fixed10", seed=4)
    x = gen_design(spec)
    y, beta, gamma_star = gen_response(x, spec)
    scale = 3.0 * math.sqrt(math.log(15) / 200)
    assert np.allclose(beta[:10], scale * np.asarray(FIXED_BETA_PATTERN))
    assert np.all(beta[10:] == 0)
    assert gamma_star == tuple(range(10))


def test_ar1_design_correlation():
    # sample column correlation should sit near e^{-1} between neighbors
    spec = SyntheticSpec(n=20000, p=6, design="ar1", beta_mode="random",
                         s_star=1, seed=7)
    x = gen_design(spec)
    corr = np.corrcoef(x[:, 2], x[:, 3])[0, 1]
    assert abs(corr - math.exp(-1.0)) < 0.02
    # unit marginal variance throughout the recursion
    assert abs(x[:, 5].var() - 1.0) < 0.05


def test_block_design_covariance():
    spec = SyntheticSpec(n=40000, p=8, design="block", block_d=4,
                         beta_mode="random", s_star=1, seed=8)
    x = gen_design(spec)
    # within block: e^{-|j-k|/3}; across blocks: zero
    within = np.corrcoef(x[:, 0], x[:, 2])[0, 1]
    across = np.corrcoef(x[:, 1], x[:, 6])[0, 1]
    assert abs(within - math.exp(-2.0 / 3.0)) < 0.02
    assert abs(across) < 0.02


def test_block_divisibility_enforced():
    with pytest.raises(ConfigError):
        SyntheticSpec(n=20, p=50, design="block", block_d=7)


def test_fixed10_needs_ten_columns():
    with pytest.raises(ConfigError):
        SyntheticSpec(n=20, p=8, beta_mode="fixed10")


def test_from_arrays_validations():
    with pytest.raises(DimensionMismatch):
        RegressionData.from_arrays(np.ones((4, 2)), np.ones(3))
    bad = np.ones((4, 2))
    bad[0, 0] = np.nan
    with pytest.raises(ParseError):
        RegressionData.from_arrays(bad, np.ones(4))


def test_gram_cap_controls_precomputation():
    x = np.random.default_rng(0).standard_normal((10, 5))
    y = np.arange(10.0)
    full = RegressionData.from_arrays(x, y, gram_cap=5)
    lazy = RegressionData.from_arrays(x, y, gram_cap=4)
    assert full.gram is not None and lazy.gram is None
    cols = [0, 3]
    assert np.allclose(full.cross(cols, 4), lazy.cross(cols, 4))
    assert np.allclose(full.cross(cols), lazy.cross(cols))


def test_marginal_screen_budget_and_threshold():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((100, 8))
    beta = np.zeros(8)
    beta[1] = 4.0
    beta[6] = 3.0
    y = x @ beta + 0.1 * rng.standard_normal(100)
    data = RegressionData.from_arrays(x, y)
    keep = marginal_screen(data, budget=2)
    assert set(keep) == {1, 6}
    scores = np.abs(data.xty) / np.sqrt(data.col_norms2)
    thresh = marginal_screen(data, threshold=float(np.sort(scores)[-2]))
    assert set(thresh) == {1, 6}
    with pytest.raises(ConfigError):
        marginal_screen(data, budget=2, threshold=1.0)
    with pytest.raises(ConfigError):
        marginal_screen(data)


def test_screen_rejects_zero_columns():
    x = np.ones((5, 2))
    x[:, 1] = 0.0
    data = RegressionData.from_arrays(x, np.ones(5))
    with pytest.raises(ZeroVarianceColumn):
        marginal_screen(data, budget=1)


def test_csv_round_trip(tmp_path):
    spec = SyntheticSpec(n=17, p=4, beta_mode="random", s_star=2, seed=5)
    data, beta, gamma_star = make_dataset(spec)
    xp, yp = tmp_path / "X.csv", tmp_path / "y.csv"
    save_xy(xp, yp, data.x, data.y, meta=spec.to_dict())
    back = load_csv(xp, yp)
    assert np.array_equal(back.x, data.x)
    assert np.array_equal(back.y, data.y)
    tp = tmp_path / "truth.json"
    save_truth(tp, gamma_star, beta, spec=spec)
    truth = load_truth(tp)
    assert tuple(truth["gamma_star"]) == gamma_star
    assert np.allclose(truth["beta_star"], beta)
    assert truth["spec"]["seed"] == 5


def test_load_csv_standardize(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 3)) * 5 + 2
    y = rng.standard_normal(30)
    save_xy(tmp_path / "X.csv", tmp_path / "y.csv", x, y)
    data = load_csv(tmp_path / "X.csv", tmp_path / "y.csv", standardize=True)
    assert np.allclose(data.x.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(data.col_norms2, 30.0)


def test_load_csv_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("1,2\nnot,numbers\n")
    (tmp_path / "y.csv").write_text("1\n2\n")
    with pytest.raises(ParseError):
        load_csv(tmp_path / "bad.csv", tmp_path / "y.csv")
    (tmp_path / "X.csv").write_text("1,2\n3,4\n5,6\n")
    with pytest.raises(DimensionMismatch):
        load_csv(tmp_path / "X.csv", tmp_path / "y.csv")


def test_spec_dict_round_trip():
    spec = SyntheticSpec(n=10, p=12, design="ar1", beta_mode="random",
                         s_star=2, seed=9)
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ConfigError):
        SyntheticSpec.from_dict({**spec.to_dict(), "extra": 1})
