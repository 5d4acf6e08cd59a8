"""Shared fixtures and the independent dense reference implementation.

The reference path never touches the incremental factor code: models are
fit with numpy's least squares on explicitly sliced design columns, and
the log posterior is recomputed from its closed form. Tests compare the
package's incremental results against these.
"""

import math

import numpy as np
import pytest

from mixsel.data import RegressionData, SyntheticSpec, make_dataset
from mixsel.posterior import Hyperparams


def dense_rss(data: RegressionData, gamma) -> float:
    """Residual sum of squares by direct least squares on a column slice."""
    gamma = sorted(gamma)
    if not gamma:
        return float(data.y @ data.y)
    xg = data.x[:, gamma]
    _, res, rank, _ = np.linalg.lstsq(xg, data.y, rcond=None)
    if rank < len(gamma):
        raise np.linalg.LinAlgError("rank deficient reference fit")
    if res.size:
        return float(res[0])
    r = data.y - xg @ np.linalg.lstsq(xg, data.y, rcond=None)[0]
    return float(r @ r)


def dense_log_post(data: RegressionData, hp: Hyperparams, gamma) -> float:
    """Unnormalized log posterior recomputed from scratch."""
    c = data.yty / hp.g
    return (-hp.kappa * len(gamma) * math.log(data.p)
            - 0.5 * data.n * math.log(c + dense_rss(data, gamma)))


def dense_beta_ls(data: RegressionData, gamma) -> np.ndarray:
    gamma = sorted(gamma)
    if not gamma:
        return np.zeros(0)
    return np.linalg.lstsq(data.x[:, gamma], data.y, rcond=None)[0]


def random_instance(seed: int, n=30, p=6, s_star=2, sigma_beta=2.0,
                    design="independent", s0=3):
    """Small dataset plus hyperparameters, deterministic in the seed."""
    spec = SyntheticSpec(n=n, p=p, design=design, beta_mode="random",
                         s_star=s_star, sigma_beta=sigma_beta, seed=seed)
    data, beta, gamma_star = make_dataset(spec)
    hp = Hyperparams.default(p, s0=s0)
    return data, hp, beta, gamma_star


@pytest.fixture
def tiny():
    """p=6 instance with a clear two-variable signal."""
    return random_instance(seed=0, n=40, p=6, s_star=2, sigma_beta=2.5)


@pytest.fixture
def tiny_weak():
    """Noisy instance where the posterior spreads over several models."""
    return random_instance(seed=3, n=25, p=6, s_star=3, sigma_beta=0.4)
