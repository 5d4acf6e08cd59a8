"""Log posterior over models and incremental posterior ratios.

The model posterior after integrating out coefficients and precision is

    log pi(gamma) = -kappa |gamma| log p - (n/2) log(yty/g + rss(gamma)),

up to an additive constant, restricted to models of size at most s0. All
arithmetic stays in the log domain; ratios between neighboring models are
computed from a single factor update, never by differencing two unrelated
fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import linalg
from .data import RegressionData
from .errors import CollinearColumn, ConfigError, IllegalMove, SizeExceeded
from .linalg import ModelFit


@dataclass(frozen=True)
class Hyperparams:
    """Prior settings: sparsity exponents kappa0/kappa1, g, and size cap s0.

    kappa = kappa0 + kappa1 is the effective per-covariate penalty exponent.
    The default g, chosen when ``g`` is None in :meth:`default`, satisfies
    1 + g = p^(2 kappa1).
    """

    kappa0: float
    kappa1: float
    g: float
    s0: int

    def __post_init__(self):
        if self.kappa0 <= 0 or self.kappa1 <= 0:
            raise ConfigError("kappa0 and kappa1 must be positive")
        if self.g <= 0:
            raise ConfigError("g must be positive")
        if self.s0 < 1:
            raise ConfigError("s0 must be a positive integer")

    @property
    def kappa(self) -> float:
        return self.kappa0 + self.kappa1

    @staticmethod
    def default(p: int, kappa0: float = 2.0, kappa1: float = 1.5,
                s0: Optional[int] = None, g: Optional[float] = None) -> "Hyperparams":
        if s0 is None:
            s0 = p
        if g is None:
            g = float(p) ** (2.0 * kappa1) - 1.0
        return Hyperparams(kappa0=kappa0, kappa1=kappa1, g=g, s0=int(s0))


@dataclass(frozen=True)
class ModelState:
    """A model, its factor, and its unnormalized log posterior."""

    gamma: Tuple[int, ...]
    fit: ModelFit
    log_post: float

    @property
    def size(self) -> int:
        return len(self.gamma)


def log_post_from_rss(data: RegressionData, hp: Hyperparams, size: int,
                      rss: float) -> float:
    c = data.yty / hp.g
    return -hp.kappa * size * math.log(data.p) - 0.5 * data.n * math.log(c + rss)


def log_post_from_fit(data: RegressionData, hp: Hyperparams, fit: ModelFit) -> float:
    return log_post_from_rss(data, hp, fit.size, fit.rss)


def make_state(data: RegressionData, hp: Hyperparams, gamma) -> ModelState:
    """Build the state for ``gamma`` from scratch."""
    gamma = tuple(sorted(int(j) for j in gamma))
    if len(gamma) > hp.s0:
        raise SizeExceeded(f"|gamma| = {len(gamma)} exceeds s0 = {hp.s0}")
    if gamma and (gamma[0] < 0 or gamma[-1] >= data.p):
        raise IllegalMove(f"column index out of range in {gamma}")
    fit = linalg.fit_from_scratch(data, gamma)
    return ModelState(gamma=gamma, fit=fit, log_post=log_post_from_fit(data, hp, fit))


def log_post_unnorm(data: RegressionData, hp: Hyperparams, gamma) -> float:
    return make_state(data, hp, gamma).log_post


def apply_move(state: ModelState, data: RegressionData, hp: Hyperparams,
               move) -> ModelState:
    """Apply ('add', j), ('drop', k) or ('swap', j, k) with one factor update.

    k refers to a column currently in the model. Swaps extend by j first
    and then drop k, so the intermediate factor is reused.
    """
    kind = move[0]
    fit = state.fit
    members = set(state.gamma)
    if kind == "add":
        j = int(move[1])
        if j in members:
            raise IllegalMove(f"add: column {j} already in model")
        if state.size + 1 > hp.s0:
            raise IllegalMove("add: size cap reached")
        new_fit = linalg.chol_extend(fit, data, j)
        gamma = tuple(sorted(state.gamma + (j,)))
    elif kind == "drop":
        k = int(move[1])
        if k not in members:
            raise IllegalMove(f"drop: column {k} not in model")
        new_fit = linalg.chol_drop(fit, data, fit.columns.index(k))
        gamma = tuple(j for j in state.gamma if j != k)
    elif kind == "swap":
        j, k = int(move[1]), int(move[2])
        if j in members or k not in members:
            raise IllegalMove(f"swap: bad pair ({j}, {k})")
        mid = linalg.chol_extend(fit, data, j)
        new_fit = linalg.chol_drop(mid, data, mid.columns.index(k))
        gamma = tuple(sorted((members - {k}) | {j}))
    else:
        raise IllegalMove(f"unknown move kind {kind!r}")
    return ModelState(gamma=gamma, fit=new_fit,
                      log_post=log_post_from_fit(data, hp, new_fit))


def log_ratio_move(state: ModelState, data: RegressionData, hp: Hyperparams,
                   move) -> float:
    """log pi(gamma') - log pi(gamma) for a single neighborhood move.

    Collinear additions (including the add half of a swap) map to -inf
    rather than raising, since the posterior ratio genuinely degenerates.
    Moves outside the neighborhood structure raise IllegalMove.
    """
    try:
        new_state = apply_move(state, data, hp, move)
    except CollinearColumn:
        return -math.inf
    return new_state.log_post - state.log_post


def log_ratios_add(fit: ModelFit, data: RegressionData, hp: Hyperparams,
                   candidates: Optional[np.ndarray] = None):
    """Vector of log posterior ratios for every candidate addition.

    Returns (cand, logr, d, t, valid). Entries where valid is False
    (collinear or already in the model) carry logr = -inf. No size-cap
    logic here: callers decide whether additions are admissible, and the
    raw formula is what landscape statistics and certification constants
    need.
    """
    cand, d, t, rss_new, valid = linalg.extend_scan(fit, data, candidates)
    c = data.yty / hp.g
    base = math.log(c + fit.rss)
    logr = np.where(
        valid,
        -hp.kappa * math.log(data.p) - 0.5 * data.n * (np.log(c + rss_new) - base),
        -np.inf,
    )
    return cand, logr, d, t, valid


def log_ratios_drop(fit: ModelFit, data: RegressionData, hp: Hyperparams):
    """Vector of log posterior ratios for dropping each fitted column.

    Returns (beta_ls, logr) in insertion order of fit.columns.
    """
    beta, rss_new = linalg.drop_scan(fit, data)
    if fit.size == 0:
        return beta, np.zeros(0)
    c = data.yty / hp.g
    base = math.log(c + fit.rss)
    logr = hp.kappa * math.log(data.p) - 0.5 * data.n * (np.log(c + rss_new) - base)
    return beta, logr
