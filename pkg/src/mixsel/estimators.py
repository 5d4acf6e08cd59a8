"""Coefficient estimators on top of model-space chains.

The Rao-Blackwellized estimator averages, over visited models, the
conditional inclusion probability and conditional posterior mean of each
coefficient given the rest of the model. Both conditionals are functions
of posterior ratios and factor quantities the proposal scan has already
produced, so accumulation adds no full-width passes; the deletion-side
ratios cost one small triangular solve per update. With a screened
proposal, covariates outside the screen are skipped (their ratios were
never evaluated) and carry their own update counts, which makes screened
estimates an explicit approximation rather than a silent bias.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from . import posterior
from .data import RegressionData
from .errors import ConfigError
from .posterior import Hyperparams, ModelState
from .proposals import MoveDistribution


@dataclass
class RBEstimate:
    """Running sums for pip and coefficient estimates, per covariate."""

    pip_sum: np.ndarray
    beta_sum: np.ndarray
    counts: np.ndarray

    @staticmethod
    def empty(p: int) -> "RBEstimate":
        return RBEstimate(pip_sum=np.zeros(p), beta_sum=np.zeros(p),
                          counts=np.zeros(p, dtype=np.int64))

    @property
    def count(self) -> int:
        return int(self.counts.max()) if self.counts.size else 0

    @property
    def pip_rb(self) -> np.ndarray:
        safe = np.maximum(self.counts, 1)
        return np.where(self.counts > 0, self.pip_sum / safe, 0.0)

    @property
    def beta_rb(self) -> np.ndarray:
        safe = np.maximum(self.counts, 1)
        return np.where(self.counts > 0, self.beta_sum / safe, 0.0)

    def merge(self, other: "RBEstimate") -> "RBEstimate":
        if self.pip_sum.shape != other.pip_sum.shape:
            raise ConfigError("cannot merge estimates of different width")
        return RBEstimate(pip_sum=self.pip_sum + other.pip_sum,
                          beta_sum=self.beta_sum + other.beta_sum,
                          counts=self.counts + other.counts)


def shrinkage(hp: Hyperparams) -> float:
    return hp.g / (1.0 + hp.g)


def beta_hat(state: ModelState, data: RegressionData, hp: Hyperparams) -> np.ndarray:
    """Posterior mean of the coefficient vector given the model, in R^p."""
    out = np.zeros(data.p)
    fit = state.fit
    if fit.size:
        ls = solve_triangular(fit.factor, fit.qty, lower=True, trans="T")
        out[np.asarray(fit.columns, dtype=np.intp)] = shrinkage(hp) * ls
    return out


def rb_update(est: RBEstimate, state: ModelState,
              payload: Optional[MoveDistribution],
              data: RegressionData, hp: Hyperparams) -> None:
    """Accumulate conditional pip and coefficient means at the current model.

    ``payload`` is the proposal's addition (or joint) distribution at
    ``state``; its raw ratios give, for j outside the model, the odds of
    gamma plus j against gamma. For members the odds against dropping come
    from one deletion scan (reused from a joint payload when present).
    Conditional coefficient means are t/d for an addition (the new entry of
    the triangular solve) and the fitted coefficient for a member, both
    times the shrinkage factor g/(1+g).

    The sampler calls this exactly on addition attempts (and on every
    iteration of a joint kernel), so the set of contributing iterations is
    chosen by a coin independent of the state and the average stays
    unbiased. At the size cap the attempt holds and ``payload`` is None:
    every outside conditional probability is an exact zero there, which
    still has to be averaged in, so members of the model are counted too.
    """
    shrink = shrinkage(hp)
    drop_done = False
    if payload is None:
        outside = np.ones(data.p, dtype=bool)
        if state.size:
            outside[np.asarray(state.fit.columns, dtype=np.intp)] = False
        est.counts[outside] += 1                        # pip and mean both zero
    elif payload.kind == "a":
        cands = np.asarray(payload.cands, dtype=np.intp)
        sel = payload.evaluated
        _accumulate_adds(est, hp, cands[sel], payload.raw_logr[sel],
                         payload.extras["d"][sel], payload.extras["t"][sel],
                         at_cap=state.size >= hp.s0)
    elif payload.kind == "j":
        n_add = len(payload.extras["d"])
        cands = np.asarray([c for tag, c in payload.cands[:n_add]], dtype=np.intp)
        _accumulate_adds(est, hp, cands, payload.raw_logr[:n_add],
                         payload.extras["d"], payload.extras["t"],
                         at_cap=False)
        if state.size:
            drop_logr = payload.raw_logr[n_add:]
            _accumulate_drops(est, hp, state, payload.extras["beta_ls"], drop_logr)
            drop_done = True
        if state.size >= hp.s0:
            outside = np.ones(data.p, dtype=bool)
            outside[np.asarray(state.fit.columns, dtype=np.intp)] = False
            est.counts[outside] += 1
    else:
        raise ConfigError(f"cannot accumulate from a {payload.kind!r} payload")
    if state.size and not drop_done:
        beta_ls, drop_logr = posterior.log_ratios_drop(state.fit, data, hp)
        _accumulate_drops(est, hp, state, beta_ls, drop_logr)


def _accumulate_adds(est, hp, cands, raw, d, t, at_cap: bool) -> None:
    if cands.size == 0:
        return
    if at_cap:
        # the enlarged model would break the size cap: conditional pip is zero
        est.counts[cands] += 1
        return
    pip_cond = expit(raw)                               # pi(g+j) / (pi(g+j) + pi(g))
    mean_cond = shrinkage(hp) * t / d                   # coefficient of j on g+j
    est.pip_sum[cands] += pip_cond
    est.beta_sum[cands] += pip_cond * mean_cond
    est.counts[cands] += 1


def _accumulate_drops(est, hp, state, beta_ls, drop_logr) -> None:
    cols = np.asarray(state.fit.columns, dtype=np.intp)
    pip_cond = expit(-drop_logr)                        # pi(g) / (pi(g) + pi(g-k))
    est.pip_sum[cols] += pip_cond
    est.beta_sum[cols] += pip_cond * shrinkage(hp) * beta_ls
    est.counts[cols] += 1


def rb_point(state: ModelState, data: RegressionData, hp: Hyperparams):
    """Single-state conditional estimates: (pip, coefficient mean) in R^p.

    Same quantities :func:`rb_update` accumulates, evaluated at one model
    from fresh add/drop scans. Collinear additions and additions blocked by
    the size cap count as zero-probability inclusions.
    """
    est = RBEstimate.empty(data.p)
    if state.size >= hp.s0:
        outside = np.ones(data.p, dtype=bool)
        if state.size:
            outside[np.asarray(state.fit.columns, dtype=np.intp)] = False
        est.counts[outside] += 1
    else:
        cands, raw, d, t, valid = posterior.log_ratios_add(state.fit, data, hp)
        cands = np.asarray(cands, dtype=np.intp)
        _accumulate_adds(est, hp, cands[valid], raw[valid], d[valid], t[valid],
                         at_cap=False)
        # count collinear candidates as zero-probability inclusions; members
        # are also reported invalid by the scan but get theirs from the
        # deletion side below
        member = np.zeros(data.p, dtype=bool)
        if state.size:
            member[np.asarray(state.fit.columns, dtype=np.intp)] = True
        est.counts[cands[~valid & ~member[cands]]] += 1
    if state.size:
        beta_ls, drop_logr = posterior.log_ratios_drop(state.fit, data, hp)
        _accumulate_drops(est, hp, state, beta_ls, drop_logr)
    return est.pip_rb, est.beta_rb


def sample_beta_gamma(state: ModelState, data: RegressionData, hp: Hyperparams,
                      rng: np.random.Generator):
    """Draw (phi, beta_gamma) from the conditional posterior given the model.

    phi is Gamma with shape n/2 and rate g/(1+g) * (yty/g + rss)/2 from the
    integrated likelihood; beta_gamma is Gaussian around the shrunk
    least-squares fit with covariance (g/(1+g)) / phi times the inverse
    Gram block.
    """
    shrink = shrinkage(hp)
    rate = shrink * (data.yty / hp.g + state.fit.rss) / 2.0
    phi = rng.gamma(shape=0.5 * data.n, scale=1.0 / rate)
    m = state.fit.size
    if m == 0:
        return phi, np.zeros(0)
    ls = solve_triangular(state.fit.factor, state.fit.qty, lower=True, trans="T")
    eps = rng.standard_normal(m)
    noise = solve_triangular(state.fit.factor, eps, lower=True, trans="T")
    return phi, shrink * ls + math.sqrt(shrink / phi) * noise


def sample_beta(state: ModelState, data: RegressionData, hp: Hyperparams,
                rng: np.random.Generator) -> np.ndarray:
    """Full-length coefficient draw; zeros off the model."""
    _, bg = sample_beta_gamma(state, data, hp, rng)
    out = np.zeros(data.p)
    if state.fit.size:
        out[np.asarray(state.fit.columns, dtype=np.intp)] = bg
    return out


def write_pip_csv(path, est: RBEstimate, meta: dict | None = None) -> None:
    """Covariate-level estimates as delimited text with a metadata header."""
    pip = est.pip_rb
    beta = est.beta_rb
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# mixsel " + json.dumps(meta or {}, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["j", "pip_rb", "beta_rb"])
        for j in range(pip.shape[0]):
            writer.writerow([j, f"{pip[j]:.10g}", f"{beta[j]:.10g}"])


def read_pip_csv(path) -> np.ndarray:
    """Read back the pip column written by :func:`write_pip_csv`."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("j,"):
                continue
            parts = line.strip().split(",")
            if len(parts) >= 2:
                rows.append(float(parts[1]))
    return np.asarray(rows)
