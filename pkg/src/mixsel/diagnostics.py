"""Chain diagnostics: effective sample sizes, mode counting, and the
posterior-ratio landscape around sampled models.

Everything here is pure post-processing over immutable traces, so it can
run on any worker after the fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import estimators, posterior
from .data import RegressionData
from .errors import ConfigError, QNotDividingP, SingularCovariance, ZeroVariance
from .posterior import Hyperparams, ModelState
from .sampler import ChainTrace

MIN_SERIES = 100


# ---------------------------------------------------------------------------
# posterior-ratio landscape


@dataclass(frozen=True)
class LandscapeStats:
    """Extremal one-flip log ratios at a model, in log-p units.

    a0/d0 range over every addition/deletion; a1/d1 restrict to flips that
    move toward the reference model (adding a reference column, dropping a
    non-reference one). None marks an empty index range.
    """

    r_a0: Optional[float]
    r_d0: Optional[float]
    r_a1: Optional[float]
    r_d1: Optional[float]
    r_max: Optional[float]
    overfit_flag: bool


def landscape_stats(state: ModelState, data: RegressionData, hp: Hyperparams,
                    reference) -> LandscapeStats:
    """Extrema of the one-flip log posterior ratios, split by reference membership."""
    ref = frozenset(int(j) for j in reference)
    members = frozenset(state.gamma)
    logp = math.log(data.p)
    r_a0 = r_a1 = r_d0 = r_d1 = None
    if state.size < data.p:
        cand, logr, _, _, _ = posterior.log_ratios_add(state.fit, data, hp)
        outside = np.array([j not in members for j in cand])
        vals = logr[outside] / logp
        r_a0 = float(np.max(vals))
        toward = np.array([j in ref and j not in members for j in cand])
        if toward.any():
            r_a1 = float(np.min(logr[toward] / logp))
    if state.size > 0:
        _, logr_d = posterior.log_ratios_drop(state.fit, data, hp)
        vals = logr_d / logp
        r_d0 = float(np.max(vals))
        away = np.array([k not in ref for k in state.fit.columns])
        if away.any():
            r_d1 = float(np.min(vals[away]))
    defined = [v for v in (r_a0, r_d0) if v is not None]
    r_max = max(defined) if defined else None
    return LandscapeStats(r_a0=r_a0, r_d0=r_d0, r_a1=r_a1, r_d1=r_d1,
                          r_max=r_max, overfit_flag=ref <= members)


def local_mode_flag(state: ModelState, data: RegressionData, hp: Hyperparams) -> bool:
    """True iff the model beats every single addition and deletion.

    Additions past the size cap land outside the model space, where the
    posterior is zero, so they cannot disqualify a mode.
    """
    if state.size < hp.s0 and state.size < data.p:
        cand, logr, _, _, _ = posterior.log_ratios_add(state.fit, data, hp)
        outside = np.array([j not in state.gamma for j in cand])
        if np.max(logr[outside]) >= 0.0:
            return False
    if state.size > 0:
        _, logr_d = posterior.log_ratios_drop(state.fit, data, hp)
        if np.max(logr_d) >= 0.0:
            return False
    return True


def count_local_modes(gammas, data: RegressionData, hp: Hyperparams) -> int:
    """Number of distinct sampled models that are one-flip local modes."""
    seen = set()
    n_modes = 0
    for g in gammas:
        key = tuple(sorted(g))
        if key in seen:
            continue
        seen.add(key)
        if local_mode_flag(posterior.make_state(data, hp, key), data, hp):
            n_modes += 1
    return n_modes


# ---------------------------------------------------------------------------
# effective sample size


def _batch_layout(n: int):
    b = int(math.floor(math.sqrt(n)))
    a = n // b
    return a, b


def ess_batch_means(series) -> float:
    """Batch-means effective sample size of a scalar series.

    Batches are sqrt(N) long, which caps the autocorrelation range the
    estimator can see; prefer :func:`ess_autocorr` for chains whose
    integrated time may exceed that.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < MIN_SERIES:
        raise ConfigError(f"need at least {MIN_SERIES} points, got {n}")
    s2 = float(np.var(x, ddof=1))
    if s2 <= 0.0:
        raise ZeroVariance("constant series has no effective sample size")
    a, b = _batch_layout(n)
    mu = x[: a * b].reshape(a, b).mean(axis=1)
    sigma2_bm = b * float(np.var(mu, ddof=1))
    if sigma2_bm <= 0.0:
        raise ZeroVariance("batch means are constant")
    return n * s2 / sigma2_bm


def ess_autocorr(series) -> float:
    """Effective sample size from the initial monotone sequence estimator.

    Autocovariances come from one FFT pass; lagged correlations are summed
    in adjacent pairs, truncated at the first nonpositive pair, and the
    pair sums are forced nonincreasing before summation. This tracks
    arbitrarily long autocorrelation, unlike the sqrt(N) batch window.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < MIN_SERIES:
        raise ConfigError(f"need at least {MIN_SERIES} points, got {n}")
    x = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    if acov[0] <= 0.0:
        raise ZeroVariance("constant series has no effective sample size")
    rho = acov / acov[0]
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    tau = 0.0
    cap = math.inf
    for g in pairs:
        if g <= 0.0:
            break
        cap = min(cap, float(g))
        tau += cap
    tau = max(2.0 * tau - 1.0, 1.0)
    return n / tau


def multi_ess(series) -> float:
    """Multivariate batch-means effective sample size.

    ESS = N (det Lambda / det Sigma_bm)^(1/q) with Lambda the sample
    covariance and Sigma_bm the batch-means long-run covariance.
    """
    x = np.atleast_2d(np.asarray(series, dtype=float))
    if x.shape[0] < x.shape[1]:
        raise ConfigError("series must be (N, q) with N >= q")
    n, q = x.shape
    if n < MIN_SERIES:
        raise ConfigError(f"need at least {MIN_SERIES} points, got {n}")
    lam = np.cov(x, rowvar=False, ddof=1).reshape(q, q)
    sign, logdet_lam = np.linalg.slogdet(lam)
    if sign <= 0 or not np.isfinite(logdet_lam):
        raise SingularCovariance("sample covariance is singular")
    a, b = _batch_layout(n)
    mu = x[: a * b].reshape(a, b, q).mean(axis=1)
    centered = mu - mu.mean(axis=0)
    sigma_bm = b * (centered.T @ centered) / (a - 1)
    sign_bm, logdet_bm = np.linalg.slogdet(sigma_bm.reshape(q, q))
    if sign_bm <= 0 or not np.isfinite(logdet_bm):
        raise SingularCovariance("batch-means covariance is singular")
    return n * math.exp((logdet_lam - logdet_bm) / q)


# ---------------------------------------------------------------------------
# q-dimensional summary statistic


def build_references(best_models: Sequence, p: int, q: int = 5):
    """Reference models for the q-dimensional distance summary.

    Block i of the predictor range, minus the union of the q best sampled
    models, united with the i-th best model itself.
    """
    if p % q != 0:
        raise QNotDividingP(f"q = {q} does not divide p = {p}")
    if len(best_models) < q:
        raise ConfigError(f"need {q} distinct models, got {len(best_models)}")
    pooled = set()
    for g in best_models[:q]:
        pooled.update(int(j) for j in g)
    width = p // q
    refs = []
    for i in range(q):
        block = set(range(i * width, (i + 1) * width))
        refs.append(frozenset((block - pooled) | {int(j) for j in best_models[i]}))
    return refs


def summary_F(gamma, references) -> np.ndarray:
    """Vector of symmetric-difference distances to each reference model."""
    g = set(int(j) for j in gamma)
    return np.array([len(g ^ set(ref)) for ref in references], dtype=np.intp)


def best_distinct_models(traces: Sequence[ChainTrace], q: int):
    """The q highest-posterior distinct models pooled over traces."""
    best = {}
    for tr in traces:
        for g, lp in zip(tr.gammas, tr.log_posts):
            if g not in best or lp > best[g]:
                best[g] = lp
    ranked = sorted(best.items(), key=lambda kv: -kv[1])
    return [g for g, _ in ranked[:q]]


# ---------------------------------------------------------------------------
# per-iteration scalar summaries replayed from a trace


def replay_t1(trace: ChainTrace, data: RegressionData, hp: Hyperparams,
              beta_star) -> np.ndarray:
    """||beta_hat(gamma) - beta*||^2 per iteration; depends only on gamma."""
    beta_star = np.asarray(beta_star, dtype=float)
    cache = {}
    out = np.empty(len(trace))
    for i, g in enumerate(trace.gammas):
        val = cache.get(g)
        if val is None:
            st = posterior.make_state(data, hp, g)
            diff = estimators.beta_hat(st, data, hp) - beta_star
            val = float(diff @ diff)
            cache[g] = val
        out[i] = val
    return out


def replay_t2(trace: ChainTrace, data: RegressionData, hp: Hyperparams,
              seed: int) -> np.ndarray:
    """||X beta||^2 per iteration with beta drawn from the conditional posterior.

    The norm is computed through the model's Cholesky factor, so no pass
    over the n rows of the design is needed.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed),
                                                       spawn_key=(997,)))
    # bounded FIFO: long random-walk traces can hold tens of thousands of
    # distinct models, each with an O(size^2) factor
    states = {}
    out = np.empty(len(trace))
    for i, g in enumerate(trace.gammas):
        st = states.get(g)
        if st is None:
            st = posterior.make_state(data, hp, g)
            if len(states) >= 512:
                states.pop(next(iter(states)))
            states[g] = st
        if st.size == 0:
            out[i] = 0.0
            continue
        _, bg = estimators.sample_beta_gamma(st, data, hp, rng)
        out[i] = float(np.sum((st.fit.factor.T @ bg) ** 2))
    return out


def hitting_iteration(trace: ChainTrace, target) -> Optional[int]:
    """First iteration at which the trace sits at the target model, else None."""
    key = tuple(sorted(int(j) for j in target))
    for it, g in zip(trace.iters, trace.gammas):
        if g == key:
            return it
    return None


def coef_mse(beta_est: np.ndarray, beta_star) -> float:
    """Mean squared error of an estimated coefficient vector."""
    beta_star = np.asarray(beta_star, dtype=float)
    diff = np.asarray(beta_est, dtype=float) - beta_star
    return float(diff @ diff) / beta_star.shape[0]


# ---------------------------------------------------------------------------
# aggregate report


def landscape_histogram(values, bins: int = 40, lo: float = -2.0,
                        hi: float = 6.0) -> dict:
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    counts, edges = np.histogram(np.clip(vals, lo, hi), bins=bins,
                                 range=(lo, hi))
    return {"edges": edges.tolist(), "counts": counts.tolist(),
            "n": int(vals.size)}


def diagnostics_report(traces: Sequence[ChainTrace], data: RegressionData,
                       hp: Hyperparams, reference=None, q: int = 5,
                       max_landscape_models: int = 2000) -> dict:
    """Bundle of chain health numbers for the report path.

    The landscape section scans distinct sampled models (up to a budget,
    highest posterior first) against the reference model, defaulting to
    the best sampled model when no external truth is supplied.
    """
    report = {"n_chains": len(traces),
              "iters": [len(t) for t in traces],
              "acceptance_rate": [t.acceptance_rate() for t in traces]}
    pooled_best = best_distinct_models(traces, q=max(q, 1))
    if reference is None:
        reference = pooled_best[0] if pooled_best else ()
    report["reference"] = sorted(int(j) for j in reference)
    lp = np.concatenate([np.asarray(t.log_posts) for t in traces])
    ess = {}
    try:
        ess["log_post"] = ess_autocorr(lp)
    except (ConfigError, ZeroVariance) as exc:
        ess["log_post"] = None
        ess["log_post_note"] = str(exc)
    try:
        refs = build_references(pooled_best, data.p, q)
        fseries = np.stack([
            np.concatenate([[len(set(g) ^ set(r)) for g in t.gammas]
                            for t in traces])
            for r in refs], axis=1)
        ess["summary_f"] = multi_ess(fseries)
    except (ConfigError, QNotDividingP, SingularCovariance) as exc:
        ess["summary_f"] = None
        ess["summary_f_note"] = str(exc)
    report["ess"] = ess
    distinct = {}
    for t in traces:
        for g, lp_val in zip(t.gammas, t.log_posts):
            distinct.setdefault(g, lp_val)
    ranked = sorted(distinct.items(), key=lambda kv: -kv[1])
    scan = [g for g, _ in ranked[:max_landscape_models]]
    stats = [landscape_stats(posterior.make_state(data, hp, g), data, hp,
                             reference) for g in scan]
    over = [s for s in stats if s.overfit_flag]
    report["n_distinct_models"] = len(distinct)
    report["n_local_modes"] = count_local_modes(scan, data, hp)
    report["landscape_histogram"] = {
        "r_max": landscape_histogram([s.r_max for s in stats]),
        "r_d0_overfitted": landscape_histogram([s.r_d0 for s in over]),
    }
    if over:
        vals = [s.r_d0 for s in over if s.r_d0 is not None]
        inside = [v for v in vals if hp.kappa - 0.5 < v < hp.kappa]
        report["overfit_rd0_fraction_near_kappa"] = (
            len(inside) / len(vals) if vals else None)
    return report
