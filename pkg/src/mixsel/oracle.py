"""Exact finite-chain analysis on enumerable model spaces.

Dense kernels are assembled from the same proposal-distribution code the
samplers draw from, so certificates produced here apply to the sampling
implementation itself rather than to a parallel reimplementation. Scope
is desk scale: a few hundred states for dense work.

Provided certificates:
  - stationary distribution, reversibility, spectra, TV mixing times;
  - the unimodality constants (c0, c1) over adds and swaps;
  - drift-function tables and their exact one-step expectation ratios;
  - two-stage restart constants (lambda1, lambda2, q, K, M -> alpha) and
    the geometric TV bound they imply;
  - hitting-time generating functions and the regeneration-split chain
    simulation that validates the restart argument path by path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import linalg, posterior, proposals
from .data import RegressionData
from .errors import (
    BoundViolated,
    CollinearColumn,
    ConfigError,
    DecompositionInfeasible,
    Divergent,
    EmptyNeighborhood,
    GramNotPD,
    MixselError,
    Nonconvergent,
    PreconditionViolated,
    RankDeficient,
    SpaceTooLarge,
)
from .posterior import Hyperparams, ModelState
from .proposals import ProposalSpec
from .sampler import lazy_wrap

ENUM_CAP = 200000
KERNEL_CAP = 4000


# ---------------------------------------------------------------------------
# enumeration


def count_models(p: int, s0: int) -> int:
    return sum(math.comb(p, k) for k in range(min(p, s0) + 1))


def enumerate_models(p: int, s0: int, cap: int = ENUM_CAP):
    """All models of size at most s0, ordered by size then lexicographically."""
    total = count_models(p, s0)
    if total > cap:
        raise SpaceTooLarge(f"{total} models exceeds the cap of {cap}")
    out = []
    for k in range(min(p, s0) + 1):
        out.extend(itertools.combinations(range(p), k))
    return out


# ---------------------------------------------------------------------------
# exact transition kernel


@dataclass
class ExactChain:
    """Enumerated state space with exact stationary law and kernel."""

    models: list
    index: dict
    states: list
    log_pi0: np.ndarray          # unnormalized log posterior per state
    pi: np.ndarray
    kernel: np.ndarray
    is_lazy: bool
    data: RegressionData
    hp: Hyperparams
    spec: ProposalSpec
    n_dropped: int = 0           # enumerated models with zero posterior mass

    @property
    def n_states(self) -> int:
        return len(self.models)

    def state_of(self, gamma) -> int:
        key = tuple(sorted(int(j) for j in gamma))
        if key not in self.index:
            raise ConfigError(f"model {key} is not a state of this chain")
        return self.index[key]


def exact_chain(data: RegressionData, hp: Hyperparams, spec: ProposalSpec,
                lazy: bool = False, cap: int = ENUM_CAP,
                kernel_cap: int = KERNEL_CAP) -> ExactChain:
    """Dense Metropolis-Hastings kernel over the enumerated model space.

    Proposal mass with no candidate (or rejected by the acceptance rule)
    stays on the diagonal, exactly as the sampler holds. Enumerated models
    that cannot be fit (rank deficient) carry zero posterior mass and are
    excluded from the state space; proposals onto them are certain
    rejections for the random walk and carry no weight under informed
    kernels, which matches the samplers.
    """
    all_models = enumerate_models(data.p, hp.s0, cap)
    if len(all_models) > kernel_cap:
        raise SpaceTooLarge(
            f"{len(all_models)} states exceeds the dense-kernel cap of {kernel_cap}")
    models, states = [], []
    n_dropped = 0
    for g in all_models:
        try:
            states.append(posterior.make_state(data, hp, g))
            models.append(g)
        except RankDeficient:
            n_dropped += 1
    index = {g: i for i, g in enumerate(models)}
    n_states = len(models)
    log_pi0 = np.array([st.log_post for st in states])
    pi = np.exp(log_pi0 - logsumexp(log_pi0))
    logprop = np.full((n_states, n_states), -np.inf)
    for i, st in enumerate(states):
        _proposal_row(logprop, i, st, index, data, hp, spec)
    # acceptance: flow min(pi_x K_xy, pi_y K_yx), symmetric by construction
    log_fwd = log_pi0[:, None] + logprop
    log_rev = log_pi0[None, :] + logprop.T
    log_p = np.minimum(log_fwd, log_rev) - log_pi0[:, None]
    kernel = np.exp(log_p)
    np.fill_diagonal(kernel, 0.0)
    off = kernel.sum(axis=1)
    if np.any(off > 1.0 + 1e-9):
        raise MixselError(f"proposal mass exceeds one: {off.max()}")
    np.fill_diagonal(kernel, np.maximum(1.0 - off, 0.0))
    if lazy:
        kernel = lazy_wrap(kernel)
    return ExactChain(models=models, index=index, states=states,
                      log_pi0=log_pi0, pi=pi, kernel=kernel, is_lazy=lazy,
                      data=data, hp=hp, spec=spec, n_dropped=n_dropped)


def _logadd(mat: np.ndarray, i: int, j: int, val: float) -> None:
    mat[i, j] = np.logaddexp(mat[i, j], val)


def _proposal_row(logprop, i, state, index, data, hp, spec) -> None:
    if spec.joint:
        try:
            dist = proposals.joint_distribution(state, data, hp, spec)
        except EmptyNeighborhood:
            return
        for idx, (tag, col) in enumerate(dist.cands):
            lp = dist.log_prob(idx)
            if lp == -np.inf:
                continue
            if tag == "a":
                target = tuple(sorted(state.gamma + (col,)))
            else:
                target = tuple(j for j in state.gamma if j != col)
            _logadd(logprop, i, index[target], lp)
        return
    ha, hd, hs = proposals.move_probs(spec, state.size, data.p, hp.s0)
    for kind, h in (("a", ha), ("d", hd), ("s", hs)):
        if h <= 0.0:
            continue
        log_h = math.log(h)
        if kind == "s":
            if spec.swap_mode == "disabled":
                continue
            if spec.swap_mode == "composite":
                _composite_row(logprop, i, state, index, data, hp, spec, log_h)
                continue
        if spec.weight_mode == "rw":
            _rw_row(logprop, i, state, index, data, hp, kind, log_h)
            continue
        try:
            if kind == "a":
                dist = proposals.add_distribution(state, data, hp, spec)
            elif kind == "d":
                dist = proposals.drop_distribution(state, data, hp, spec)
            else:
                dist = proposals.swap_distribution(state, data, hp, spec)
        except EmptyNeighborhood:
            continue
        for idx, cand in enumerate(dist.cands):
            lp = dist.log_prob(idx)
            if lp == -np.inf:
                continue
            if kind == "a":
                target = tuple(sorted(state.gamma + (cand,)))
                # a screened floor weight can sit on a degenerate column;
                # the sampler rejects that draw with certainty
                if target not in index:
                    continue
            elif kind == "d":
                target = tuple(j for j in state.gamma if j != cand)
            else:
                j_in, k_out = cand
                target = tuple(sorted(c for c in state.gamma + (j_in,)
                                      if c != k_out))
            _logadd(logprop, i, index[target], log_h + lp)


def _rw_row(logprop, i, state, index, data, hp, kind, log_h) -> None:
    m, p = state.size, data.p
    members = set(state.gamma)
    if kind == "a":
        if m >= hp.s0 or m == p:
            return
        lw = log_h - math.log(p - m)
        for j in range(p):
            if j in members:
                continue
            target = tuple(sorted(state.gamma + (j,)))
            if target in index:               # rank-deficient targets stay holds
                _logadd(logprop, i, index[target], lw)
    elif kind == "d":
        if m == 0:
            return
        lw = log_h - math.log(m)
        for k in state.gamma:
            target = tuple(j for j in state.gamma if j != k)
            _logadd(logprop, i, index[target], lw)
    else:
        if m == 0 or m == p:
            return
        lw = log_h - math.log(m * (p - m))
        for j in range(p):
            if j in members:
                continue
            for k in state.gamma:
                target = tuple(sorted(c for c in state.gamma + (j,) if c != k))
                if target in index:
                    _logadd(logprop, i, index[target], lw)


def _composite_row(logprop, i, state, index, data, hp, spec, log_h) -> None:
    if state.size == 0:
        return
    try:
        dist_a = proposals.add_distribution(state, data, hp, spec, ignore_cap=True)
    except EmptyNeighborhood:
        return
    for ia, j in enumerate(dist_a.cands):
        lpa = dist_a.log_prob(ia)
        if lpa == -np.inf:
            continue
        try:
            mid = proposals._extend_state(state, data, hp, j)
        except CollinearColumn:
            continue            # certain rejection, mass stays on the diagonal
        dist_d = proposals.drop_distribution(mid, data, hp, spec, exclude=j)
        for idd, k in enumerate(dist_d.cands):
            lpd = dist_d.log_prob(idd)
            if lpd == -np.inf:
                continue
            target = tuple(sorted(c for c in state.gamma + (j,) if c != k))
            _logadd(logprop, i, index[target], log_h + lpa + lpd)


# ---------------------------------------------------------------------------
# mixing


def _start_vector(chain: ExactChain, start) -> np.ndarray:
    if isinstance(start, (int, np.integer)):
        d = np.zeros(chain.n_states)
        d[int(start)] = 1.0
        return d
    arr = np.asarray(start, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == chain.n_states and np.isclose(arr.sum(), 1.0):
        return arr.copy()
    d = np.zeros(chain.n_states)
    d[chain.state_of(start)] = 1.0
    return d


def tv_curve(chain: ExactChain, start, horizon: int) -> np.ndarray:
    """TV(P^t(start, .), pi) for t = 0..horizon; start may be a model,
    a state index, or a full distribution vector."""
    d = _start_vector(chain, start)
    out = np.empty(horizon + 1)
    for t in range(horizon + 1):
        out[t] = 0.5 * np.abs(d - chain.pi).sum()
        if t < horizon:
            d = d @ chain.kernel
    return out


def exact_mixing_time(chain: ExactChain, eps: float = 0.25,
                      horizon: int = 200000) -> int:
    """Worst-start epsilon mixing time by explicit power iteration."""
    dist = np.eye(chain.n_states)
    for t in range(horizon + 1):
        tv = 0.5 * np.abs(dist - chain.pi[None, :]).sum(axis=1).max()
        if tv <= eps:
            return t
        dist = dist @ chain.kernel
    raise Nonconvergent(f"TV still above {eps} after {horizon} steps")


# ---------------------------------------------------------------------------
# unimodality constants


@dataclass(frozen=True)
class Condition1Report:
    gamma_star: tuple
    c0_max: float                # largest certifiable c0 (clause 1a); inf if vacuous
    c1_max: float                # largest certifiable c1 (clauses 1b and 1c jointly)
    c1_add_min: float            # clause 1b alone
    c1_swap_min: float           # clause 1c alone
    n_overfitted: int
    n_underfitted: int
    satisfied: dict = field(default_factory=dict)
    vacuous: dict = field(default_factory=dict)


def condition1_constants(data: RegressionData, hp: Hyperparams,
                         cap: int = ENUM_CAP) -> Condition1Report:
    """Exact unimodality constants over the enumerated space.

    Ratios use the closed-form posterior expression without the size-cap
    indicator, so additions out of the cap (clauses 1a and 1b at full
    size) are still well defined. Larger constants mean a steeper
    posterior: clause 1a caps how attractive any noise addition is from
    an overfitted model, clauses 1b/1c floor the best signal move from
    every underfitted model.
    """
    models = enumerate_models(data.p, hp.s0, cap)
    fitted = []
    for g in models:
        try:
            fitted.append(posterior.make_state(data, hp, g))
        except RankDeficient:
            continue
    best = max(fitted, key=lambda st: st.log_post)
    gamma_star = best.gamma
    gs = set(gamma_star)
    logp = math.log(data.p)
    c0 = math.inf
    c1_add = math.inf
    c1_swap = math.inf
    n_over = n_under = 0
    for st in fitted:
        sg = set(st.gamma)
        if gs <= sg:
            n_over += 1
            if st.size < data.p:
                cand, logr, _, _, _ = posterior.log_ratios_add(st.fit, data, hp)
                outside = np.array([j not in sg for j in cand])
                c0 = min(c0, float(np.min(-logr[outside])) / logp)
        else:
            n_under += 1
            toward = np.array(sorted(gs - sg), dtype=np.intp)
            _, logr, _, _, _ = posterior.log_ratios_add(
                st.fit, data, hp, candidates=toward)
            c1_add = min(c1_add, float(np.max(logr)) / logp)
            if st.size == hp.s0:
                best_pair = -math.inf
                for j in toward:
                    try:
                        mid = linalg.chol_extend(st.fit, data, int(j))
                    except CollinearColumn:
                        continue
                    add_lr = posterior.log_post_from_fit(data, hp, mid) - st.log_post
                    _, drop_lr = posterior.log_ratios_drop(mid, data, hp)
                    for pos, k in enumerate(mid.columns):
                        if k == j or k in gs:
                            continue
                        best_pair = max(best_pair, add_lr + float(drop_lr[pos]))
                c1_swap = min(c1_swap, best_pair / logp)
    c1 = min(c1_add, c1_swap)
    return Condition1Report(
        gamma_star=gamma_star,
        c0_max=c0, c1_max=c1, c1_add_min=c1_add, c1_swap_min=c1_swap,
        n_overfitted=n_over, n_underfitted=n_under,
        satisfied={"1a": c0 > 0, "1b": c1_add > 0, "1c": c1_swap > 0},
        vacuous={"1a": not math.isfinite(c0) and c0 > 0,
                 "1b": not math.isfinite(c1_add) and c1_add > 0,
                 "1c": not math.isfinite(c1_swap) and c1_swap > 0},
    )


# ---------------------------------------------------------------------------
# drift functions


def drift_tables(chain: ExactChain, gamma_star):
    """Raw V1, V2 values and the overfitted-region mask for every state."""
    gs = set(int(j) for j in gamma_star)
    c = chain.data.yty / chain.hp.g
    expo = 1.0 / math.log1p(chain.hp.g)
    v1 = np.array([(1.0 + st.fit.rss / c) ** expo for st in chain.states])
    v2 = np.array([math.exp(len(set(g) - gs) / chain.hp.s0)
                   for g in chain.models])
    overfit = np.array([gs <= set(g) for g in chain.models])
    return v1, v2, overfit


def drift_ratio_profile(chain: ExactChain, gamma_star) -> dict:
    """Exact one-step expectation ratios of the two drift functions.

    V1 is flattened to one on the overfitted region (the restart argument
    needs it constant there; posterior ratios are unaffected). Ratio
    maxima below one certify geometric drift toward, respectively, the
    overfitted region and the top model within it.
    """
    v1, v2, overfit = drift_tables(chain, gamma_star)
    v1n = np.where(overfit, 1.0, v1)
    x_star = chain.state_of(gamma_star)
    pv1 = chain.kernel @ v1n
    pv2 = chain.kernel @ v2
    under = ~overfit
    ratio1 = float(np.max(pv1[under] / v1n[under])) if under.any() else 0.0
    on_a = overfit.copy()
    on_a[x_star] = False
    ratio2 = float(np.max(pv2[on_a] / v2[on_a])) if on_a.any() else 0.0
    return {"v1": v1, "v1_flat": v1n, "v2": v2, "overfit_mask": overfit,
            "x_star": x_star, "lambda1": ratio1, "lambda2": ratio2}


# ---------------------------------------------------------------------------
# two-stage restart constants


@dataclass(frozen=True)
class TwoStageConstants:
    lambda1: float
    lambda2: float
    q: float
    K: float
    M: float
    rho: float
    u: float
    r: float
    alpha: float
    q_actual: float
    x_star: int
    a_mask: np.ndarray
    v1: np.ndarray               # flattened to 1 on the overfitted region
    v2: np.ndarray


def two_stage_alpha(q: float, K: float, lambda2: float, M: float):
    """Scalar derivation (rho, u, r, alpha) from the restart constants.

    log u goes through log1p so that a very small exit probability still
    yields alpha strictly below one whenever that gap is representable;
    M^r/u is evaluated as rho^r, which is the same number but does not
    difference two near-equal quantities.
    """
    rho = q * K / (1.0 - lambda2)
    log_u = -math.log1p(-q / 2.0)
    u = math.exp(log_u)
    r = log_u / math.log(M / rho)
    alpha = (1.0 + math.exp(r * math.log(rho))) / 2.0
    return rho, u, r, alpha


def two_stage_constants(chain: ExactChain, gamma_star,
                        q_override: Optional[float] = None,
                        tol: float = 1e-12) -> TwoStageConstants:
    """Exact restart constants with every precondition checked.

    Preconditions, each checked exactly on the dense kernel:
      (i)   drift of V1 off the overfitted region, factor lambda1 < 1;
      (ii)  drift of V2 on the overfitted region minus the top model,
            factor lambda2 < 1;
      (iii) V1 is one on the region and exits land at conditional mean
            at most M/2;
      (iv)  V2 does not decrease in conditional mean on exit;
      (v)   the exit probability q is below min(1-lambda1, (1-lambda2)/K).

    q defaults to the exact worst-case exit probability; a larger value
    may be supplied when the exact one is zero or fails (v) from below.
    """
    if not chain.is_lazy:
        raise PreconditionViolated("restart constants need the lazy kernel")
    prof = drift_ratio_profile(chain, gamma_star)
    v1n, v2 = prof["v1_flat"], prof["v2"]
    overfit, x_star = prof["overfit_mask"], prof["x_star"]
    lambda1, lambda2 = prof["lambda1"], prof["lambda2"]
    if lambda1 >= 1.0:
        raise PreconditionViolated(
            f"(i) fails: max PV1/V1 off the region is {lambda1:.6f} >= 1")
    if lambda2 >= 1.0:
        raise PreconditionViolated(
            f"(ii) fails: max PV2/V2 on the region is {lambda2:.6f} >= 1")
    M = 2.0 * float(np.max(v1n))
    K = float(np.max(v2[overfit]))
    exit_prob = chain.kernel[overfit][:, ~overfit].sum(axis=1) \
        if (~overfit).any() else np.zeros(int(overfit.sum()))
    q_actual = float(np.max(exit_prob)) if exit_prob.size else 0.0
    q = q_actual if q_override is None else float(q_override)
    if q_override is not None and q < q_actual - tol:
        raise PreconditionViolated(
            f"q override {q} is below the exact exit probability {q_actual}")
    if q <= 0.0:
        raise PreconditionViolated(
            "exit probability is zero; supply a positive q_override")
    # (iii)/(iv): conditional expectations on exit, evaluated exactly
    a_idx = np.flatnonzero(overfit)
    for row, x in enumerate(a_idx):
        ex = exit_prob[row]
        if ex <= tol:
            continue
        cond1 = float(chain.kernel[x, ~overfit] @ v1n[~overfit]) / ex
        if cond1 > M / 2.0 + 1e-9:
            raise PreconditionViolated(
                f"(iii) fails at state {x}: conditional exit mean {cond1:.6f}"
                f" exceeds M/2 = {M / 2.0:.6f}")
        cond2 = float(chain.kernel[x, ~overfit] @ v2[~overfit]) / ex
        if cond2 < v2[x] - 1e-9:
            raise PreconditionViolated(
                f"(iv) fails at state {x}: conditional exit mean {cond2:.6f}"
                f" is below V2 = {v2[x]:.6f}")
    limit = min(1.0 - lambda1, (1.0 - lambda2) / K)
    if not q < limit:
        raise PreconditionViolated(
            f"(v) fails: q = {q:.6g} is not below min(1-l1, (1-l2)/K) = {limit:.6g}")
    rho, u, r, alpha = two_stage_alpha(q, K, lambda2, M)
    return TwoStageConstants(lambda1=lambda1, lambda2=lambda2, q=q, K=K, M=M,
                             rho=rho, u=u, r=r, alpha=alpha,
                             q_actual=q_actual, x_star=x_star,
                             a_mask=overfit, v1=v1n, v2=v2)


def tv_bound_check(chain: ExactChain, constants: TwoStageConstants,
                   horizon: int = 2000, cond1: Optional[Condition1Report] = None,
                   kernel_c0: float = 2.0, kernel_c1: float = 4.0,
                   budget_factor: float = 800.0) -> dict:
    """Verify the geometric TV bound state by state up to the horizon.

    The bound is 4 alpha^(t+1) (1 + V1(x)/M) for every start x and step t.
    When a unimodality report is supplied and its constants dominate the
    kernel's thresholds (and the posterior is peaked enough), the mixing
    time budget 800 max(n kappa1 / c1, 3 s0) is checked as well.
    """
    alpha, M, v1 = constants.alpha, constants.M, constants.v1
    factor = 4.0 * (1.0 + v1 / M)
    dist = np.eye(chain.n_states)
    max_slack = -math.inf
    floor_bound = 4.0 * alpha ** (horizon + 1)
    for t in range(horizon + 1):
        tv = 0.5 * np.abs(dist - chain.pi[None, :]).sum(axis=1)
        bound = factor * alpha ** (t + 1)
        slack = tv - bound
        worst = int(np.argmax(slack))
        max_slack = max(max_slack, float(slack[worst]))
        if slack[worst] > 1e-9:
            raise BoundViolated(
                f"TV bound fails at state {worst}, t = {t}: "
                f"TV = {tv[worst]:.3e} > bound = {bound[worst]:.3e}")
        if float(tv.max()) < 0.5 * floor_bound:
            # TV never increases under a stochastic kernel and the bound
            # only shrinks to its horizon floor, so nothing later can fail
            break
        dist = dist @ chain.kernel
    report = {"horizon": horizon, "alpha": alpha, "max_slack": max_slack,
              "last_t": t, "budget_checked": False}
    if cond1 is not None:
        hp, n = chain.hp, chain.data.n
        hypotheses = (cond1.c0_max >= kernel_c0 and cond1.c1_max >= kernel_c1
                      and n * hp.kappa1 - hp.kappa >= 4.0)
        report["hypotheses_hold"] = hypotheses
        if hypotheses:
            budget = budget_factor * max(n * hp.kappa1 / kernel_c1,
                                         3.0 * hp.s0)
            t_mix = exact_mixing_time(chain, eps=0.25,
                                      horizon=int(budget) + 1)
            report.update({"budget_checked": True, "t_mix": t_mix,
                           "budget": budget})
            if t_mix > budget:
                raise BoundViolated(
                    f"mixing time {t_mix} exceeds the budget {budget:.0f}")
    return report


# ---------------------------------------------------------------------------
# hitting-time generating functions


def hitting_gf(chain: ExactChain, target, lam: float) -> np.ndarray:
    """E_x[lambda^(-tau_C)] for every start x, by linear solve.

    tau_C is the hitting time of the target set; the value is one on the
    set itself. Divergent when the kernel restricted off the set has
    spectral radius at or above lambda (the expectation is infinite).

    Target convention: an integer is a state index, a tuple is a model,
    and any other sequence of integers is a collection of state indices.
    """
    if not 0.0 < lam < 1.0:
        raise ConfigError("lambda must be in (0, 1)")
    in_c = np.zeros(chain.n_states, dtype=bool)
    if isinstance(target, (int, np.integer)):
        in_c[int(target)] = True
    else:
        seq = list(target)
        if seq and isinstance(seq[0], (int, np.integer)) \
                and not isinstance(target, tuple):
            in_c[np.asarray(seq, dtype=np.intp)] = True
        else:
            in_c[chain.state_of(target)] = True
    if in_c.all():
        return np.ones(chain.n_states)
    if not in_c.any():
        raise ConfigError("target set is empty")
    off = ~in_c
    p_oo = chain.kernel[np.ix_(off, off)]
    radius = float(np.max(np.abs(np.linalg.eigvals(p_oo))))
    if radius >= lam:
        raise Divergent(
            f"restricted spectral radius {radius:.6f} is at or above {lam}")
    rhs = chain.kernel[np.ix_(off, in_c)].sum(axis=1) / lam
    f_off = np.linalg.solve(np.eye(int(off.sum())) - p_oo / lam, rhs)
    f = np.ones(chain.n_states)
    f[off] = f_off
    return f


# ---------------------------------------------------------------------------
# regeneration-split chain


def split_kernels(chain: ExactChain, constants: TwoStageConstants,
                  tol: float = 1e-12):
    """The within-region kernel Q and restart kernel R with P = qR + (1-q)Q."""
    P = chain.kernel
    A = constants.a_mask
    q = constants.q
    Q = P.copy()
    stay = P[A][:, A].sum(axis=1)
    if np.any(stay <= 0.0):
        raise DecompositionInfeasible("a region state has no within-region mass")
    rows = np.zeros_like(P[A])
    rows[:, A] = P[A][:, A] / stay[:, None]
    Q[A] = rows
    R = P.copy()
    resid = (P[A] - (1.0 - q) * rows) / q
    if resid.min() < -1e-9:
        raise DecompositionInfeasible(
            f"restart kernel has negative mass {resid.min():.3e}; "
            f"the exit probability exceeds q = {q}")
    resid = np.maximum(resid, 0.0)
    resid /= resid.sum(axis=1, keepdims=True)
    R[A] = resid
    return Q, R


def split_chain_estimate(chain: ExactChain, constants: TwoStageConstants,
                         start, j: int, n_sims: int,
                         rng: np.random.Generator,
                         horizon: Optional[int] = None) -> dict:
    """Monte Carlo check of the regeneration-time generating functions.

    Simulates the bivariate chain whose update is: off the region follow
    P; on the region follow the restart kernel R with probability q and
    the within-region kernel Q otherwise. Records, per walker, the
    region-entry times sigma_k, the regeneration times omega_k (first
    coin success strictly after sigma_k), and the waits N_k = omega_k -
    sigma_k, up to the j-th regeneration.

    Returns moment estimates of u^N (exactly 2 in expectation) and of
    u^omega_j (bounded by 2 V1(start) M^(j-1)), with standard errors, and
    raises BoundViolated if the omega bound fails by more than 3 SE.
    """
    if j < 1:
        raise ConfigError("need at least one regeneration")
    Q, R = split_kernels(chain, constants)
    q, u, M = constants.q, constants.u, constants.M
    start_idx = chain.state_of(start) if not isinstance(start, (int, np.integer)) \
        else int(start)
    if horizon is None:
        horizon = int(60.0 * j / q) + 20000
    cum_p = np.cumsum(chain.kernel, axis=1)
    cum_q = np.cumsum(Q, axis=1)
    cum_r = np.cumsum(R, axis=1)
    in_a = constants.a_mask
    x = np.full(n_sims, start_idx, dtype=np.intp)
    stage = np.zeros(n_sims, dtype=np.intp)        # regenerations completed
    waiting_omega = np.zeros(n_sims, dtype=bool)   # sigma seen, coin pending
    sigma = np.zeros(n_sims, dtype=np.int64)
    omega = np.full(n_sims, -1, dtype=np.int64)
    n_values = []
    active = np.ones(n_sims, dtype=bool)
    t = 0
    while active.any():
        if t > horizon:
            raise Nonconvergent(
                f"{int(active.sum())} walkers unfinished after {horizon} steps")
        # region entry at the current time
        enter = active & ~waiting_omega & in_a[x]
        sigma[enter] = t
        waiting_omega |= enter
        # one transition using the coin at time t+1
        z = rng.random(n_sims) < q
        un = rng.random(n_sims)
        act = np.flatnonzero(active)
        on_a = in_a[x[act]]
        rows_p = act[~on_a]
        rows_q = act[on_a & ~z[act]]
        rows_r = act[on_a & z[act]]
        for rows, cum in ((rows_p, cum_p), (rows_q, cum_q), (rows_r, cum_r)):
            if rows.size:
                x[rows] = (cum[x[rows]] < un[rows, None]).sum(axis=1)
        t += 1
        # regeneration: first success strictly after sigma
        regen = active & waiting_omega & z
        if regen.any():
            n_values.extend((t - sigma[regen]).tolist())
            stage[regen] += 1
            waiting_omega[regen] = False
            done = regen & (stage >= j)
            omega[done] = t
            active &= ~done
    n_arr = np.asarray(n_values, dtype=np.int64)
    un_vals = u ** n_arr
    uo_vals = u ** omega.astype(float)
    v1_start = float(constants.v1[start_idx])
    bound = 2.0 * v1_start * M ** (j - 1)
    report = {
        "u_n_mean": float(un_vals.mean()),
        "u_n_se": float(un_vals.std(ddof=1) / math.sqrt(un_vals.size)),
        "n_waits": int(un_vals.size),
        "u_omega_mean": float(uo_vals.mean()),
        "u_omega_se": float(uo_vals.std(ddof=1) / math.sqrt(n_sims)),
        "omega_bound": bound,
        "n_sims": n_sims,
        "j": j,
        "u": u,
    }
    if report["u_omega_mean"] > bound + 3.0 * report["u_omega_se"]:
        raise BoundViolated(
            f"E[u^omega_{j}] = {report['u_omega_mean']:.4f} exceeds "
            f"{bound:.4f} + 3 SE")
    return report


# ---------------------------------------------------------------------------
# the two-column worked design


def example1_design(p: int, nu: float, n: int) -> RegressionData:
    """Design with two equally useful, partially confounded columns.

    The Gram matrix is n on the diagonal with (nu-1) n between the first
    two columns; the response is their sum plus a noise direction
    orthogonal to the design with squared norm n. Known closed forms:
    y'y = (1+2 nu) n and the first two columns jointly explain 2 nu n.
    """
    if not 0.0 < nu <= 1.0:
        raise ConfigError(f"nu must be in (0, 1], got {nu}")
    if n < p + 1:
        raise ConfigError(f"need n >= p + 1 to embed the design, got n = {n}")
    gram = float(n) * np.eye(p)
    gram[0, 1] = gram[1, 0] = (nu - 1.0) * n
    try:
        lower = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise GramNotPD(f"target Gram matrix is not positive definite: {exc}")
    x = np.zeros((n, p))
    x[:p, :] = lower.T
    z = np.zeros(n)
    z[p] = math.sqrt(n)
    y = x[:, 0] + x[:, 1] + z
    data = RegressionData.from_arrays(x, y)
    want_yty = (1.0 + 2.0 * nu) * n
    if abs(data.yty - want_yty) > 1e-10 * want_yty:
        raise MixselError(
            f"response norm {data.yty} does not match {want_yty}")
    fit01 = linalg.fit_from_scratch(data, (0, 1))
    explained = data.yty - fit01.rss
    if abs(explained - 2.0 * nu * n) > 1e-10 * max(1.0, 2.0 * nu * n):
        raise MixselError(
            f"explained norm {explained} does not match {2.0 * nu * n}")
    return data


def escape_log_prob(data: RegressionData, hp: Hyperparams, spec: ProposalSpec,
                    gamma) -> float:
    """log(1 - P(gamma, gamma)) for one state, entirely in the log domain.

    Sums accepted flow over the state's proposal support, so it stays
    meaningful when the escape probability underflows a dense kernel
    entry (the worked two-column design at large n needs exactly this).
    """
    if not spec.joint:
        raise ConfigError("escape probability helper covers joint kernels only")
    state = posterior.make_state(data, hp, gamma)
    try:
        dist = proposals.joint_distribution(state, data, hp, spec)
    except EmptyNeighborhood:
        return -math.inf
    terms = []
    for idx, (tag, col) in enumerate(dist.cands):
        log_fwd = dist.log_prob(idx)
        if log_fwd == -np.inf:
            continue
        if tag == "a":
            new_state = proposals._extend_state(state, data, hp, col)
            back = ("d", col)
        else:
            new_state = posterior.apply_move(state, data, hp, ("drop", col))
            back = ("a", col)
        rev = proposals.joint_distribution(new_state, data, hp, spec)
        log_rev = rev.log_prob(rev.index_of(back))
        log_acc = min(0.0, new_state.log_post - state.log_post
                      + log_rev - log_fwd)
        terms.append(log_fwd + log_acc)
    return float(logsumexp(terms)) if terms else -math.inf
