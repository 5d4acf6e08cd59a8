"""Proposal kernels over the add/delete/swap neighborhood.

Three weighting families share one code path: uniform (random walk),
threshold-clamped posterior ratios, and balancing functions of the ratio
(identity, square root, or a general power). Weights always live in the
log domain; normalizers use log-sum-exp; candidate draws use the
Gumbel-max trick so one pass over the weight vector suffices.

A proposal carries its exact forward and reverse log kernel values,
including the move-type probability at both endpoints, so the sampler can
form the Hastings ratio without recomputing anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from . import linalg, posterior
from .data import RegressionData
from .errors import CollinearColumn, ConfigError, EmptyNeighborhood
from .posterior import Hyperparams, ModelState

MOVE_PROBS = ("theory", "simulation", "symmetric-rw")
WEIGHT_MODES = ("rw", "thresholded", "balanced")
BALANCINGS = ("identity", "sqrt", "power")
SWAP_MODES = ("exact", "composite", "disabled")

PRESET_NAMES = ("rw", "symmetric-rw", "lit1", "lit2", "lb1", "lb2", "theory-lit")

_INF_TOKENS = {"inf": math.inf, "-inf": -math.inf}


@dataclass(frozen=True)
class ProposalSpec:
    """Full description of a proposal kernel.

    Threshold fields are exponents over base p: a move-type weight is the
    balanced ratio clamped to [p^lo, p^hi]. Infinite bounds disable the
    clamp on that side. ``screen`` restricts ratio evaluation for
    additions to the given columns; everything outside the screen gets the
    floor weight p^add_lo without being evaluated.
    """

    move_probs: str = "simulation"
    weight_mode: str = "thresholded"
    balancing: str = "identity"
    power: float = 1.0
    add_lo: float = -math.inf
    add_hi: float = math.inf
    del_lo: float = -math.inf
    del_hi: float = math.inf
    swap_lo: float = -math.inf
    swap_hi: float = math.inf
    joint: bool = False
    swap_mode: str = "composite"
    screen: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.move_probs not in MOVE_PROBS:
            raise ConfigError(f"unknown move_probs {self.move_probs!r}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"unknown weight_mode {self.weight_mode!r}")
        if self.balancing not in BALANCINGS:
            raise ConfigError(f"unknown balancing {self.balancing!r}")
        if self.swap_mode not in SWAP_MODES:
            raise ConfigError(f"unknown swap_mode {self.swap_mode!r}")
        if self.weight_mode == "thresholded" and self.balancing != "identity":
            raise ConfigError("thresholded weights use identity balancing")
        for lo, hi, name in ((self.add_lo, self.add_hi, "add"),
                             (self.del_lo, self.del_hi, "del"),
                             (self.swap_lo, self.swap_hi, "swap")):
            if lo > hi:
                raise ConfigError(f"{name} thresholds out of order: {lo} > {hi}")
        if self.joint and self.swap_mode != "disabled":
            raise ConfigError("joint neighborhood has no swap moves")
        if self.power <= 0:
            raise ConfigError("power must be positive")
        if self.screen is not None:
            object.__setattr__(self, "screen",
                               tuple(sorted(int(j) for j in set(self.screen))))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, val in list(d.items()):
            if isinstance(val, float) and math.isinf(val):
                d[key] = "inf" if val > 0 else "-inf"
        if self.screen is not None:
            d["screen"] = list(self.screen)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ProposalSpec":
        d = dict(d)
        preset_name = d.pop("preset", None)
        preset_args = {k: d.pop(k) for k in ("p", "s0", "c0", "c1") if k in d}
        known = set(ProposalSpec.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown keys in proposal spec: {sorted(extra)}")
        for key, val in list(d.items()):
            if isinstance(val, str) and val in _INF_TOKENS:
                d[key] = _INF_TOKENS[val]
        if "screen" in d and d["screen"] is not None:
            d["screen"] = tuple(d["screen"])
        if preset_name is not None:
            base = preset(preset_name, **preset_args)
            return replace(base, **d) if d else base
        return ProposalSpec(**d)


def preset(name: str, p: Optional[int] = None, s0: Optional[int] = None,
           c0: float = 2.0, c1: float = 4.0) -> ProposalSpec:
    """Named kernels: the benchmark samplers plus the certified one.

    theory-lit clamps additions at p^c1 from above, deletions to
    [1, p^c0], and swaps to [p s0, p^c1]; it needs p and s0 to place the
    swap floor. The other presets do not depend on (p, s0).
    """
    if name == "rw":
        return ProposalSpec(move_probs="simulation", weight_mode="rw",
                            swap_mode="exact")
    if name == "symmetric-rw":
        return ProposalSpec(move_probs="symmetric-rw", weight_mode="rw",
                            swap_mode="exact")
    if name == "lit1":
        return ProposalSpec(weight_mode="thresholded",
                            add_lo=-1.0, add_hi=1.0, del_lo=-1.0, del_hi=0.0,
                            swap_mode="composite")
    if name == "lit2":
        return ProposalSpec(weight_mode="thresholded",
                            add_lo=-2.0, add_hi=2.0, del_lo=-2.0, del_hi=1.0,
                            swap_mode="composite")
    if name == "lb1":
        return ProposalSpec(weight_mode="balanced", balancing="sqrt",
                            swap_mode="composite")
    if name == "lb2":
        return ProposalSpec(weight_mode="balanced", balancing="sqrt",
                            joint=True, swap_mode="disabled")
    if name == "theory-lit":
        if p is None or s0 is None:
            raise ConfigError("theory-lit preset needs p and s0")
        if c0 <= 0 or c1 <= 0:
            raise ConfigError("c0 and c1 must be positive")
        swap_floor = 1.0 + math.log(s0) / math.log(p)
        return ProposalSpec(move_probs="theory", weight_mode="thresholded",
                            add_lo=-math.inf, add_hi=c1,
                            del_lo=0.0, del_hi=c0,
                            swap_lo=swap_floor, swap_hi=c1,
                            swap_mode="exact")
    raise ConfigError(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# move-type probabilities and neighborhoods


def move_probs(spec: ProposalSpec, size: int, p: int, s0: int):
    """(h_add, h_del, h_swap) as a function of the current model size.

    Probabilities always sum to one; structurally impossible draws (adding
    at the size cap, deleting from the empty model) fall on an empty
    neighborhood and are recorded as rejected holds, which keeps the
    kernel well defined without state-dependent renormalization.
    """
    if spec.move_probs == "theory":
        return (0.5, 0.5, 0.0) if size < s0 else (0.0, 0.5, 0.5)
    if spec.move_probs == "simulation":
        return (0.4, 0.4, 0.2)
    # symmetric-rw
    return ((p - size) / (2.0 * p), size / (2.0 * p), 0.5)


def add_candidates(gamma, p: int) -> np.ndarray:
    mask = np.ones(p, dtype=bool)
    if gamma:
        mask[np.asarray(gamma, dtype=np.intp)] = False
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# weights


def balance_log(spec: ProposalSpec, logr: np.ndarray) -> np.ndarray:
    if spec.weight_mode == "rw":
        return np.zeros_like(logr)
    if spec.balancing == "identity":
        return logr
    if spec.balancing == "sqrt":
        return 0.5 * logr
    return spec.power * logr


def clamp_log_weight(logw, lo: float, hi: float, logp: float):
    """Clamp balanced log weights to [lo * log p, hi * log p].

    Entries at -inf mark excluded candidates (degenerate models) and stay
    excluded regardless of the floor.
    """
    logw = np.asarray(logw, dtype=float)
    excluded = np.isneginf(logw)
    out = logw
    if hi < math.inf:
        out = np.minimum(out, hi * logp)
    if lo > -math.inf:
        out = np.maximum(out, lo * logp)
    return np.where(excluded, -np.inf, out)


def acceptance_one_threshold(spec: ProposalSpec, max_neighborhood: int,
                             p: int) -> float:
    """Posterior ratio above which a clamped balanced move always accepts.

    For a nondecreasing balancing function f with clamp [f_lo, f_hi], any
    proposal whose posterior ratio is at least b is accepted with
    probability one, provided f(1/b) <= f_lo and
    b >= (f_hi / f_lo) * max |N(x)|. Returns that b (possibly inf when a
    clamp side is absent). Applies to the single-neighborhood kernel.
    """
    if spec.weight_mode == "rw":
        return math.inf
    nu = {"identity": 1.0, "sqrt": 0.5, "power": spec.power}[spec.balancing]
    lo, hi = spec.add_lo, spec.add_hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return math.inf
    logp = math.log(p)
    log_b = max(-lo * logp / nu, (hi - lo) * logp + math.log(max_neighborhood))
    return math.exp(log_b)


def _thresholds(spec: ProposalSpec, kind: str):
    return {"a": (spec.add_lo, spec.add_hi),
            "d": (spec.del_lo, spec.del_hi),
            "s": (spec.swap_lo, spec.swap_hi)}[kind]


# ---------------------------------------------------------------------------
# per-type distributions


@dataclass
class MoveDistribution:
    """Candidates with clamped log weights and their normalizer."""

    kind: str               # "a", "d", "s", or "j" for the joint set
    cands: list             # column ids, (j, k) pairs, or ("a"/"d", col)
    logw: np.ndarray
    logz: float
    raw_logr: Optional[np.ndarray] = None      # unclamped log ratios
    evaluated: Optional[np.ndarray] = None     # False where the floor stood in
    extras: dict = field(default_factory=dict) # scan byproducts (pivot, new qty entry)

    def log_prob(self, index: int) -> float:
        return float(self.logw[index] - self.logz)

    def index_of(self, cand) -> int:
        return self.cands.index(cand)


def _finalize(kind, cands, logw, raw=None, evaluated=None, extras=None) -> MoveDistribution:
    if len(cands) == 0 or not np.any(logw > -np.inf):
        raise EmptyNeighborhood(f"no candidates for move type {kind!r}")
    logz = float(logsumexp(logw))
    return MoveDistribution(kind=kind, cands=cands, logw=logw, logz=logz,
                            raw_logr=raw, evaluated=evaluated,
                            extras=extras or {})


def add_distribution(state: ModelState, data: RegressionData, hp: Hyperparams,
                     spec: ProposalSpec, ignore_cap: bool = False) -> MoveDistribution:
    """Informed weights over single additions.

    With a screen, ratios are evaluated only inside it; candidates outside
    the screen receive the floor weight p^add_lo directly, which is what
    makes large-p runs affordable. ignore_cap lets the composite swap build
    its transient intermediate one past the size cap.
    """
    if state.size >= hp.s0 and not ignore_cap:
        raise EmptyNeighborhood("size cap reached, no additions")
    cands = add_candidates(state.gamma, data.p)
    if cands.size == 0:
        raise EmptyNeighborhood("model already uses every column")
    logp = math.log(data.p)
    lo, hi = _thresholds(spec, "a")
    if spec.screen is not None and spec.weight_mode != "rw":
        if not math.isfinite(lo):
            raise ConfigError("screened additions need a finite add_lo floor")
        screen = np.asarray(spec.screen, dtype=np.intp)
        inside = cands[np.isin(cands, screen)]
        raw = np.full(cands.size, np.nan)
        logw = np.full(cands.size, lo * logp)
        evaluated = np.zeros(cands.size, dtype=bool)
        d_full = np.ones(cands.size)
        t_full = np.zeros(cands.size)
        if inside.size:
            _, logr, d, t, valid = posterior.log_ratios_add(
                state.fit, data, hp, candidates=inside)
            pos = np.searchsorted(cands, inside)
            raw[pos] = logr
            evaluated[pos] = True
            d_full[pos] = d
            t_full[pos] = t
            logw[pos] = clamp_log_weight(balance_log(spec, logr), lo, hi, logp)
            logw[pos] = np.where(valid, logw[pos], -np.inf)
        return _finalize("a", cands.tolist(), logw, raw, evaluated,
                         extras={"d": d_full, "t": t_full})
    _, logr_all, d_all, t_all, valid_all = posterior.log_ratios_add(state.fit, data, hp)
    raw = logr_all[cands]
    logw = clamp_log_weight(balance_log(spec, raw), lo, hi, logp)
    logw = np.where(valid_all[cands], logw, -np.inf)
    evaluated = np.ones(cands.size, dtype=bool)
    return _finalize("a", cands.tolist(), logw, raw, evaluated,
                     extras={"d": d_all[cands], "t": t_all[cands]})


def drop_distribution(state: ModelState, data: RegressionData, hp: Hyperparams,
                      spec: ProposalSpec, exclude: Optional[int] = None) -> MoveDistribution:
    """Informed weights over single deletions.

    ``exclude`` removes one column id from the candidate set and
    renormalizes; the composite swap uses this to forbid undoing its own
    addition.
    """
    if state.size == 0:
        raise EmptyNeighborhood("empty model has no deletions")
    _, logr = posterior.log_ratios_drop(state.fit, data, hp)
    cols = list(state.fit.columns)
    logp = math.log(data.p)
    lo, hi = _thresholds(spec, "d")
    logw = clamp_log_weight(balance_log(spec, logr), lo, hi, logp)
    if exclude is not None:
        pos = cols.index(exclude)
        logw = logw.copy()
        logw[pos] = -np.inf
    return _finalize("d", cols, logw, raw=logr)


def swap_distribution(state: ModelState, data: RegressionData, hp: Hyperparams,
                      spec: ProposalSpec) -> MoveDistribution:
    """Exact informed weights over all (j in, k out) swap pairs.

    Each pair's ratio is the chained add and drop ratio through the
    intermediate fit, so this costs one factor extension per candidate
    addition. Intended for the certified kernel and small problems; the
    benchmark samplers use the composite two-stage swap instead.
    """
    if state.size == 0:
        raise EmptyNeighborhood("empty model has no swaps")
    adds = add_candidates(state.gamma, data.p)
    if adds.size == 0:
        raise EmptyNeighborhood("model already uses every column")
    logp = math.log(data.p)
    lo, hi = _thresholds(spec, "s")
    pairs = []
    raw = []
    for j in adds:
        try:
            mid = linalg.chol_extend(state.fit, data, int(j))
        except CollinearColumn:
            for k in state.fit.columns:
                pairs.append((int(j), int(k)))
                raw.append(-np.inf)
            continue
        _, drop_logr = posterior.log_ratios_drop(mid, data, hp)
        base = posterior.log_post_from_fit(data, hp, mid) - state.log_post
        for pos, k in enumerate(mid.columns):
            if k == j:
                continue
            pairs.append((int(j), int(k)))
            raw.append(base + float(drop_logr[pos]))
    raw = np.asarray(raw)
    logw = clamp_log_weight(balance_log(spec, raw), lo, hi, logp)
    return _finalize("s", pairs, logw, raw=raw)


def joint_distribution(state: ModelState, data: RegressionData, hp: Hyperparams,
                       spec: ProposalSpec) -> MoveDistribution:
    """One distribution over all additions and deletions together.

    Weights are the balanced ratios, clamped with the addition thresholds
    (a single clamp pair, matching the clamped locally balanced scheme).
    Candidates are ("a", j) and ("d", k) tags.
    """
    cands = []
    raws = []
    logp = math.log(data.p)
    lo, hi = _thresholds(spec, "a")
    extras = {"d": np.ones(0), "t": np.zeros(0), "beta_ls": np.zeros(0)}
    if state.size < hp.s0:
        adds = add_candidates(state.gamma, data.p)
        if adds.size:
            _, logr_all, d_all, t_all, valid = posterior.log_ratios_add(state.fit, data, hp)
            extras["d"] = d_all[adds]
            extras["t"] = t_all[adds]
            for j in adds:
                cands.append(("a", int(j)))
                raws.append(logr_all[j] if valid[j] else -np.inf)
    if state.size > 0:
        beta_ls, logr_drop = posterior.log_ratios_drop(state.fit, data, hp)
        extras["beta_ls"] = beta_ls
        for pos, k in enumerate(state.fit.columns):
            cands.append(("d", int(k)))
            raws.append(float(logr_drop[pos]))
    raw = np.asarray(raws)
    logw = clamp_log_weight(balance_log(spec, raw), lo, hi, logp)
    return _finalize("j", cands, logw, raw=raw, extras=extras)


# ---------------------------------------------------------------------------
# sampling


@dataclass
class ProposalOutcome:
    """A candidate state plus everything needed for the Hastings ratio.

    log_fwd and log_rev include the move-type probability at the source
    and the candidate endpoints respectively. add_payload carries the raw
    addition ratios computed at the source, for reuse by the
    Rao-Blackwellized estimator.
    """

    state: ModelState
    move: str            # "a", "d", or "s"
    log_fwd: float
    log_rev: float
    add_payload: Optional[MoveDistribution] = None
    hold: bool = False   # structural self-loop, no candidate existed


def _gumbel_pick(rng: np.random.Generator, logw: np.ndarray) -> int:
    noise = rng.gumbel(size=logw.shape[0])
    return int(np.argmax(np.where(np.isneginf(logw), -np.inf, logw + noise)))


def _log_h(spec, size, p, s0, kind) -> float:
    h = dict(zip("ads", move_probs(spec, size, p, s0)))[kind]
    return math.log(h) if h > 0 else -math.inf


def propose(state: ModelState, data: RegressionData, hp: Hyperparams,
            spec: ProposalSpec, rng: np.random.Generator) -> ProposalOutcome:
    """Draw one proposal and its exact forward/reverse log kernel values.

    Raises EmptyNeighborhood when the drawn move type has no candidates;
    the sampler records that as a rejected hold.
    """
    try:
        if spec.joint:
            kind = "a"
            return _propose_joint(state, data, hp, spec, rng)
        ha, hd, hs = move_probs(spec, state.size, data.p, hp.s0)
        u = rng.random()
        kind = "a" if u < ha else ("d" if u < ha + hd else "s")
        if kind == "s":
            if spec.swap_mode == "disabled":
                raise EmptyNeighborhood("swap moves disabled")
            if spec.swap_mode == "composite":
                return composite_swap_propose(state, data, hp, spec, rng)
        if spec.weight_mode == "rw":
            return _propose_rw(state, data, hp, spec, rng, kind)
        return _propose_informed(state, data, hp, spec, rng, kind)
    except EmptyNeighborhood as exc:
        exc.move_kind = kind
        raise


def _propose_rw(state, data, hp, spec, rng, kind) -> ProposalOutcome:
    p, m, s0 = data.p, state.size, hp.s0
    if kind == "a":
        if m >= s0 or m == p:
            raise EmptyNeighborhood("no additions available")
        j = int(rng.integers(p))
        while j in state.gamma:
            j = int(rng.integers(p))
        move, n_fwd = ("add", j), p - m
        n_rev = m + 1
        rev_kind = "d"
    elif kind == "d":
        if m == 0:
            raise EmptyNeighborhood("no deletions available")
        k = state.gamma[int(rng.integers(m))]
        move, n_fwd = ("drop", k), m
        n_rev = p - m + 1
        rev_kind = "a"
    else:
        if m == 0 or m == p:
            raise EmptyNeighborhood("no swaps available")
        j = int(rng.integers(p))
        while j in state.gamma:
            j = int(rng.integers(p))
        k = state.gamma[int(rng.integers(m))]
        move, n_fwd = ("swap", j, k), m * (p - m)
        n_rev = n_fwd
        rev_kind = "s"
    try:
        new_state = posterior.apply_move(state, data, hp, move)
    except CollinearColumn:
        # degenerate candidate: zero posterior, certain rejection
        new_state = ModelState(gamma=state.gamma, fit=state.fit, log_post=-math.inf)
    new_size = {"a": m + 1, "d": m - 1, "s": m}[kind]
    log_fwd = _log_h(spec, m, p, s0, kind) - math.log(n_fwd)
    log_rev = _log_h(spec, new_size, p, s0, rev_kind) - math.log(n_rev)
    return ProposalOutcome(state=new_state, move=kind, log_fwd=log_fwd,
                           log_rev=log_rev)


def _propose_informed(state, data, hp, spec, rng, kind) -> ProposalOutcome:
    p, s0 = data.p, hp.s0
    if kind == "a":
        dist = add_distribution(state, data, hp, spec)
        idx = _gumbel_pick(rng, dist.logw)
        j = dist.cands[idx]
        log_fwd = _log_h(spec, state.size, p, s0, "a") + dist.log_prob(idx)
        try:
            new_state = _extend_state(state, data, hp, j)
        except CollinearColumn:
            # screened floor weight on a degenerate column: certain rejection
            dead = ModelState(gamma=state.gamma, fit=state.fit, log_post=-math.inf)
            return ProposalOutcome(dead, "a", log_fwd, -math.inf, add_payload=dist)
        rev = drop_distribution(new_state, data, hp, spec)
        log_rev = _log_h(spec, new_state.size, p, s0, "d") \
            + rev.log_prob(rev.index_of(j))
        return ProposalOutcome(new_state, "a", log_fwd, log_rev, add_payload=dist)
    if kind == "d":
        dist = drop_distribution(state, data, hp, spec)
        idx = _gumbel_pick(rng, dist.logw)
        k = dist.cands[idx]
        new_state = posterior.apply_move(state, data, hp, ("drop", k))
        log_fwd = _log_h(spec, state.size, p, s0, "d") + dist.log_prob(idx)
        rev = add_distribution(new_state, data, hp, spec)
        log_rev = _log_h(spec, new_state.size, p, s0, "a") \
            + rev.log_prob(rev.index_of(k))
        return ProposalOutcome(new_state, "d", log_fwd, log_rev)
    # exact informed swap
    dist = swap_distribution(state, data, hp, spec)
    idx = _gumbel_pick(rng, dist.logw)
    j, k = dist.cands[idx]
    new_state = posterior.apply_move(state, data, hp, ("swap", j, k))
    log_fwd = _log_h(spec, state.size, p, s0, "s") + dist.log_prob(idx)
    rev = swap_distribution(new_state, data, hp, spec)
    log_rev = _log_h(spec, new_state.size, p, s0, "s") \
        + rev.log_prob(rev.index_of((k, j)))
    return ProposalOutcome(new_state, "s", log_fwd, log_rev)


def _extend_state(state, data, hp, j) -> ModelState:
    fit = linalg.chol_extend(state.fit, data, j)
    return ModelState(gamma=tuple(sorted(state.gamma + (j,))),
                      fit=fit,
                      log_post=posterior.log_post_from_fit(data, hp, fit))


def _propose_joint(state, data, hp, spec, rng) -> ProposalOutcome:
    dist = joint_distribution(state, data, hp, spec)
    idx = _gumbel_pick(rng, dist.logw)
    tag, col = dist.cands[idx]
    if tag == "a":
        new_state = _extend_state(state, data, hp, col)
        back = ("d", col)
    else:
        new_state = posterior.apply_move(state, data, hp, ("drop", col))
        back = ("a", col)
    rev = joint_distribution(new_state, data, hp, spec)
    return ProposalOutcome(
        state=new_state,
        move=tag,
        log_fwd=dist.log_prob(idx),
        log_rev=rev.log_prob(rev.index_of(back)),
        add_payload=dist,
    )


def composite_swap_propose(state: ModelState, data: RegressionData,
                           hp: Hyperparams, spec: ProposalSpec,
                           rng: np.random.Generator) -> ProposalOutcome:
    """Two-stage swap: informed addition, then informed deletion.

    The deletion stage is forbidden from undoing the addition, and the
    reverse path is forbidden from deleting down to the proposed model, so
    both stage kernels are renormalized over their restricted supports.
    Costs two ratio scans instead of the |gamma| (p - |gamma|) evaluations
    of the exact swap kernel. Equal move-type probabilities at the two
    endpoints are still included for uniformity with the other moves.
    """
    if state.size == 0:
        raise EmptyNeighborhood("empty model has no swaps")
    p, s0 = data.p, hp.s0
    # the intermediate model may sit one past the cap; only endpoints must obey it
    dist_a = add_distribution(state, data, hp, spec, ignore_cap=True)
    ia = _gumbel_pick(rng, dist_a.logw)
    j = dist_a.cands[ia]
    try:
        mid = _extend_state(state, data, hp, j)
    except CollinearColumn:
        # screened floor weight on a degenerate column: certain rejection
        dead = ModelState(gamma=state.gamma, fit=state.fit, log_post=-math.inf)
        log_fwd = _log_h(spec, state.size, p, s0, "s") + dist_a.log_prob(ia)
        return ProposalOutcome(dead, "s", log_fwd, -math.inf)
    # forward deletion: everything but back-to-gamma
    dist_d = drop_distribution(mid, data, hp, spec, exclude=j)
    idx_d = _gumbel_pick(rng, dist_d.logw)
    k = dist_d.cands[idx_d]
    new_state = posterior.apply_move(mid, data, hp, ("drop", k))
    log_fwd = (_log_h(spec, state.size, p, s0, "s")
               + dist_a.log_prob(ia) + dist_d.log_prob(idx_d))
    # reverse: add k at the new model, then delete j avoiding new_state
    rev_a = add_distribution(new_state, data, hp, spec, ignore_cap=True)
    rev_d = drop_distribution(mid, data, hp, spec, exclude=k)
    log_rev = (_log_h(spec, new_state.size, p, s0, "s")
               + rev_a.log_prob(rev_a.index_of(k))
               + rev_d.log_prob(rev_d.index_of(j)))
    return ProposalOutcome(new_state, "s", log_fwd, log_rev)
