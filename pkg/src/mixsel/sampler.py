"""Metropolis-Hastings driver over model space.

run_chain is deterministic given (data, hyperparameters, proposal spec,
init, iterations, seed, chain_id): per-chain generators are spawned from
a SeedSequence keyed by (seed, chain_id), so multi-chain runs do not
depend on scheduling or worker count. States are updated exclusively
through single-column factor updates; a periodic audit refits the model
from scratch and checks the incrementally maintained log posterior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from . import estimators, posterior, proposals
from .data import RegressionData
from .errors import (
    CollinearInit,
    ConfigError,
    EmptyNeighborhood,
    InitTooLarge,
    MixselError,
    RankDeficient,
    TraceFormatError,
)
from .posterior import Hyperparams, ModelState
from .proposals import ProposalOutcome, ProposalSpec

AUDIT_EVERY = 100           # recompute from scratch on 1% of iterations
AUDIT_TOL = 1e-8


@dataclass
class ChainTrace:
    """Per-iteration chain history plus run provenance.

    mv is one of "a", "d", "s" (move types) or "z" (lazy hold). Rejected
    iterations repeat the previous model; gamma tuples are shared, not
    copied. Lazy holds carry acc=False and are excluded from acceptance
    statistics.
    """

    seed: int
    chain_id: int
    spec_snapshot: dict
    iters: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    log_posts: list = field(default_factory=list)
    moves: list = field(default_factory=list)
    accepts: list = field(default_factory=list)
    log_alphas: list = field(default_factory=list)
    rb: Optional["estimators.RBEstimate"] = None
    final_state: Optional[ModelState] = None

    def __len__(self) -> int:
        return len(self.iters)

    def append(self, it, gamma, lp, mv, acc, la):
        self.iters.append(it)
        self.gammas.append(gamma)
        self.log_posts.append(lp)
        self.moves.append(mv)
        self.accepts.append(acc)
        self.log_alphas.append(la)

    def acceptance_rate(self) -> float:
        flips = [a for a, m in zip(self.accepts, self.moves) if m != "z"]
        return float(np.mean(flips)) if flips else 0.0

    # -- serialization ------------------------------------------------------

    def meta(self) -> dict:
        return {"seed": self.seed, "chain_id": self.chain_id,
                "spec": self.spec_snapshot}

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"meta": self.meta()}, sort_keys=True) + "\n")
            for rec in self.iter_records():
                fh.write(json.dumps(rec) + "\n")

    def iter_records(self):
        for it, g, lp, mv, acc, la in zip(self.iters, self.gammas,
                                          self.log_posts, self.moves,
                                          self.accepts, self.log_alphas):
            yield {"it": it, "g": list(g), "lp": lp, "mv": mv, "acc": acc,
                   "la": None if la == -math.inf else la}

    @staticmethod
    def from_jsonl(path) -> "ChainTrace":
        trace = ChainTrace(seed=-1, chain_id=-1, spec_snapshot={})
        try:
            with open(path, encoding="utf-8") as fh:
                first = fh.readline()
                head = json.loads(first) if first.strip() else {}
                if "meta" in head:
                    meta = head["meta"]
                    trace.seed = meta.get("seed", -1)
                    trace.chain_id = meta.get("chain_id", -1)
                    trace.spec_snapshot = meta.get("spec", {})
                else:
                    _append_record(trace, head)
                for line in fh:
                    if line.strip():
                        _append_record(trace, json.loads(line))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TraceFormatError(f"bad trace file {path}: {exc}") from exc
        return trace


def _append_record(trace: ChainTrace, rec: dict):
    la = rec["la"]
    trace.append(rec["it"], tuple(rec["g"]), rec["lp"], rec["mv"],
                 bool(rec["acc"]), -math.inf if la is None else float(la))


def chain_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chain_id),))
    return np.random.default_rng(ss)


def mh_step(state: ModelState, data: RegressionData, hp: Hyperparams,
            spec: ProposalSpec, rng: np.random.Generator):
    """One accept/reject step. Returns (new_state, outcome, accepted, log_alpha)."""
    outcome = _safe_propose(state, data, hp, spec, rng)
    if outcome.hold:
        return state, outcome, False, -math.inf
    log_alpha = min(0.0, (outcome.state.log_post - state.log_post)
                    + (outcome.log_rev - outcome.log_fwd))
    if math.isnan(log_alpha):
        log_alpha = -math.inf
    accepted = math.log(rng.random()) < log_alpha
    return (outcome.state if accepted else state), outcome, accepted, log_alpha


def _safe_propose(state, data, hp, spec, rng) -> ProposalOutcome:
    try:
        return proposals.propose(state, data, hp, spec, rng)
    except EmptyNeighborhood as exc:
        # structural self-loop: the drawn move type had no candidates
        return ProposalOutcome(state=state, move=getattr(exc, "move_kind", "a"),
                               log_fwd=0.0, log_rev=-math.inf, hold=True)


def run_chain(data: RegressionData, hp: Hyperparams, spec: ProposalSpec,
              init, iters: int, seed: int, chain_id: int = 0,
              lazy: bool = False, rb: Optional[bool] = None,
              jsonl: Optional[IO[str]] = None,
              audit_every: int = AUDIT_EVERY) -> ChainTrace:
    """Run one chain for ``iters`` iterations from the given initial model.

    When ``jsonl`` (a writable text handle) is given, records stream out
    as they are produced, one JSON object per line, after a metadata
    header line.

    The Rao-Blackwellized estimator accumulates on addition attempts (and
    on every iteration of a joint kernel): those iterations are selected
    by the move-type coin alone, so the sample of contributing states is
    unbiased. Uniform random-walk proposals never compute the needed
    scans, so ``rb`` defaults to off for them; forcing it raises.
    """
    if rb is None:
        rb = spec.weight_mode != "rw"
    elif rb and spec.weight_mode == "rw":
        raise ConfigError("estimator accumulation needs an informed or joint proposal")
    init = tuple(sorted(int(j) for j in init))
    if len(init) > hp.s0:
        raise InitTooLarge(f"|init| = {len(init)} exceeds s0 = {hp.s0}")
    try:
        state = posterior.make_state(data, hp, init)
    except (RankDeficient,) as exc:
        raise CollinearInit(f"initial model is rank deficient: {exc}") from exc
    trace = ChainTrace(seed=seed, chain_id=chain_id,
                       spec_snapshot=spec.to_dict())
    est = estimators.RBEstimate.empty(data.p) if rb else None
    rng = chain_rng(seed, chain_id)
    if jsonl is not None:
        jsonl.write(json.dumps({"meta": trace.meta()}, sort_keys=True) + "\n")
    for it in range(iters):
        if lazy and rng.random() < 0.5:
            mv, acc, la = "z", False, 0.0
        else:
            prev = state
            state, outcome, acc, la = mh_step(state, data, hp, spec, rng)
            mv = outcome.move
            if est is not None and (spec.joint or outcome.move == "a"):
                estimators.rb_update(est, prev, outcome.add_payload, data, hp)
        if audit_every and (it + 1) % audit_every == 0:
            state = _audit_state(state, data, hp)
        trace.append(it, state.gamma, state.log_post, mv, acc, la)
        if jsonl is not None:
            jsonl.write(json.dumps(
                {"it": it, "g": list(state.gamma), "lp": state.log_post,
                 "mv": mv, "acc": acc,
                 "la": None if la == -math.inf else la}) + "\n")
    trace.rb = est
    trace.final_state = state
    return trace


def stepwise_init(data: RegressionData, hp: Hyperparams) -> tuple:
    """Forward-backward stepwise selection under the model posterior.

    Greedily applies the single best add or drop while one of them
    increases the log posterior, honoring the size cap. Each applied
    move strictly raises the objective, so the search terminates.
    Deterministic; intended as a warm-start chain initializer.
    """
    state = posterior.make_state(data, hp, ())
    while True:
        best_move, best_gain = None, 0.0
        if state.size < hp.s0:
            cand, logr, _, _, valid = posterior.log_ratios_add(state.fit, data, hp)
            if valid.any():
                k = int(np.argmax(np.where(valid, logr, -np.inf)))
                if logr[k] > best_gain:
                    best_move, best_gain = ("add", int(cand[k])), float(logr[k])
        if state.size:
            _, logr_d = posterior.log_ratios_drop(state.fit, data, hp)
            k = int(np.argmax(logr_d))
            if logr_d[k] > best_gain:
                best_move = ("drop", state.fit.columns[k])
                best_gain = float(logr_d[k])
        if best_move is None:
            return state.gamma
        state = posterior.apply_move(state, data, hp, best_move)


def _audit_state(state: ModelState, data, hp) -> ModelState:
    fresh = posterior.make_state(data, hp, state.gamma)
    drift = abs(fresh.log_post - state.log_post)
    scale = max(1.0, abs(fresh.log_post))
    if drift > AUDIT_TOL * scale:
        raise MixselError(
            f"incremental log posterior drifted by {drift:.3e} at {state.gamma}")
    return fresh


def lazy_wrap(kernel: np.ndarray) -> np.ndarray:
    """Half-identity mixture of a transition matrix; spectrum maps to (1+s)/2."""
    kernel = np.asarray(kernel, dtype=float)
    return 0.5 * (kernel + np.eye(kernel.shape[0]))
