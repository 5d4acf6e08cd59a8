"""Command line: generate, run, diagnose, verify, compare.

Exit codes: 0 success, 1 usage problem, 2 data problem, 3 verification
failure. Every output file carries the exact configuration it was produced
with, either as a leading '# mixsel {...}' comment (delimited files) or a
"config" entry (JSON). Reported wall times cover sampling only, never data
loading or generation.

Worker count for replicate-parallel commands comes from --threads, falling
back to the MIXSEL_THREADS environment variable, then to 1. Results are
deterministic for a given seed regardless of the worker count; only the
measured wall times vary.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import __version__, data as datamod, diagnostics, estimators, oracle, plots, posterior
from .data import RegressionData, SyntheticSpec
from .errors import (
    CollinearInit,
    ConfigError,
    DataError,
    Divergent,
    IllegalMove,
    MixselError,
    RankDeficient,
    VerificationError,
)
from .posterior import Hyperparams
from .proposals import PRESET_NAMES, ProposalSpec, preset
from .sampler import ChainTrace, run_chain, stepwise_init

ENV_THREADS = "MIXSEL_THREADS"


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Everything one sampling run depends on.

    Round-trips losslessly through JSON; unknown keys are rejected so a
    stale or hand-edited file fails loudly instead of being half-applied.
    """

    x_path: Optional[str] = None
    y_path: Optional[str] = None
    standardize: bool = False
    preset: str = "lit1"
    spec_overrides: Optional[dict] = None
    kappa0: float = 2.0
    kappa1: float = 1.5
    g: Optional[float] = None
    s0: Optional[int] = None
    iters: int = 10000
    n_chains: int = 1
    seed: int = 0
    init: str = "empty"
    screen_budget: Optional[int] = None
    lazy: bool = False
    out_dir: str = "."

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("run config must be a JSON object")
        known = set(RunConfig.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown keys in run config: {sorted(extra)}")
        return RunConfig(**d)


def _workers(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{ENV_THREADS} must be an integer, got {env!r}")
    return 1


def _hyperparams(p: int, n: int, kappa0: float, kappa1: float,
                 g: Optional[float], s0: Optional[int], notices: list) -> Hyperparams:
    if s0 is None:
        s0 = min(p, n)
        notices.append(f"--s0 not given; using min(p, n) = {s0}")
    return Hyperparams.default(p, kappa0=kappa0, kappa1=kappa1, s0=s0, g=g)


def _build_spec(cfg: RunConfig, data: RegressionData, hp: Hyperparams) -> ProposalSpec:
    spec = preset(cfg.preset, p=data.p, s0=hp.s0)
    if cfg.spec_overrides:
        spec = ProposalSpec.from_dict({**spec.to_dict(), **cfg.spec_overrides})
    if cfg.screen_budget is not None:
        keep = datamod.marginal_screen(data, budget=cfg.screen_budget)
        spec = replace(spec, screen=tuple(int(j) for j in keep))
    return spec


def _parse_init(text: str, data: RegressionData, hp: Hyperparams,
                seed: int, chain_id: int):
    """One initial model per chain.

    'empty' starts at the null model, 'stepwise' at the forward-backward
    stepwise solution (shared across chains), 'random:K' draws K distinct
    columns per chain, and a comma list pins the model explicitly.
    """
    text = text.strip()
    if text in ("", "empty"):
        return ()
    if text == "stepwise":
        return stepwise_init(data, hp)
    if text.startswith("random:"):
        try:
            k = int(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad init {text!r}; expected random:<int>")
        if not 0 <= k <= min(hp.s0, data.n):
            raise ConfigError(f"random init size {k} out of range [0, {min(hp.s0, data.n)}]")
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chain_id), 0x1715)))
        for _ in range(64):
            cand = tuple(sorted(int(j) for j in rng.choice(data.p, size=k, replace=False)))
            try:
                posterior.make_state(data, hp, cand)
                return cand
            except RankDeficient:
                continue
        raise CollinearInit(f"no full-rank random model of size {k} found in 64 draws")
    try:
        cols = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(
            f"cannot parse init {text!r}; use 'empty', 'stepwise', 'random:K', "
            f"or a comma-separated column list")
    return cols


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _load_data(x_path, y_path, standardize: bool) -> RegressionData:
    if not x_path or not y_path:
        raise click.UsageError("both --x and --y are required here")
    return datamod.load_csv(x_path, y_path, standardize=standardize)


# ---------------------------------------------------------------------------
# command group


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="mixsel")
def cli():
    """Model-space MCMC for sparse regression, with exact certification."""


_synth_options = [
    click.option("--n", type=int, required=True, help="observations"),
    click.option("--p", type=int, required=True, help="covariates"),
    click.option("--design", type=click.Choice(datamod.DESIGNS),
                 default="independent", show_default=True),
    click.option("--snr", type=float, default=3.0, show_default=True,
                 help="signal scale for the fixed pattern"),
    click.option("--beta-mode", type=click.Choice(datamod.BETA_MODES),
                 default="fixed10", show_default=True),
    click.option("--s-star", type=int, default=10, show_default=True,
                 help="true support size for random signals"),
    click.option("--sigma-beta", type=float, default=0.3, show_default=True),
    click.option("--block-d", type=int, default=20, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
]

_hyper_options = [
    click.option("--kappa0", type=float, default=2.0, show_default=True),
    click.option("--kappa1", type=float, default=1.5, show_default=True),
    click.option("--g", type=float, default=None,
                 help="prior scale; default satisfies 1+g = p^(2 kappa1)"),
    click.option("--s0", type=int, default=None,
                 help="model size cap; defaults to min(p, n) with a notice"),
]


def _apply(options):
    def wrap(f):
        for opt in reversed(options):
            f = opt(f)
        return f
    return wrap


@cli.command("generate")
@_apply(_synth_options)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def cmd_generate(n, p, design, snr, beta_mode, s_star, sigma_beta, block_d,
                 seed, out_dir):
    """Write X.csv, y.csv and truth.json for a synthetic recipe.

    Generation is counter-based, so the same flags produce byte-identical
    files on every platform and run.
    """
    spec = SyntheticSpec(n=n, p=p, design=design, snr=snr, beta_mode=beta_mode,
                         s_star=s_star, sigma_beta=sigma_beta,
                         block_d=block_d, seed=seed)
    x = datamod.gen_design(spec)
    y, beta, gamma_star = datamod.gen_response(x, spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    datamod.save_xy(out / "X.csv", out / "y.csv", x, y, meta=spec.to_dict())
    datamod.save_truth(out / "truth.json", gamma_star, beta, spec=spec)
    click.echo(f"wrote {out / 'X.csv'}, {out / 'y.csv'}, {out / 'truth.json'}")


@cli.command("run")
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--standardize", is_flag=True, help="center and rescale columns")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="RunConfig JSON; flags given on the command line override it")
@click.option("--preset", "preset_name", type=click.Choice(PRESET_NAMES),
              default="lit1", show_default=True)
@click.option("--iters", type=int, default=10000, show_default=True)
@click.option("--chains", "n_chains", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_apply(_hyper_options)
@click.option("--init", "init_mode", default="empty", show_default=True,
              help="'empty', 'stepwise', 'random:K', or comma-separated columns")
@click.option("--screen-budget", type=int, default=None,
              help="evaluate addition ratios only on the strongest K columns")
@click.option("--lazy", is_flag=True, help="hold with probability 1/2 each step")
@click.option("--threads", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.pass_context
def cmd_run(ctx, x_path, y_path, standardize, config_path, preset_name, iters,
            n_chains, seed, kappa0, kappa1, g, s0, init_mode, screen_budget,
            lazy, threads, out_dir):
    """Sample chains and write one trace file (and estimator CSV) per chain."""
    flag_map = {"x_path": x_path, "y_path": y_path, "standardize": standardize,
                "preset": preset_name, "iters": iters, "n_chains": n_chains,
                "seed": seed, "kappa0": kappa0, "kappa1": kappa1, "g": g,
                "s0": s0, "init": init_mode, "screen_budget": screen_budget,
                "lazy": lazy, "out_dir": out_dir}
    if config_path:
        cfg = RunConfig.from_json(Path(config_path).read_text(encoding="utf-8"))
        # config fields named differently from their click parameters
        param_name = {"preset": "preset_name", "init": "init_mode"}
        explicit = {
            key: val for key, val in flag_map.items()
            if ctx.get_parameter_source(param_name.get(key, key))
            == click.core.ParameterSource.COMMANDLINE
        }
        cfg = replace(cfg, **explicit)
    else:
        cfg = RunConfig(**flag_map)
    if cfg.iters < 0:
        raise ConfigError("--iters must be nonnegative")
    if cfg.n_chains < 1:
        raise ConfigError("--chains must be positive")
    data = _load_data(cfg.x_path, cfg.y_path, cfg.standardize)
    notices: list = []
    hp = _hyperparams(data.p, data.n, cfg.kappa0, cfg.kappa1, cfg.g, cfg.s0,
                      notices)
    spec = _build_spec(cfg, data, hp)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shared_init = stepwise_init(data, hp) if cfg.init == "stepwise" else None

    def one_chain(cid: int) -> dict:
        init = shared_init if shared_init is not None else \
            _parse_init(cfg.init, data, hp, cfg.seed, cid)
        trace_path = out / f"chain_{cid}.jsonl"
        t0 = time.perf_counter()
        with open(trace_path, "w", encoding="utf-8") as fh:
            tr = run_chain(data, hp, spec, init, cfg.iters, cfg.seed,
                           chain_id=cid, lazy=cfg.lazy, jsonl=fh)
        wall = time.perf_counter() - t0
        row = {"chain_id": cid, "init": list(init), "wall_s": wall,
               "acceptance_rate": tr.acceptance_rate(),
               "trace": str(trace_path)}
        if len(tr):
            best = int(np.argmax(tr.log_posts))
            row["best_log_post"] = float(tr.log_posts[best])
            row["best_model"] = list(tr.gammas[best])
            row["final_model"] = list(tr.gammas[-1])
        if tr.rb is not None:
            rb_path = out / f"rb_{cid}.csv"
            estimators.write_pip_csv(rb_path, tr.rb,
                                     meta={"config": asdict(cfg), "chain_id": cid})
            row["rb"] = str(rb_path)
        return row

    for note in notices:
        click.echo(f"notice: {note}", err=True)
    t_start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        rows = list(pool.map(one_chain, range(cfg.n_chains)))
    wall_total = time.perf_counter() - t_start
    _write_json(out / "run.json", {
        "config": asdict(cfg), "notices": notices, "n": data.n, "p": data.p,
        "s0": hp.s0, "g": hp.g, "spec": spec.to_dict(),
        "wall_time_s": wall_total, "chains": rows,
    })
    for row in rows:
        click.echo(f"chain {row['chain_id']}: acceptance "
                   f"{row['acceptance_rate']:.3f}, {row['wall_s']:.2f}s "
                   f"-> {row['trace']}")
    click.echo(f"run complete in {wall_total:.2f}s; summary in {out / 'run.json'}")


@cli.command("diagnose")
@click.argument("traces", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--standardize", is_flag=True)
@_apply(_hyper_options)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False),
              help="truth.json; enables the coefficient-error summary")
@click.option("--rb", "rb_paths", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="estimator CSVs to pool (repeatable)")
@click.option("--q", "q_refs", type=int, default=5, show_default=True,
              help="reference models for the vector summary statistic")
@click.option("--seed", type=int, default=0, show_default=True,
              help="stream for the posterior-draw replay")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def cmd_diagnose(traces, x_path, y_path, standardize, kappa0, kappa1, g, s0,
                 truth_path, rb_paths, q_refs, seed, out_dir):
    """Pool traces into a report.json plus rendered figures.

    The hitting summary is the first iteration at which each chain sits at
    the best model found across all pooled traces; chains that never reach
    it report null.
    """
    data = _load_data(x_path, y_path, standardize)
    notices: list = []
    hp = _hyperparams(data.p, data.n, kappa0, kappa1, g, s0, notices)
    loaded = [ChainTrace.from_jsonl(path) for path in traces]
    if not any(len(tr) for tr in loaded):
        raise DataError("all traces are empty; nothing to diagnose")
    truth = datamod.load_truth(truth_path) if truth_path else None
    reference = tuple(truth["gamma_star"]) if truth else None
    report = diagnostics.diagnostics_report(loaded, data, hp,
                                            reference=reference, q=q_refs)
    pooled_best = diagnostics.best_distinct_models(loaded, 1)[0]
    report["h_max_target"] = sorted(int(j) for j in pooled_best)
    report["h_max"] = [diagnostics.hitting_iteration(tr, pooled_best)
                       for tr in loaded]
    pip = np.zeros(data.p)
    total = 0
    for tr in loaded:
        for gam in tr.gammas:
            if gam:
                pip[list(gam)] += 1.0
        total += len(tr)
    pip /= max(total, 1)
    report["pip"] = pip.tolist()
    beta_panel = truth["beta_star"] if truth else None
    if rb_paths:
        pooled = [estimators.read_pip_csv(path) for path in rb_paths]
        widths = {arr.shape[0] for arr in pooled}
        if len(widths) != 1:
            raise DataError(f"estimator CSVs disagree on width: {sorted(widths)}")
        report["pip_rb"] = np.mean(pooled, axis=0).tolist()
    # replayed scalar summaries; the coefficient error needs the truth file
    if truth:
        t1 = np.concatenate([
            diagnostics.replay_t1(tr, data, hp, truth["beta_star"])
            for tr in loaded if len(tr)])
        report["ess"]["t1"] = _ess_or_note(t1, report["ess"], "t1")
    t2 = np.concatenate([
        diagnostics.replay_t2(tr, data, hp, seed + 31 * tr.chain_id)
        for tr in loaded if len(tr)])
    report["ess"]["t2"] = _ess_or_note(t2, report["ess"], "t2")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {"x": str(x_path), "y": str(y_path), "standardize": standardize,
              "kappa0": kappa0, "kappa1": kappa1, "g": hp.g, "s0": hp.s0,
              "traces": [str(t) for t in traces], "truth": truth_path,
              "rb": [str(r) for r in rb_paths], "q": q_refs, "seed": seed}
    report["config"] = config
    report["notices"] = notices
    figures = {
        "trace": plots.trace_figure([tr for tr in loaded if len(tr)],
                                    out / "trace.png"),
        "pip": plots.pip_figure(pip, out / "pip.png", beta=beta_panel),
        "landscape": plots.landscape_figure(report["landscape_histogram"],
                                            out / "landscape.png"),
    }
    report["figures"] = figures
    _write_json(out / "report.json", report)
    for note in notices:
        click.echo(f"notice: {note}", err=True)
    hits = [h for h in report["h_max"] if h is not None]
    click.echo(f"pooled {len(loaded)} trace(s), {total} iterations, "
               f"{report['n_distinct_models']} distinct models")
    click.echo(f"best model {report['h_max_target']}; "
               f"reached by {len(hits)}/{len(loaded)} chain(s)")
    click.echo(f"report in {out / 'report.json'}")


def _ess_or_note(series: np.ndarray, ess_dict: dict, key: str):
    try:
        return diagnostics.ess_autocorr(series)
    except MixselError as exc:
        ess_dict[f"{key}_note"] = str(exc)
        return None


@cli.command("verify")
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False),
              help="design CSV; omit to verify a synthetic instance")
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--standardize", is_flag=True)
@click.option("--example1", is_flag=True,
              help="use the two-confounded-columns worked design instead of data")
@click.option("--nu", type=float, default=1.0, show_default=True,
              help="confounding level of the worked design")
@click.option("--n", "ns", multiple=True, type=int,
              help="sample size; repeatable with --example1 to sweep")
@click.option("--p", type=int, default=None, help="synthetic instance width")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--design", type=click.Choice(datamod.DESIGNS), default="independent",
              show_default=True)
@click.option("--beta-mode", type=click.Choice(datamod.BETA_MODES), default="random",
              show_default=True)
@click.option("--snr", type=float, default=3.0, show_default=True)
@click.option("--s-star", type=int, default=2, show_default=True)
@click.option("--sigma-beta", type=float, default=2.5, show_default=True)
@_apply(_hyper_options)
@click.option("--preset", "preset_name", type=click.Choice(PRESET_NAMES),
              default="theory-lit", show_default=True)
@click.option("--c0", type=float, default=2.0, show_default=True,
              help="deletion threshold exponent, also the budget hypothesis")
@click.option("--c1", type=float, default=4.0, show_default=True)
@click.option("--q-override", type=float, default=None,
              help="exit probability to certify with (must dominate the exact one)")
@click.option("--horizon", type=int, default=2000, show_default=True)
@click.option("--split-sims", type=int, default=0, show_default=True,
              help="Monte Carlo walkers for the regeneration check (0 skips it)")
@click.option("--split-j", type=int, default=2, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def cmd_verify(x_path, y_path, standardize, example1, nu, ns, p, seed, design,
               beta_mode, snr, s_star, sigma_beta, kappa0, kappa1, g, s0,
               preset_name, c0, c1, q_override, horizon, split_sims, split_j,
               out_dir):
    """Certify an enumerable instance exactly; exit 0 only if every check passes.

    The default path enumerates the model space of a small dataset (given
    or synthetic), checks detailed balance of the chosen kernel, derives
    the restart constants with all their hypotheses, and verifies the
    geometric total-variation envelope state by state. With --example1 the
    worked two-column design is analyzed instead: exact escape probability
    of the naive kernel and mixing time of the certified one, across the
    requested sample sizes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {"example1": example1, "nu": nu, "n": list(ns), "p": p,
              "seed": seed, "design": design, "beta_mode": beta_mode,
              "snr": snr, "s_star": s_star, "sigma_beta": sigma_beta,
              "kappa0": kappa0, "kappa1": kappa1, "g": g, "s0": s0,
              "preset": preset_name, "c0": c0, "c1": c1,
              "q_override": q_override, "horizon": horizon,
              "split_sims": split_sims, "split_j": split_j,
              "x": x_path, "y": y_path, "standardize": standardize}
    if example1:
        result = _verify_example1(ns or (200, 400, 800), nu, p or 10,
                                  kappa0, kappa1, g, s0, c0, c1, out)
    else:
        if x_path:
            data = _load_data(x_path, y_path, standardize)
        else:
            if p is None:
                raise click.UsageError("give --x/--y, --p, or --example1")
            spec = SyntheticSpec(n=ns[0] if ns else 60, p=p, design=design,
                                 snr=snr, beta_mode=beta_mode, s_star=s_star,
                                 sigma_beta=sigma_beta, seed=seed)
            data, _, _ = datamod.make_dataset(spec)
        result = _verify_instance(data, kappa0, kappa1, g, s0, preset_name,
                                  c0, c1, q_override, horizon, split_sims,
                                  split_j, seed, out)
    result["config"] = config
    _write_json(out / "verify.json", result)
    if not result["pass"]:
        raise VerificationError(result.get("error", "a verification check failed"))
    click.echo(f"all checks passed; details in {out / 'verify.json'}")


def _verify_instance(data, kappa0, kappa1, g, s0, preset_name, c0, c1,
                     q_override, horizon, split_sims, split_j, seed, out):
    notices: list = []
    hp = _hyperparams(data.p, data.n, kappa0, kappa1, g, s0, notices)
    for note in notices:
        click.echo(f"notice: {note}", err=True)
    result: dict = {"mode": "instance", "n": data.n, "p": data.p, "s0": hp.s0,
                    "notices": notices, "checks": {}, "pass": False}
    try:
        cond1 = oracle.condition1_constants(data, hp)
        result["condition1"] = {
            "gamma_star": list(cond1.gamma_star), "c0_max": cond1.c0_max,
            "c1_max": cond1.c1_max, "c1_add_min": cond1.c1_add_min,
            "c1_swap_min": cond1.c1_swap_min,
            "n_overfitted": cond1.n_overfitted,
            "n_underfitted": cond1.n_underfitted,
            "satisfied": cond1.satisfied, "vacuous": cond1.vacuous,
        }
        _echo_check(result, "landscape", all(cond1.satisfied.values()),
                    f"c0 <= {cond1.c0_max:.3f}, c1 <= {cond1.c1_max:.3f} "
                    f"at {tuple(cond1.gamma_star)}")
        spec = preset(preset_name, p=data.p, s0=hp.s0, c0=c0, c1=c1)
        chain = oracle.exact_chain(data, hp, spec, lazy=True)
        asym = _balance_asymmetry(chain)
        _echo_check(result, "detailed_balance", asym <= 1e-10,
                    f"max flow asymmetry {asym:.3e}")
        eig_min = float(np.min(np.linalg.eigvalsh(_symmetrized(chain))))
        _echo_check(result, "lazy_spectrum", eig_min >= -1e-10,
                    f"smallest eigenvalue {eig_min:.3e}")
        constants = oracle.two_stage_constants(chain, cond1.gamma_star,
                                               q_override=q_override)
        result["constants"] = {
            "lambda1": constants.lambda1, "lambda2": constants.lambda2,
            "q": constants.q, "q_actual": constants.q_actual,
            "K": constants.K, "M": constants.M, "rho": constants.rho,
            "u": constants.u, "r": constants.r, "alpha": constants.alpha,
        }
        _echo_check(result, "restart_certificate", constants.alpha < 1.0,
                    f"alpha = {constants.alpha:.10f}")
        bound = oracle.tv_bound_check(chain, constants, horizon=horizon,
                                      cond1=cond1, kernel_c0=c0, kernel_c1=c1)
        result["tv_bound"] = bound
        _echo_check(result, "tv_envelope", True,
                    f"max slack {bound['max_slack']:.3e} through t = {bound['last_t']}")
        if bound.get("budget_checked"):
            _echo_check(result, "mixing_budget",
                        bound["t_mix"] <= bound["budget"],
                        f"t_mix = {bound['t_mix']} vs budget {bound['budget']:.0f}")
        tv_worst, envelope = _tv_curves(chain, constants,
                                        min(horizon, 300))
        plots.tv_bound_figure(tv_worst, envelope, out / "verify_tv.png",
                              alpha=constants.alpha)
        result["figures"] = {"tv": str(out / "verify_tv.png")}
        _drift_lemma_check(result, chain, constants)
        _s2_check(result, chain, constants, min(horizon, 300))
        if split_sims > 0:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=int(seed), spawn_key=(0xA5,)))
            split = oracle.split_chain_estimate(chain, constants, (),
                                                j=split_j, n_sims=split_sims,
                                                rng=rng)
            result["split"] = split
            gap = abs(split["u_n_mean"] - 2.0)
            _echo_check(result, "regeneration_wait",
                        gap <= 3.0 * split["u_n_se"],
                        f"E[u^N] = {split['u_n_mean']:.4f} "
                        f"+/- {split['u_n_se']:.4f}")
            _echo_check(result, "regeneration_time",
                        split["u_omega_mean"] <= split["omega_bound"]
                        + 3.0 * split["u_omega_se"],
                        f"E[u^omega] = {split['u_omega_mean']:.4f} "
                        f"vs bound {split['omega_bound']:.4f}")
    except VerificationError as exc:
        result["error"] = str(exc)
        result["pass"] = False
        _write_json(out / "verify.json", result)
        raise
    result["pass"] = all(c["ok"] for c in result["checks"].values())
    if not result["pass"]:
        failed = [k for k, c in result["checks"].items() if not c["ok"]]
        result["error"] = f"checks failed: {failed}"
    return result


def _echo_check(result: dict, name: str, ok: bool, detail: str) -> None:
    result["checks"][name] = {"ok": bool(ok), "detail": detail}
    click.echo(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")


def _balance_asymmetry(chain) -> float:
    flow = chain.pi[:, None] * chain.kernel
    scale = max(float(flow.max()), 1e-300)
    return float(np.max(np.abs(flow - flow.T))) / scale


def _symmetrized(chain) -> np.ndarray:
    root = np.sqrt(chain.pi)
    return root[:, None] * chain.kernel / root[None, :]


def _tv_curves(chain, constants, horizon: int):
    """Worst-start TV distance per step and the certified envelope."""
    factor = 4.0 * float(np.max(1.0 + constants.v1 / constants.M))
    dist = np.eye(chain.n_states)
    tv, env = [], []
    for t in range(horizon + 1):
        tv.append(0.5 * np.abs(dist - chain.pi[None, :]).sum(axis=1).max())
        env.append(factor * constants.alpha ** (t + 1))
        dist = dist @ chain.kernel
    return np.asarray(tv), np.asarray(env)


def _drift_lemma_check(result, chain, constants) -> None:
    # E_x[lambda1^(-tau_A)] must sit below the drift function everywhere
    if not 0.0 < constants.lambda1 < 1.0:
        result["checks"]["drift_lemma"] = {
            "ok": True,
            "detail": f"skipped: lambda1 = {constants.lambda1} is degenerate"}
        return
    a_idx = np.flatnonzero(constants.a_mask).tolist()
    try:
        f = oracle.hitting_gf(chain, a_idx, constants.lambda1)
    except Divergent:
        result["checks"]["drift_lemma"] = {
            "ok": True, "detail": "skipped: expectation diverges at lambda1"}
        return
    slack = float(np.max(f - constants.v1))
    _echo_check(result, "drift_lemma", slack <= 1e-9,
                f"max f - V1 = {slack:.3e}")


def _s2_check(result, chain, constants, horizon: int) -> None:
    """TV(t) <= 2 V(x) alpha^(t+1) with V the hitting generating function."""
    if not 0.0 < constants.alpha < 1.0:
        # a vanishing exit probability rounds alpha up to exactly one; the
        # restart_certificate check has already failed by then
        result["checks"]["hitting_bound"] = {
            "ok": True,
            "detail": f"skipped: alpha = {constants.alpha} saturates"}
        return
    try:
        v = oracle.hitting_gf(chain, int(constants.x_star), constants.alpha)
    except Divergent as exc:
        result["checks"]["hitting_bound"] = {
            "ok": True, "detail": f"skipped: {exc}"}
        return
    dist = np.eye(chain.n_states)
    worst = -math.inf
    for t in range(horizon + 1):
        tv = 0.5 * np.abs(dist - chain.pi[None, :]).sum(axis=1)
        worst = max(worst, float(np.max(tv - 2.0 * v * constants.alpha ** (t + 1))))
        dist = dist @ chain.kernel
    _echo_check(result, "hitting_bound", worst <= 1e-9,
                f"max slack {worst:.3e} over {horizon} steps")


def _verify_example1(ns, nu, p, kappa0, kappa1, g, s0, c0, c1, out):
    if s0 is None:
        s0 = 2
    rows = []
    for n in sorted(ns):
        data = oracle.example1_design(p, nu, n)
        hp = Hyperparams.default(p, kappa0=kappa0, kappa1=kappa1, s0=s0, g=g)
        naive = ProposalSpec(weight_mode="balanced", balancing="power",
                             power=nu, joint=True, swap_mode="disabled")
        log_esc = oracle.escape_log_prob(data, hp, naive, ())
        certified = preset("theory-lit", p=p, s0=hp.s0, c0=c0, c1=c1)
        chain = oracle.exact_chain(data, hp, certified, lazy=True)
        t_mix = oracle.exact_mixing_time(chain)
        rows.append({"n": n, "log_escape": log_esc,
                     "escape": math.exp(log_esc), "t_mix": t_mix})
        click.echo(f"n = {n}: naive escape {math.exp(log_esc):.3e}, "
                   f"certified t_mix = {t_mix}")
    result = {"mode": "example1", "nu": nu, "p": p, "s0": s0, "rows": rows,
              "checks": {}, "pass": False}
    if len(rows) > 1:
        escapes = [r["log_escape"] for r in rows]
        decreasing = all(b < a for a, b in zip(escapes, escapes[1:]))
        _echo_check(result, "escape_decay", decreasing,
                    "naive escape probability falls with n"
                    if decreasing else "escape probability is not decreasing")
        tms = [r["t_mix"] for r in rows]
        stable = max(tms) <= 2 * min(tms)
        _echo_check(result, "mixing_stability", stable,
                    f"certified t_mix spans [{min(tms)}, {max(tms)}]")
    else:
        _echo_check(result, "escape_computed",
                    math.isfinite(rows[0]["log_escape"]),
                    f"log escape {rows[0]['log_escape']:.3f}")
    fig = plots.escape_figure([r["n"] for r in rows],
                              {nu: [r["escape"] for r in rows]},
                              {nu: [r["t_mix"] for r in rows]},
                              out / "verify_escape.png")
    result["figures"] = {"escape": fig}
    result["pass"] = all(c["ok"] for c in result["checks"].values())
    if not result["pass"]:
        failed = [k for k, c in result["checks"].items() if not c["ok"]]
        result["error"] = f"checks failed: {failed}"
    return result


@cli.command("compare")
@_apply(_synth_options)
@click.option("--presets", "preset_csv", default="lit1,rw", show_default=True,
              help="comma-separated preset names; repeats allowed")
@click.option("--reps", type=int, default=5, show_default=True,
              help="independent datasets per preset")
@click.option("--iters", type=int, default=10000, show_default=True)
@_apply(_hyper_options)
@click.option("--init", "init_mode", default="empty", show_default=True)
@click.option("--screen-budget", type=int, default=None)
@click.option("--ess-stat", type=click.Choice(["logpost", "t2"]),
              default="logpost", show_default=True,
              help="series used for the ESS-per-second column")
@click.option("--threads", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def cmd_compare(n, p, design, snr, beta_mode, s_star, sigma_beta, block_d,
                seed, preset_csv, reps, iters, kappa0, kappa1, g, s0,
                init_mode, screen_budget, ess_stat, threads, out_dir):
    """Benchmark presets over replicated synthetic datasets.

    Each replicate draws a fresh dataset; every preset runs on the same
    data with its own random stream. Success means the chain visited the
    best model found by any preset on that replicate; the hitting column
    is censored at --iters when a chain never gets there.
    """
    names = [tok.strip() for tok in preset_csv.split(",") if tok.strip()]
    if not names:
        raise ConfigError("--presets is empty")
    if iters < 1 or reps < 1:
        raise ConfigError("--iters and --reps must be positive")
    labels = []
    seen: dict = {}
    for name in names:
        seen[name] = seen.get(name, 0) + 1
        labels.append(name if seen[name] == 1 else f"{name}.{seen[name]}")
    notices: list = []
    hp_probe = _hyperparams(p, n, kappa0, kappa1, g, s0, notices)
    for note in notices:
        click.echo(f"notice: {note}", err=True)

    def one_rep(rep: int) -> list:
        spec_r = SyntheticSpec(n=n, p=p, design=design, snr=snr,
                               beta_mode=beta_mode, s_star=s_star,
                               sigma_beta=sigma_beta, block_d=block_d,
                               seed=seed + rep)
        data, _, gamma_star = datamod.make_dataset(spec_r)
        hp = Hyperparams.default(data.p, kappa0=kappa0, kappa1=kappa1,
                                 s0=hp_probe.s0, g=g)
        rows = []
        for slot, name in enumerate(names):
            cfg = RunConfig(preset=name, screen_budget=screen_budget)
            kspec = _build_spec(cfg, data, hp)
            init = _parse_init(init_mode, data, hp, seed + rep, slot)
            t0 = time.perf_counter()
            tr = run_chain(data, hp, kspec, init, iters, seed + rep,
                           chain_id=slot)
            wall = time.perf_counter() - t0
            if ess_stat == "t2":
                series = diagnostics.replay_t2(tr, data, hp, seed + rep)
            else:
                series = np.asarray(tr.log_posts)
            try:
                ess = diagnostics.ess_autocorr(series)
            except MixselError:
                ess = None
            rows.append({"rep": rep, "label": labels[slot], "preset": name,
                         "wall_s": wall, "trace": tr,
                         "acceptance": tr.acceptance_rate(),
                         "ess": ess, "gamma_star": gamma_star})
        best = max((_argmax_model(row["trace"]) for row in rows),
                   key=lambda pair: pair[1])[0]
        for row in rows:
            hit = diagnostics.hitting_iteration(row["trace"], best)
            row["h_max"] = iters if hit is None else hit
            row["success"] = hit is not None
            row["found_truth"] = diagnostics.hitting_iteration(
                row["trace"], row["gamma_star"]) is not None
            del row["trace"], row["gamma_star"]
        return rows

    t_start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        all_rows = [row for rep_rows in pool.map(one_rep, range(reps))
                    for row in rep_rows]
    wall_total = time.perf_counter() - t_start
    config = {"presets": labels, "reps": reps, "iters": iters, "n": n, "p": p,
              "design": design, "snr": snr, "beta_mode": beta_mode,
              "s_star": s_star, "sigma_beta": sigma_beta, "block_d": block_d,
              "seed": seed, "kappa0": kappa0, "kappa1": kappa1,
              "g": g, "s0": hp_probe.s0, "init": init_mode,
              "screen_budget": screen_budget, "ess_stat": ess_stat}
    summary = []
    for label in labels:
        rows = [r for r in all_rows if r["label"] == label]
        h = np.asarray([r["h_max"] for r in rows], dtype=float)
        ess_rates = [r["ess"] / r["wall_s"] for r in rows
                     if r["ess"] is not None and r["wall_s"] > 0]
        summary.append({
            "preset": label, "reps": len(rows),
            "success": int(sum(r["success"] for r in rows)),
            "found_truth": int(sum(r["found_truth"] for r in rows)),
            "wall_median_s": float(np.median([r["wall_s"] for r in rows])),
            "h_max_median": float(np.median(h)),
            "h_max_q95": float(np.quantile(h, 0.95)),
            "acceptance_mean": float(np.mean([r["acceptance"] for r in rows])),
            "ess_per_sec": float(np.median(ess_rates)) if ess_rates else None,
        })
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_summary_csv(out / "summary.csv", summary, config)
    _write_json(out / "compare.json", {"config": config, "notices": notices,
                                       "wall_time_s": wall_total,
                                       "runs": all_rows, "summary": summary})
    plots.compare_figure(summary, out / "compare.png")
    for row in summary:
        rate = "n/a" if row["ess_per_sec"] is None else f"{row['ess_per_sec']:.1f}"
        click.echo(f"{row['preset']}: success {row['success']}/{row['reps']}, "
                   f"hit median {row['h_max_median']:.0f}, "
                   f"acceptance {row['acceptance_mean']:.3f}, ESS/s {rate}")
    click.echo(f"compared {len(labels)} preset(s) x {reps} rep(s) "
               f"in {wall_total:.2f}s; summary in {out / 'summary.csv'}")


def _argmax_model(trace: ChainTrace):
    best = int(np.argmax(trace.log_posts))
    return trace.gammas[best], float(trace.log_posts[best])


def _write_summary_csv(path, summary: list, config: dict) -> None:
    import csv as _csv

    cols = ["preset", "reps", "success", "found_truth", "wall_median_s",
            "h_max_median", "h_max_q95", "acceptance_mean", "ess_per_sec"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# mixsel " + json.dumps(config, sort_keys=True) + "\n")
        writer = _csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in summary:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    """Console entry; maps the error taxonomy onto process exit codes."""
    try:
        rv = cli.main(args=argv, prog_name="mixsel", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ConfigError, IllegalMove) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except VerificationError as exc:
        click.echo(f"verification failed: {exc}", err=True)
        return 3
    except MixselError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    raise SystemExit(main())
