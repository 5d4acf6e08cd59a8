"""Scratch validation for the large-scale acceptance runs (criteria 4/5/6b)."""
import time
import numpy as np

from mixsel.data import SyntheticSpec, make_dataset, marginal_screen
from mixsel.posterior import Hyperparams, make_state
from mixsel.proposals import preset
from mixsel.sampler import run_chain, stepwise_init
from mixsel.diagnostics import hitting_iteration, replay_t2, ess_autocorr
from mixsel.estimators import rb_point
from dataclasses import replace


def random_init(p: int, size: int, seed: int) -> tuple:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    return tuple(sorted(int(j) for j in rng.choice(p, size=size, replace=False)))


def crit4(reps=20, lit_iters=2000, rw_iters=30000):
    t0 = time.time()
    lit_spec = preset("lit1")
    rw_spec = preset("rw")
    lit_h, rw_h, succ = [], [], 0
    pip_plain, pip_screen = [], []
    for rep in range(reps):
        spec = SyntheticSpec(n=500, p=1000, design="independent", snr=3.0,
                             beta_mode="fixed10", seed=100 + rep)
        data, beta, gstar = make_dataset(spec)
        hp = Hyperparams.default(data.p, s0=20)
        init = random_init(data.p, 10, seed=100 + rep)
        t1 = time.time()
        tr_lit = run_chain(data, hp, lit_spec, init, lit_iters, seed=100 + rep, chain_id=0)
        t_lit = time.time() - t1
        t1 = time.time()
        tr_rw = run_chain(data, hp, rw_spec, init, rw_iters, seed=100 + rep, chain_id=1)
        t_rw = time.time() - t1
        # pooled best model across both samplers on this replicate
        cands = [(g, lp) for tr in (tr_lit, tr_rw) for g, lp in zip(tr.gammas, tr.log_posts)]
        best = max(cands, key=lambda kv: kv[1])[0]
        h_lit = hitting_iteration(tr_lit, best)
        h_rw = hitting_iteration(tr_rw, best)
        lit_h.append(lit_iters if h_lit is None else h_lit)
        rw_h.append(rw_iters if h_rw is None else h_rw)
        succ += h_lit is not None
        pip_plain.append(tr_lit.rb.pip_rb.copy())
        # screened re-run
        keep = marginal_screen(data, budget=100)
        spec_s = replace(lit_spec, screen=tuple(int(j) for j in keep))
        tr_s = run_chain(data, hp, spec_s, init, lit_iters, seed=100 + rep, chain_id=2)
        pip_screen.append(tr_s.rb.pip_rb.copy())
        print(f"rep {rep}: best={best == tuple(range(10))} (is truth), "
              f"h_lit={h_lit} ({t_lit:.1f}s), h_rw={h_rw} ({t_rw:.1f}s)", flush=True)
    lm, rm = np.median(lit_h), np.median(rw_h)
    d_per_rep = [float(np.max(np.abs(a - b))) for a, b in zip(pip_plain, pip_screen)]
    d_pooled = float(np.max(np.abs(np.mean(pip_plain, axis=0) - np.mean(pip_screen, axis=0))))
    print(f"C4: success {succ}/{reps}, lit median {lm}, rw median {rm}, "
          f"ratio {rm/max(lm,1):.1f}")
    print(f"C4 screen: pooled max abs pip diff {d_pooled:.4f}, "
          f"per-rep max {max(d_per_rep):.4f}, median {np.median(d_per_rep):.4f}")
    print(f"C4 wall: {time.time()-t0:.0f}s", flush=True)


def crit5(reps=5, lit_iters=2000, rw_iters=200000):
    t0 = time.time()
    lit_spec = preset("lit1")
    rw_spec = preset("rw")
    accs, ratios = [], []
    for rep in range(reps):
        spec = SyntheticSpec(n=1000, p=5000, design="block", block_d=20,
                             beta_mode="random", s_star=100, sigma_beta=0.3,
                             seed=700 + rep)
        data, beta, gstar = make_dataset(spec)
        hp = Hyperparams.default(data.p, kappa0=1.0, kappa1=0.5)
        t1 = time.time()
        init = stepwise_init(data, hp)
        w_init = time.time() - t1
        t1 = time.time()
        tr_lit = run_chain(data, hp, lit_spec, init, lit_iters, seed=700 + rep, chain_id=0)
        w_lit = time.time() - t1
        t1 = time.time()
        tr_rw = run_chain(data, hp, rw_spec, init, rw_iters, seed=700 + rep, chain_id=1)
        w_rw = time.time() - t1
        acc = tr_lit.acceptance_rate()
        t1 = time.time()
        e_lit = ess_autocorr(replay_t2(tr_lit, data, hp, seed=1)) / w_lit
        e_rw = ess_autocorr(replay_t2(tr_rw, data, hp, seed=2)) / w_rw
        w_replay = time.time() - t1
        accs.append(acc)
        ratios.append(e_lit / e_rw)
        print(f"rep {rep}: |init|={len(init)} ({w_init:.1f}s), acc={acc:.3f}, "
              f"rw_acc={tr_rw.acceptance_rate():.3f}, "
              f"lit {w_lit:.1f}s ess/s {e_lit:.2f}, rw {w_rw:.1f}s ess/s {e_rw:.2f}, "
              f"ratio {e_lit/e_rw:.2f} (replay {w_replay:.0f}s)", flush=True)
    print(f"C5: acceptance range [{min(accs):.3f}, {max(accs):.3f}], "
          f"ess ratio min {min(ratios):.2f} median {np.median(ratios):.2f}")
    print(f"C5 wall: {time.time()-t0:.0f}s", flush=True)


def crit6b(iters=2000):
    # per-iteration estimator MSE(beta_rb(gamma_k)) = ||beta_rb - beta*||^2 / p;
    # should flatten near its final value within ~100 iterations from a random
    # size-10 start
    t0 = time.time()
    spec = SyntheticSpec(n=500, p=1000, design="independent", snr=3.0,
                         beta_mode="fixed10", seed=42)
    data, beta, gstar = make_dataset(spec)
    hp = Hyperparams.default(data.p, s0=20)
    init = random_init(data.p, 10, seed=42)
    tr = run_chain(data, hp, preset("lit1"), init, iters, seed=9, chain_id=0)
    cache = {}
    mses = np.empty(len(tr.gammas))
    for i, g in enumerate(tr.gammas):
        v = cache.get(g)
        if v is None:
            st = make_state(data, hp, g)
            _, brb = rb_point(st, data, hp)
            v = float(np.sum((brb - beta) ** 2)) / data.p
            cache[g] = v
        mses[i] = v
    final = mses[-1]
    tail_mean = float(np.mean(mses[-200:]))
    print(f"C6b instantaneous trajectory (init {init[:4]}..., {len(cache)} distinct):")
    for k in (1, 5, 10, 20, 30, 50, 80, 100, 150, 200, 500, 1999):
        idx = min(k, len(mses) - 1)
        rel = abs(mses[idx] - final) / final
        print(f"  it {tr.iters[idx]}: mse {mses[idx]:.6f} rel-to-final {rel:.3f}")
    print(f"C6b final {final:.6f} tail-mean {tail_mean:.6f} "
          f"rel100 {abs(mses[min(100, len(mses)-1)] - final)/final:.4f}")
    print(f"C6b wall: {time.time()-t0:.0f}s", flush=True)


if __name__ == "__main__":
    import sys
    which = sys.argv[1:] or ["crit6b", "crit5", "crit4"]
    for name in which:
        globals()[name]()
