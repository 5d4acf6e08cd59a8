"""Seed search for instances certifying c0 >= 2 and c1 >= 4."""
import time
import numpy as np
from mixsel import data as datamod, posterior, proposals, oracle
from mixsel.errors import PreconditionViolated

found = []
t0 = time.time()
for p in (6, 7, 8):
    for n in (60, 80, 100):
        for sb in (2.5, 3.5):
            for seed in range(40):
                ds_spec = datamod.SyntheticSpec(
                    n=n, p=p, design="independent", beta_mode="random",
                    s_star=2, sigma_beta=sb, seed=seed)
                ds, bstar, gstar = datamod.make_dataset(ds_spec)
                hp = posterior.Hyperparams.default(p, kappa0=2.0, kappa1=1.5, s0=3)
                rep = oracle.condition1_constants(ds, hp)
                if not (rep.c0_max >= 2.0 and rep.c1_max >= 4.0):
                    continue
                spec = proposals.preset("theory-lit", p=p, s0=3)
                ch = oracle.exact_chain(ds, hp, spec, lazy=True)
                try:
                    cs = oracle.two_stage_constants(ch, rep.gamma_star)
                except PreconditionViolated as e:
                    print(f"p={p} n={n} sb={sb} seed={seed}: cond1 ok "
                          f"(c0={rep.c0_max:.2f} c1={rep.c1_max:.2f}) but {e}")
                    continue
                tm = oracle.exact_mixing_time(ch)
                found.append((p, n, sb, seed, rep.c0_max, rep.c1_max,
                              cs.alpha, cs.q, tm))
                print(f"FOUND p={p} n={n} sb={sb} seed={seed} "
                      f"c0={rep.c0_max:.2f} c1={rep.c1_max:.2f} "
                      f"alpha={cs.alpha:.6f} q={cs.q:.2e} tmix={tm} "
                      f"gstar={rep.gamma_star}")
                break   # one seed per (p, n, sb) cell is plenty
            if len(found) >= 8:
                break
        if len(found) >= 8:
            break
    if len(found) >= 8:
        break

print(f"\n{len(found)} instances in {time.time()-t0:.1f}s")
for f in found:
    print(f)
