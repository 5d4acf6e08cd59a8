import numpy as np
import math
from mixsel import data as datamod, posterior, proposals, oracle

rng = np.random.default_rng(7)
n, p, s0 = 60, 7, 3
spec_data = datamod.SyntheticSpec(n=n, p=p, s_star=2, snr=4.0, design="independent", beta_mode="random", sigma_beta=2.0,
                                  seed=11)
ds, beta_star, gamma_star_true = datamod.make_dataset(spec_data)
hp = posterior.Hyperparams.default(p, kappa0=2.0, kappa1=1.5, s0=s0)

names = ["rw", "symmetric-rw", "lit1", "lit2", "lb1", "lb2", "theory-lit"]
for name in names:
    spec = proposals.preset(name, p=p, s0=s0)
    ch = oracle.exact_chain(ds, hp, spec)
    K = ch.kernel
    rows = np.abs(K.sum(axis=1) - 1.0).max()
    flows = ch.pi[:, None] * K
    rev = np.abs(flows - flows.T).max()
    evals = np.linalg.eigvalsh(oracle.lazy_wrap(K) * 0 + 0.5 * (K + K.T)) if False else None
    # spectrum of lazy kernel via similarity transform (reversible)
    lz = oracle.lazy_wrap(K)
    d = np.sqrt(ch.pi)
    sym = (d[:, None] * lz) / d[None, :]
    spec_min = np.linalg.eigvalsh(0.5 * (sym + sym.T)).min()
    print(f"{name:13s} states={ch.n_states} rowsum_err={rows:.2e} rev_err={rev:.2e} lazy_min_eig={spec_min:+.3e}")
    assert rows < 1e-12, name
    assert rev < 1e-14, name
    assert spec_min >= -1e-10, name

# stationary distribution check: pi K = pi
spec = proposals.preset("lit1")
ch = oracle.exact_chain(ds, hp, spec)
err = np.abs(ch.pi @ ch.kernel - ch.pi).max()
print("stationarity err:", err)
assert err < 1e-14

# tv curve and mixing time
chl = oracle.exact_chain(ds, hp, proposals.preset("theory-lit", p=p, s0=s0), lazy=True)
tm = oracle.exact_mixing_time(chl)
curve = oracle.tv_curve(chl, (), 50)
print("theory-lit lazy t_mix:", tm, "tv[0:6]:", np.round(curve[:6], 4))

# condition 1
rep = oracle.condition1_constants(ds, hp)
print("cond1:", rep.gamma_star, "c0=%.3f c1=%.3f (add %.3f swap %.3f)" %
      (rep.c0_max, rep.c1_max, rep.c1_add_min, rep.c1_swap_min), rep.satisfied)

# drift + two stage on the lazy theory chain
prof = oracle.drift_ratio_profile(chl, rep.gamma_star)
print("lambda1=%.4f lambda2=%.4f" % (prof["lambda1"], prof["lambda2"]))
try:
    cs = oracle.two_stage_constants(chl, rep.gamma_star)
    print("two-stage: q=%.3e K=%.3f M=%.3f alpha=%.6f" % (cs.q, cs.K, cs.M, cs.alpha))
    out = oracle.tv_bound_check(chl, cs, horizon=2000, cond1=rep)
    print("tv bound ok:", out)
except Exception as e:
    print("two-stage failed:", type(e).__name__, e)

# frozen scalar check
rho, u, r, alpha = oracle.two_stage_alpha(q=0.1, K=1.0, lambda2=0.5, M=2.0)
print("frozen alpha:", alpha, "expect 0.982390")
assert abs(alpha - 0.982390) < 1e-5
assert abs(rho - 0.2) < 1e-12
assert abs(u - 1.0526315789) < 1e-9

# hitting gf on a hand-built 2-state chain: P = [[0.75, 0.25], [0.25, 0.75]]
K2 = np.array([[0.75, 0.25], [0.25, 0.75]])
ch2 = oracle.ExactChain(models=[(0,), (1,)], index={(0,): 0, (1,): 1},
                        states=[None, None], log_pi0=np.zeros(2),
                        pi=np.ones(2) / 2, kernel=K2, is_lazy=True,
                        data=None, hp=None, spec=None)
f = oracle.hitting_gf(ch2, [1], 0.9)
print("2-state hitting gf:", f, "expect f(0)=5/3")
assert abs(f[0] - 5.0 / 3.0) < 1e-12
tvc = oracle.tv_curve(ch2, 0, 5)
print("2-state tv:", tvc, "expect 0.5*0.5^t")
assert np.allclose(tvc, 0.5 * 0.5 ** np.arange(6))
assert oracle.exact_mixing_time(ch2) == 1

# example 1 design
d1 = oracle.example1_design(p=10, nu=0.5, n=200)
print("example1 yty:", d1.yty, "expect", (1 + 2 * 0.5) * 200)
hp1 = posterior.Hyperparams.default(10, kappa0=2.0, kappa1=1.5, s0=2)
k_nu = proposals.ProposalSpec(weight_mode="balanced", balancing="power",
                              power=0.5, joint=True, swap_mode="disabled")
lp_esc = oracle.escape_log_prob(d1, hp1, k_nu, ())
print("escape log prob from null:", lp_esc)

# split chain on the certified instance
try:
    cs2 = oracle.two_stage_constants(chl, rep.gamma_star, q_override=None)
    repd = oracle.split_chain_estimate(chl, cs2, rep.gamma_star, j=2,
                                       n_sims=500, rng=np.random.default_rng(3))
    print("split chain:", {k: (round(v, 4) if isinstance(v, float) else v)
                           for k, v in repd.items()})
except Exception as e:
    print("split chain failed:", type(e).__name__, e)
print("OK")
