"""MCMC model selection for sparse linear regression, with exact
small-space certification of drift and mixing-time bounds.

The public surface is intentionally small; most workflows go through
``make_dataset`` / ``run_chain`` / ``exact_chain`` or the command line.
"""

from .data import RegressionData, SyntheticSpec, make_dataset, load_csv, marginal_screen
from .posterior import Hyperparams, ModelState, make_state, log_post_unnorm
from .proposals import ProposalSpec, preset
from .sampler import ChainTrace, run_chain, mh_step
from .estimators import RBEstimate, beta_hat, sample_beta

__version__ = "0.1.0"

__all__ = [
    "RegressionData",
    "SyntheticSpec",
    "make_dataset",
    "load_csv",
    "marginal_screen",
    "Hyperparams",
    "ModelState",
    "make_state",
    "log_post_unnorm",
    "ProposalSpec",
    "preset",
    "ChainTrace",
    "run_chain",
    "mh_step",
    "RBEstimate",
    "beta_hat",
    "sample_beta",
    "__version__",
]
