"""Data containers, synthetic designs, and delimited I/O.

Generation uses a counter-based RNG (Philox) keyed by an integer seed, so a
dataset is reproducible across platforms and independent of how many workers
touch it. All random draws here are per-dataset; chain randomness lives in
the sampler and uses its own streams.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    ParseError,
    ZeroVarianceColumn,
)

# Precompute the Gram matrix only when it fits comfortably in memory.
GRAM_CAP_DEFAULT = 20000

# Fixed signal pattern used by the benchmark generator (scaled by snr).
FIXED_BETA_PATTERN = (2.0, -3.0, 2.0, 2.0, -3.0, 3.0, -2.0, 3.0, -2.0, 3.0)

DESIGNS = ("independent", "ar1", "block")
BETA_MODES = ("fixed10", "random")


@dataclass(frozen=True)
class RegressionData:
    """Design matrix, response, and the cross products every fit needs.

    Attributes
    ----------
    x : ndarray, shape (n, p)
    y : ndarray, shape (n,)
    xty : ndarray, shape (p,)
        X^T y, precomputed once.
    col_norms2 : ndarray, shape (p,)
        Squared column norms of X.
    gram : ndarray or None
        X^T X when p is at most the cap passed to ``from_arrays``; None
        otherwise, in which case cross products are formed on demand.
    """

    x: np.ndarray
    y: np.ndarray
    xty: np.ndarray
    col_norms2: np.ndarray
    gram: Optional[np.ndarray]
    yty: float

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @staticmethod
    def from_arrays(x, y, gram_cap: int = GRAM_CAP_DEFAULT) -> "RegressionData":
        x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(y, dtype=np.float64)).reshape(-1)
        if x.ndim != 2:
            raise DimensionMismatch(f"design must be 2-d, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise DimensionMismatch(
                f"response length {y.shape[0]} != number of rows {x.shape[0]}"
            )
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ParseError("non-finite values in design or response")
        xty = x.T @ y
        col_norms2 = np.einsum("ij,ij->j", x, x)
        gram = x.T @ x if x.shape[1] <= gram_cap else None
        return RegressionData(x=x, y=y, xty=xty, col_norms2=col_norms2,
                              gram=gram, yty=float(y @ y))

    def cross(self, cols, j=None) -> np.ndarray:
        """X_cols^T X_j for one column j, or X_cols^T X for all columns."""
        idx = np.asarray(cols, dtype=np.intp)
        if self.gram is not None:
            block = self.gram[idx, :]
            return block if j is None else block[:, j]
        sub = self.x[:, idx].T
        return sub @ self.x if j is None else sub @ self.x[:, j]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset; serializes to/from a flat dict."""

    n: int
    p: int
    design: str = "independent"
    snr: float = 3.0
    beta_mode: str = "fixed10"
    s_star: int = 10
    sigma_beta: float = 0.3
    block_d: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigError(f"unknown design {self.design!r}")
        if self.beta_mode not in BETA_MODES:
            raise ConfigError(f"unknown beta_mode {self.beta_mode!r}")
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be positive")
        if self.design == "block" and self.p % self.block_d != 0:
            raise ConfigError(
                f"block design needs block_d | p, got d={self.block_d}, p={self.p}"
            )
        if self.beta_mode == "fixed10" and self.p < 10:
            raise ConfigError("fixed10 signal needs p >= 10")
        if self.beta_mode == "random" and not (0 <= self.s_star <= self.p):
            raise ConfigError("s_star out of range")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "SyntheticSpec":
        known = {f for f in SyntheticSpec.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown keys in synthetic spec: {sorted(extra)}")
        return SyntheticSpec(**d)


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    # Philox is counter-based: independent keyed streams, stable across
    # platforms, safe to generate rows in parallel.
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) + np.uint64(stream)))


def gen_design(spec: SyntheticSpec) -> np.ndarray:
    """Draw the design matrix for a synthetic recipe.

    Rows are iid MN(0, Sigma) with Sigma determined by ``spec.design``:
    identity, AR(1) with rho = e^{-1}, or block-diagonal with blocks
    Sigma_jk = e^{-|j-k|/3} of size ``spec.block_d``.
    """
    rng = _rng(spec.seed, stream=0)
    n, p = spec.n, spec.p
    z = rng.standard_normal((n, p))
    if spec.design == "independent":
        return z
    if spec.design == "ar1":
        # Stationary AR(1) recursion along columns keeps this O(np).
        rho = math.exp(-1.0)
        scale = math.sqrt(1.0 - rho * rho)
        x = np.empty_like(z)
        x[:, 0] = z[:, 0]
        for j in range(1, p):
            x[:, j] = rho * x[:, j - 1] + scale * z[:, j]
        return x
    # block design: same within-block factor for every block
    d = spec.block_d
    idx = np.arange(d)
    sigma_d = np.exp(-np.abs(idx[:, None] - idx[None, :]) / 3.0)
    ld = np.linalg.cholesky(sigma_d)
    blocks = z.reshape(n, p // d, d)
    return (blocks @ ld.T).reshape(n, p)


def gen_response(x: np.ndarray, spec: SyntheticSpec):
    """Draw (y, beta_star, gamma_star) given a realized design.

    fixed10: the first ten coefficients follow the fixed pattern scaled by
    snr * sqrt(log(p)/n). random: gamma_star is uniform over size-s_star
    subsets and the active coefficients are N(0, sigma_beta^2). Noise is
    standard normal either way.
    """
    rng = _rng(spec.seed, stream=1)
    n, p = x.shape
    if (n, p) != (spec.n, spec.p):
        raise DimensionMismatch("design shape does not match spec")
    beta = np.zeros(p)
    if spec.beta_mode == "fixed10":
        scale = spec.snr * math.sqrt(math.log(p) / n)
        beta[:10] = scale * np.asarray(FIXED_BETA_PATTERN)
        gamma_star = tuple(range(10)) if spec.snr != 0 else ()
    else:
        support = np.sort(rng.choice(p, size=spec.s_star, replace=False))
        beta[support] = spec.sigma_beta * rng.standard_normal(spec.s_star)
        gamma_star = tuple(int(j) for j in support)
    y = x @ beta + rng.standard_normal(n)
    return y, beta, gamma_star


def make_dataset(spec: SyntheticSpec, gram_cap: int = GRAM_CAP_DEFAULT):
    """Generate a full dataset; returns (RegressionData, beta_star, gamma_star)."""
    x = gen_design(spec)
    y, beta, gamma_star = gen_response(x, spec)
    return RegressionData.from_arrays(x, y, gram_cap=gram_cap), beta, gamma_star


def marginal_screen(data: RegressionData, budget: Optional[int] = None,
                    threshold: Optional[float] = None) -> np.ndarray:
    """Rank covariates by |X_j^T y| / ||X_j|| and keep the strongest.

    Exactly one of ``budget`` (keep that many) and ``threshold`` (keep all
    scoring at least this) must be given. Returns sorted indices.
    """
    if (budget is None) == (threshold is None):
        raise ConfigError("pass exactly one of budget, threshold")
    norms = np.sqrt(data.col_norms2)
    if np.any(norms == 0):
        raise ZeroVarianceColumn("zero-norm column cannot be screened")
    scores = np.abs(data.xty) / norms
    if budget is not None:
        if budget < 1:
            raise ConfigError("budget must be positive")
        budget = min(budget, data.p)
        # stable sort so ties resolve to the lower index
        order = np.argsort(-scores, kind="stable")[:budget]
        return np.sort(order)
    return np.flatnonzero(scores >= threshold)


# ---------------------------------------------------------------------------
# delimited I/O

def _meta_header(meta: dict) -> str:
    return "mixsel " + json.dumps(meta, sort_keys=True)


def save_xy(x_path, y_path, x: np.ndarray, y: np.ndarray, meta: Optional[dict] = None):
    """Write X and y as headerless CSV with a comment metadata line.

    Values are printed with 17 significant digits so a round trip is exact
    at double precision.
    """
    header = _meta_header(meta or {})
    np.savetxt(x_path, x, delimiter=",", fmt="%.17g", header=header)
    np.savetxt(y_path, np.reshape(y, (-1, 1)), delimiter=",", fmt="%.17g", header=header)


def save_truth(path, gamma_star, beta_star, spec: Optional[SyntheticSpec] = None):
    payload = {
        "gamma_star": [int(j) for j in gamma_star],
        "beta_star": [float(b) for b in np.asarray(beta_star)],
        "spec": spec.to_dict() if spec is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_truth(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read truth file {path}: {exc}") from exc


def load_csv(x_path, y_path, standardize: bool = False,
             gram_cap: int = GRAM_CAP_DEFAULT) -> RegressionData:
    """Load a dataset from delimited files.

    Parameters
    ----------
    x_path, y_path : str or Path
        X is a headerless numeric CSV with one row per observation; y is a
        single column. Lines starting with '#' are ignored.
    standardize : bool
        If True, center each column and rescale so X_j^T X_j = n. A column
        with (numerically) zero variance raises ZeroVarianceColumn.
    """
    try:
        x = np.loadtxt(x_path, delimiter=",", ndmin=2, comments="#")
        y = np.loadtxt(y_path, delimiter=",", comments="#").reshape(-1)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot parse input: {exc}") from exc
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(
            f"response has {y.shape[0]} rows, design has {x.shape[0]}"
        )
    if standardize:
        n = x.shape[0]
        x = x - x.mean(axis=0)
        norms = np.sqrt(np.einsum("ij,ij->j", x, x))
        bad = np.flatnonzero(norms <= math.sqrt(n) * 1e-12)
        if bad.size:
            raise ZeroVarianceColumn(f"constant column(s): {bad[:5].tolist()}")
        x = x * (math.sqrt(n) / norms)
    return RegressionData.from_arrays(x, y, gram_cap=gram_cap)
