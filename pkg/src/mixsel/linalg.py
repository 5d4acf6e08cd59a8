"""Incremental Cholesky factors for regression model fits.

A fit for a column set gamma keeps the lower factor L of the Gram block
X_gamma^T X_gamma, the transformed cross product qty = L^{-1} X_gamma^T y,
and the residual sum of squares rss = y^T y - ||qty||^2. Adding a column
appends one row to L in O(|gamma|^2 + n) (O(|gamma|^2) with a cached Gram);
removing one re-triangularizes with plane rotations in O(|gamma|^2). Fits
are immutable: every operation returns a new fit and never mutates arrays
in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .data import RegressionData
from .errors import CollinearColumn, IllegalMove, RankDeficient

# Relative pivot tolerance: a pivot d satisfies d^2 > PIVOT_RTOL * ||X_j||^2,
# i.e. the part of X_j orthogonal to the current span must retain at least
# 1e-10 of its squared norm.
PIVOT_RTOL = 1e-10


@dataclass(frozen=True)
class ModelFit:
    """Immutable Cholesky state for one model.

    columns are kept in insertion order, which is the row order of factor,
    xty and qty. rss is maintained incrementally and clamped at zero.
    """

    columns: Tuple[int, ...]
    factor: np.ndarray
    xty: np.ndarray
    qty: np.ndarray
    rss: float
    yty: float

    @property
    def size(self) -> int:
        return len(self.columns)


def empty_fit(data: RegressionData) -> ModelFit:
    return ModelFit(
        columns=(),
        factor=np.zeros((0, 0)),
        xty=np.zeros(0),
        qty=np.zeros(0),
        rss=float(data.y @ data.y),
        yty=float(data.y @ data.y),
    )


def fit_from_scratch(data: RegressionData, gamma) -> ModelFit:
    """Factor the Gram block for ``gamma`` directly.

    Raises RankDeficient when the block is not numerically positive
    definite at the relative pivot tolerance.
    """
    cols = tuple(int(j) for j in gamma)
    if len(set(cols)) != len(cols):
        raise IllegalMove(f"duplicate columns in {cols}")
    if not cols:
        return empty_fit(data)
    idx = np.asarray(cols, dtype=np.intp)
    if data.gram is not None:
        g = data.gram[np.ix_(idx, idx)]
    else:
        sub = data.x[:, idx]
        g = sub.T @ sub
    try:
        factor = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient(f"columns {cols} are rank deficient") from exc
    piv2 = np.diag(factor) ** 2
    if np.any(piv2 <= PIVOT_RTOL * data.col_norms2[idx]):
        raise RankDeficient(f"pivot below tolerance for columns {cols}")
    xty = data.xty[idx].copy()
    qty = solve_triangular(factor, xty, lower=True)
    rss = max(float(data.y @ data.y - qty @ qty), 0.0)
    return ModelFit(columns=cols, factor=factor, xty=xty, qty=qty,
                    rss=rss, yty=float(data.y @ data.y))


def chol_extend(fit: ModelFit, data: RegressionData, j: int) -> ModelFit:
    """Append column j to the fit.

    Raises CollinearColumn when X_j is numerically in the span of the
    current columns.
    """
    j = int(j)
    if j in fit.columns:
        raise IllegalMove(f"column {j} already in model")
    m = fit.size
    norm2 = float(data.col_norms2[j])
    if m == 0:
        d2 = norm2
        w = np.zeros(0)
        t_num = float(data.xty[j])
    else:
        s = data.cross(fit.columns, j)
        w = solve_triangular(fit.factor, s, lower=True)
        d2 = norm2 - float(w @ w)
        t_num = float(data.xty[j]) - float(w @ fit.qty)
    if d2 <= PIVOT_RTOL * norm2:
        raise CollinearColumn(f"column {j} collinear with {fit.columns}")
    d = np.sqrt(d2)
    t = t_num / d
    factor = np.zeros((m + 1, m + 1))
    factor[:m, :m] = fit.factor
    factor[m, :m] = w
    factor[m, m] = d
    return ModelFit(
        columns=fit.columns + (j,),
        factor=factor,
        xty=np.append(fit.xty, data.xty[j]),
        qty=np.append(fit.qty, t),
        rss=max(fit.rss - t * t, 0.0),
        yty=fit.yty,
    )


def chol_drop(fit: ModelFit, data: RegressionData, position: int) -> ModelFit:
    """Remove the column at ``position`` (an index into fit.columns).

    Deleting row ``position`` of L leaves a lower-Hessenberg band in the
    trailing block; plane rotations applied to columns restore triangular
    form without touching the Gram matrix.
    """
    m = fit.size
    if not (0 <= position < m):
        raise IllegalMove(f"position {position} out of range for size {m}")
    if m == 1:
        return empty_fit(data)
    b = np.delete(fit.factor, position, axis=0)
    for c in range(position, m - 1):
        a, bb = b[c, c], b[c, c + 1]
        r = np.hypot(a, bb)
        cos, sin = a / r, bb / r
        left = cos * b[:, c] + sin * b[:, c + 1]
        right = -sin * b[:, c] + cos * b[:, c + 1]
        b[:, c], b[:, c + 1] = left, right
    factor = np.ascontiguousarray(b[:, : m - 1])
    xty = np.delete(fit.xty, position)
    qty = solve_triangular(factor, xty, lower=True)
    rss = max(float(fit.yty - qty @ qty), 0.0)
    return ModelFit(
        columns=fit.columns[:position] + fit.columns[position + 1:],
        factor=factor,
        xty=xty,
        qty=qty,
        rss=rss,
        yty=fit.yty,
    )


def extend_scan(fit: ModelFit, data: RegressionData,
                candidates: Optional[np.ndarray] = None):
    """Pivots and residuals for adding each candidate column in one pass.

    Returns (cand, d, t, rss_new, valid): candidate indices, the new
    Cholesky pivot, the new entry of qty, the residual sum of squares after
    the addition, and a mask that is False where the candidate is collinear
    (members of the current model are reported invalid as well). One
    triangular solve against the whole candidate block does the work, so
    the cost is O(|gamma|^2 |cand|) plus the cross products.
    """
    if candidates is None:
        cand = np.arange(data.p, dtype=np.intp)
    else:
        cand = np.asarray(candidates, dtype=np.intp)
    m = fit.size
    norms2 = data.col_norms2[cand]
    if m == 0:
        d2 = norms2.copy()
        t_num = data.xty[cand].copy()
    else:
        idx = np.asarray(fit.columns, dtype=np.intp)
        if data.gram is not None:
            s = data.gram[np.ix_(idx, cand)]
        else:
            s = data.x[:, idx].T @ data.x[:, cand]
        w = solve_triangular(fit.factor, s, lower=True)
        d2 = norms2 - np.einsum("ij,ij->j", w, w)
        t_num = data.xty[cand] - w.T @ fit.qty
    valid = d2 > PIVOT_RTOL * norms2
    if m:
        member = np.isin(cand, fit.columns)
        valid &= ~member
    d = np.sqrt(np.where(valid, d2, 1.0))
    t = np.where(valid, t_num / d, 0.0)
    rss_new = np.maximum(fit.rss - t * t, 0.0)
    return cand, d, t, rss_new, valid


def drop_scan(fit: ModelFit, data: RegressionData):
    """Residuals after removing each column of the fit, plus coefficients.

    Returns (beta_ls, rss_new): the least-squares coefficients on the
    current columns (insertion order) and, per position, the residual sum
    of squares of the model without that column. Uses the standard
    leave-one-out identity rss_drop = rss + beta_k^2 / (G^{-1})_kk.
    """
    m = fit.size
    if m == 0:
        return np.zeros(0), np.zeros(0)
    beta = solve_triangular(fit.factor, fit.qty, lower=True, trans="T")
    linv = solve_triangular(fit.factor, np.eye(m), lower=True)
    ginv_diag = np.einsum("ij,ij->j", linv, linv)
    rss_new = fit.rss + beta * beta / ginv_diag
    return beta, rss_new
