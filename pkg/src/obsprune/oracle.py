"""Exact reference solutions for masked row reconstruction.

These are the closed-form answers the fast solver is measured against:
given a fixed mask, the best possible row supported on it has a direct
least-squares solution, and the same optimum is reachable by removing
pruned weights one at a time with full compensating updates. Everything
here is O(d^3) per row and exists for tests and small-instance reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError, ValidationError


@dataclass
class RowProblem:
    """One row's reconstruction problem: weights, curvature, and keep-mask.

    H is whatever quadratic the caller wants optimized — pass the dampened
    matrix to share the solver's objective, or the raw Gram matrix for the
    undampened optimum.
    """

    w: np.ndarray
    H: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        self.H = np.asarray(self.H, dtype=np.float64)
        self.mask = np.asarray(self.mask).astype(bool).reshape(-1)
        d = self.w.shape[0]
        if self.mask.shape[0] != d or self.H.shape != (d, d):
            raise ValidationError(
                f"inconsistent row problem: w has {d} entries, H is {self.H.shape}, "
                f"mask has {self.mask.shape[0]}"
            )


def exact_reconstruct_row(p: RowProblem, X: np.ndarray) -> tuple[np.ndarray, float]:
    """Optimal kept-weight values for a fixed mask, plus the resulting error.

    Minimizes the quadratic (w - v) H (w - v)^T over rows v supported on the
    mask; the unique optimum is v_K = w_K + H_KK^-1 H_KP w_P where K/P are
    the kept/pruned index sets. The reported err is the plain squared output
    mismatch ||wX - vX||^2 on the given inputs (no dampening term), so it is
    comparable across different H choices.
    """
    X = np.asarray(X, dtype=np.float64)
    K = np.flatnonzero(p.mask)
    P = np.flatnonzero(~p.mask)
    w_hat = np.zeros_like(p.w)
    if K.size:
        try:
            adj = np.linalg.solve(p.H[np.ix_(K, K)], p.H[np.ix_(K, P)] @ p.w[P])
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("kept-set Hessian block is singular") from exc
        if not np.all(np.isfinite(adj)):
            raise SingularMatrixError("kept-set Hessian block is numerically singular")
        w_hat[K] = p.w[K] + adj
    diff = (p.w - w_hat) @ X
    return w_hat, float(diff @ diff)


def obs_prune_one(
    w: np.ndarray, Hinv: np.ndarray, m: int, tol: float = 1e-12
) -> tuple[np.ndarray, float]:
    """Remove weight m with the optimal compensating update to all others.

    Returns the updated row (position m exactly zero) and the loss increase
    eps = w_m^2 / [H^-1]_mm incurred by the removal.
    """
    w = np.asarray(w, dtype=np.float64)
    Hinv = np.asarray(Hinv, dtype=np.float64)
    pivot = Hinv[m, m]
    if not np.isfinite(pivot) or pivot <= tol:
        raise SingularMatrixError(f"[H^-1]_mm = {pivot} is not safely positive")
    w_new = w - (w[m] / pivot) * Hinv[:, m]
    w_new[m] = 0.0
    return w_new, float(w[m] ** 2 / pivot)


def iterative_obs(p: RowProblem, order) -> np.ndarray:
    """Prune the masked-out weights one at a time, re-inverting the Hessian
    restricted to the still-unpruned set at every step.

    `order` must enumerate exactly the complement of the mask; the result is
    order-independent and matches `exact_reconstruct_row` up to roundoff.
    """
    order = list(order)
    pruned_set = set(np.flatnonzero(~p.mask).tolist())
    if set(order) != pruned_set or len(order) != len(pruned_set):
        raise ValidationError("order must enumerate exactly the pruned indices, once each")
    alive = list(range(p.w.shape[0]))
    w = p.w.copy()
    for m in order:
        try:
            Hinv = np.linalg.inv(p.H[np.ix_(alive, alive)])
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("restricted Hessian became singular") from exc
        local = alive.index(m)
        w_local, _ = obs_prune_one(w[alive], Hinv, local)
        w[alive] = w_local
        alive.remove(m)
    w[~p.mask] = 0.0
    return w
