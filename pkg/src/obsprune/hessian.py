"""Curvature machinery for layer-wise reconstruction.

The per-row quadratic loss of approximating a layer's outputs on
calibration inputs X has Hessian H = X X^T (+ lambda*I for stability).
Removing a feature from consideration corresponds to deleting H's leading
row/column within the current index subset; the whole sequence of trailing
inverses is available in two equivalent forms:

* explicitly, one Gaussian-elimination step at a time (`eliminate_leading`);
* implicitly, through the upper-triangular factor T with H^-1 = T^T T
  (`factorize`), whose row j encodes the inverse of H[j:, j:].

All arithmetic is float64 regardless of input dtype, and BLAS thread pools
are pinned while accumulating so results are identical across machines with
different thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from .errors import DegenerateInputError, FactorizationError, SingularMatrixError, ValidationError


@dataclass(frozen=True)
class HessianState:
    """Dampened Gram matrix of one layer's calibration inputs.

    `chol_inv` is None until `factorize` runs; afterwards it holds the
    upper-triangular T with H^-1 = T^T @ T and strictly positive diagonal.
    """

    dim: int
    H: np.ndarray
    lam: float
    chol_inv: np.ndarray | None = None


def build_hessian(X: np.ndarray, damp_frac: float = 0.01) -> HessianState:
    """Accumulate H = X X^T + lambda*I from calibration activations.

    Parameters
    ----------
    X : ndarray, shape (d_col, n)
        Calibration activations, one column per sample.
    damp_frac : float
        lambda is this fraction of the mean diagonal of X X^T, so the
        amount of dampening is invariant to the scale of the data.
    """
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValidationError(f"calibration must be 2-D with >= 1 sample, got shape {X.shape}")
    if damp_frac < 0:
        raise ValidationError(f"damp_frac must be >= 0, got {damp_frac}")
    X64 = X.astype(np.float64, copy=False)
    with threadpool_limits(limits=1):
        G = X64 @ X64.T
    G = 0.5 * (G + G.T)
    mean_diag = float(np.trace(G)) / G.shape[0]
    if mean_diag <= 0.0:
        raise DegenerateInputError("calibration data is all-zero (mean Hessian diagonal is 0)")
    lam = damp_frac * mean_diag
    H = G + lam * np.eye(G.shape[0])
    return HessianState(dim=G.shape[0], H=H, lam=lam, chol_inv=None)


def eliminate_leading(B: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """One Gaussian-elimination step on an inverse matrix.

    If B is the inverse of H restricted to an index subset U, the result is
    the inverse of H restricted to U minus its first element:

        (B - B[:,0] B[0,:] / B[0,0])[1:, 1:]
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 2:
        raise ValidationError(f"need a square matrix of size >= 2, got shape {B.shape}")
    pivot = B[0, 0]
    if not np.isfinite(pivot) or pivot <= tol:
        raise SingularMatrixError(f"leading diagonal entry {pivot} is not safely positive")
    return B[1:, 1:] - np.outer(B[1:, 0], B[0, 1:]) / pivot


def factorize(state: HessianState) -> HessianState:
    """Compute the upper-triangular factor T with H^-1 = T^T @ T.

    The essential property, consumed by the solver and asserted by tests:
    for every j, the trailing block T[j:, j:] satisfies
    (H[j:, j:])^-1 = T[j:, j:]^T @ T[j:, j:], hence T[j,j]^2 is the leading
    entry of (H[j:, j:])^-1 and T[j, j:]/T[j,j] is its first row, normalized.
    """
    if state.chol_inv is not None:
        return state
    H = state.H
    with threadpool_limits(limits=1):
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                "Hessian is not positive definite; increase damp_frac"
            ) from exc
        Hinv = scipy.linalg.cho_solve((L, True), np.eye(state.dim))
        Hinv = 0.5 * (Hinv + Hinv.T)
        try:
            T = np.linalg.cholesky(Hinv).T
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                "inverse Hessian lost positive definiteness; increase damp_frac"
            ) from exc
    return replace(state, chol_inv=np.ascontiguousarray(T))
