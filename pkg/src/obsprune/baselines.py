"""Magnitude-pruning baselines: drop the smallest weights, compensate nothing.

Kept weights pass through unchanged, which is exactly what makes these
useful as the control arm in comparisons — any error improvement the main
solver shows over them is attributable to mask quality and reconstruction.
`row_losses` carries the identity-Hessian surrogate (sum of squared pruned
weights per row), since no curvature information is involved.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import ValidationError
from .solver import MaskedLayerResult

SCOPES = ("layer", "per_row", "per_block")


def _keep_topk_flat(absW, k, nr, nc):
    rows, cols = np.indices((nr, nc))
    order = np.lexsort((rows.ravel(), cols.ravel(), -absW.ravel()))
    mask = np.zeros(nr * nc, dtype=bool)
    mask[order[:k]] = True
    return mask.reshape(nr, nc)


def magnitude_prune(
    W: np.ndarray, p: float, scope: str = "layer", block_size: int = 128
) -> MaskedLayerResult:
    """Keep the floor((1-p) * count) largest-|w| entries per scope unit.

    scope "layer" budgets over the whole matrix, "per_row" over each row,
    "per_block" over each block_size-wide column block (the same budgeting
    the main solver uses). Ties prefer lower column, then lower row index.
    """
    t0 = time.perf_counter()
    W = np.asarray(W)
    if W.ndim != 2:
        raise ValidationError(f"weights must be 2-D, got ndim={W.ndim}")
    if not (0.0 < p < 1.0):
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    if scope not in SCOPES:
        raise ValidationError(f"scope must be one of {SCOPES}, got {scope!r}")
    nr, nc = W.shape
    absW = np.abs(W.astype(np.float64, copy=False))
    if scope == "layer":
        mask = _keep_topk_flat(absW, int(np.floor((1.0 - p) * nr * nc)), nr, nc)
    elif scope == "per_row":
        k = int(np.floor((1.0 - p) * nc))
        mask = np.zeros((nr, nc), dtype=bool)
        for r in range(nr):
            order = np.lexsort((np.arange(nc), -absW[r]))
            mask[r, order[:k]] = True
    else:
        mask = np.zeros((nr, nc), dtype=bool)
        for b in range(0, nc, block_size):
            e = min(b + block_size, nc)
            k = int(np.floor((1.0 - p) * nr * (e - b)))
            mask[:, b:e] = _keep_topk_flat(absW[:, b:e], k, nr, e - b)
    pruned = np.where(mask, W, np.zeros((), dtype=W.dtype))
    losses = np.sum(np.where(mask, 0.0, absW) ** 2, axis=1)
    return MaskedLayerResult(
        weights=pruned,
        mask=mask.astype(np.uint8),
        row_losses=losses,
        elapsed=time.perf_counter() - t0,
    )


def magnitude_prune_nm(W: np.ndarray, n: int, m: int) -> MaskedLayerResult:
    """n-of-m magnitude pruning: in every consecutive m-wide group of each
    row, zero the n smallest-|w| entries (ties prune lower columns first)."""
    t0 = time.perf_counter()
    W = np.asarray(W)
    if W.ndim != 2:
        raise ValidationError(f"weights must be 2-D, got ndim={W.ndim}")
    if not (0 < n < m):
        raise ValidationError(f"need 0 < n < m, got n={n}, m={m}")
    nr, nc = W.shape
    if nc % m != 0:
        raise ValidationError(f"column count {nc} is not divisible by group size {m}")
    absW = np.abs(W.astype(np.float64, copy=False)).reshape(nr, nc // m, m)
    prune_idx = np.argsort(absW, axis=2, kind="stable")[:, :, :n]
    mask = np.ones((nr, nc // m, m), dtype=bool)
    np.put_along_axis(mask, prune_idx, False, axis=2)
    mask = mask.reshape(nr, nc)
    pruned = np.where(mask, W, np.zeros((), dtype=W.dtype))
    losses = np.sum(np.where(mask, 0.0, np.abs(W.astype(np.float64))) ** 2, axis=1)
    return MaskedLayerResult(
        weights=pruned,
        mask=mask.astype(np.uint8),
        row_losses=losses,
        elapsed=time.perf_counter() - t0,
    )
