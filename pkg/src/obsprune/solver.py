"""Blocked Hessian-aware pruning with optional fused quantization.

The solver walks a layer's columns left to right in two nested granularities:

* mask blocks of B_s columns — where pruning decisions are made: scores
  w_c^2 / T[c,c]^2 rank every weight of the block (T is the factor from
  `hessian.factorize`), a density budget is applied over the whole
  d_row x B_s block (or an n-of-m rule per row group), and each row's
  selected weights are removed *jointly* with the optimal compensating
  update over every not-yet-frozen column. The update is assembled from
  rows b..e of T, so it costs one small SPD solve per row per block.
* lazy blocks of B columns — an execution-order optimization only: the
  part of each update that lands beyond the current lazy block is
  accumulated and applied in one matrix multiply when the block ends.
  Results are identical (to roundoff) for any valid B.

Once a mask block is finished its columns are frozen: pruned entries are
exactly zero, kept entries never change again. With quantization enabled,
each finished column's kept weights are additionally rounded to their
per-row grid and the rounding error is compensated into later columns in
the same sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ValidationError
from .hessian import HessianState
from .quant import QuantGrid, fit_grid

DEFAULT_LAZY_BLOCK = 128
DEFAULT_MASK_BLOCK = 128
DEFAULT_DAMP_FRAC = 0.01


@dataclass(frozen=True)
class PruneConfig:
    """Everything that determines one compression run.

    Exactly one of `sparsity` (unstructured fraction in [0, 1); 0 means
    keep everything, useful for quantization-only passes) or `pattern`
    (an (n, m) pair: n zeros in every m consecutive weights) must be set.
    `quant_bits` switches on the fused quantization sweep.
    """

    sparsity: float | None = None
    pattern: tuple[int, int] | None = None
    lazy_block: int = DEFAULT_LAZY_BLOCK
    mask_block: int = DEFAULT_MASK_BLOCK
    damp_frac: float = DEFAULT_DAMP_FRAC
    quant_bits: int | None = None
    seed: int = 0

    def validate(self, d_col: int | None = None) -> None:
        if (self.sparsity is None) == (self.pattern is None):
            raise ValidationError("set exactly one of sparsity or pattern")
        if self.sparsity is not None and not (0.0 <= self.sparsity < 1.0):
            raise ValidationError(f"sparsity must lie in [0, 1), got {self.sparsity}")
        if self.pattern is not None:
            n, m = self.pattern
            if not (isinstance(n, int) and isinstance(m, int) and 0 < n < m):
                raise ValidationError(f"pattern needs integers 0 < n < m, got {self.pattern}")
        if self.lazy_block < 1 or self.mask_block < 1:
            raise ValidationError("block sizes must be positive")
        bs = self.effective_mask_block()
        if self.lazy_block % bs != 0:
            raise ValidationError(
                f"lazy block {self.lazy_block} must be a multiple of mask block {bs}"
            )
        if self.damp_frac < 0:
            raise ValidationError(f"damp_frac must be >= 0, got {self.damp_frac}")
        if self.quant_bits is not None and not (2 <= self.quant_bits <= 8):
            raise ValidationError(f"quant_bits must be in [2, 8], got {self.quant_bits}")
        if d_col is not None and self.pattern is not None and d_col % self.pattern[1] != 0:
            raise ValidationError(
                f"column count {d_col} is not divisible by group size {self.pattern[1]}"
            )

    def effective_mask_block(self) -> int:
        """Mask blocks coincide with the m-groups in pattern mode."""
        return self.pattern[1] if self.pattern is not None else self.mask_block


@dataclass
class MaskedLayerResult:
    weights: np.ndarray
    mask: np.ndarray
    row_losses: np.ndarray
    elapsed: float


def select_block_mask(
    W_block: np.ndarray, chol_diag_block: np.ndarray, keep_fraction: float
) -> np.ndarray:
    """Keep-mask for one column block under a shared density budget.

    Scores are w^2 / diag^2; exactly floor(keep_fraction * block size) ones
    go to the largest scores anywhere in the block — the budget is shared
    across rows and columns, so saturated columns can give way to useful
    ones. Ties prefer the lower column index, then the lower row index.
    """
    W_block = np.asarray(W_block, dtype=np.float64)
    diag = np.asarray(chol_diag_block, dtype=np.float64)
    if not (0.0 <= keep_fraction <= 1.0):
        raise ValidationError(f"keep_fraction must lie in [0, 1], got {keep_fraction}")
    if np.any(diag <= 0):
        raise ValidationError("factor diagonal must be strictly positive")
    nr, nc = W_block.shape
    scores = W_block**2 / diag[None, :] ** 2
    k = int(np.floor(keep_fraction * nr * nc))
    rows, cols = np.indices((nr, nc))
    order = np.lexsort((rows.ravel(), cols.ravel(), -scores.ravel()))
    mask = np.zeros(nr * nc, dtype=bool)
    mask[order[:k]] = True
    return mask.reshape(nr, nc)


def select_nm_mask(W_group: np.ndarray, chol_diag_group: np.ndarray, n: int) -> np.ndarray:
    """Keep-mask for one m-wide group: per row, prune the n lowest-score
    weights (ties prune the lower column index)."""
    W_group = np.asarray(W_group, dtype=np.float64)
    diag = np.asarray(chol_diag_group, dtype=np.float64)
    m = W_group.shape[1]
    if not (0 < n < m):
        raise ValidationError(f"need 0 < n < m, got n={n}, m={m}")
    if np.any(diag <= 0):
        raise ValidationError("factor diagonal must be strictly positive")
    scores = W_group**2 / diag[None, :] ** 2
    prune_idx = np.argsort(scores, axis=1, kind="stable")[:, :n]
    mask = np.ones(W_group.shape, dtype=bool)
    np.put_along_axis(mask, prune_idx, False, axis=1)
    return mask


def layer_error(W: np.ndarray, W_hat: np.ndarray, X: np.ndarray) -> float:
    """Squared output mismatch ||W X - W_hat X||_F^2 in float64."""
    W = np.asarray(W, dtype=np.float64)
    W_hat = np.asarray(W_hat, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if W.shape != W_hat.shape or W.shape[1] != X.shape[0]:
        raise ValidationError(
            f"shape mismatch: W {W.shape}, W_hat {W_hat.shape}, X {X.shape}"
        )
    with threadpool_limits(limits=1):
        D = (W - W_hat) @ X
    return float(np.sum(D * D))


def _block_masks(V, diag, cfg, b, e):
    """Mask for columns [b, e) based on current values."""
    if cfg.pattern is None:
        return select_block_mask(V[:, b:e], diag[b:e], 1.0 - cfg.sparsity)
    n, m = cfg.pattern
    return select_nm_mask(V[:, b:e], diag[b:e], n)


def prune_layer(
    W: np.ndarray,
    state: HessianState,
    cfg: PruneConfig,
    snapshot_hook=None,
) -> MaskedLayerResult:
    """Compress one layer against its factorized Hessian state.

    Returns pruned (and optionally quantized) weights in the input dtype,
    the binary keep-mask, and per-row accumulated loss estimates (the exact
    quadratic loss increase of each removal step, plus squared compensated
    rounding errors when quantizing).

    `snapshot_hook(cols_done, weights, mask)`, if given, is invoked after
    each mask block with copies of the working state; the first `cols_done`
    columns never change after the call (the freezing contract).
    """
    t0 = time.perf_counter()
    W = np.asarray(W)
    if W.ndim != 2:
        raise ValidationError(f"weights must be 2-D, got ndim={W.ndim}")
    if state.chol_inv is None:
        raise ValidationError("HessianState is not factorized; call factorize() first")
    d_row, d_col = W.shape
    if state.dim != d_col:
        raise ValidationError(
            f"weights have {d_col} columns but Hessian is for {state.dim} features"
        )
    cfg.validate(d_col)

    T = state.chol_inv
    diag = np.diag(T)
    V = W.astype(np.float64, copy=True)
    mask = np.ones((d_row, d_col), dtype=bool)
    row_losses = np.zeros(d_row)
    grid: QuantGrid | None = None
    if cfg.quant_bits is not None:
        grid = fit_grid(V, cfg.quant_bits)
    bs = cfg.effective_mask_block()
    B = cfg.lazy_block

    with threadpool_limits(limits=1):
        for i in range(0, d_col, B):
            ib = min(i + B, d_col)
            E = np.zeros((d_row, ib - i))
            for b in range(i, ib, bs):
                e = min(b + bs, ib)
                mb = _block_masks(V, diag, cfg, b, e)
                mask[:, b:e] = mb
                Tblk = T[b:e, b:e]
                Bblk = Tblk.T @ Tblk
                G = np.zeros((d_row, e - b))
                for r in range(d_row):
                    P = np.flatnonzero(~mb[r])
                    if P.size == 0:
                        continue
                    vp = V[r, b + P]
                    adj = np.linalg.solve(Bblk[np.ix_(P, P)], vp)
                    G[r] = Tblk[:, P] @ adj
                    row_losses[r] += float(vp @ adj)
                V[:, b:ib] -= G @ T[b:e, b:ib]
                V[:, b:e][~mb] = 0.0
                if grid is not None:
                    for j in range(b, e):
                        keep = mb[:, j - b]
                        s = grid.scale
                        z = grid.zero_point
                        q = np.clip(np.round(V[:, j] / s + z), 0, grid.levels - 1)
                        q = s * (q - z)
                        Eq = np.where(keep, (V[:, j] - q) / T[j, j], 0.0)
                        row_losses += Eq**2
                        V[:, j] = np.where(keep, q, 0.0)
                        if j + 1 < ib:
                            V[:, j + 1 : ib] -= np.outer(Eq, T[j, j + 1 : ib])
                        G[:, j - b] += Eq
                E[:, b - i : e - i] = G
                if snapshot_hook is not None:
                    snapshot_hook(e, V.copy(), mask.copy())
            if ib < d_col:
                V[:, ib:] -= E @ T[i:ib, ib:]
    V[~mask] = 0.0
    return MaskedLayerResult(
        weights=V.astype(W.dtype, copy=False),
        mask=mask.astype(np.uint8),
        row_losses=row_losses,
        elapsed=time.perf_counter() - t0,
    )
