"""Per-row uniform quantization grids.

A grid maps reals to one of 2^bits evenly spaced levels per row. Grids are
asymmetric min-max fits: the row's minimum and maximum land exactly on the
grid (zero_point is kept real-valued precisely so this holds), and values
pushed out of range by compensating updates saturate at the extreme levels
rather than erroring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class QuantGrid:
    bits: int
    scale: np.ndarray
    zero_point: np.ndarray

    @property
    def row_count(self) -> int:
        return self.scale.shape[0]

    @property
    def levels(self) -> int:
        return 2**self.bits


def _check_bits(bits) -> int:
    if not isinstance(bits, (int, np.integer)) or not (2 <= int(bits) <= 8):
        raise ValidationError(f"bits must be an integer in [2, 8], got {bits!r}")
    return int(bits)


def fit_grid(W: np.ndarray, bits: int) -> QuantGrid:
    """Fit one asymmetric min-max grid per row of W.

    scale = (max - min) / (2^bits - 1) and zero_point = -min/scale, so level
    q represents scale*(q - zero_point) and q=0 / q=2^bits-1 hit the row's
    min / max exactly. A constant row gets scale 1 and zero_point -value,
    making the constant itself representable at q=0.
    """
    bits = _check_bits(bits)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValidationError(f"expected a 2-D weight matrix, got ndim={W.ndim}")
    if not np.all(np.isfinite(W)):
        raise ValidationError("weights contain NaN or Inf")
    mn = W.min(axis=1)
    mx = W.max(axis=1)
    spread = mx > mn
    scale = np.where(spread, (mx - mn) / (2**bits - 1), 1.0)
    zero_point = np.where(spread, -mn / scale, -mn)
    return QuantGrid(bits=bits, scale=scale, zero_point=zero_point)


def quantize_value(w: float, scale: float, zero_point: float, bits: int) -> float:
    """Round a single value to the nearest level of one grid row."""
    q = np.clip(np.round(w / scale + zero_point), 0, 2**bits - 1)
    return float(scale * (q - zero_point))


def quantize_with_grid(W: np.ndarray, grid: QuantGrid) -> np.ndarray:
    """Round every entry of W to its row's grid (rows align with the grid's)."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape[0] != grid.row_count:
        raise ValidationError(
            f"grid has {grid.row_count} rows but weights have {W.shape[0]}"
        )
    s = grid.scale[:, None]
    z = grid.zero_point[:, None]
    q = np.clip(np.round(W / s + z), 0, grid.levels - 1)
    return s * (q - z)


def rtn_quantize(W: np.ndarray, bits: int, grid: QuantGrid | None = None) -> np.ndarray:
    """Round-to-nearest baseline: fit a grid on W (unless one is supplied)
    and round every weight independently, with no error compensation."""
    W = np.asarray(W)
    out = quantize_with_grid(W, grid if grid is not None else fit_grid(W, bits))
    return out.astype(W.dtype, copy=False)
