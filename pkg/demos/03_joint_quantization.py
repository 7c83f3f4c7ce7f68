#!/usr/bin/env python3
"""
Folding quantization into the pruning sweep
===========================================

With quant_bits set, every surviving weight is rounded onto a per-row
4-bit grid *inside* the compensation sweep, so later columns absorb the
rounding error of earlier ones.  The demo compares that joint pass with
the obvious alternative -- prune first, then round the survivors onto
the same grids -- and with plain round-to-nearest when nothing is
pruned at all.
"""
import numpy as np

from obsprune import (
    PruneConfig,
    build_hessian,
    factorize,
    fit_grid,
    layer_error,
    prune_layer,
    quantize_with_grid,
    rtn_quantize,
)

rng = np.random.default_rng(21)

d_row, d_col, n = 16, 32, 512
mixer = rng.standard_normal((d_col, d_col)) / np.sqrt(d_col)
X = mixer @ rng.standard_normal((d_col, n))
W = rng.standard_normal((d_row, d_col))
state = factorize(build_hessian(X, damp_frac=0.01))

# joint pass: 50% density and 4-bit rows in one sweep
cfg = PruneConfig(sparsity=0.5, quant_bits=4)
joint = prune_layer(W, state, cfg)

# the grids are fitted on the original dense weights, once per row
grid = fit_grid(W, bits=4)
print("grid scales, first 4 rows:", np.round(grid.scale[:4], 4))

# every kept weight lands exactly on its row's grid (re-rounding is a no-op)
on_grid = quantize_with_grid(joint.weights, grid)
on_grid[joint.mask == 0] = 0.0
print("kept weights on-grid:", bool(np.array_equal(on_grid, joint.weights)))

# sequential composition: prune with compensation, then round onto the
# same grids -- the rounding error goes uncorrected
pruned = prune_layer(W, state, PruneConfig(sparsity=0.5))
seq = quantize_with_grid(pruned.weights, grid)
seq[pruned.mask == 0] = 0.0

e_joint = layer_error(W, joint.weights, X)
e_seq = layer_error(W, seq, X)
print("joint prune+quantize error: %.6e" % e_joint)
print("prune-then-round error:     %.6e  (%.3fx)" % (e_seq, e_seq / e_joint))

# quantization only (keep everything): the sweep still beats plain
# round-to-nearest because rounding error is pushed onto later columns
qonly = prune_layer(W, state, PruneConfig(sparsity=0.0, quant_bits=4))
plain = rtn_quantize(W, bits=4)
print("4-bit sweep error:          %.6e" % layer_error(W, qonly.weights, X))
print("4-bit round-to-nearest:     %.6e" % layer_error(W, plain, X))
