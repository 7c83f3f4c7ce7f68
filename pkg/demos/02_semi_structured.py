#!/usr/bin/env python3
"""
Hardware-friendly n:m sparsity
==============================

A 2:4 pattern keeps exactly 2 weights in every contiguous group of 4
columns -- the layout accelerators can exploit.  The demo prunes the
same layer unstructured and 2:4, shows the mask really is 2-of-4
everywhere, and measures what the extra structure costs.
"""
import numpy as np

from obsprune import PruneConfig, build_hessian, factorize, layer_error, prune_layer

rng = np.random.default_rng(11)

d_row, d_col, n = 32, 64, 1024
mixer = rng.standard_normal((d_col, d_col)) / np.sqrt(d_col)
X = mixer @ rng.standard_normal((d_col, n))
W = rng.standard_normal((d_row, d_col))
state = factorize(build_hessian(X, damp_frac=0.01))

# unstructured at the matching overall density (50%)
free = prune_layer(W, state, PruneConfig(sparsity=0.5))

# 2:4 semi-structured; the mask block is pinned to the group width
patt = prune_layer(W, state, PruneConfig(pattern=(2, 4)))

# every group of four columns holds exactly two survivors, in every row
groups = patt.mask.reshape(d_row, d_col // 4, 4)
per_group = groups.sum(axis=2)
print("2:4 groups with exactly 2 kept: %d / %d"
      % (int((per_group == 2).sum()), per_group.size))

e_free = layer_error(W, free.weights, X)
e_patt = layer_error(W, patt.weights, X)
print("unstructured 50%% error: %.6e" % e_free)
print("2:4 pattern error:      %.6e" % e_patt)
print("structure overhead:     %.3fx" % (e_patt / e_free))

# the same comparison at 4:8 -- a looser pattern recovers part of the gap
p48 = prune_layer(W, state, PruneConfig(pattern=(4, 8)))
print("4:8 pattern error:      %.6e  (%.3fx unstructured)"
      % (layer_error(W, p48.weights, X),
         layer_error(W, p48.weights, X) / e_free))
