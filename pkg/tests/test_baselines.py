"""Magnitude-pruning baselines (no reconstruction)."""

import numpy as np
import pytest

from obsprune import ValidationError, magnitude_prune, magnitude_prune_nm


class TestMagnitude:
    def test_layer_scope_known(self):
        res = magnitude_prune(np.array([[1.0, -4.0], [2.0, -3.0]]), 0.5, scope="layer")
        np.testing.assert_array_equal(res.mask.astype(bool), [[False, True], [False, True]])
        np.testing.assert_array_equal(res.weights, [[0.0, -4.0], [0.0, -3.0]])

    def test_per_row_scope_known(self):
        res = magnitude_prune(np.array([[1.0, -4.0], [2.0, -3.0]]), 0.5, scope="per_row")
        np.testing.assert_array_equal(res.mask.astype(bool), [[False, True], [False, True]])

    def test_per_row_budgets_differ_from_layer(self):
        """One big row must not starve the other under per_row scope."""
        W = np.array([[10.0, 9.0], [0.1, 0.2]])
        layer = magnitude_prune(W, 0.5, scope="layer")
        per_row = magnitude_prune(W, 0.5, scope="per_row")
        np.testing.assert_array_equal(layer.mask.astype(bool), [[True, True], [False, False]])
        np.testing.assert_array_equal(per_row.mask.astype(bool), [[True, False], [False, True]])

    def test_matches_sort_oracle(self):
        """Layer scope vs an independent flat top-k sort, 100 matrices."""
        rng = np.random.default_rng(0)
        for trial in range(100):
            W = rng.standard_normal((16, 16))
            res = magnitude_prune(W, 0.5, scope="layer")
            k = int(np.floor(0.5 * W.size))
            top = np.argsort(-np.abs(W).ravel(), kind="stable")[:k]
            expect = np.zeros(W.size, dtype=bool)
            expect[top] = True
            np.testing.assert_array_equal(
                res.mask.astype(bool).ravel(), expect, err_msg=f"trial {trial}"
            )

    def test_per_block_counts(self):
        rng = np.random.default_rng(1)
        W = rng.standard_normal((6, 64))
        res = magnitude_prune(W, 0.3, scope="per_block", block_size=16)
        m = res.mask.astype(bool)
        for b in range(0, 64, 16):
            assert m[:, b : b + 16].sum() == int(np.floor(0.7 * 6 * 16))

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        W = rng.standard_normal((8, 12))
        once = magnitude_prune(W, 0.5, scope="layer")
        twice = magnitude_prune(once.weights, 0.5, scope="layer")
        np.testing.assert_array_equal(once.weights, twice.weights)

    def test_row_losses_are_pruned_mass(self):
        rng = np.random.default_rng(3)
        W = rng.standard_normal((5, 10))
        res = magnitude_prune(W, 0.4, scope="layer")
        np.testing.assert_allclose(
            res.row_losses, (W**2 * ~res.mask.astype(bool)).sum(axis=1), rtol=1e-12
        )

    def test_p_range_enforced(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValidationError):
                magnitude_prune(np.ones((2, 2)), bad)

    def test_unknown_scope(self):
        with pytest.raises(ValidationError):
            magnitude_prune(np.ones((2, 2)), 0.5, scope="global")


class TestMagnitudeNm:
    def test_known_groups(self):
        res = magnitude_prune_nm(np.array([[0.1, -5.0, 2.0, 0.2]]), n=2, m=4)
        np.testing.assert_array_equal(res.mask.astype(bool), [[False, True, True, False]])

    def test_tie_break(self):
        res = magnitude_prune_nm(np.full((1, 4), 1.5), n=2, m=4)
        np.testing.assert_array_equal(res.mask.astype(bool), [[False, False, True, True]])

    def test_exhaustive_group_oracle(self):
        from itertools import combinations

        rng = np.random.default_rng(4)
        for trial in range(50):
            W = rng.standard_normal((1, 4))
            res = magnitude_prune_nm(W, n=2, m=4)
            best = min(combinations(range(4), 2), key=lambda pr: (W[0, list(pr)] ** 2).sum())
            expect = np.ones(4, dtype=bool)
            expect[list(best)] = False
            np.testing.assert_array_equal(res.mask.astype(bool)[0], expect)

    def test_group_counts(self):
        rng = np.random.default_rng(5)
        res = magnitude_prune_nm(rng.standard_normal((7, 24)), n=3, m=8)
        m = res.mask.astype(bool)
        for g in range(0, 24, 8):
            np.testing.assert_array_equal((~m[:, g : g + 8]).sum(axis=1), 3)

    def test_divisibility_enforced(self):
        with pytest.raises(ValidationError):
            magnitude_prune_nm(np.ones((2, 10)), n=2, m=4)
