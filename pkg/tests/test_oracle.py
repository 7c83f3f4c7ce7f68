"""Closed-form reference implementations: masked least-squares
reconstruction, the single-weight surgical removal step, and the
iterative removal procedure.

These functions are themselves oracles for the solver, so they get
independently re-derived here: the masked reconstruction is checked
against a normal-equations solve written inline, the removal step
against a direct quadratic evaluation, and the iterative procedure
against a hand-rolled loop that re-inverts the restricted Gram matrix
at every step.
"""

import numpy as np
import pytest

from obsprune import (
    RowProblem,
    SingularMatrixError,
    ValidationError,
    exact_reconstruct_row,
    iterative_obs,
    obs_prune_one,
)


def _row_err(w, w_hat, X):
    d = (w - w_hat) @ X
    return float(d @ d)


def _random_problem(d, n, seed, keep_frac=0.5, lam=0.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    X = A @ rng.standard_normal((d, n))
    w = rng.standard_normal(d)
    H = X @ X.T + lam * np.eye(d)
    k = max(1, int(keep_frac * d))
    keep = np.argsort(-np.abs(w), kind="stable")[:k]
    mask = np.zeros(d, dtype=bool)
    mask[keep] = True
    return RowProblem(w=w, H=H, mask=mask), X


class TestExactReconstruct:
    def test_full_mask_is_identity(self):
        p, X = _random_problem(8, 32, seed=0, keep_frac=1.0)
        p = RowProblem(w=p.w, H=p.H, mask=np.ones(8, dtype=bool))
        w_hat, err = exact_reconstruct_row(p, X)
        np.testing.assert_allclose(w_hat, p.w, atol=1e-12)
        assert err == pytest.approx(0.0, abs=1e-18)

    def test_orthonormal_inputs_no_compensation(self):
        """With X orthonormal there are no correlations: dropping index m
        just zeroes it and the error is w_m squared."""
        d = 6
        X = np.eye(d)
        w = np.arange(1.0, d + 1)
        mask = np.ones(d, dtype=bool)
        mask[3] = False
        w_hat, err = exact_reconstruct_row(RowProblem(w=w, H=X @ X.T, mask=mask), X)
        expect = w.copy()
        expect[3] = 0.0
        np.testing.assert_allclose(w_hat, expect, atol=1e-12)
        assert err == pytest.approx(w[3] ** 2)

    def test_matches_normal_equations(self):
        """Independent least-squares solve over the kept coordinates."""
        for seed in range(10):
            p, X = _random_problem(8, 32, seed=seed)
            w_hat, err = exact_reconstruct_row(p, X)
            K = np.flatnonzero(p.mask)
            XK = X[K]
            u = np.linalg.solve(XK @ XK.T, XK @ X.T @ p.w)
            expect = np.zeros(8)
            expect[K] = u
            np.testing.assert_allclose(w_hat, expect, atol=1e-10)
            assert err == pytest.approx(_row_err(p.w, expect, X), rel=1e-9, abs=1e-12)

    def test_zero_outside_mask(self):
        p, X = _random_problem(12, 48, seed=3)
        w_hat, _ = exact_reconstruct_row(p, X)
        np.testing.assert_array_equal(w_hat[~p.mask], 0.0)

    def test_empty_mask_gives_zeros(self):
        p, X = _random_problem(5, 20, seed=4)
        p = RowProblem(w=p.w, H=p.H, mask=np.zeros(5, dtype=bool))
        w_hat, err = exact_reconstruct_row(p, X)
        np.testing.assert_array_equal(w_hat, np.zeros(5))
        assert err == pytest.approx(_row_err(p.w, w_hat, X))

    def test_optimality_under_perturbation(self):
        """No row supported on the mask beats the closed form."""
        p, X = _random_problem(10, 40, seed=5)
        w_hat, err = exact_reconstruct_row(p, X)
        rng = np.random.default_rng(99)
        for _ in range(25):
            delta = np.zeros(10)
            delta[p.mask] = 1e-3 * rng.standard_normal(int(p.mask.sum()))
            assert _row_err(p.w, w_hat + delta, X) > err

    def test_singular_kept_block(self):
        """Duplicated kept features with no dampening are singular."""
        X = np.zeros((4, 8))
        X[0] = X[1] = np.arange(8.0)
        X[2] = 1.0
        mask = np.array([True, True, True, False])
        p = RowProblem(w=np.ones(4), H=X @ X.T, mask=mask)
        with pytest.raises(SingularMatrixError):
            exact_reconstruct_row(p, X)

    def test_mask_length_validated(self):
        with pytest.raises(ValidationError):
            RowProblem(w=np.ones(3), H=np.eye(3), mask=np.ones(4, dtype=bool))


class TestPruneOne:
    def test_identity_inverse_pure_zeroing(self):
        w_new, eps = obs_prune_one(np.array([3.0, 4.0]), np.eye(2), 0)
        np.testing.assert_array_equal(w_new, [0.0, 4.0])
        assert eps == pytest.approx(9.0)

    def test_zero_weight_is_free(self):
        w = np.array([0.0, 2.0, -1.0])
        Hinv = np.linalg.inv(np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 1.5]]))
        w_new, eps = obs_prune_one(w, Hinv, 0)
        np.testing.assert_allclose(w_new, w, atol=1e-15)
        assert eps == pytest.approx(0.0, abs=1e-18)

    def test_pruned_entry_exactly_zero(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((6, 24))
        w_new, _ = obs_prune_one(rng.standard_normal(6), np.linalg.inv(X @ X.T), 4)
        assert w_new[4] == 0.0

    def test_eps_matches_direct_error_increase(self):
        """The reported loss is the actual quadratic error of the update."""
        for seed in range(10):
            rng = np.random.default_rng((60, seed))
            X = rng.standard_normal((6, 24))
            w = rng.standard_normal(6)
            m = int(rng.integers(0, 6))
            w_new, eps = obs_prune_one(w, np.linalg.inv(X @ X.T), m)
            assert eps == pytest.approx(_row_err(w, w_new, X), rel=1e-10, abs=1e-12)

    def test_nonpositive_pivot_rejected(self):
        Hinv = np.eye(3)
        Hinv[1, 1] = 0.0
        with pytest.raises(SingularMatrixError):
            obs_prune_one(np.ones(3), Hinv, 1)


def _manual_iterative(w, H, X, order):
    """Re-derivation of the iterative procedure: keep an explicit active
    set, re-invert the restricted Gram matrix, prune, repeat.  Returns the
    final row and the per-step losses."""
    active = list(range(len(w)))
    cur = w.copy()
    steps = []
    for target in order:
        local = active.index(target)
        Hinv = np.linalg.inv(H[np.ix_(active, active)])
        sub, eps = obs_prune_one(cur[active], Hinv, local)
        cur[active] = sub
        steps.append(eps)
        active.pop(local)
    return cur, steps


class TestIterative:
    def test_empty_order_is_identity(self):
        p, _ = _random_problem(6, 24, seed=7, keep_frac=1.0)
        p = RowProblem(w=p.w, H=p.H, mask=np.ones(6, dtype=bool))
        np.testing.assert_array_equal(iterative_obs(p, []), p.w)

    def test_single_step_equals_prune_one(self):
        p, X = _random_problem(6, 24, seed=8)
        mask = np.ones(6, dtype=bool)
        mask[2] = False
        p = RowProblem(w=p.w, H=p.H, mask=mask)
        got = iterative_obs(p, [2])
        expect, _ = obs_prune_one(p.w, np.linalg.inv(p.H), 2)
        np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_matches_closed_form(self):
        for seed in range(10):
            p, X = _random_problem(8, 32, seed=(80, seed))
            order = list(np.flatnonzero(~p.mask))
            np.random.default_rng(seed).shuffle(order)
            got = iterative_obs(p, order)
            expect, _ = exact_reconstruct_row(p, X)
            np.testing.assert_allclose(got, expect, rtol=1e-8, atol=1e-10)

    def test_order_invariance(self):
        p, _ = _random_problem(8, 32, seed=9)
        pruned = list(np.flatnonzero(~p.mask))
        a = iterative_obs(p, pruned)
        b = iterative_obs(p, pruned[::-1])
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-10)

    def test_loss_additivity(self):
        """Summed per-step losses equal the final quadratic error."""
        for seed in range(5):
            rng = np.random.default_rng((90, seed))
            X = rng.standard_normal((8, 32))
            w = rng.standard_normal(8)
            order = [5, 1, 6, 0]
            w_hat, steps = _manual_iterative(w, X @ X.T, X, order)
            total = _row_err(w, w_hat, X)
            assert total == pytest.approx(sum(steps), rel=1e-8, abs=1e-10)

    def test_order_must_match_mask_complement(self):
        p, _ = _random_problem(6, 24, seed=10)
        with pytest.raises(ValidationError):
            iterative_obs(p, [0])  # not the full complement
