"""Bregman distances and the refinement prediction bound."""

import numpy as np
import pytest

from spcsim.verification import (BoundCheck, check_expected_bound,
                                 check_refinement_bound, expected_bound_csv,
                                 sign_mismatch_bregman, symmetric_bregman_l1)


class TestSymmetricBregman:
    def test_hand_value(self):
        # <p_C - p_R, x_C - x_R> with all entries nonzero
        x_C = np.array([2.0, -1.0])
        x_R = np.array([0.5, 1.0])
        val = symmetric_bregman_l1(x_C, x_R, np.sign(x_C), np.sign(x_R))
        # ((1-1)*(1.5) + (-1-1)*(-2)) = 4
        assert val == 4.0

    def test_zero_when_subgradients_agree(self):
        x_C = np.array([1.0, 2.0, 3.0])
        x_R = np.array([0.5, 0.1, 9.0])
        assert symmetric_bregman_l1(x_C, x_R, np.sign(x_C), np.sign(x_R)) == 0.0

    def test_matches_closed_form_on_nonzero_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x_C = rng.normal(size=8)
            x_R = rng.normal(size=8)
            val = symmetric_bregman_l1(x_C, x_R, np.sign(x_C), np.sign(x_R))
            assert val == pytest.approx(sign_mismatch_bregman(x_C, x_R), abs=1e-12)

    def test_zero_entries_allow_interior_subgradients(self):
        x_C = np.array([0.0, 1.0])
        x_R = np.array([1.0, 1.0])
        val = symmetric_bregman_l1(x_C, x_R, np.array([-0.5, 1.0]),
                                   np.array([1.0, 1.0]))
        # (-0.5 - 1)(0 - 1) = 1.5
        assert val == 1.5

    def test_never_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x_C = rng.normal(size=5)
            x_R = rng.normal(size=5)
            assert symmetric_bregman_l1(x_C, x_R, np.sign(x_C),
                                        np.sign(x_R)) >= 0.0

    def test_rejects_invalid_subgradients(self):
        x = np.array([1.0, 0.0])
        with pytest.raises(ValueError):
            symmetric_bregman_l1(x, x, np.array([1.0, 1.5]), np.sign(x))
        with pytest.raises(ValueError):
            symmetric_bregman_l1(x, x, np.array([-1.0, 0.0]), np.sign(x))
        with pytest.raises(ValueError):
            symmetric_bregman_l1(x, np.ones(3), np.sign(x), np.ones(3))


def test_sign_mismatch_hand_value():
    x_C = np.array([1.0, -2.0, 3.0])
    x_R = np.array([-1.0, -1.0, 4.0])
    # only the first entry flips sign: 2 * |x_R - x_C| = 4
    assert sign_mismatch_bregman(x_C, x_R) == 4.0


class TestRefinementBound:
    def test_holds_on_random_instances(self):
        rng = np.random.default_rng(2)
        for trial in range(5):
            n = 12
            A_C = rng.normal(size=(6, n)) / np.sqrt(6)
            B = rng.choice([-1.0, 1.0], size=(6, n)) / np.sqrt(6)
            x_true = np.zeros(n)
            x_true[rng.choice(n, 3, replace=False)] = rng.normal(size=3)
            chk = check_refinement_bound(A_C, B, x_true, 0.1)
            assert isinstance(chk, BoundCheck)
            assert chk.holds
            assert chk.lhs_residual_term >= 0.0
            assert chk.lhs_bregman_term >= 0.0
            assert chk.lhs_residual_term + chk.lhs_bregman_term <= chk.rhs + 1e-8

    def test_rhs_computable_before_refined_solve(self):
        # rhs only involves the coarse solution and the new rows
        from spcsim.solvers import high_precision_reference_solve
        rng = np.random.default_rng(3)
        n = 10
        A_C = rng.normal(size=(5, n))
        B = rng.normal(size=(4, n))
        x_true = np.zeros(n)
        x_true[[0, 4]] = [1.0, -2.0]
        alpha = 0.05
        chk = check_refinement_bound(A_C, B, x_true, alpha)
        sol_C = high_precision_reference_solve(A_C, None, A_C @ x_true, alpha)
        y_B = B @ x_true
        rhs = 0.5 * float(np.sum((y_B - B @ sol_C.x) ** 2))
        assert chk.rhs == pytest.approx(rhs, rel=1e-12)

    def test_identical_refinement_rows_give_zero_rhs_and_tight_lhs(self):
        # when B repeats rows of A_C the coarse solution already explains
        # the new data, so the refined solve must not move
        rng = np.random.default_rng(4)
        n = 8
        A_C = rng.normal(size=(6, n))
        x_true = np.zeros(n)
        x_true[[1, 3]] = [2.0, -1.0]
        chk = check_refinement_bound(A_C, A_C[:2], x_true, 0.2)
        assert chk.holds

    def test_analysis_form(self):
        rng = np.random.default_rng(5)
        n = 9
        W = np.linalg.qr(rng.normal(size=(n, n)))[0]
        A_C = rng.normal(size=(5, n))
        B = rng.normal(size=(4, n))
        x_true = W.T @ np.concatenate([rng.normal(size=2), np.zeros(n - 2)])
        chk = check_refinement_bound(A_C, B, x_true, 0.1, W_dense=W)
        assert chk.holds


class TestExpectedBound:
    def test_summary_fields_and_holds(self):
        rng = np.random.default_rng(6)
        n = 8
        A_C = rng.normal(size=(4, n)) / 2.0
        x_true = np.zeros(n)
        x_true[[0, 5]] = [1.5, -0.5]
        s = check_expected_bound(A_C, x_true, 0.1, rows_b=4, trials=20, seed=1)
        assert (s.alpha, s.n, s.rows_coarse, s.rows_b, s.trials) == \
            (0.1, n, 4, 4, 20)
        assert 0.0 <= s.holds_rate <= 1.0
        assert s.stderr_diff >= 0.0
        assert s.holds == (s.mean_lhs <= s.mean_rhs + 2.0 * s.stderr_diff)
        assert s.holds

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(7)
        A_C = rng.normal(size=(4, 6))
        x_true = np.array([1.0, 0, 0, -2.0, 0, 0])
        a = check_expected_bound(A_C, x_true, 0.05, rows_b=3, trials=5, seed=9)
        b = check_expected_bound(A_C, x_true, 0.05, rows_b=3, trials=5, seed=9)
        assert a == b

    def test_requires_two_trials(self):
        with pytest.raises(ValueError):
            check_expected_bound(np.eye(4), np.ones(4), 0.1, rows_b=2, trials=1)


def test_expected_bound_csv_format():
    rng = np.random.default_rng(8)
    A_C = rng.normal(size=(3, 5))
    x_true = np.array([1.0, 0, 0, 0, -1.0])
    s = check_expected_bound(A_C, x_true, 0.01, rows_b=2, trials=3, seed=2)
    text = expected_bound_csv([s])
    lines = text.splitlines()
    assert lines[0] == "alpha,n,rows_coarse,rows_b,trials,holds_rate,mean_lhs,mean_rhs"
    fields = lines[1].split(",")
    assert float(fields[0]) == 0.01
    assert [int(v) for v in fields[1:5]] == [5, 3, 2, 3]
    # every cell must be plain-number text, no numpy reprs
    values = [float(v) for v in fields]
    assert values[5] == s.holds_rate
    assert values[6] == s.mean_lhs
    assert values[7] == s.mean_rhs
    assert text.endswith("\n")
