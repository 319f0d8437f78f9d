import math

import mpmath
import numpy as np
import pytest

from infoflow import GramMatrix, KernelSpec, gram, label_gram, silverman_sigma

from conftest import random_gram


class TestSilverman:
    def test_n_one_returns_h(self):
        assert silverman_sigma(1, 12, 5.0) == 5.0

    def test_forward_chain_value(self):
        # oracle: 50-digit evaluation of h * n**(-1/(4+d))
        with mpmath.workdps(50):
            expect = float(5 * mpmath.power(128, mpmath.mpf(-1) / 788))
        assert math.isclose(silverman_sigma(128, 784, 5.0), expect, rel_tol=0, abs_tol=1e-12)
        assert round(silverman_sigma(128, 784, 5.0), 4) == 4.9693

    def test_error_chain_value(self):
        with mpmath.workdps(50):
            expect = float(mpmath.mpf("0.1") * mpmath.power(128, mpmath.mpf(-1) / 104))
        got = silverman_sigma(128, 100, 0.1)
        assert math.isclose(got, expect, rel_tol=0, abs_tol=1e-12)
        assert round(got, 5) == 0.09544

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            silverman_sigma(0, 3, 1.0)
        with pytest.raises(ValueError):
            silverman_sigma(3, 0, 1.0)
        with pytest.raises(ValueError):
            silverman_sigma(3, 3, 0.0)


class TestRbfGram:
    def test_identical_rows(self):
        A = gram(np.array([[1.0, 2.0], [1.0, 2.0]]), KernelSpec.rbf_fixed(1.0))
        assert np.allclose(A.a, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_distant_rows_vanish_off_diagonal(self):
        A = gram(np.array([[0.0], [1e6]]), KernelSpec.rbf_fixed(1.0))
        assert np.allclose(A.a, [[0.5, 0.0], [0.0, 0.5]], atol=1e-300)

    def test_three_sample_hand_values(self):
        A = gram(np.array([[0.0], [1.0], [2.0]]), KernelSpec.rbf_fixed(1.0))
        assert math.isclose(A.a[0, 1], math.exp(-0.5) / 3, abs_tol=1e-15)
        assert math.isclose(A.a[0, 2], math.exp(-2.0) / 3, abs_tol=1e-15)
        assert math.isclose(A.a[1, 2], math.exp(-0.5) / 3, abs_tol=1e-15)

    def test_invariants_on_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            d = int(rng.integers(1, 8))
            A = gram(rng.normal(size=(n, d)) * rng.uniform(0.1, 10))
            assert abs(A.a.trace() - 1.0) <= 1e-12
            assert np.abs(np.diag(A.a) - 1.0 / n).max() <= 1e-12
            assert np.array_equal(A.a, A.a.T)
            assert A.a.min() >= 0.0
            assert np.linalg.eigvalsh(A.a)[0] >= -1e-10 * n

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(10, 3))
        for c in (0.1, 3.0, 250.0):
            A1 = gram(x, KernelSpec.rbf_fixed(0.7))
            A2 = gram(c * x, KernelSpec.rbf_fixed(0.7 * c))
            assert np.allclose(A1.a, A2.a, atol=1e-15)

    def test_row_permutation_consistency(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(12, 4))
        perm = rng.permutation(12)
        A = gram(x, KernelSpec.rbf_fixed(1.0))
        Ap = gram(x[perm], KernelSpec.rbf_fixed(1.0))
        assert np.allclose(Ap.a, A.a[np.ix_(perm, perm)], atol=1e-15)
        assert np.allclose(Ap.a, A.permuted(perm).a, atol=1e-15)

    def test_silverman_d_comes_from_matrix(self):
        x = np.zeros((4, 9))
        A = gram(x, KernelSpec.rbf_silverman(2.0))
        # all-equal samples give the all-ones kernel regardless of sigma
        assert np.allclose(A.a, 0.25 * np.ones((4, 4)))

    def test_empty_samples_rejected(self):
        with pytest.raises(ValueError):
            gram(np.zeros((0, 3)))

    def test_degenerate_sigma_rejected(self):
        with pytest.raises(ValueError):
            KernelSpec.rbf_fixed(0.0)


class TestLabelGram:
    def test_block_structure(self):
        A = label_gram(np.array(["a", "a", "b", "b"]))
        expect = np.array(
            [
                [0.25, 0.25, 0.0, 0.0],
                [0.25, 0.25, 0.0, 0.0],
                [0.0, 0.0, 0.25, 0.25],
                [0.0, 0.0, 0.25, 0.25],
            ]
        )
        assert np.array_equal(A.a, expect)

    def test_single_class_is_rank_one(self):
        A = label_gram(np.zeros(6))
        assert np.allclose(A.a, np.ones((6, 6)) / 6)
        assert np.linalg.matrix_rank(A.a) == 1

    def test_all_distinct_is_scaled_identity(self):
        A = label_gram(np.arange(8))
        assert np.array_equal(A.a, np.eye(8) / 8)

    def test_delta_kernel_via_gram(self):
        labels = np.array([0.0, 1.0, 0.0])
        direct = label_gram(labels)
        via_gram = gram(labels.reshape(-1, 1), KernelSpec.label_delta())
        assert np.array_equal(direct.a, via_gram.a)


class TestGramMatrixValidation:
    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            GramMatrix(np.eye(4))

    def test_rejects_asymmetric(self):
        a = np.eye(3) / 3
        a[0, 1] = 0.1
        a[1, 0] = 0.05
        with pytest.raises(ValueError, match="symmetric"):
            GramMatrix(a)

    def test_rejects_negative_entries(self):
        a = np.eye(2) / 2 + np.array([[0.0, -0.1], [-0.1, 0.0]])
        with pytest.raises(ValueError, match="negative"):
            GramMatrix(a)

    def test_kernel_spec_validation(self):
        with pytest.raises(ValueError):
            KernelSpec(family="poly")
        with pytest.raises(ValueError):
            KernelSpec(family="rbf", bandwidth_rule="fixed", sigma=None)
        with pytest.raises(ValueError):
            KernelSpec.rbf_silverman(h=-1.0)

    def test_immutable_payload(self):
        rng = np.random.default_rng(3)
        A = random_gram(rng, 6)
        with pytest.raises(ValueError):
            A.a[0, 0] = 5.0
