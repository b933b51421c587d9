import numpy as np
import pytest

from mflq import linops
from mflq.errors import SingularLyapunov, UnstableOperator

from conftest import random_stable_matrix, rng


def random_rank_matrix(gen, p, q, r):
    U = gen.normal(size=(p, r))
    V = gen.normal(size=(r, q))
    return U @ V if r > 0 else np.zeros((p, q))


class TestPinv:
    def test_penrose_identities_random_ranks(self):
        # oracle suite (c): 500 random matrices across ranks 0..min(p,q)
        gen = rng(101)
        for trial in range(500):
            p = int(gen.integers(1, 7))
            q = int(gen.integers(1, 7))
            r = int(gen.integers(0, min(p, q) + 1))
            M = random_rank_matrix(gen, p, q, r)
            res = linops.pinv(M)
            Mp = res.pinv
            scale = 1.0 + np.linalg.norm(M)
            assert np.linalg.norm(M @ Mp @ M - M) <= 1e-8 * scale
            assert np.linalg.norm(Mp @ M @ Mp - Mp) <= 1e-8 * (1.0 + np.linalg.norm(Mp))
            assert np.linalg.norm((M @ Mp).T - M @ Mp) <= 1e-8
            assert np.linalg.norm((Mp @ M).T - Mp @ M) <= 1e-8
            assert res.rank == r

    def test_zero_matrix(self):
        res = linops.pinv(np.zeros((3, 2)))
        assert res.rank == 0
        assert np.all(res.pinv == 0.0)

    def test_example_closed_form_inverse(self, ex5_1):
        # Sigma_c at P_c = -1/3 in the scalar saddle example has the
        # closed-form inverse [[-P+1, P], [P, -P-1]]
        P = -1.0 / 3.0
        Sigma = np.array([[P + 1.0, P], [P, P - 1.0]])
        expected = np.array([[-P + 1.0, P], [P, -P - 1.0]])
        assert np.linalg.norm(linops.pinv(Sigma).pinv - expected) <= 1e-12

    def test_well_conditioned_matches_inverse(self):
        gen = rng(7)
        M = gen.normal(size=(4, 4)) + 4 * np.eye(4)
        assert np.allclose(linops.pinv(M).pinv, np.linalg.inv(M), atol=1e-10)


class TestRangeContains:
    def test_zero_sigma_zero_v(self):
        ok, resid = linops.range_contains(np.zeros((2, 2)), np.zeros((2, 1)))
        assert ok and resid == 0.0

    def test_orthogonal_complement(self):
        ok, resid = linops.range_contains(np.diag([1.0, 0.0]), np.array([0.0, 1.0]))
        assert not ok
        assert resid == pytest.approx(1.0)

    def test_invertible_sigma_contains_everything(self):
        gen = rng(3)
        Sigma = np.diag([2.0, -1.9])  # invertible, indefinite
        for _ in range(5):
            ok, _ = linops.range_contains(Sigma, gen.normal(size=(2, 3)))
            assert ok

    def test_invariant_under_right_multiplication(self):
        gen = rng(4)
        Sigma = np.diag([1.0, 1.0, 0.0])
        V = np.array([[1.0, 0.5], [0.0, 1.0], [0.0, 0.0]])
        ok1, _ = linops.range_contains(Sigma, V)
        W = gen.normal(size=(2, 2)) + 3 * np.eye(2)
        ok2, _ = linops.range_contains(Sigma, V @ W)
        assert ok1 and ok2


class TestLyapunov:
    def test_identity_cases(self):
        X = linops.solve_lyapunov(-np.eye(2), np.eye(2))
        assert np.allclose(X, 0.5 * np.eye(2))
        x = linops.solve_lyapunov(np.array([[-2.0]]), np.array([[1.0]]))
        assert x[0, 0] == pytest.approx(0.25)

    def test_two_by_two(self):
        F = np.array([[-2.0, -1.0], [-1.0, -2.0]])
        W = np.eye(2)
        X = linops.solve_lyapunov(F, W)
        assert np.linalg.norm(F @ X + X @ F.T + W) <= 1e-12
        assert np.allclose(X, X.T)

    def test_random_stable_operators(self):
        # oracle suite (d): 200 random stable drifts, residual <= 1e-9
        gen = rng(11)
        for _ in range(200):
            n = int(gen.integers(1, 6))
            F = random_stable_matrix(gen, n)
            W = gen.normal(size=(n, n))
            W = W @ W.T + 0.1 * np.eye(n)
            X = linops.solve_lyapunov(F, W)
            assert np.linalg.norm(F @ X + X @ F.T + W) <= 1e-9 * (1.0 + np.linalg.norm(W))
            assert np.array_equal(X, X.T)

    def test_singular_pair_raises(self):
        # F and -F share an eigenvalue (0), so the operator is singular
        F = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(SingularLyapunov):
            linops.solve_lyapunov(F, np.eye(2))


class TestStochasticLyapunov:
    def test_scalar_formula(self):
        X = linops.solve_stochastic_lyapunov(
            np.array([[-1.0]]), np.array([[0.5]]), np.array([[1.0]])
        )
        assert X[0, 0] == pytest.approx(4.0 / 7.0)

    def test_reduces_to_deterministic(self):
        gen = rng(5)
        F = random_stable_matrix(gen, 3)
        W = np.eye(3)
        X1 = linops.solve_stochastic_lyapunov(F, np.zeros((3, 3)), W)
        X2 = linops.solve_lyapunov(F, W)
        assert np.allclose(X1, X2, atol=1e-12)

    def test_diagonal_reduction(self):
        X = linops.solve_stochastic_lyapunov(-np.eye(2), np.eye(2), np.eye(2))
        assert np.allclose(X, np.eye(2))

    def test_certificate_positivity_for_stable_operator(self):
        gen = rng(12)
        for _ in range(25):
            n = int(gen.integers(1, 4))
            F = random_stable_matrix(gen, n, margin=1.0)
            G = 0.3 * gen.normal(size=(n, n))
            if linops.stochastic_abscissa(F, G) >= -1e-6:
                continue
            X = linops.solve_stochastic_lyapunov(F, G, np.eye(n), require_stable=True)
            assert linops.min_eig(X) > 0.0

    def test_unstable_operator_raises(self):
        with pytest.raises(UnstableOperator):
            linops.solve_stochastic_lyapunov(
                np.array([[-0.5]]), np.array([[1.5]]), np.array([[1.0]]), require_stable=True
            )


class TestSpectral:
    def test_diagonal(self):
        assert linops.spectral_abscissa(-np.eye(3)) == pytest.approx(-1.0)

    def test_rotation_marginal(self):
        F = np.array([[0.0, 1.0], [-1.0, 0.0]])
        assert abs(linops.spectral_abscissa(F)) <= 1e-12

    def test_scalar_closed_loop_value(self, ex5_3):
        # the scalar stability operator of the saddle example at Theta = (1, -3)
        theta = np.array([[1.0], [-3.0]])
        A_cl = ex5_3.A + ex5_3.B @ theta
        C_cl = ex5_3.C + ex5_3.D @ theta
        assert linops.stochastic_abscissa(A_cl, C_cl) == pytest.approx(-4.0)
