"""Quaternion algebra against the 2x2 matrix-representation oracle."""

import numpy as np
import pytest

from quatspec.quaternion import ONE, J, Quaternion, q_dot, q_inv, q_mul, q_norm
from quatspec.quaternion import SingularQuaternionError


def random_quaternion(rng, scale=1.0):
    a = complex(rng.standard_normal(), rng.standard_normal())
    b = complex(rng.standard_normal(), rng.standard_normal())
    return Quaternion(scale * a, scale * b)


class TestProduct:
    def test_j_squared_is_minus_one(self):
        assert J * J == Quaternion(-1, 0)

    def test_identity(self):
        rng = np.random.default_rng(0)
        q = random_quaternion(rng)
        assert ONE * q == q
        assert q * ONE == q

    def test_closed_form_matches_matrix_oracle(self):
        p = Quaternion(1, 2)
        q = Quaternion(3, 1)
        expected = Quaternion.from_matrix(p.to_matrix() @ q.to_matrix())
        got = q_mul(p, q)
        assert abs(got - expected) < 1e-14

    def test_thousand_random_pairs_match_representation(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            p = random_quaternion(rng, scale=rng.uniform(0.1, 10.0))
            q = random_quaternion(rng, scale=rng.uniform(0.1, 10.0))
            direct = (p * q).to_matrix()
            via_matrices = p.to_matrix() @ q.to_matrix()
            bound = 1e-12 * (1.0 + abs(p) * abs(q))
            assert np.linalg.norm(direct - via_matrices, 2) <= bound

    def test_representation_is_additive(self):
        rng = np.random.default_rng(1)
        p, q = random_quaternion(rng), random_quaternion(rng)
        assert np.allclose((p + q).to_matrix(), p.to_matrix() + q.to_matrix())

    def test_submultiplicative_norm(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            p, q = random_quaternion(rng), random_quaternion(rng)
            assert abs(p * q) <= abs(p) * abs(q) * (1 + 1e-12)

    def test_scalar_coercion(self):
        q = Quaternion(2, 1)
        assert 2 * q == Quaternion(4, 2)
        assert q - 1 == Quaternion(1, 1)


class TestInverse:
    def test_inverse_of_one(self):
        assert q_inv(ONE) == ONE

    def test_pure_j_inverse(self):
        # invert the representation [[0, 2i], [2i, 0]]
        assert q_inv(Quaternion(0, 2)) == Quaternion(0, -0.5)

    def test_regularized_point_inverse(self):
        lam, eps = 0.7 - 0.3j, 0.45
        q = Quaternion(lam, eps)
        expected = Quaternion(lam.conjugate(), -eps) * (1.0 / (abs(lam) ** 2 + eps**2))
        assert abs(q.inv() - expected) < 1e-15
        m_inv = np.linalg.inv(q.to_matrix())
        assert abs(Quaternion.from_matrix(m_inv) - q.inv()) < 1e-14

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            q = random_quaternion(rng, scale=rng.uniform(0.01, 100.0))
            assert abs(q * q.inv() - ONE) < 1e-12
            assert abs(q.inv()) == pytest.approx(1.0 / abs(q), rel=1e-12)

    def test_zero_inverse_raises(self):
        with pytest.raises(SingularQuaternionError):
            q_inv(Quaternion(0, 0))


class TestElementwiseProduct:
    def test_paper_values(self):
        assert q_dot(Quaternion(1, 2), Quaternion(3, 4)) == Quaternion(3, 8)

    def test_pure_j_prefactor(self):
        g = Quaternion(0.3 + 0.1j, 0.8)
        assert q_dot(Quaternion(0, 1), g) == Quaternion(0, g.b)

    def test_real_tau_prefactor(self):
        tau, alpha, beta = 0.5, 0.2 - 0.4j, 0.9
        got = q_dot(Quaternion(tau, 1), Quaternion(alpha, beta))
        assert got == Quaternion(tau * alpha, beta)

    def test_differs_from_quaternion_product(self):
        p, q = Quaternion(1, 2), Quaternion(3, 4)
        assert p.dot(q) != p * q

    def test_commutative_associative_distributive(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            p, q, r = (random_quaternion(rng) for _ in range(3))
            assert abs(p.dot(q) - q.dot(p)) < 1e-15
            assert abs(p.dot(q.dot(r)) - p.dot(q).dot(r)) < 1e-13
            assert abs(p.dot(q + r) - (p.dot(q) + p.dot(r))) < 1e-13


class TestNorm:
    def test_simple_values(self):
        assert q_norm(ONE) == 1.0
        assert q_norm(Quaternion(3, 4)) == 5.0
        assert q_norm(Quaternion(0, 1e-3)) == pytest.approx(1e-3)

    def test_norm_equals_spectral_norm_of_representation(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            q = random_quaternion(rng, scale=rng.uniform(0.1, 50.0))
            sv = np.linalg.svd(q.to_matrix(), compute_uv=False)
            assert abs(q) == pytest.approx(sv[0], rel=1e-12)


class TestRepresentationRoundTrip:
    def test_round_trip(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            q = random_quaternion(rng)
            assert Quaternion.from_matrix(q.to_matrix()) == q

    def test_rejects_non_representation(self):
        with pytest.raises(ValueError):
            Quaternion.from_matrix(np.array([[1.0, 0.0], [0.0, 2.0]]))

    def test_conjugate_is_adjoint(self):
        q = Quaternion(1 - 2j, 0.3 + 0.7j)
        assert np.allclose(q.conjugate().to_matrix(), q.to_matrix().conj().T)
