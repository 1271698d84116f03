"""Samplers (moment and covariance audits) and limiting Green evaluators."""

import numpy as np
import pytest

from quatspec import greens, linalg
from quatspec.ensembles import (
    DeterministicFamily,
    EnsembleSpec,
    QuadratureError,
    UnsupportedCombinationError,
    cauchy_limit_green,
    family_green_evaluators,
    green_of_diagonal,
    make_deterministic,
    sample_random,
    sample_ratio,
    sample_stephanov,
)
from quatspec.quaternion import Quaternion, q_inv


class TestEnsembleSpec:
    def test_validation(self):
        with pytest.raises(UnsupportedCombinationError):
            EnsembleSpec(n=10, tau=1.5)
        with pytest.raises(UnsupportedCombinationError):
            EnsembleSpec(n=10, tau=0.5, distribution="phase-rademacher")
        with pytest.raises(UnsupportedCombinationError):
            EnsembleSpec(n=10, distribution="lognormal")
        with pytest.raises(ValueError):
            EnsembleSpec(n=0)

    def test_determinism(self):
        spec = EnsembleSpec(n=40, tau=0.3, seed=123)
        assert np.array_equal(sample_random(spec), sample_random(spec))


class TestMoments:
    @pytest.mark.parametrize("dist", ["complex-gaussian", "phase-rademacher", "uniform-disc"])
    def test_first_three_moments(self, dist):
        n = 500
        means, second, third = [], [], []
        for seed in range(10):
            xi = sample_random(EnsembleSpec(n=n, distribution=dist, seed=seed)) * np.sqrt(n)
            means.append(xi.mean())
            second.append(np.mean(np.abs(xi) ** 2))
            third.append(np.mean(np.abs(xi) ** 3))
        assert abs(np.mean(means)) <= 4 / np.sqrt(10 * n * n)
        assert abs(np.mean(second) - 1.0) <= 0.02
        assert np.mean(third) <= 3.0

    def test_tau_zero_entry_scale(self):
        n = 200
        a = sample_random(EnsembleSpec(n=n, tau=0.0, seed=4))
        assert abs(np.mean(np.abs(a) ** 2) * n - 1.0) <= 3.0 / n

    def test_tau_one_is_hermitian(self):
        a = sample_random(EnsembleSpec(n=60, tau=1.0, seed=8))
        assert np.array_equal(a, a.conj().T)

    def test_tau_covariance(self):
        n = 500
        xi = sample_random(EnsembleSpec(n=n, tau=0.5, seed=3)) * np.sqrt(n)
        iu = np.triu_indices(n, k=1)
        pair_cov = np.mean(xi[iu] * xi[iu[1], iu[0]])
        assert pair_cov.real == pytest.approx(0.5, abs=0.05)
        assert abs(pair_cov.imag) <= 0.05
        conj_cov = np.mean(xi[iu] * np.conj(xi[iu[1], iu[0]]))
        assert abs(conj_cov) <= 0.05

    def test_gaussian_component_correlations(self):
        # real parts of transposed pairs carry +tau, imaginary parts -tau
        n, tau = 400, 0.7
        xi = sample_random(EnsembleSpec(n=n, tau=tau, seed=5)) * np.sqrt(n)
        iu = np.triu_indices(n, k=1)
        upper, lower = xi[iu], xi[iu[1], iu[0]]
        m = upper.size
        corr_re = np.corrcoef(upper.real, lower.real)[0, 1]
        corr_im = np.corrcoef(upper.imag, lower.imag)[0, 1]
        band = 3.0 / np.sqrt(m)
        assert abs(corr_re - tau) <= band
        assert abs(corr_im + tau) <= band


class TestRatioEnsemble:
    def test_scalar_radial_law(self):
        samples = np.array(
            [greens.sample_gaussian_ratio(1, np.random.default_rng(1000 + k))[0][0, 0]
             for k in range(20_000)]
        )
        r = np.sort(np.abs(samples))
        cdf = r**2 / (1 + r**2)
        steps = np.arange(1, r.size + 1) / r.size
        assert np.max(np.abs(cdf - steps)) < 0.02

    def test_eigenvalue_radial_statistics(self):
        eigs = linalg.eigenvalues(sample_ratio(100, seed=6))
        radii = np.abs(eigs)
        assert np.median(radii) == pytest.approx(1.0, abs=0.05)
        assert np.mean(radii <= 2.0) == pytest.approx(0.8, abs=0.03)

    def test_determinism(self):
        assert np.array_equal(sample_ratio(10, seed=2), sample_ratio(10, seed=2))


class TestDeterministicFamilies:
    def test_zero_and_identity(self):
        assert np.all(make_deterministic(DeterministicFamily.zero(), 3) == 0)
        assert np.array_equal(make_deterministic(DeterministicFamily.identity(), 3), np.eye(3))

    def test_two_level_layout(self):
        m = make_deterministic(DeterministicFamily.stephanov(0.5), 4)
        expected = np.zeros((4, 4))
        expected[0, 1] = expected[1, 0] = expected[2, 3] = expected[3, 2] = 0.5
        assert np.array_equal(m, expected)

    def test_two_level_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            make_deterministic(DeterministicFamily.stephanov(1.0), 5)

    def test_cauchy_diagonal_quantiles(self):
        m = make_deterministic(DeterministicFamily.cauchy_diagonal(seed=0), 1000)
        d = np.real(np.diagonal(m))
        assert abs(np.median(d)) < 0.15
        q1, q3 = np.quantile(d, [0.25, 0.75])
        assert q1 == pytest.approx(-1.0, abs=0.2)
        assert q3 == pytest.approx(1.0, abs=0.2)
        assert np.abs(d).max() > 50  # heavy tails

    def test_norm_bounds(self):
        assert DeterministicFamily.zero().norm_bound == 0.0
        assert DeterministicFamily.identity().norm_bound == 1.0
        assert DeterministicFamily.stephanov(0.5).norm_bound == 2.0
        assert DeterministicFamily.cauchy_diagonal().norm_bound is None

    def test_file_family_round_trip(self, tmp_path):
        x = np.array([[1.0, 2.0], [0.5, -1.0]], dtype=complex)
        path = tmp_path / "m.csv"
        linalg.save_matrix_csv(x, path)
        fam = DeterministicFamily.from_file(str(path))
        assert np.array_equal(make_deterministic(fam, 2), x)
        with pytest.raises(ValueError):
            make_deterministic(fam, 3)


class TestChiralSampler:
    def test_spectrum_sits_on_vertical_lobes(self):
        eigs = linalg.eigenvalues(sample_stephanov(400, 1.0, seed=2))
        assert np.abs(eigs.imag).max() < 1.1
        assert np.percentile(np.abs(eigs.real), 99) < 2.5

    def test_filled_variant_shares_scale(self):
        eigs = linalg.eigenvalues(sample_stephanov(400, 1.0, seed=2, filled=True))
        assert np.abs(eigs.imag).max() < 1.3

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_stephanov(401, 1.0, seed=0)
        with pytest.raises(ValueError):
            sample_stephanov(400, -1.0, seed=0)


class TestGreenOfDiagonal:
    def test_zero_diagonal(self):
        q = Quaternion(0.2 + 0.1j, 0.8)
        assert abs(green_of_diagonal([0.0, 0.0], q) - (-q.inv())) < 1e-15

    def test_matches_linalg_path(self):
        rng = np.random.default_rng(31)
        d = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        q = Quaternion(0.3 - 0.7j, 1.2)
        direct = green_of_diagonal(d, q)
        via_solve = greens.green(np.diag(d), q)
        assert abs(direct - via_solve) < 1e-12

    def test_monte_carlo_convergence_to_cauchy_limit(self):
        rng = np.random.default_rng(32)
        d = np.tan(np.pi * (rng.random(10_000) - 0.5))
        q = Quaternion(0.4 + 0.3j, 0.9)
        sampled = green_of_diagonal(d, q)
        limit = cauchy_limit_green(q)
        assert abs(sampled - limit) < 0.02


class TestCauchyLimitGreen:
    def test_odd_symmetry(self):
        rng = np.random.default_rng(33)
        for _ in range(10):
            q = Quaternion(
                complex(rng.standard_normal(), rng.standard_normal()),
                rng.uniform(0.2, 2.0),
            )
            assert abs(cauchy_limit_green(-q) + cauchy_limit_green(q)) < 1e-8

    def test_pure_j_value(self):
        g = cauchy_limit_green(Quaternion(0.0, 1.0))
        assert abs(g.a) < 1e-10
        assert g.b.real == pytest.approx(0.5, abs=1e-9)

    def test_big_sample_agreement(self):
        rng = np.random.default_rng(34)
        d = np.tan(np.pi * (rng.random(100_000) - 0.5))
        q = Quaternion(1.0, 0.5)
        assert abs(green_of_diagonal(d, q) - cauchy_limit_green(q)) < 0.01

    def test_rejects_singular_point(self):
        with pytest.raises(ValueError):
            cauchy_limit_green(Quaternion(0.5, 0.0))

    def test_tolerance_error_carries_estimate(self):
        with pytest.raises(QuadratureError):
            cauchy_limit_green(Quaternion(0.0, 1e-10), tol=1e-16)


class TestFamilyEvaluators:
    def test_zero_family(self):
        gd, gdinv = family_green_evaluators(DeterministicFamily.zero())
        assert gdinv is None
        g = gd(Quaternion(0.0, 2.0))
        assert abs(g - Quaternion(0.0, 0.5)) < 1e-15

    def test_identity_family_value(self):
        gd, gdinv = family_green_evaluators(DeterministicFamily.identity())
        q = Quaternion(0.3, 0.9)
        expected = q_inv(Quaternion(1.0 - q.a, -q.b))
        assert abs(gd(q) - expected) < 1e-15
        assert abs(gdinv(q) - expected) < 1e-15

    def test_two_level_reproduces_scalar_pair_equation(self):
        mu = 1.3
        gd, _ = family_green_evaluators(DeterministicFamily.stephanov(mu))
        w = Quaternion(0.3 + 0.2j, 1.4) + Quaternion(1.0, 1.0).dot(
            Quaternion(-0.11 + 0.05j, 0.37)
        )
        atom = Quaternion(1j * mu, 0.0)
        expected = 0.5 * q_inv(atom - w) - 0.5 * q_inv(atom + w)
        assert abs(gd(w) - expected) < 1e-15

    def test_cauchy_family_shares_inverse_limit(self):
        gd, gdinv = family_green_evaluators(DeterministicFamily.cauchy_diagonal())
        q = Quaternion(0.7 - 0.1j, 0.8)
        assert abs(gd(q) - gdinv(q)) < 1e-12

    def test_cauchy_batch_matches_adaptive(self):
        gd, _ = family_green_evaluators(DeterministicFamily.cauchy_diagonal())
        rng = np.random.default_rng(35)
        a = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        b = rng.uniform(0.05, 2.0, 6) + 0j
        alpha, beta = gd.batch(a, b)
        for k in range(6):
            exact = cauchy_limit_green(Quaternion(a[k], b[k]))
            assert abs(alpha[k] - exact.a) < 1e-9
            assert abs(beta[k] - exact.b) < 1e-9

    def test_batch_fallback_matches_scalar(self, tmp_path):
        x = np.array([[0.0, 1.0], [0.2, 0.5]], dtype=complex)
        path = tmp_path / "m.csv"
        linalg.save_matrix_csv(x, path)
        gd, gdinv = family_green_evaluators(DeterministicFamily.from_file(str(path)), n=2)
        q = Quaternion(0.1 + 0.1j, 1.5)
        alpha, beta = gd.batch(np.array([q.a]), np.array([q.b]))
        scalar = gd(q)
        assert abs(alpha[0] - scalar.a) < 1e-14
        assert abs(beta[0] - scalar.b) < 1e-14
        assert gdinv is not None

    def test_evaluators_respect_resolvent_bound(self):
        rng = np.random.default_rng(36)
        families = [
            DeterministicFamily.zero(),
            DeterministicFamily.identity(),
            DeterministicFamily.stephanov(0.8),
            DeterministicFamily.cauchy_diagonal(),
        ]
        for fam in families:
            gd, _ = family_green_evaluators(fam)
            for _ in range(20):
                q = Quaternion(
                    complex(rng.standard_normal(), rng.standard_normal()),
                    rng.uniform(0.05, 3.0),
                )
                assert abs(gd(q)) <= 1.0 / abs(q.b) + 1e-8
