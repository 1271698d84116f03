"""Finite-N Green's function, regularized density, and the perturbation law."""

import numpy as np
import pytest

from quatspec import greens
from quatspec.ensembles import green_of_diagonal
from quatspec.greens import green, normal_smoothing, perturbation_mc, rho_eps
from quatspec.quaternion import Quaternion


def spherical_kernel(lam, x, eps):
    """Analytic rho_eps of the zero matrix shifted to x."""
    return eps**2 / (np.pi * (eps**2 + abs(lam - x) ** 2) ** 2)


class TestGreen:
    def test_zero_matrix_gives_minus_q_inverse(self):
        for n in (1, 3, 7):
            q = Quaternion(0.3 - 0.2j, 1.1)
            g = green(np.zeros((n, n)), q)
            assert abs(g - (-q.inv())) < 1e-12

    def test_scalar_multiple_of_identity(self):
        c, lam, eps = 1.0 + 2.0j, 0.4, 0.9
        g = green(c * np.eye(5), Quaternion(lam, eps))
        n2 = abs(c - lam) ** 2 + eps**2
        expected = Quaternion((np.conj(c) - np.conj(lam)) / n2, eps / n2)
        assert abs(g - expected) < 1e-12

    def test_hermitian_matches_classical_green_function(self):
        rng = np.random.default_rng(21)
        h = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h = (h + h.conj().T) / 2
        lam = 2.0 + 0.5j
        g = green(h, Quaternion(lam, 1e-6))
        eigs = np.linalg.eigvalsh(h)
        classical = np.mean(1.0 / (eigs - lam))
        assert abs(g.a - classical) < 1e-4

    def test_hypercomplex_part_strictly_positive(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            eps = rng.uniform(1e-3, 3.0)
            g = green(x, Quaternion(complex(rng.standard_normal()), eps))
            assert g.b.real > 0
            assert abs(g.b.imag) < 1e-12 * max(1.0, abs(g.b.real))

    def test_resolvent_bound_on_green(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            eps = rng.uniform(1e-2, 4.0)
            g = green(x, Quaternion(0.5j, eps))
            assert abs(g) <= 1.0 / eps + 1e-8
        assert greens.resolvent_bound_violations() == 0


class TestRhoEps:
    def test_zero_matrix_analytic_values(self):
        assert rho_eps(np.zeros((2, 2)), 0.0, 1.0) == pytest.approx(1 / np.pi, abs=1e-8)
        assert rho_eps(np.zeros((2, 2)), 1.0, 1.0) == pytest.approx(
            1 / (4 * np.pi), abs=1e-8
        )

    def test_matches_shifted_kernel(self):
        x = 0.7 * np.eye(3)
        for lam in (0.2, 0.7 + 0.3j):
            got = rho_eps(x, lam, 0.8)
            assert got == pytest.approx(spherical_kernel(lam, 0.7, 0.8), abs=1e-8)

    def test_richardson_step_check(self):
        rho_eps(np.zeros((2, 2)), 0.3, 1.0, verify_step=True)

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            rho_eps(np.zeros((2, 2)), 0.0, 0.0)

    def test_mass_near_one_on_window(self):
        rng = np.random.default_rng(24)
        x = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / 2
        xs = np.linspace(-3.2, 3.2, 41)
        vals = np.array(
            [[rho_eps(x, complex(a, b), 0.3) for b in xs] for a in xs]
        )
        assert np.all(vals >= -1e-6)
        mass = np.trapezoid(np.trapezoid(vals, xs, axis=1), xs)
        assert 0.95 <= mass <= 1.01


class TestNormalSmoothing:
    def test_single_atom(self):
        assert normal_smoothing([0.0], 0.0, 1.0) == pytest.approx(1 / np.pi)

    def test_two_atoms(self):
        assert normal_smoothing([1.0, -1.0], 0.0, 1.0) == pytest.approx(1 / (4 * np.pi))

    def test_agrees_with_rho_eps_on_random_diagonal(self):
        rng = np.random.default_rng(25)
        d = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        x = np.diag(d)
        for lam in (0.0, 0.5 - 0.2j, -1.0 + 1.0j):
            assert rho_eps(x, lam, 0.7) == pytest.approx(
                normal_smoothing(d, lam, 0.7), abs=1e-5
            )

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            normal_smoothing([0.0], 0.0, -1.0)


class TestPerturbationMC:
    def test_scalar_ratio_is_spherical(self):
        # x = 0, N = 1, eps = 1: |lambda| has CDF r^2/(1+r^2)
        samples = perturbation_mc(np.zeros((1, 1)), 1.0, 20_000, seed=77)
        radii = np.sort(np.abs(samples))
        assert np.median(radii) == pytest.approx(1.0, abs=0.03)
        cdf = radii**2 / (1 + radii**2)
        steps = np.arange(1, radii.size + 1) / radii.size
        ks = np.max(np.abs(cdf - steps))
        assert ks < 0.02

    def test_scalar_identity_with_shift(self):
        # exact perturbation identity at N=1: the density of x + eps*a/b is
        # the shifted kernel, checked on the radial marginal at 1e5 samples
        x, eps = 0.3 + 0.2j, 0.7
        samples = perturbation_mc(np.array([[x]]), eps, 100_000, seed=5)
        r = np.sort(np.abs(samples - x))
        cdf = r**2 / (r**2 + eps**2)
        steps = np.arange(1, r.size + 1) / r.size
        assert np.max(np.abs(cdf - steps)) < 0.02

    def test_peak_near_shifted_atom(self):
        samples = perturbation_mc(np.array([[2.0]]), 0.5, 4000, seed=9)
        grid = np.linspace(-1, 4, 26)
        hist, edges = np.histogram(samples.real, bins=grid)
        peak = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
        assert abs(peak - 2.0) < 0.3

    def test_deterministic_and_worker_invariant(self):
        x = np.zeros((3, 3))
        a = perturbation_mc(x, 1.0, 8, seed=3)
        b = perturbation_mc(x, 1.0, 8, seed=3)
        c = perturbation_mc(x, 1.0, 8, seed=3, workers=4)
        assert np.array_equal(a, b)
        assert np.array_equal(a, c)

    def test_redraw_guard_errors_out(self):
        rng = np.random.default_rng(0)
        with pytest.raises(greens.IllConditionedRatioError):
            greens.sample_gaussian_ratio(2, rng, cond_limit=1.0, max_redraws=5)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            perturbation_mc(np.zeros((2, 2)), 0.0, 10, seed=0)
        with pytest.raises(ValueError):
            perturbation_mc(np.zeros((2, 2)), 1.0, 0, seed=0)
