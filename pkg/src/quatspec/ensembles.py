"""Random-matrix samplers and limiting Green evaluators.

Random matrices have entries xi_ij / sqrt(N) where the xi are mean-zero,
unit-variance complex variables.  The Hermiticity parameter tau is the
covariance E[xi_ij xi_ji]; tau = 1 gives Hermitian Wigner matrices, tau = 0
fully independent entries.  Deterministic families carry closed-form or
quadrature limits of their quaternionic Green's functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate

from . import greens, linalg
from .quaternion import Quaternion

__all__ = [
    "EnsembleSpec",
    "DeterministicFamily",
    "GreenEvaluator",
    "sample_random",
    "sample_ratio",
    "sample_stephanov",
    "make_deterministic",
    "green_of_diagonal",
    "cauchy_limit_green",
    "family_green_evaluators",
]

DISTRIBUTIONS = ("complex-gaussian", "phase-rademacher", "uniform-disc")


class UnsupportedCombinationError(ValueError):
    """Requested ensemble parameters outside the supported set."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for a random matrix draw: size, tau, entry law, seed."""

    n: int
    tau: float = 0.0
    distribution: str = "complex-gaussian"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 <= self.tau <= 1.0:
            raise UnsupportedCombinationError(f"tau must lie in [0, 1], got {self.tau}")
        if self.distribution not in DISTRIBUTIONS:
            raise UnsupportedCombinationError(
                f"unknown distribution {self.distribution!r}; choose from {DISTRIBUTIONS}"
            )
        if self.tau != 0.0 and self.distribution != "complex-gaussian":
            raise UnsupportedCombinationError(
                "tau != 0 is only supported for the complex-gaussian distribution"
            )


def sample_random(spec: EnsembleSpec) -> np.ndarray:
    """Draw the N x N matrix with entries xi_ij / sqrt(N) under `spec`.

    For the Gaussian law the transposed-pair covariance is built by mixing
    independent real Gaussians: real parts of (xi_ij, xi_ji) get correlation
    +tau and imaginary parts -tau, which yields E[xi_ij xi_ji] = tau and
    E[xi_ij conj(xi_ji)] = 0.  Diagonal entries are independent with
    E[xi_ii^2] = tau (real Gaussian at tau = 1).
    """
    rng = np.random.default_rng(spec.seed)
    n, tau = spec.n, spec.tau
    xi = np.zeros((n, n), dtype=complex)
    if spec.distribution == "complex-gaussian":
        iu, ju = np.triu_indices(n, k=1)
        m = iu.size
        s = math.sqrt(max(0.0, 1.0 - tau * tau))
        re_u = rng.standard_normal(m)
        re_mix = rng.standard_normal(m)
        im_u = rng.standard_normal(m)
        im_mix = rng.standard_normal(m)
        re_l = tau * re_u + s * re_mix
        im_l = -tau * im_u + s * im_mix
        inv_sqrt2 = 1.0 / math.sqrt(2.0)
        xi[iu, ju] = (re_u + 1j * im_u) * inv_sqrt2
        xi[ju, iu] = (re_l + 1j * im_l) * inv_sqrt2
        d_re = rng.standard_normal(n) * math.sqrt((1.0 + tau) / 2.0)
        d_im = rng.standard_normal(n) * math.sqrt((1.0 - tau) / 2.0)
        xi[np.arange(n), np.arange(n)] = d_re + 1j * d_im
    elif spec.distribution == "phase-rademacher":
        xi[:, :] = 1j ** rng.integers(0, 4, size=(n, n))
    else:  # uniform-disc, radius sqrt(2) so E|xi|^2 = 1
        radius = np.sqrt(2.0 * rng.random((n, n)))
        angle = 2.0 * np.pi * rng.random((n, n))
        xi[:, :] = radius * np.exp(1j * angle)
    return xi / math.sqrt(n)


def sample_ratio(n: int, seed: int) -> np.ndarray:
    """One draw of A * B^{-1} with independent standard complex Gaussian A, B."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    ratio, _ = greens.sample_gaussian_ratio(n, rng)
    return ratio


def sample_stephanov(n: int, mu: float, seed: int, filled: bool = False) -> np.ndarray:
    """Chiral two-block random matrix at chemical potential mu, rotated by i.

    The default draws [[0, iW + mu], [iW^H + mu, 0]] with W an (n/2) x (n/2)
    complex Gaussian block of entry variance 2/n, then multiplies by i so the
    limiting eigenvalue lobes straddle the imaginary axis.  With filled=True
    it instead returns A_n + i*M, a full-size Hermitian Gaussian plus the
    two-level coupling; both constructions share the same limiting density.
    """
    if n % 2:
        raise ValueError(f"n must be even, got {n}")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if filled:
        a = sample_random(EnsembleSpec(n=n, tau=1.0, seed=seed))
        return a + 1j * make_deterministic(DeterministicFamily.stephanov(mu), n)
    m = n // 2
    w = sample_random(EnsembleSpec(n=m, tau=0.0, seed=seed))
    out = np.zeros((n, n), dtype=complex)
    out[:m, m:] = 1j * w + mu * np.eye(m)
    out[m:, :m] = 1j * w.conj().T + mu * np.eye(m)
    return 1j * out


@dataclass(frozen=True)
class DeterministicFamily:
    """A named family of deterministic matrices with known norm behaviour.

    norm_bound is max(sup||D||, sup||D^{-1}||) when finite and None when
    unbounded (the Cauchy diagonal); it seeds the solver's starting eps.
    """

    kind: str
    mu: float | None = None
    seed: int | None = None
    path: str | None = None
    norm_bound: float | None = None

    @classmethod
    def zero(cls) -> "DeterministicFamily":
        return cls(kind="zero", norm_bound=0.0)

    @classmethod
    def identity(cls) -> "DeterministicFamily":
        return cls(kind="identity", norm_bound=1.0)

    @classmethod
    def stephanov(cls, mu: float) -> "DeterministicFamily":
        if mu <= 0:
            raise ValueError(f"mu must be positive, got {mu}")
        return cls(kind="stephanov", mu=mu, norm_bound=max(mu, 1.0 / mu))

    @classmethod
    def cauchy_diagonal(cls, seed: int = 0) -> "DeterministicFamily":
        # Fails the bounded-norm assumption; predictions still hold in practice.
        return cls(kind="cauchy-diagonal", seed=seed, norm_bound=None)

    @classmethod
    def from_file(cls, path: str) -> "DeterministicFamily":
        x = linalg.load_matrix_csv(path)
        bound = linalg.spectral_norm(x)
        try:
            bound = max(bound, linalg.spectral_norm(np.linalg.inv(x)))
        except np.linalg.LinAlgError:
            pass
        return cls(kind="file", path=path, norm_bound=bound)


def make_deterministic(family: DeterministicFamily, n: int) -> np.ndarray:
    """Materialize an N x N member of the family."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if family.kind == "zero":
        return np.zeros((n, n), dtype=complex)
    if family.kind == "identity":
        return np.eye(n, dtype=complex)
    if family.kind == "stephanov":
        if n % 2:
            raise ValueError(f"the two-level family needs even n, got {n}")
        block = np.array([[0.0, family.mu], [family.mu, 0.0]], dtype=complex)
        return np.kron(np.eye(n // 2), block)
    if family.kind == "cauchy-diagonal":
        rng = np.random.default_rng(family.seed)
        # Standard Cauchy by inverse CDF.
        values = np.tan(np.pi * (rng.random(n) - 0.5))
        return np.diag(values.astype(complex))
    if family.kind == "file":
        x = linalg.load_matrix_csv(family.path)
        if x.shape[0] != n:
            raise ValueError(f"file matrix has dimension {x.shape[0]}, requested {n}")
        return x
    raise ValueError(f"unknown family kind {family.kind!r}")


# -- Green evaluators ---------------------------------------------------------


@dataclass(frozen=True)
class GreenEvaluator:
    """Map q -> G(q) for a (possibly limiting) matrix family.

    `batch` evaluates component arrays (a, b) -> (alpha, beta) for grid
    sweeps; the scalar call is the reference path.  Both enforce the
    resolvent bound |G| <= 1/|b|.
    """

    name: str
    scalar_fn: Callable[[Quaternion], Quaternion]
    batch_fn: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def __call__(self, q: Quaternion) -> Quaternion:
        return greens.check_resolvent_bound(q, self.scalar_fn(q))

    def batch(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        if self.batch_fn is not None:
            alpha, beta = self.batch_fn(a, b)
        else:
            vals = [self.scalar_fn(Quaternion(ai, bi)) for ai, bi in zip(a.ravel(), b.ravel())]
            alpha = np.array([v.a for v in vals]).reshape(a.shape)
            beta = np.array([v.b for v in vals]).reshape(a.shape)
        norms = np.hypot(np.abs(alpha), np.abs(beta))
        eps = np.abs(b)
        bad = (eps > 0) & (norms > 1.0 / np.maximum(eps, 1e-300) + 1e-8)
        if np.any(bad):
            i = int(np.argmax(bad.ravel()))
            q = Quaternion(a.ravel()[i], b.ravel()[i])
            greens.check_resolvent_bound(q, Quaternion(alpha.ravel()[i], beta.ravel()[i]))
        return alpha, beta


def _atom_batch(atoms: np.ndarray) -> Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    atoms = np.asarray(atoms, dtype=complex).ravel()

    def batch(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        shape = a.shape
        a = a.ravel()[:, None]
        b = b.ravel()[:, None]
        diff = atoms[None, :] - a
        n2 = np.abs(diff) ** 2 + np.abs(b) ** 2
        alpha = (diff.conj() / n2).mean(axis=1)
        beta = (b / n2).mean(axis=1)
        return alpha.reshape(shape), beta.reshape(shape)

    return batch


def green_of_diagonal(diag, q: Quaternion) -> Quaternion:
    """Green's function of a diagonal matrix: mean of (d_i - q)^{-1}.

    Each doubled diagonal block is the representation of (d_i - a) - b j, so
    no linear solve is involved.
    """
    diag = np.asarray(diag, dtype=complex).ravel()
    if diag.size == 0:
        raise ValueError("empty diagonal")
    alpha, beta = _atom_batch(diag)(np.array([q.a]), np.array([q.b]))
    return greens.check_resolvent_bound(q, Quaternion(alpha[0], beta[0]))


def _zero_batch(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n2 = np.abs(a) ** 2 + np.abs(b) ** 2
    if np.any(n2 == 0.0):
        raise ZeroDivisionError("Green's function of the zero matrix at q = 0")
    return -a.conj() / n2, b / n2


# Nodes for the fixed-rule Cauchy integral: r = tan(theta) maps the full line
# onto (-pi/2, pi/2) and absorbs the 1/(pi (1+r^2)) weight into dtheta/pi.
_CAUCHY_NODES = 4097


def _cauchy_rule(m: int = _CAUCHY_NODES) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    theta = x * (np.pi / 2.0)
    weights = w * (np.pi / 2.0) / np.pi
    return np.tan(theta), weights


_CAUCHY_R, _CAUCHY_W = _cauchy_rule()


def _cauchy_batch(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shape = a.shape
    a = a.ravel()
    b = b.ravel()
    alpha = np.empty(a.shape, dtype=complex)
    beta = np.empty(a.shape, dtype=complex)
    # Chunk the (points x nodes) workspace to bound memory.
    step = max(1, int(4e6 / _CAUCHY_R.size))
    for lo in range(0, a.size, step):
        hi = min(a.size, lo + step)
        diff = _CAUCHY_R[None, :] - a[lo:hi, None]
        n2 = np.abs(diff) ** 2 + np.abs(b[lo:hi, None]) ** 2
        alpha[lo:hi] = (diff.conj() / n2) @ _CAUCHY_W
        beta[lo:hi] = (b[lo:hi, None] / n2) @ _CAUCHY_W
    return alpha.reshape(shape), beta.reshape(shape)


def cauchy_limit_green(q: Quaternion, tol: float = 1e-9) -> Quaternion:
    """Limiting Green's function of the standard-Cauchy diagonal family.

    Adaptive quadrature of (1/pi) (1+r^2)^{-1} (r - q)^{-1} dr over the real
    line, truncated where the analytic tail bound 2/(pi R) is below tol/2 and
    transformed by r = tan(theta) so the weight is absorbed.
    """
    if q.b == 0 and q.a.imag == 0:
        raise ValueError("q on the real axis with no hypercomplex part is singular")
    pa, pb = q.a, q.b
    radius = max(abs(pa) + 1.0, 4.0 / (np.pi * tol))
    theta_max = math.atan(radius)

    def integrand(theta: float) -> np.ndarray:
        r = math.tan(theta)
        da = r - pa
        n2 = abs(da) ** 2 + abs(pb) ** 2
        alpha = da.conjugate() / n2
        beta = pb / n2
        return np.array([alpha.real, alpha.imag, beta.real, beta.imag]) / np.pi

    value, err = scipy.integrate.quad_vec(
        integrand, -theta_max, theta_max, epsabs=tol / 2.0, epsrel=0.0
    )
    if err > tol:
        raise QuadratureError(f"requested {tol:.1e}, achieved error estimate {err:.1e}")
    g = Quaternion(value[0] + 1j * value[1], value[2] + 1j * value[3])
    return greens.check_resolvent_bound(q, g)


def family_green_evaluators(
    family: DeterministicFamily, n: int | None = None
) -> tuple[GreenEvaluator, GreenEvaluator | None]:
    """Limiting evaluators (G_D, G_{D^{-1}}) for a deterministic family.

    The zero family has no inverse evaluator (None).  For file families the
    finite-N Green's function stands in for the limit, so n is required.
    """
    if family.kind == "zero":
        gd = GreenEvaluator("zero", lambda q: -q.inv(), _zero_batch)
        return gd, None
    if family.kind == "identity":
        batch = _atom_batch(np.array([1.0 + 0j]))
        gd = GreenEvaluator("identity", lambda q: green_of_diagonal([1.0], q), batch)
        return gd, gd
    if family.kind == "stephanov":
        atoms = np.array([1j * family.mu, -1j * family.mu])
        inv_atoms = 1.0 / atoms
        gd = GreenEvaluator(
            f"stephanov(mu={family.mu})",
            lambda q: green_of_diagonal(atoms, q),
            _atom_batch(atoms),
        )
        gdinv = GreenEvaluator(
            f"stephanov-inverse(mu={family.mu})",
            lambda q: green_of_diagonal(inv_atoms, q),
            _atom_batch(inv_atoms),
        )
        return gd, gdinv
    if family.kind == "cauchy-diagonal":
        # The reciprocal of a standard Cauchy variable is standard Cauchy, so
        # the family and its inverse share one limit.
        gd = GreenEvaluator("cauchy-limit", cauchy_limit_green, _cauchy_batch)
        return gd, gd
    if family.kind == "file":
        if n is None:
            raise ValueError("file families need n to materialize the matrix")
        x = make_deterministic(family, n)
        gd = GreenEvaluator(f"file({family.path})", lambda q: greens.green(x, q))
        try:
            x_inv = np.linalg.inv(x)
        except np.linalg.LinAlgError:
            return gd, None
        gdinv = GreenEvaluator(
            f"file-inverse({family.path})", lambda q: greens.green(x_inv, q)
        )
        return gd, gdinv
    raise ValueError(f"unknown family kind {family.kind!r}")
