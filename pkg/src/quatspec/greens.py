"""Finite-N quaternionic Green's function and the regularized density.

For q = lambda + eps*j with eps > 0, the Green's function of X is the
quaternion whose matrix representation is the average of the diagonal 2x2
blocks of the inverted doubled operator.  The regularized spectral density

    rho_eps(lambda; X) = -(1/pi) Re d/d(conj lambda) [complex part of G]

equals, exactly at every N, the mean spectral density of X + eps*A*B^{-1}
over independent standard complex Gaussian matrices A, B.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .quaternion import Quaternion

__all__ = [
    "green",
    "rho_eps",
    "normal_smoothing",
    "perturbation_mc",
    "check_resolvent_bound",
    "resolvent_bound_violations",
]

# Every Green's-function value produced by this package flows through
# check_resolvent_bound; violations are counted here and raised.
_BOUND_VIOLATIONS: list[tuple[Quaternion, float]] = []

_STRUCTURE_TOL = 1e-9


class ResolventBoundError(AssertionError):
    """|G| exceeded 1/|eps| + 1e-8."""


class IllConditionedRatioError(RuntimeError):
    """Too many consecutive ill-conditioned denominators in A*B^{-1} draws."""


def resolvent_bound_violations() -> int:
    return len(_BOUND_VIOLATIONS)


def check_resolvent_bound(q: Quaternion, g: Quaternion) -> Quaternion:
    """Assert |g| <= 1/|b(q)| + 1e-8 and return g.

    The bound holds for any Green's-function value at an argument with
    nonzero hypercomplex part; a violation indicates a numerical defect and
    raises after being counted.
    """
    eps = abs(q.b)
    if eps > 0.0 and g.norm() > 1.0 / eps + 1e-8:
        _BOUND_VIOLATIONS.append((q, g.norm()))
        raise ResolventBoundError(
            f"|G| = {g.norm():.6e} exceeds 1/eps = {1.0 / eps:.6e} at q = {q}"
        )
    return g


def green(x, q: Quaternion) -> Quaternion:
    """Quaternionic Green's function of a finite matrix at q.

    Inverts the doubled operator against the identity and averages the
    diagonal 2x2 blocks.  The average is checked against the representation
    pattern [[a, ib], [i*conj(b), conj(a)]] (it matches exactly in exact
    arithmetic; individual blocks need not).
    """
    op = linalg.build_doubled(x, q)
    n = op.n
    inv = linalg.solve_doubled(op, np.eye(2 * n, dtype=complex))
    m11 = np.mean(inv[0::2, 0::2].diagonal())
    m22 = np.mean(inv[1::2, 1::2].diagonal())
    m12 = np.mean(inv[0::2, 1::2].diagonal())
    m21 = np.mean(inv[1::2, 0::2].diagonal())
    a = 0.5 * (m11 + m22.conjugate())
    b = 0.5 * (m12 / 1j + (m21 / 1j).conjugate())
    scale = max(1.0, abs(a), abs(b))
    defect = max(abs(m11 - m22.conjugate()), abs(m12 / 1j - (m21 / 1j).conjugate()))
    if defect > _STRUCTURE_TOL * scale:
        raise AssertionError(
            f"Green's function lost its quaternion block structure "
            f"(defect {defect:.3e} at scale {scale:.3e})"
        )
    return check_resolvent_bound(q, Quaternion(a, b))


def rho_eps(
    x,
    lam: complex,
    eps: float,
    h: float | None = None,
    verify_step: bool = False,
) -> float:
    """Regularized spectral density at lambda by central differences.

    Four Green's-function evaluations approximate the anti-holomorphic
    derivative (d_x + i d_y)/2 of the complex part of G(lambda + eps*j).
    With verify_step=True the step h and h/2 results must agree to 1e-4.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    lam = complex(lam)
    if h is None:
        h = 1e-5 * max(1.0, abs(lam))
    value = _rho_eps_fd(x, lam, eps, h)
    if verify_step:
        again = _rho_eps_fd(x, lam, eps, h / 2)
        if abs(value - again) > 1e-4:
            raise ArithmeticError(
                f"density step check failed: h gave {value:.8e}, h/2 gave {again:.8e}"
            )
    return value


def _rho_eps_fd(x, lam: complex, eps: float, h: float) -> float:
    q = lambda z: Quaternion(z, eps)
    da = (green(x, q(lam + h)).a - green(x, q(lam - h)).a) / (2 * h)
    db = (green(x, q(lam + 1j * h)).a - green(x, q(lam - 1j * h)).a) / (2 * h)
    # -(1/pi) Re[(d_x + i d_y)/2 alpha]
    return float(-(da + 1j * db).real / (2 * np.pi))


def normal_smoothing(eigs, lam: complex, eps: float) -> float:
    """Exact rho_eps of a normal matrix from its eigenvalues.

    (1/(pi N)) sum_i [eps / (eps^2 + |lambda_i - lambda|^2)]^2.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    eigs = np.asarray(eigs, dtype=complex)
    kernel = (eps / (eps**2 + np.abs(eigs - lam) ** 2)) ** 2
    return float(kernel.mean() / np.pi)


def sample_gaussian_ratio(
    n: int,
    rng: np.random.Generator,
    cond_limit: float = 1e12,
    max_redraws: int = 100,
) -> tuple[np.ndarray, int]:
    """Draw A*B^{-1} for independent standard complex Gaussian A, B.

    Ill-conditioned B (condition number above cond_limit) is redrawn; the
    redraw count is returned alongside the sample.
    """
    redraws = 0
    while True:
        a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        b = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        if np.linalg.cond(b) <= cond_limit:
            # A B^{-1} via the transposed system B^T Z = A^T.
            return np.linalg.solve(b.T, a.T).T, redraws
        redraws += 1
        if redraws > max_redraws:
            raise IllConditionedRatioError(
                f"{redraws} consecutive ill-conditioned denominators at n = {n}"
            )


def perturbation_mc(
    x,
    eps: float,
    trials: int,
    seed: int,
    return_redraws: bool = False,
    workers: int = 1,
):
    """Eigenvalues of X + eps*A*B^{-1} pooled over independent trials.

    Sub-seed for trial k is seed XOR k, so the pooled sample is reproducible
    and independent of worker count (results are collected in trial order).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = linalg.as_matrix(x)
    n = x.shape[0]

    def one_trial(k: int) -> tuple[np.ndarray, int]:
        rng = np.random.default_rng(seed ^ k)
        ratio, redraws = sample_gaussian_ratio(n, rng)
        return linalg.eigenvalues(x + eps * ratio), redraws

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_trial, range(trials)))
    else:
        results = [one_trial(k) for k in range(trials)]
    samples = np.concatenate([eigs for eigs, _ in results])
    total_redraws = sum(rd for _, rd in results)
    if return_redraws:
        return samples, total_redraws
    return samples
