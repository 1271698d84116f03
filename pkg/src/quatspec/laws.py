"""Self-consistent equations for limiting spectral densities.

The sum rule fixes G as the unique fixed point of

    G = G_D(q + t . G),        t = tau + j,

and the product rule first iterates

    Gt = -q^{-1} G_{D^{-1}}( -(t . Gt) q^{-1} )

and then evaluates

    G  = -(t . Gt)^{-1} G_D( -q (t . Gt)^{-1} ).

Quaternion products are noncommutative; the left/right placement above is
load-bearing and preserved literally.  Densities at eps -> 0 are extracted
by geometric eps-continuation with warm starts, declaring points with
vanishing hypercomplex part out of support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ensembles import GreenEvaluator
from .quaternion import Quaternion, q_dot, q_inv, q_mul

__all__ = [
    "SolveConfig",
    "SolveResult",
    "default_eps_start",
    "solve_sum",
    "solve_product",
    "predict_density",
    "predict_density_grid",
    "elliptic_density",
    "elliptic_support",
    "stephanov_density",
    "stephanov_support",
    "cauchy_product_density",
    "nu_gamma",
    "spherical_density",
    "spherical_radial_cdf",
]


class NonConvergenceError(ArithmeticError):
    """Fixed-point iteration exhausted max_iter."""

    def __init__(self, eps: float, residual: float, iterations: int, pending: int = 1):
        self.eps = eps
        self.residual = residual
        self.iterations = iterations
        self.pending = pending
        super().__init__(
            f"no convergence at eps = {eps:.6g} after {iterations} iterations "
            f"(last residual {residual:.3e}, {pending} point(s) unconverged)"
        )


class SingularNormalizationError(ZeroDivisionError):
    """|t . Gt| fell below 1e-14; the product-rule normalization is singular."""


class DegenerateSupportError(ValueError):
    """Closed form degenerates (tau = 1 collapses the ellipse)."""


class SingularLineError(ValueError):
    """Evaluation on the pole line y^2 = mu^2 of the two-level density."""


@dataclass(frozen=True)
class SolveConfig:
    """Solver and continuation parameters.

    eps_start = None resolves to max(2, 2d) * 1.25 for a family with norm
    bound d, or 2.5 when the bound is unknown/unbounded.
    """

    tol: float = 1e-12
    max_iter: int = 10_000
    eps_start: float | None = None
    eps_min: float = 1e-3
    eps_factor: float = 0.85
    beta_threshold: float = 1e-4

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.eps_factor < 1.0:
            raise ValueError("eps_factor must lie in (0, 1)")
        if self.eps_start is not None and self.eps_min >= self.eps_start:
            raise ValueError("eps_min must be below eps_start")

    def resolve_eps_start(self, norm_bound: float | None) -> float:
        if self.eps_start is not None:
            return self.eps_start
        return default_eps_start(norm_bound)


def default_eps_start(norm_bound: float | None) -> float:
    if norm_bound is None:
        return 2.5
    return max(2.0, 2.0 * norm_bound) * 1.25


@dataclass(frozen=True)
class SolveResult:
    g: Quaternion
    iterations: int
    residual: float
    in_support: bool
    g_tilde: Quaternion | None = None


def solve_sum(
    gd: GreenEvaluator,
    q: Quaternion,
    tau: float,
    cfg: SolveConfig | None = None,
    g0: Quaternion | None = None,
    history: list[Quaternion] | None = None,
) -> SolveResult:
    """Fixed point of g -> G_D(q + t . g) from g0 (default -q^{-1})."""
    cfg = cfg or SolveConfig()
    t = Quaternion(tau, 1.0)
    g = -q.inv() if g0 is None else g0
    if history is not None:
        history.append(g)
    residual = math.inf
    for iteration in range(1, cfg.max_iter + 1):
        g_next = gd(q + t.dot(g))
        residual = (g_next - g).norm()
        g = g_next
        if history is not None:
            history.append(g)
        if residual <= cfg.tol:
            return SolveResult(
                g=g,
                iterations=iteration,
                residual=residual,
                in_support=g.b.real > cfg.beta_threshold,
            )
    raise NonConvergenceError(abs(q.b), residual, cfg.max_iter)


def solve_product(
    gd: GreenEvaluator,
    gdinv: GreenEvaluator,
    q: Quaternion,
    tau: float,
    cfg: SolveConfig | None = None,
    g0: Quaternion | None = None,
) -> SolveResult:
    """Product rule: iterate the auxiliary equation for Gt, then map to G."""
    cfg = cfg or SolveConfig()
    t = Quaternion(tau, 1.0)
    q_inverse = q.inv()
    gt = -q_inverse if g0 is None else g0
    residual = math.inf
    for iteration in range(1, cfg.max_iter + 1):
        arg = -q_mul(t.dot(gt), q_inverse)
        gt_next = -q_mul(q_inverse, gdinv(arg))
        residual = (gt_next - gt).norm()
        gt = gt_next
        if residual <= cfg.tol:
            break
    else:
        raise NonConvergenceError(abs(q.b), residual, cfg.max_iter)
    g = _product_final(gd, q, t, gt)
    return SolveResult(
        g=g,
        iterations=iteration,
        residual=residual,
        in_support=g.b.real > cfg.beta_threshold,
        g_tilde=gt,
    )


def _product_final(gd: GreenEvaluator, q: Quaternion, t: Quaternion, gt: Quaternion) -> Quaternion:
    tg = t.dot(gt)
    if tg.norm() < 1e-14:
        raise SingularNormalizationError(
            f"|t . Gt| = {tg.norm():.3e} is too small to invert"
        )
    tg_inv = q_inv(tg)
    return -q_mul(tg_inv, gd(-q_mul(q, tg_inv)))


class DensityPoint(NamedTuple):
    rho: float
    in_support: bool
    edge: bool = False


def predict_density(
    rule: str,
    gd: GreenEvaluator,
    gdinv: GreenEvaluator | None,
    tau: float,
    lam: complex,
    cfg: SolveConfig | None = None,
    norm_bound: float | None = None,
    h: float | None = None,
) -> DensityPoint:
    """Continued eps -> eps_min density at a single lambda.

    Runs the continuation at lambda and at the four central-difference
    shifts; out-of-support points (beta <= beta_threshold at eps_min)
    report rho = 0.  `edge` flags beta within a decade of the threshold.
    """
    rho, in_support, edge, _ = predict_density_grid(
        rule, gd, gdinv, tau, np.array([complex(lam)]), cfg, norm_bound, h
    )
    return DensityPoint(float(rho[0]), bool(in_support[0]), bool(edge[0]))


def predict_density_grid(
    rule: str,
    gd: GreenEvaluator,
    gdinv: GreenEvaluator | None,
    tau: float,
    lams: np.ndarray,
    cfg: SolveConfig | None = None,
    norm_bound: float | None = None,
    h: float | None = None,
    on_failure: str = "raise",
):
    """Vectorized continuation over an array of lambda values.

    Returns (rho, in_support, edge, failed) arrays of lams' shape.  The
    iteration is the same update rule as the scalar solvers, applied to all
    points simultaneously with per-point convergence masking.  With
    on_failure="mask" unconverged points are flagged instead of raising.
    """
    if rule not in ("sum", "product"):
        raise ValueError(f"rule must be 'sum' or 'product', got {rule!r}")
    if rule == "product" and gdinv is None:
        raise ValueError("product rule needs an inverse-family evaluator")
    if on_failure not in ("raise", "mask"):
        raise ValueError("on_failure must be 'raise' or 'mask'")
    cfg = cfg or SolveConfig()
    lams = np.asarray(lams, dtype=complex)
    shape = lams.shape
    centers = lams.ravel()
    if h is None:
        h_arr = 1e-5 * np.maximum(1.0, np.abs(centers))
    else:
        h_arr = np.full(centers.shape, float(h))
    # Stencil layout: [centers, +h, -h, +ih, -ih], solved in one batch.
    stack = np.concatenate(
        [
            centers,
            centers + h_arr,
            centers - h_arr,
            centers + 1j * h_arr,
            centers - 1j * h_arr,
        ]
    )
    eps_start = cfg.resolve_eps_start(norm_bound)
    if rule == "sum":
        alpha, beta, failed = _continue_sum(gd, stack, tau, cfg, eps_start, on_failure)
    else:
        alpha, beta, failed = _continue_product(gd, gdinv, stack, tau, cfg, eps_start, on_failure)
    k = centers.size
    a0 = alpha[:k]
    b0 = beta[:k].real
    dax = (alpha[k : 2 * k] - alpha[2 * k : 3 * k]) / (2 * h_arr)
    day = (alpha[3 * k : 4 * k] - alpha[4 * k : 5 * k]) / (2 * h_arr)
    rho = -np.real(dax + 1j * day) / (2.0 * np.pi)
    in_support = b0 > cfg.beta_threshold
    rho = np.where(in_support, np.maximum(rho, 0.0), 0.0)
    edge = (b0 > cfg.beta_threshold / 10.0) & (b0 < cfg.beta_threshold * 10.0)
    fail_point = failed.reshape(5, k).any(axis=0)
    if fail_point.any():
        rho = np.where(fail_point, 0.0, rho)
        in_support = in_support & ~fail_point
    return (
        rho.reshape(shape),
        in_support.reshape(shape),
        edge.reshape(shape),
        fail_point.reshape(shape),
    )


def _eps_ladder(eps_start: float, cfg: SolveConfig):
    eps = eps_start
    while True:
        yield eps
        if eps <= cfg.eps_min:
            return
        eps = max(eps * cfg.eps_factor, cfg.eps_min)


def _continue_sum(gd, lams, tau, cfg, eps_start, on_failure):
    n2 = np.abs(lams) ** 2 + eps_start**2
    alpha = -lams.conj() / n2
    beta = eps_start / n2 + 0j
    failed = np.zeros(lams.shape, dtype=bool)
    for eps in _eps_ladder(eps_start, cfg):
        alpha, beta, bad = _iterate_sum(gd, lams, eps, tau, cfg, alpha, beta)
        if bad.any():
            if on_failure == "raise":
                raise NonConvergenceError(eps, math.nan, cfg.max_iter, int(bad.sum()))
            failed |= bad
    return alpha, beta, failed


def _iterate_sum(gd, lams, eps, tau, cfg, alpha, beta):
    alpha = alpha.copy()
    beta = beta.copy()
    active = np.ones(lams.shape, dtype=bool)
    for _ in range(cfg.max_iter):
        idx = np.flatnonzero(active)
        na, nb = gd.batch(lams[idx] + tau * alpha[idx], eps + beta[idx])
        delta = np.hypot(np.abs(na - alpha[idx]), np.abs(nb - beta[idx]))
        alpha[idx] = na
        beta[idx] = nb
        active[idx[delta <= cfg.tol]] = False
        if not active.any():
            return alpha, beta, active
    return alpha, beta, active


def _continue_product(gd, gdinv, lams, tau, cfg, eps_start, on_failure):
    n2 = np.abs(lams) ** 2 + eps_start**2
    ga = -lams.conj() / n2
    gb = eps_start / n2 + 0j
    failed = np.zeros(lams.shape, dtype=bool)
    eps_final = cfg.eps_min
    for eps in _eps_ladder(eps_start, cfg):
        ga, gb, bad = _iterate_product(gdinv, lams, eps, tau, cfg, ga, gb)
        eps_final = eps
        if bad.any():
            if on_failure == "raise":
                raise NonConvergenceError(eps, math.nan, cfg.max_iter, int(bad.sum()))
            failed |= bad
    alpha, beta = _product_final_batch(gd, lams, eps_final, tau, ga, gb)
    return alpha, beta, failed


def _vq_mul(a1, b1, a2, b2):
    return a1 * a2 - b1 * np.conj(b2), a1 * b2 + b1 * np.conj(a2)


def _iterate_product(gdinv, lams, eps, tau, cfg, ga, gb):
    ga = ga.copy()
    gb = gb.copy()
    qn = np.abs(lams) ** 2 + eps**2
    qia = lams.conj() / qn
    qib = np.full(lams.shape, -eps, dtype=complex) / qn
    active = np.ones(lams.shape, dtype=bool)
    for _ in range(cfg.max_iter):
        idx = np.flatnonzero(active)
        pa, pb = _vq_mul(tau * ga[idx], gb[idx], qia[idx], qib[idx])
        va, vb = gdinv.batch(-pa, -pb)
        na, nb = _vq_mul(qia[idx], qib[idx], va, vb)
        na, nb = -na, -nb
        delta = np.hypot(np.abs(na - ga[idx]), np.abs(nb - gb[idx]))
        ga[idx] = na
        gb[idx] = nb
        active[idx[delta <= cfg.tol]] = False
        if not active.any():
            return ga, gb, active
    return ga, gb, active


def _product_final_batch(gd, lams, eps, tau, ga, gb):
    ta, tb = tau * ga, gb
    tn = np.abs(ta) ** 2 + np.abs(tb) ** 2
    if np.any(np.sqrt(tn) < 1e-14):
        raise SingularNormalizationError("|t . Gt| below 1e-14 on the grid")
    tia = ta.conj() / tn
    tib = -tb / tn
    qa = lams
    qb = np.full(lams.shape, eps, dtype=complex)
    pa, pb = _vq_mul(qa, qb, tia, tib)
    va, vb = gd.batch(-pa, -pb)
    alpha, beta = _vq_mul(tia, tib, va, vb)
    return -alpha, -beta


# -- closed-form densities ----------------------------------------------------


def elliptic_support(lam: complex, tau: float) -> bool:
    """Interior test (x/(1+tau))^2 + (y/(1-tau))^2 < 1."""
    if tau == 1.0:
        raise DegenerateSupportError("tau = 1 collapses the ellipse to a segment")
    lam = complex(lam)
    return (lam.real / (1.0 + tau)) ** 2 + (lam.imag / (1.0 - tau)) ** 2 < 1.0


def elliptic_density(lam: complex, tau: float) -> float:
    """Uniform value 1/(pi (1 - tau^2)) inside the ellipse, 0 outside."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if elliptic_support(lam, tau):
        return 1.0 / (np.pi * (1.0 - tau * tau))
    return 0.0


def stephanov_support(lam: complex, mu: float) -> bool:
    """Sign of the support condition for the two-level family at level mu."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    lam = complex(lam)
    x2, y2 = lam.real**2, lam.imag**2
    w = y2 - mu * mu
    if abs(w) < 1e-12:
        raise SingularLineError(f"y^2 = mu^2 line is singular (y = {lam.imag})")
    cond = 1.0 - x2 / 4.0 - (y2 / 4.0) * (1.0 + 2.0 * w) ** 2 / w**2 + w
    return cond > 0.0


def stephanov_density(lam: complex, mu: float) -> DensityPoint:
    """Limiting density of the rotated chiral model at chemical potential mu."""
    lam = complex(lam)
    inside = stephanov_support(lam, mu)
    if not inside:
        return DensityPoint(0.0, False)
    y2 = lam.imag**2
    w = y2 - mu * mu
    rho = ((y2 + mu * mu) / w**2 - 1.0) / (4.0 * np.pi)
    return DensityPoint(float(rho), True)


def cauchy_product_density(lam: complex) -> float:
    """Density of the Cauchy-diagonal product family (pole at the origin)."""
    r = abs(complex(lam))
    if r == 0.0:
        raise ZeroDivisionError("density diverges at lambda = 0")
    s = r * r + r * math.sqrt(r * r + 4.0)
    return (1.0 / s - 1.0 / (s + 4.0)) / math.pi


def nu_gamma(gamma):
    """Log-modulus pdf of the Cauchy-diagonal product family."""
    gamma = np.asarray(gamma, dtype=float)
    e = np.exp(gamma)
    root = e * np.sqrt(e * e + 4.0)
    value = 2.0 * (root - e * e) / (root + e * e + 4.0)
    return value if value.ndim else float(value)


def spherical_density(lam):
    """Plane density whose stereographic lift is uniform on the sphere."""
    r2 = np.abs(np.asarray(lam, dtype=complex)) ** 2
    value = 1.0 / (np.pi * (1.0 + r2) ** 2)
    return value if value.ndim else float(value)


def spherical_radial_cdf(r):
    """P(|lambda| <= r) = r^2 / (1 + r^2) for the spherical law."""
    r = np.asarray(r, dtype=float)
    value = r * r / (1.0 + r * r)
    return value if value.ndim else float(value)
