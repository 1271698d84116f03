"""Command-line interface: sample, predict, green, verify.

Subcommands share a config convention: values may come from a JSON file via
--config, and any flag given on the command line overrides the file.  Runs
are reproducible from (config, seed); reports echo their configuration.

Exit codes: 0 success, 1 verification threshold breach, 2 usage or config
error, 3 numerical failure.  QUATSPEC_OUTDIR sets the default output
directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, greens, laws, linalg
from .ensembles import (
    DISTRIBUTIONS,
    DeterministicFamily,
    EnsembleSpec,
    UnsupportedCombinationError,
    family_green_evaluators,
    make_deterministic,
    sample_random,
    sample_ratio,
    sample_stephanov,
)
from .quaternion import Quaternion

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

FAMILIES = ("zero", "identity", "stephanov", "cauchy-diagonal", "file")
VERIFY_EXPERIMENTS = (
    "figure1",
    "perturbation",
    "self-averaging",
    "elliptic",
    "stephanov",
    "cauchy-product",
    "spherical",
)

# Frozen verification thresholds (from recorded calibration runs; see the
# acceptance test module, which asserts the same numbers).
THRESHOLDS = {
    "figure1_ks": 0.02,
    "perturbation_tv": {"zero": 0.05, "diag": 0.05, "jordan": 0.07},
    "self_averaging_slope": (-1.6, -0.6),
    "elliptic_inside": 0.97,
    "elliptic_rel_err": 0.10,
    "stephanov_rel_err": 0.15,
    "cauchy_product_abs_err": 1e-3,
    "spherical_ks": 0.03,
}


class UsageError(ValueError):
    pass


def _parse_complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"expected 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise UsageError(f"cannot parse complex value {text!r}") from None


def _parse_grid(text: str) -> experiments.GridSpec:
    parts = text.split(",")
    if len(parts) != 6:
        raise UsageError("grid must be 're_min,re_max,im_min,im_max,nx,ny'")
    try:
        return experiments.GridSpec(
            float(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]),
            int(parts[4]), int(parts[5]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _outdir(value: str | None) -> Path:
    path = Path(value or os.environ.get("QUATSPEC_OUTDIR", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _family(kind: str, mu: float, seed: int, path: str | None) -> DeterministicFamily:
    if kind == "zero":
        return DeterministicFamily.zero()
    if kind == "identity":
        return DeterministicFamily.identity()
    if kind == "stephanov":
        return DeterministicFamily.stephanov(mu)
    if kind == "cauchy-diagonal":
        return DeterministicFamily.cauchy_diagonal(seed)
    if kind == "file":
        if not path:
            raise UsageError("--matrix is required for the file family")
        return DeterministicFamily.from_file(path)
    raise UsageError(f"unknown family {kind!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quatspec",
        description="Spectral densities of non-Hermitian random matrices: "
        "samplers, self-consistent density predictions, and Monte Carlo checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; explicit flags override its values")
    common.add_argument("--outdir", help="output directory (default $QUATSPEC_OUTDIR or '.')")
    common.add_argument("--seed", type=int, help="base random seed (default 0)")
    common.add_argument("--workers", type=int, help="worker threads for parallel trials")

    p = sub.add_parser("sample", parents=[common], help="draw a matrix and write its eigenvalues")
    p.add_argument("--mode", choices=("a", "d+a", "d*a", "ratio"), help="what to sample (default a)")
    p.add_argument("--n", type=int, help="matrix dimension (default 100)")
    p.add_argument("--tau", type=float, help="transpose-pair correlation in [0,1] (default 0)")
    p.add_argument("--dist", choices=DISTRIBUTIONS, help="entry distribution (default complex-gaussian)")
    p.add_argument("--family", choices=FAMILIES, help="deterministic part for d+a / d*a modes")
    p.add_argument("--mu", type=float, help="level parameter of the two-level family (default 1)")
    p.add_argument("--matrix", help="matrix CSV path for the file family")
    p.add_argument("--write-matrix", action="store_const", const=True,
                   help="also write the sampled matrix as CSV")

    p = sub.add_parser("predict", parents=[common], help="predicted density grid from the sum/product rule")
    p.add_argument("--rule", choices=("sum", "product"), help="self-consistency rule (default sum)")
    p.add_argument("--family", choices=FAMILIES, help="deterministic family (default zero)")
    p.add_argument("--tau", type=float, help="transpose-pair correlation (default 0)")
    p.add_argument("--mu", type=float, help="level parameter of the two-level family (default 1)")
    p.add_argument("--matrix", help="matrix CSV path for the file family")
    p.add_argument("--n", type=int, help="dimension for file-family evaluators")
    p.add_argument("--grid", help="re_min,re_max,im_min,im_max,nx,ny (default -3,3,-3,3,101,101)")
    p.add_argument("--eps-min", type=float, help="continuation endpoint (default 1e-3)")
    p.add_argument("--max-iter", type=int, help="fixed-point iteration cap per eps rung")
    p.add_argument("--svg", action="store_const", const=True, help="also write a radial-profile SVG")

    p = sub.add_parser("green", parents=[common], help="Green's function and density at one point")
    p.add_argument("--family", choices=FAMILIES, help="family for the source matrix")
    p.add_argument("--matrix", help="matrix CSV file")
    p.add_argument("--n", type=int, help="dimension when using --family (default 10)")
    p.add_argument("--mu", type=float, help="level parameter of the two-level family (default 1)")
    p.add_argument("--lambda", dest="lam", help="evaluation point 're,im' (default 0,0)")
    p.add_argument("--eps", type=float, help="regularizer, must be > 0 (default 1)")

    p = sub.add_parser("verify", parents=[common], help="run a verification experiment")
    p.add_argument("experiment", choices=VERIFY_EXPERIMENTS)
    p.add_argument("--n", type=int, help="matrix dimension (experiment-specific default)")
    p.add_argument("--eps", type=float, help="perturbation scale (default 1)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (default 200)")
    p.add_argument("--case", choices=("zero", "diag", "jordan"), help="perturbation test matrix")
    p.add_argument("--tau", type=float, help="correlation for the elliptic experiment")
    p.add_argument("--dist", choices=DISTRIBUTIONS, help="entry distribution")
    p.add_argument("--mu", type=float, help="level parameter (default 1)")
    p.add_argument("--draws", type=int, help="pooled draws for the spherical experiment (default 100)")
    return parser


_DEFAULTS = {
    "mode": "a", "n": None, "tau": 0.0, "dist": "complex-gaussian", "family": "zero",
    "mu": 1.0, "matrix": None, "write_matrix": False, "rule": "sum", "grid": None,
    "eps_min": None, "max_iter": None, "svg": False, "lam": "0,0", "eps": 1.0,
    "trials": 200, "case": "zero", "draws": 100, "seed": 0, "workers": None,
    "config": None, "outdir": None, "experiment": None, "command": None,
}


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    merged = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_values) - set(_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    for key, value in vars(args).items():
        if value is not None:
            merged[key] = value
    return argparse.Namespace(**merged)


def cmd_sample(args) -> int:
    outdir = _outdir(args.outdir)
    n = args.n if args.n is not None else 100
    seed = args.seed
    if args.mode == "ratio":
        matrix = sample_ratio(n, seed)
        label = f"ratio-n{n}-seed{seed}"
    else:
        spec = EnsembleSpec(n=n, tau=args.tau, distribution=args.dist, seed=seed)
        a = sample_random(spec)
        if args.mode == "a":
            matrix, label = a, f"a-n{n}-tau{args.tau}-seed{seed}"
        else:
            family = _family(args.family, args.mu, seed ^ 0x5EED, args.matrix)
            d = make_deterministic(family, n)
            if args.mode == "d+a":
                matrix, label = d + a, f"sum-{args.family}-n{n}-seed{seed}"
            else:
                matrix, label = d @ a, f"product-{args.family}-n{n}-seed{seed}"
    eigs = linalg.eigenvalues(matrix)
    eig_path = outdir / f"eigs-{label}.csv"
    experiments.write_samples(eigs, eig_path)
    print(f"wrote {eig_path} ({eigs.size} eigenvalues)")
    if args.write_matrix:
        mat_path = outdir / f"matrix-{label}.csv"
        linalg.save_matrix_csv(matrix, mat_path)
        print(f"wrote {mat_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    outdir = _outdir(args.outdir)
    spec = _parse_grid(args.grid) if args.grid else experiments.GridSpec()
    family = _family(args.family, args.mu, args.seed, args.matrix)
    gd, gdinv = family_green_evaluators(family, n=args.n)
    cfg_kwargs = {}
    if args.eps_min is not None:
        cfg_kwargs["eps_min"] = args.eps_min
    if args.max_iter is not None:
        cfg_kwargs["max_iter"] = args.max_iter
    cfg = laws.SolveConfig(**cfg_kwargs)
    centers = spec.centers()
    rho, in_support, _, failed = laws.predict_density_grid(
        args.rule, gd, gdinv, args.tau, centers, cfg,
        norm_bound=family.norm_bound, on_failure="mask",
    )
    grid = experiments.DensityGrid(spec=spec, rho=rho, in_support=in_support & ~failed)
    grid_path = outdir / f"predicted-{args.rule}-{args.family}.csv"
    experiments.write_grid(grid, grid_path)
    print(f"wrote {grid_path}")
    if args.svg:
        radii = np.abs(centers).ravel()
        order = np.argsort(radii)
        svg_path = outdir / f"predicted-{args.rule}-{args.family}.svg"
        edges = np.linspace(0, radii.max(), 41)
        idx = np.clip(np.digitize(radii, edges) - 1, 0, 39)
        profile = np.zeros(40)
        for k in range(40):
            sel = idx == k
            profile[k] = rho.ravel()[sel].mean() if sel.any() else 0.0
        experiments.svg_overlay(
            svg_path, edges, profile, radii[order], rho.ravel()[order],
            title=f"{args.rule} rule, {args.family} family",
        )
        print(f"wrote {svg_path}")
    if failed.any():
        print(f"{int(failed.sum())} grid cells failed to converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_green(args) -> int:
    lam = _parse_complex(args.lam)
    if args.eps <= 0:
        raise UsageError("--eps must be positive")
    if args.matrix:
        x = linalg.load_matrix_csv(args.matrix)
    else:
        n = args.n if args.n is not None else 10
        x = make_deterministic(_family(args.family, args.mu, args.seed, None), n)
    q = Quaternion(lam, args.eps)
    g = greens.green(x, q)
    rho = greens.rho_eps(x, lam, args.eps)
    print(f"G({lam.real:g}{lam.imag:+g}i + {args.eps:g}j) = "
          f"({g.a.real:.12g}{g.a.imag:+.12g}i) + ({g.b.real:.12g}{g.b.imag:+.12g}i) j")
    print(f"|G| = {g.norm():.12g} (bound 1/eps = {1 / args.eps:g})")
    print(f"rho_eps = {rho:.12g}")
    return EXIT_OK


def _verify_figure1(args, outdir: Path) -> tuple[bool, list[str]]:
    n = args.n if args.n is not None else 10_000
    report = experiments.figure1_reproduction(n, args.seed)
    # KS noise scales like 1/sqrt(n); 0.02 was frozen at n = 10000.
    threshold = THRESHOLDS["figure1_ks"] * max(1.0, (10_000 / n) ** 0.5)
    ok = report.ks_radial < threshold
    experiments.write_report(report, outdir / "verify-figure1.json")
    return ok, [f"ks={report.ks_radial:.5f} threshold={threshold:.4f}"]


def _perturbation_case(case: str, n: int) -> np.ndarray:
    if case == "zero":
        return np.zeros((n, n), dtype=complex)
    if case == "diag":
        return np.diag(np.where(np.arange(n) % 2 == 0, 1.0, -1.0).astype(complex))
    if case == "jordan":
        return np.diag(np.ones(n - 1, dtype=complex), k=1)
    raise UsageError(f"unknown case {case!r}")


def _verify_perturbation(args, outdir: Path) -> tuple[bool, list[str]]:
    n = args.n if args.n is not None else 50
    x = _perturbation_case(args.case, n)
    grid = experiments.GridSpec(*experiments.PERTURBATION_GRIDS[args.case])
    workers = args.workers if args.workers else os.cpu_count() or 1
    report = experiments.perturbation_check(
        x, args.eps, args.trials, args.seed, grid, workers=workers
    )
    threshold = THRESHOLDS["perturbation_tv"][args.case]
    experiments.write_report(report, outdir / f"verify-perturbation-{args.case}.json")
    ok = report.tv_distance < threshold
    return ok, [f"case={args.case} eps={args.eps} tv={report.tv_distance:.5f} threshold={threshold}"]


def _verify_self_averaging(args, outdir: Path) -> tuple[bool, list[str]]:
    template = EnsembleSpec(n=50, tau=args.tau, distribution=args.dist, seed=args.seed)
    rows, slope = experiments.self_averaging_probe(template, Quaternion(0.0, 2.0))
    lo, hi = THRESHOLDS["self_averaging_slope"]
    ok = lo <= slope <= hi
    report = experiments.ComparisonReport(
        n_samples=int(rows[:, 0].sum()) * 50,
        metadata={
            "experiment": "self-averaging",
            "slope": repr(slope),
            "variances": json.dumps(rows.tolist()),
        },
    )
    experiments.write_report(report, outdir / "verify-self-averaging.json")
    return ok, [f"slope={slope:.3f} allowed=[{lo},{hi}]"]


def _verify_elliptic(args, outdir: Path) -> tuple[bool, list[str]]:
    n = args.n if args.n is not None else 2000
    spec = EnsembleSpec(n=n, tau=args.tau, distribution=args.dist, seed=args.seed)
    eigs = linalg.eigenvalues(sample_random(spec))
    tau = args.tau
    u = eigs.real / (1.0 + tau) + 1j * eigs.imag / (1.0 - tau)
    inside = np.abs(u) ** 2 <= 1.05
    frac = inside.mean()
    details = [f"tau={tau} dist={spec.distribution} inside_1.05={frac:.4f}"]
    ok = frac >= THRESHOLDS["elliptic_inside"]
    # Interior annuli in scaled coordinates (edges stay 0.15 from the rim).
    edges = np.array([0.0, 0.3, 0.5, 0.7, 0.85])
    area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2) * (1.0 + tau) * (1.0 - tau)
    expected = n * area * laws.elliptic_density(0.0, tau)
    r = np.abs(u)
    counts = np.array([((r >= lo) & (r < hi)).sum() for lo, hi in zip(edges[:-1], edges[1:])])
    rel = np.abs(counts / expected - 1.0)
    details.append("annuli rel err " + ",".join(f"{v:.3f}" for v in rel))
    ok = ok and rel.max() < THRESHOLDS["elliptic_rel_err"]
    report = experiments.ComparisonReport(
        n_samples=n,
        metadata={"experiment": "elliptic", "tau": repr(tau), "inside": repr(float(frac)),
                  "annuli_rel_err": json.dumps(rel.tolist()), "seed": str(args.seed)},
    )
    experiments.write_report(report, outdir / f"verify-elliptic-tau{tau}-{spec.distribution}.json")
    return ok, details


def _verify_stephanov(args, outdir: Path) -> tuple[bool, list[str]]:
    n = args.n if args.n is not None else 2000
    mu = args.mu
    eigs = linalg.eigenvalues(sample_stephanov(n, mu, args.seed))
    rel_errs = stephanov_band_errors(eigs, n, mu)
    probes_in = [0.5j, 0.25j, -0.5j, 0.1 + 0.4j, -0.1 + 0.6j]
    probes_out = [2j, -2j, 1.5 + 0.5j, 0.95j, 3.0 + 0j]
    sign_ok = all(laws.stephanov_support(z, mu) for z in probes_in) and not any(
        laws.stephanov_support(z, mu) for z in probes_out
    )
    profile_ok = max(rel_errs) < THRESHOLDS["stephanov_rel_err"]
    details = [
        f"mu={mu} strip rel errs " + ",".join(f"{v:.3f}" for v in rel_errs),
        f"support probes ok={sign_ok}",
    ]
    report = experiments.ComparisonReport(
        n_samples=n,
        metadata={"experiment": "stephanov", "mu": repr(mu), "seed": str(args.seed),
                  "strip_rel_err": json.dumps(rel_errs)},
    )
    experiments.write_report(report, outdir / "verify-stephanov.json")
    return profile_ok and sign_ok, details


STEPHANOV_BAND_EDGES = (0.4, 0.55, 0.7, 0.8)
STEPHANOV_STRIP = 0.7


def stephanov_band_errors(eigs: np.ndarray, n: int, mu: float) -> list[float]:
    """Relative band-count errors of the imaginary-axis density profile.

    Counts eigenvalues with |Re| <= STEPHANOV_STRIP in |Im| bands interior
    to the support lobes and compares against the band-integrated closed
    form (both lobes pooled; bands stay clear of the support edges where
    finite-size smearing dominates).
    """
    from scipy.integrate import quad

    ys = np.abs(eigs.imag[np.abs(eigs.real) <= STEPHANOV_STRIP])
    edges = STEPHANOV_BAND_EDGES
    errs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        integral = quad(lambda y: laws.stephanov_density(1j * y, mu).rho, lo, hi)[0]
        predicted = 2.0 * (2.0 * STEPHANOV_STRIP) * integral * n
        count = int(((ys >= lo) & (ys < hi)).sum())
        errs.append(abs(count / predicted - 1.0))
    return errs


def _verify_cauchy_product(args, outdir: Path) -> tuple[bool, list[str]]:
    family = DeterministicFamily.cauchy_diagonal(args.seed)
    gd, gdinv = family_green_evaluators(family)
    cfg = laws.SolveConfig(max_iter=400_000)
    errs = []
    for lam in (1.0 + 0j, 0.5 + 0.5j, 2.0 + 0j, -1.5 + 0.2j):
        predicted = laws.predict_density("product", gd, gdinv, 0.0, lam, cfg).rho
        errs.append(abs(predicted - laws.cauchy_product_density(lam)))
    ok = max(errs) < THRESHOLDS["cauchy_product_abs_err"]
    report = experiments.ComparisonReport(
        metadata={"experiment": "cauchy-product", "abs_errs": json.dumps(errs)},
    )
    experiments.write_report(report, outdir / "verify-cauchy-product.json")
    return ok, ["abs errs " + ",".join(f"{v:.2e}" for v in errs)]


def _verify_spherical(args, outdir: Path) -> tuple[bool, list[str]]:
    n = args.n if args.n is not None else 100
    draws = args.draws
    pooled = np.concatenate(
        [linalg.eigenvalues(sample_ratio(n, args.seed ^ k)) for k in range(draws)]
    )
    values = np.abs(pooled)
    ks = _ks_against_cdf(np.sort(values), laws.spherical_radial_cdf)
    ok = ks < THRESHOLDS["spherical_ks"]
    report = experiments.ComparisonReport(
        ks_radial=ks, n_samples=pooled.size,
        metadata={"experiment": "spherical", "n": str(n), "draws": str(draws)},
    )
    experiments.write_report(report, outdir / "verify-spherical.json")
    return ok, [f"ks={ks:.5f} threshold={THRESHOLDS['spherical_ks']}"]


def _ks_against_cdf(sorted_values: np.ndarray, cdf) -> float:
    n = sorted_values.size
    f = np.asarray(cdf(sorted_values), dtype=float)
    steps = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(f - steps)), np.max(np.abs(f - steps + 1.0 / n))))


def cmd_verify(args) -> int:
    outdir = _outdir(args.outdir)
    handlers = {
        "figure1": _verify_figure1,
        "perturbation": _verify_perturbation,
        "self-averaging": _verify_self_averaging,
        "elliptic": _verify_elliptic,
        "stephanov": _verify_stephanov,
        "cauchy-product": _verify_cauchy_product,
        "spherical": _verify_spherical,
    }
    ok, details = handlers[args.experiment](args, outdir)
    status = "PASS" if ok else "FAIL"
    for line in details:
        print(f"[{args.experiment}] {line}")
    print(f"[{args.experiment}] {status}")
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize other codes.
        return int(exc.code) if exc.code else EXIT_OK
    try:
        args = _merge_config(args)
        if args.command == "sample":
            return cmd_sample(args)
        if args.command == "predict":
            return cmd_predict(args)
        if args.command == "green":
            return cmd_green(args)
        if args.command == "verify":
            return cmd_verify(args)
        raise UsageError(f"unknown command {args.command!r}")
    except (UsageError, UnsupportedCombinationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
