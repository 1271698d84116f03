"""Verification harness: histograms, comparison metrics, reference runs.

Predictions are checked against Monte Carlo eigenvalue experiments with two
metrics: binned total variation distance on a shared window, and the
Kolmogorov-Smirnov distance between an empirical radial (or log-modulus)
marginal and a predicted CDF obtained by quadrature.  Every tolerance used
by the verification commands was frozen from a recorded calibration run;
seeds and configuration are echoed into each report.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import greens, laws, linalg
from .ensembles import DeterministicFamily, EnsembleSpec, make_deterministic, sample_random
from .quaternion import Quaternion

__all__ = [
    "GridSpec",
    "DensityGrid",
    "ComparisonReport",
    "eigen_histogram",
    "density_on_grid",
    "compare",
    "ks_distance",
    "figure1_reproduction",
    "self_averaging_probe",
    "perturbation_check",
    "write_report",
    "read_report",
    "write_grid",
    "read_grid",
    "write_samples",
    "read_samples",
    "svg_overlay",
]

REPORT_SCHEMA_VERSION = 1

# Default comparison windows.  Histogram grids default to 101x101 on
# [-3, 3]^2; radial and log-modulus marginals use 200 bins.
DEFAULT_GRID = (-3.0, 3.0, -3.0, 3.0, 101, 101)
MARGINAL_BINS = 200

# Frozen comparison grids for the perturbation experiments, sized so that
# Monte Carlo cell noise plus cell-center bias stays well inside the
# thresholds at 200 trials x N=50 (calibration seeds 101/202 gave TV in
# 0.021..0.035 across eps in {0.5, 1} for every case).
PERTURBATION_GRIDS = {
    "zero": (-1.5, 1.5, -1.5, 1.5, 9, 9),
    "diag": (-2.0, 2.0, -1.0, 1.0, 16, 8),
    "jordan": (-1.6, 1.6, -1.6, 1.6, 9, 9),
}


class GridMismatchError(ValueError):
    """Total variation requires identical grid specifications."""


class ReportFormatError(ValueError):
    """Malformed report or grid file."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class GridSpec:
    re_min: float = -3.0
    re_max: float = 3.0
    im_min: float = -3.0
    im_max: float = 3.0
    nx: int = 101
    ny: int = 101

    def __post_init__(self) -> None:
        if self.re_max <= self.re_min or self.im_max <= self.im_min:
            raise ValueError("window must have positive extent")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one cell per axis")

    @property
    def dx(self) -> float:
        return (self.re_max - self.re_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.im_max - self.im_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def centers(self) -> np.ndarray:
        """nx x ny array of cell-center points as complex numbers."""
        xs = self.re_min + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.im_min + (np.arange(self.ny) + 0.5) * self.dy
        return xs[:, None] + 1j * ys[None, :]


@dataclass
class DensityGrid:
    """Density values on the cells of a rectangular window."""

    spec: GridSpec
    rho: np.ndarray
    in_support: np.ndarray

    def __post_init__(self) -> None:
        shape = (self.spec.nx, self.spec.ny)
        self.rho = np.asarray(self.rho, dtype=float)
        self.in_support = np.asarray(self.in_support, dtype=bool)
        if self.rho.shape != shape or self.in_support.shape != shape:
            raise ValueError(f"arrays must have shape {shape}")
        if not np.all(np.isfinite(self.rho)) or np.any(self.rho < 0):
            raise ValueError("density values must be finite and nonnegative")


@dataclass
class ComparisonReport:
    tv_distance: float = 0.0
    ks_radial: float = 0.0
    n_samples: int = 0
    bins: int = 0
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.tv_distance <= 2.0:
            raise ValueError(f"tv out of range: {self.tv_distance}")
        if not 0.0 <= self.ks_radial <= 1.0:
            raise ValueError(f"ks out of range: {self.ks_radial}")


def eigen_histogram(samples, spec: GridSpec) -> tuple[DensityGrid, float]:
    """Bin samples into a density grid; returns (grid, out-of-window fraction).

    Cell values are count / (n_total * cell_area), so the grid integrates to
    the fraction of samples inside the window.
    """
    samples = np.asarray(samples, dtype=complex).ravel()
    if samples.size == 0:
        raise ValueError("no samples to bin")
    counts, _, _ = np.histogram2d(
        samples.real,
        samples.imag,
        bins=(spec.nx, spec.ny),
        range=((spec.re_min, spec.re_max), (spec.im_min, spec.im_max)),
    )
    inside = counts.sum()
    rho = counts / (samples.size * spec.cell_area)
    grid = DensityGrid(spec=spec, rho=rho, in_support=counts > 0)
    return grid, float(1.0 - inside / samples.size)


def density_on_grid(fn, spec: GridSpec) -> DensityGrid:
    """Evaluate a pointwise density lambda -> rho at the cell centers."""
    centers = spec.centers()
    rho = np.empty(centers.shape, dtype=float)
    flat = centers.ravel()
    out = np.array([fn(z) for z in flat], dtype=float)
    rho[:, :] = out.reshape(centers.shape)
    return DensityGrid(spec=spec, rho=np.maximum(rho, 0.0), in_support=rho > 0)


def compare(
    empirical: DensityGrid,
    predicted,
    samples=None,
    radial_pdf=None,
    log_modulus: bool = False,
    metadata: dict[str, str] | None = None,
) -> ComparisonReport:
    """TV between grids and/or KS between a sample marginal and a pdf.

    `predicted` may be a DensityGrid (enables TV; specs must match) or None.
    When `samples` and `radial_pdf` are given, the KS distance between the
    empirical |lambda| (or ln|lambda|) distribution and the CDF of the pdf,
    integrated numerically, is reported as well.
    """
    tv = 0.0
    if isinstance(predicted, DensityGrid):
        if predicted.spec != empirical.spec:
            raise GridMismatchError(
                f"grids differ: {empirical.spec} vs {predicted.spec}"
            )
        tv = 0.5 * float(
            np.abs(empirical.rho - predicted.rho).sum() * empirical.spec.cell_area
        )
    elif predicted is not None and radial_pdf is None:
        radial_pdf = predicted
    ks = 0.0
    n_samples = 0
    if samples is not None:
        samples = np.asarray(samples, dtype=complex).ravel()
        n_samples = samples.size
        if radial_pdf is not None:
            values = np.abs(samples)
            if log_modulus:
                values = np.log(values)
            ks = ks_distance(values, radial_pdf)
    return ComparisonReport(
        tv_distance=tv,
        ks_radial=ks,
        n_samples=n_samples,
        bins=empirical.spec.nx * empirical.spec.ny,
        metadata=dict(metadata or {}),
    )


def ks_distance(values, pdf, lo: float | None = None, hi: float | None = None) -> float:
    """Sup distance between the empirical CDF of values and a pdf's CDF.

    The predicted CDF comes from trapezoid quadrature of pdf on a dense grid
    spanning [lo, hi] (default: data range padded by 10 units, enough for the
    exponentially decaying marginals used here).
    """
    values = np.sort(np.asarray(values, dtype=float))
    n = values.size
    if n == 0:
        raise ValueError("no values")
    if lo is None:
        lo = values[0] - 10.0
    if hi is None:
        hi = values[-1] + 10.0
    xs = np.linspace(lo, hi, 200_001)
    cdf = cumulative_trapezoid(np.asarray(pdf(xs), dtype=float), xs, initial=0.0)
    total = cdf[-1]
    if not 0.9 <= total <= 1.1:
        raise ValueError(f"pdf mass over [{lo}, {hi}] is {total:.4f}, not ~1")
    cdf /= total
    f = np.interp(values, xs, cdf)
    steps = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(f - steps)), np.max(np.abs(f - steps + 1.0 / n))))


def figure1_reproduction(n: int, seed: int) -> ComparisonReport:
    """Log-modulus spectrum of one Cauchy-diagonal x Gaussian product draw.

    Samples D * A at size n, computes gamma = ln|lambda_i| and the KS
    distance against the predicted log-modulus pdf.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000 for a meaningful comparison")
    t0 = time.time()
    d = np.diagonal(make_deterministic(DeterministicFamily.cauchy_diagonal(seed), n))
    a = sample_random(EnsembleSpec(n=n, tau=0.0, seed=seed ^ 1))
    eigs = linalg.eigenvalues(d[:, None] * a)
    gammas = np.log(np.abs(eigs))
    ks = ks_distance(gammas, laws.nu_gamma)
    runtime_ms = int(1000 * (time.time() - t0))
    return ComparisonReport(
        ks_radial=ks,
        n_samples=n,
        bins=MARGINAL_BINS,
        metadata={
            "experiment": "figure1",
            "n": str(n),
            "seed": str(seed),
            "runtime_ms": str(runtime_ms),
            "calibration": "seed=3, n=10000 gave ks=0.0061; threshold 0.02",
        },
    )


def self_averaging_probe(
    template: EnsembleSpec,
    q: Quaternion,
    sizes=(50, 100, 200, 400),
    reps: int = 50,
) -> tuple[np.ndarray, float]:
    """Variance of G(q; A_N) across reps at each size, with log-log slope.

    Returns (rows, slope) where rows[k] = (N, variance) and slope is the
    least-squares slope of log(var) against log(N); concentration at rate
    1/N means a slope near -1.
    """
    if reps < 2:
        raise ValueError("need at least 2 repetitions")
    rows = np.empty((len(sizes), 2))
    task = 0
    for k, n in enumerate(sizes):
        values = []
        for _ in range(reps):
            spec = replace(template, n=int(n), seed=template.seed ^ task)
            task += 1
            g = greens.green(sample_random(spec), q)
            values.append([g.a, g.b])
        values = np.array(values)
        center = values.mean(axis=0)
        # E || G - mean G ||^2 with the quaternion norm |a|^2 + |b|^2.
        var = float((np.abs(values - center) ** 2).sum(axis=1).mean())
        rows[k] = (n, var)
    slope = float(np.polyfit(np.log(rows[:, 0]), np.log(rows[:, 1]), 1)[0])
    return rows, slope


def perturbation_check(
    x,
    eps: float,
    trials: int,
    seed: int,
    spec: GridSpec | None = None,
    workers: int = 1,
) -> ComparisonReport:
    """TV between the perturbed-spectrum histogram and the rho_eps grid.

    The comparison grid defaults to 11x11 on [-2, 2]^2, sized so that Monte
    Carlo cell noise at trials*N ~ 1e4 samples stays well under the frozen
    tolerances.
    """
    if spec is None:
        spec = GridSpec(-2.0, 2.0, -2.0, 2.0, 11, 11)
    t0 = time.time()
    samples = greens.perturbation_mc(x, eps, trials, seed, workers=workers)
    empirical, out_fraction = eigen_histogram(samples, spec)
    predicted = density_on_grid(lambda z: greens.rho_eps(x, z, eps), spec)
    report = compare(
        empirical,
        predicted,
        metadata={
            "experiment": "perturbation",
            "eps": repr(eps),
            "trials": str(trials),
            "seed": str(seed),
            "n": str(np.asarray(x).shape[0]),
            "out_fraction": repr(out_fraction),
            "runtime_ms": str(int(1000 * (time.time() - t0))),
        },
    )
    report.n_samples = samples.size
    return report


# -- persistence ---------------------------------------------------------------


def write_report(report: ComparisonReport, path) -> None:
    payload = {
        "version": REPORT_SCHEMA_VERSION,
        "metrics": {"tv": report.tv_distance, "ks": report.ks_radial},
        "n_samples": report.n_samples,
        "bins": report.bins,
        "metadata": report.metadata,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> ComparisonReport:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ReportFormatError(str(exc), line=exc.lineno) from None
    version = payload.get("version")
    if version != REPORT_SCHEMA_VERSION:
        raise ReportFormatError(
            f"schema version {version!r} not supported (expected {REPORT_SCHEMA_VERSION})"
        )
    return ComparisonReport(
        tv_distance=payload["metrics"]["tv"],
        ks_radial=payload["metrics"]["ks"],
        n_samples=payload["n_samples"],
        bins=payload["bins"],
        metadata=dict(payload.get("metadata", {})),
    )


def write_grid(grid: DensityGrid, path) -> None:
    centers = grid.spec.centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "rho", "in_support"])
        for i in range(grid.spec.nx):
            for j in range(grid.spec.ny):
                z = centers[i, j]
                writer.writerow(
                    [repr(z.real), repr(z.imag), repr(grid.rho[i, j]), int(grid.in_support[i, j])]
                )


def read_grid(path) -> DensityGrid:
    res, ims, rhos, sups = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["re", "im", "rho", "in_support"]:
            raise ReportFormatError("expected header 're,im,rho,in_support'", line=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 4:
                raise ReportFormatError(f"expected 4 fields, got {len(rec)}", line=lineno)
            try:
                res.append(float(rec[0]))
                ims.append(float(rec[1]))
                rhos.append(float(rec[2]))
                sups.append(bool(int(rec[3])))
            except ValueError as exc:
                raise ReportFormatError(str(exc), line=lineno) from None
    xs = np.unique(np.array(res))
    ys = np.unique(np.array(ims))
    nx, ny = xs.size, ys.size
    if nx * ny != len(res):
        raise ReportFormatError(f"{len(res)} rows do not form a {nx} x {ny} grid")
    dx = xs[1] - xs[0] if nx > 1 else 1.0
    dy = ys[1] - ys[0] if ny > 1 else 1.0
    spec = GridSpec(
        re_min=float(xs[0] - dx / 2),
        re_max=float(xs[-1] + dx / 2),
        im_min=float(ys[0] - dy / 2),
        im_max=float(ys[-1] + dy / 2),
        nx=nx,
        ny=ny,
    )
    rho = np.empty((nx, ny))
    sup = np.empty((nx, ny), dtype=bool)
    ix = np.searchsorted(xs, res)
    iy = np.searchsorted(ys, ims)
    rho[ix, iy] = rhos
    sup[ix, iy] = sups
    return DensityGrid(spec=spec, rho=rho, in_support=sup)


def write_samples(samples, path) -> None:
    samples = np.asarray(samples, dtype=complex).ravel()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im"])
        for z in samples:
            writer.writerow([repr(z.real), repr(z.imag)])


def read_samples(path) -> np.ndarray:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["re", "im"]:
            raise ReportFormatError("expected header 're,im'", line=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                out.append(complex(float(rec[0]), float(rec[1])))
            except (ValueError, IndexError) as exc:
                raise ReportFormatError(str(exc), line=lineno) from None
    return np.array(out, dtype=complex)


def svg_overlay(
    path,
    bin_edges,
    bar_heights,
    curve_x,
    curve_y,
    title: str = "",
    width: int = 640,
    height: int = 400,
) -> None:
    """Histogram bars with an overlaid curve, written as a standalone SVG."""
    bin_edges = np.asarray(bin_edges, dtype=float)
    bar_heights = np.asarray(bar_heights, dtype=float)
    curve_x = np.asarray(curve_x, dtype=float)
    curve_y = np.asarray(curve_y, dtype=float)
    x_lo, x_hi = bin_edges[0], bin_edges[-1]
    y_hi = 1.05 * max(bar_heights.max(initial=0.0), curve_y.max(initial=0.0), 1e-12)
    margin = 40

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y):
        return height - margin - y / y_hi * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for k, h in enumerate(bar_heights):
        x0, x1 = sx(bin_edges[k]), sx(bin_edges[k + 1])
        y0 = sy(h)
        parts.append(
            f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" '
            f'height="{height - margin - y0:.2f}" fill="#7aa6d6" stroke="none"/>'
        )
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(curve_x, curve_y))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    parts.append(
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>'
    )
    parts.append(f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>')
    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
