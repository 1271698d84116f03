"""Dense complex matrix support: doubling, solves, eigenvalues.

The doubled operator of an N x N matrix X at quaternion q is the 2N x 2N
matrix whose (i, j) block is

    [[X_ij, 0], [0, conj(X_ji)]] - delta_ij * M(q),

stored in interleaved layout (rows 2i, 2i+1 belong to block row i).  A
permutation conjugates this to the familiar two-block Hermitianized form;
only the interleaved form is ever materialized here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .quaternion import Quaternion

__all__ = [
    "as_matrix",
    "load_matrix_csv",
    "save_matrix_csv",
    "DoubledOperator",
    "build_doubled",
    "solve_doubled",
    "eigenvalues",
    "spectral_norm",
]

# Pivots below this magnitude are treated as exact singularity.
_PIVOT_FLOOR = 1e-300


class SingularOperatorError(np.linalg.LinAlgError):
    """Doubled operator is numerically singular (eps = 0 on an eigenvalue)."""


class MatrixFormatError(ValueError):
    """Malformed matrix CSV file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def as_matrix(x) -> np.ndarray:
    """Validate and return a square complex matrix with finite entries."""
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix from CSV rows `row,col,re,im` (zero-based, sparse).

    Missing entries are zero; the dimension is one past the largest index.
    """
    entries: list[tuple[int, int, complex]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["row", "col", "re", "im"]:
            raise MatrixFormatError("expected header 'row,col,re,im'", line=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != 4:
                raise MatrixFormatError(f"expected 4 fields, got {len(rec)}", line=lineno)
            try:
                i, j = int(rec[0]), int(rec[1])
                v = complex(float(rec[2]), float(rec[3]))
            except ValueError as exc:
                raise MatrixFormatError(str(exc), line=lineno) from None
            if i < 0 or j < 0:
                raise MatrixFormatError("negative index", line=lineno)
            entries.append((i, j, v))
    if not entries:
        raise MatrixFormatError("no matrix entries")
    n = 1 + max(max(i, j) for i, j, _ in entries)
    m = np.zeros((n, n), dtype=complex)
    for i, j, v in entries:
        m[i, j] = v
    return as_matrix(m)


def save_matrix_csv(x, path) -> None:
    m = as_matrix(x)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "re", "im"])
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                v = m[i, j]
                if v != 0:
                    writer.writerow([i, j, repr(v.real), repr(v.imag)])


@dataclass
class DoubledOperator:
    """The 2N x 2N matrix (X_doubled - q), materialized in interleaved layout."""

    source: np.ndarray
    q: Quaternion
    matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.source.shape[0]


def build_doubled(x, q: Quaternion) -> DoubledOperator:
    """Assemble (X_doubled - q) for a square matrix X and quaternion q."""
    x = as_matrix(x)
    n = x.shape[0]
    m = np.zeros((2 * n, 2 * n), dtype=complex)
    m[0::2, 0::2] = x
    m[1::2, 1::2] = x.conj().T
    idx = np.arange(n)
    m[2 * idx, 2 * idx] -= q.a
    m[2 * idx + 1, 2 * idx + 1] -= q.a.conjugate()
    m[2 * idx, 2 * idx + 1] -= 1j * q.b
    m[2 * idx + 1, 2 * idx] -= 1j * q.b.conjugate()
    return DoubledOperator(source=x, q=q, matrix=m)


def solve_doubled(op: DoubledOperator, rhs: np.ndarray) -> np.ndarray:
    """Solve (X_doubled - q) x = rhs by dense LU with partial pivoting.

    Refines the solution until the residual is below 1e-10 * ||rhs|| and,
    when the hypercomplex part of q is nonzero, enforces the resolvent bound
    ||x|| <= ||rhs|| / |b|.
    """
    a = op.matrix
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[0] != a.shape[0]:
        raise ValueError(f"rhs has leading dimension {rhs.shape[0]}, expected {a.shape[0]}")
    lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < _PIVOT_FLOOR:
        raise SingularOperatorError(
            f"doubled operator is singular (smallest pivot {pivots.min():.3e}); "
            "eps = 0 with lambda on the spectrum is not solvable"
        )
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    rhs_norm = np.linalg.norm(rhs)
    # One LU pass is backward stable but the residual target is absolute;
    # iterative refinement reuses the factorization.
    for _ in range(3):
        resid = a @ x - rhs
        if np.linalg.norm(resid) <= 1e-10 * rhs_norm:
            break
        x -= scipy.linalg.lu_solve((lu, piv), resid, check_finite=False)
    eps = abs(op.q.b)
    if eps > 0:
        bound = rhs_norm / eps * (1.0 + 1e-8)
        if np.linalg.norm(x) > bound:
            raise AssertionError(
                f"resolvent bound violated: ||x|| = {np.linalg.norm(x):.6e} "
                f"> ||rhs|| / eps = {bound:.6e}"
            )
    return x


def eigenvalues(x) -> np.ndarray:
    """All N eigenvalues (with multiplicity) of a square complex matrix."""
    x = as_matrix(x)
    try:
        w = np.linalg.eigvals(x)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue iteration failed: {exc}") from exc
    return w


def spectral_norm(x) -> float:
    """Largest singular value."""
    x = as_matrix(x)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))
