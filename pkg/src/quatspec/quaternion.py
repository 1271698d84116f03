"""Quaternions in complex-pair form a + bj.

A quaternion is stored as two complex numbers (a, b).  The 2x2 matrix
representation

    M(a + bj) = [[a, i*b], [i*conj(b), conj(a)]]

is a ring isomorphism; the closed-form product and inverse below are derived
from it once and the matrix form is kept only as a test oracle.  The norm
|q| = sqrt(|a|^2 + |b|^2) coincides with the spectral norm of M(q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Quaternion",
    "ONE",
    "J",
    "q_mul",
    "q_inv",
    "q_dot",
    "q_norm",
]


class SingularQuaternionError(ZeroDivisionError):
    """Inversion of the zero quaternion."""


@dataclass(frozen=True)
class Quaternion:
    """Immutable quaternion a + bj with complex components a, b."""

    a: complex
    b: complex = 0j

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))

    # -- algebra ------------------------------------------------------------

    def __add__(self, other: "Quaternion") -> "Quaternion":
        other = _coerce(other)
        return Quaternion(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        other = _coerce(other)
        return Quaternion(self.a - other.a, self.b - other.b)

    def __rsub__(self, other) -> "Quaternion":
        return _coerce(other) - self

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.a, -self.b)

    def __mul__(self, other) -> "Quaternion":
        # (a+bj)(c+dj) = (ac - b*conj(d)) + (ad + b*conj(c)) j,
        # the product induced by M(p)M(q).  Noncommutative.
        other = _coerce(other)
        c, d = other.a, other.b
        return Quaternion(
            self.a * c - self.b * d.conjugate(),
            self.a * d + self.b * c.conjugate(),
        )

    def __rmul__(self, other) -> "Quaternion":
        return _coerce(other) * self

    def dot(self, other: "Quaternion") -> "Quaternion":
        """Elementwise product (a+bj).(c+dj) = ac + bd j.

        This is not the product of the matrix representations; it is the
        separate componentwise product used in terms like t.G.
        """
        other = _coerce(other)
        return Quaternion(self.a * other.a, self.b * other.b)

    def inv(self) -> "Quaternion":
        """Multiplicative inverse (conj(a) - bj) / (|a|^2 + |b|^2)."""
        n2 = abs(self.a) ** 2 + abs(self.b) ** 2
        if n2 == 0.0:
            raise SingularQuaternionError("cannot invert the zero quaternion")
        return Quaternion(self.a.conjugate() / n2, -self.b / n2)

    def conjugate(self) -> "Quaternion":
        """Quaternion conjugate conj(a) - bj; M(q*) = M(q)^H."""
        return Quaternion(self.a.conjugate(), -self.b)

    def norm(self) -> float:
        return float(np.hypot(abs(self.a), abs(self.b)))

    __abs__ = norm

    # -- matrix representation ----------------------------------------------

    def to_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.a, 1j * self.b],
                [1j * self.b.conjugate(), self.a.conjugate()],
            ]
        )

    @classmethod
    def from_matrix(cls, m: np.ndarray, tol: float = 1e-9) -> "Quaternion":
        """Inverse of to_matrix; rejects matrices off the representation set."""
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        a, b = m[0, 0], m[0, 1] / 1j
        scale = max(1.0, abs(a), abs(b))
        if (
            abs(m[1, 1] - a.conjugate()) > tol * scale
            or abs(m[1, 0] - 1j * b.conjugate()) > tol * scale
        ):
            raise ValueError("matrix does not represent a quaternion")
        return cls(a, b)

    def __repr__(self) -> str:
        return f"Quaternion({self.a!r}, {self.b!r})"


def _coerce(value) -> Quaternion:
    if isinstance(value, Quaternion):
        return value
    if isinstance(value, (int, float, complex)):
        return Quaternion(complex(value), 0j)
    raise TypeError(f"cannot interpret {type(value).__name__} as a quaternion")


ONE = Quaternion(1.0, 0.0)
J = Quaternion(0.0, 1.0)


def q_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    return _coerce(p) * q


def q_inv(q: Quaternion) -> Quaternion:
    return _coerce(q).inv()


def q_dot(p: Quaternion, q: Quaternion) -> Quaternion:
    return _coerce(p).dot(_coerce(q))


def q_norm(q: Quaternion) -> float:
    return _coerce(q).norm()
