"""Finite-dimensional model of X, X* and GL(X).

X is R^d with the Euclidean pairing, so X* is again R^d and the adjoint of
an operator is its transpose.  Everything here is plain linear algebra.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DimensionError, PreconditionError

GL_TOL = 1e-10


def as_vector(x, d: int | None = None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x))
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise DimensionError(f"expected length {d}, got {v.shape[0]}")
    if v.dtype != object and not np.all(np.isfinite(v)):
        raise DimensionError("vector has non-finite entries")
    return v


def pairing(x, f) -> float:
    """<x, f> = sum_i x_i f_i."""
    x = as_vector(x)
    f = as_vector(f)
    if x.shape != f.shape:
        raise DimensionError(f"pairing of length {x.shape[0]} with {f.shape[0]}")
    return x @ f


@dataclass(frozen=True, eq=False)
class LinearOp:
    matrix: np.ndarray
    _inv: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be square, got shape {m.shape}")
        if m.dtype != object:
            m = m.astype(float)
            if not np.all(np.isfinite(m)):
                raise DimensionError("operator has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, d: int) -> "LinearOp":
        return cls(np.eye(d))

    @classmethod
    def scalar(cls, c: float, d: int) -> "LinearOp":
        return cls(c * np.eye(d))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def T(self) -> np.ndarray:
        return self.matrix.T

    @property
    def cond_estimate(self) -> float:
        s = np.linalg.svd(self.matrix.astype(float), compute_uv=False)
        return float(np.inf if s[-1] == 0 else s[0] / s[-1])

    @property
    def inverse(self) -> np.ndarray | None:
        return self._inv[0] if self._inv else None

    def apply(self, x) -> np.ndarray:
        return self.matrix @ as_vector(x, self.d)

    def __matmul__(self, other):
        if isinstance(other, LinearOp):
            return LinearOp(self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other: "LinearOp") -> "LinearOp":
        return LinearOp(self.matrix + other.matrix)

    def __sub__(self, other: "LinearOp") -> "LinearOp":
        return LinearOp(self.matrix - other.matrix)

    def __neg__(self) -> "LinearOp":
        return LinearOp(-self.matrix)

    def __rmul__(self, c) -> "LinearOp":
        return LinearOp(c * self.matrix)

    def __eq__(self, other):
        return isinstance(other, LinearOp) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def to_list(self) -> list:
        return self.matrix.tolist()


def adjoint(A: LinearOp) -> LinearOp:
    return LinearOp(A.matrix.T.copy())


def check_invertible(A: LinearOp, tol: float = GL_TOL) -> bool:
    """True iff sigma_min > tol * sigma_max; caches the inverse when true.

    The threshold is relative to the largest singular value, so the zero
    matrix is never invertible.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = A.matrix
    exact = m.dtype == object
    s = np.linalg.svd(m.astype(float), compute_uv=False)
    if s[0] == 0.0 or s[-1] <= tol * s[0]:
        return False
    if not A._inv:
        A._inv.append(_exact_inverse(m) if exact else np.linalg.inv(m))
    return True


def inverse(A: LinearOp, name: str = "operator", tol: float = GL_TOL) -> np.ndarray:
    if not check_invertible(A, tol):
        raise PreconditionError(f"{name} is not invertible", where=name)
    return A.inverse


def _exact_inverse(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan over whatever exact scalar type the matrix holds."""
    n = m.shape[0]
    a = [[m[i, j] for j in range(n)] + [1 if i == j else 0 for j in range(n)] for i in range(n)]
    for c in range(n):
        p = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [v / piv for v in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                k = a[r][c]
                a[r] = [vr - k * vc for vr, vc in zip(a[r], a[c])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = a[i][n + j]
    return out


def reduce_operators(A: Sequence[LinearOp], B: Sequence[LinearOp], tol: float = GL_TOL) -> list[LinearOp]:
    """C_j = B_j A_j^{-1}, the coefficients after putting xi'_j = A_j xi_j."""
    if len(A) != len(B):
        raise DimensionError("operator lists differ in length")
    out = []
    for j, (a, b) in enumerate(zip(A, B), start=1):
        inv = inverse(a, f"A_{j}", tol)
        inverse(b, f"B_{j}", tol)
        out.append(LinearOp(b.matrix @ inv))
    return out


def heyde_failures(A: Sequence[LinearOp], B: Sequence[LinearOp], tol: float = GL_TOL) -> list[tuple[int, int, str]]:
    """Pairs (i, j), 1-based, with the sign for which B_iA_i^-1 +/- B_jA_j^-1 is singular."""
    if len(A) != len(B):
        raise DimensionError("operator lists differ in length")
    if len(A) < 2:
        raise PreconditionError("need at least two operators", where="n")
    C = reduce_operators(A, B, tol)
    bad = []
    for i, j in combinations(range(len(C)), 2):
        if not check_invertible(C[i] + C[j], tol):
            bad.append((i + 1, j + 1, "+"))
        if not check_invertible(C[i] - C[j], tol):
            bad.append((i + 1, j + 1, "-"))
    return bad


def check_heyde_condition(A: Sequence[LinearOp], B: Sequence[LinearOp], tol: float = GL_TOL) -> bool:
    return not heyde_failures(A, B, tol)


def operator_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))
