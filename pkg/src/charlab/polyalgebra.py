"""Exact polynomial algebra over named blocks of dual variables.

A :class:`BlockPolynomial` lives in a *space*: an ordered tuple of
``(block_name, dim)`` pairs such as ``(("f", 2), ("g", 2))``.  Monomials are
exponent tuples over the flattened variables, coefficients are complex
doubles (dropped below ``COEFF_TOL``) or exact ``int``/``Fraction`` values
(dropped only when exactly zero).

The module also carries :class:`QuadraticExponent`, the exponent
``-i<m,f> + 1/2 <Rf,f>`` of a Gaussian characteristic functional.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from math import comb
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegreeCapError, DimensionError

COEFF_TOL = 1e-12
DEGREE_CAP = 8

Space = tuple[tuple[str, int], ...]


def _exact(c) -> bool:
    return isinstance(c, (int, Fraction)) and not isinstance(c, bool)


def _vanishes(c, tol: float) -> bool:
    if _exact(c):
        return c == 0
    return abs(c) <= tol


def _tidy(c):
    if isinstance(c, (complex, np.complexfloating)):
        c = complex(c)
        return c.real if c.imag == 0 else c
    if isinstance(c, np.floating):
        return float(c)
    if isinstance(c, np.integer):
        return int(c)
    return c


def make_space(*blocks) -> Space:
    """``make_space(("f", 2), ("g", 2))`` or ``make_space("f", "g", d=2)`` style."""
    out = []
    for b in blocks:
        name, dim = b
        out.append((str(name), int(dim)))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise DimensionError(f"duplicate block names in {names}")
    return tuple(out)


def uniform_space(names: Sequence[str], d: int) -> Space:
    return make_space(*[(n, d) for n in names])


class BlockPolynomial:
    __slots__ = ("space", "terms", "_offsets")

    def __init__(self, space: Space, terms: Mapping[tuple, Number] | None = None, tol: float = COEFF_TOL):
        self.space = tuple(space)
        self._offsets = _offsets(self.space)
        nv = self.nvars
        clean = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != nv:
                raise DimensionError(f"monomial {mono} has wrong length for {nv} variables")
            c = _tidy(c)
            if not _vanishes(c, tol):
                clean[mono] = c
        self.terms = clean
        if self.total_degree > DEGREE_CAP:
            raise DegreeCapError(f"total degree {self.total_degree} exceeds cap {DEGREE_CAP}")

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, space: Space) -> "BlockPolynomial":
        return cls(space)

    @classmethod
    def constant(cls, space: Space, c) -> "BlockPolynomial":
        return cls(space, {(0,) * _nvars(space): c})

    @classmethod
    def variable(cls, space: Space, block: str, coord: int) -> "BlockPolynomial":
        mono = [0] * _nvars(space)
        mono[_offsets(space)[block] + coord] = 1
        return cls(space, {tuple(mono): 1})

    @classmethod
    def linear(cls, space: Space, coeffs: Mapping[str, Sequence]) -> "BlockPolynomial":
        """sum over blocks of <coeffs[block], block>."""
        off = _offsets(space)
        nv = _nvars(space)
        terms = {}
        for block, vec in coeffs.items():
            for i, c in enumerate(np.asarray(vec, dtype=object).ravel()):
                mono = [0] * nv
                mono[off[block] + i] = 1
                terms[tuple(mono)] = c
        return cls(space, terms)

    # introspection ------------------------------------------------------
    @property
    def nvars(self) -> int:
        return _nvars(self.space)

    @property
    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    @property
    def is_exact(self) -> bool:
        return all(_exact(c) for c in self.terms.values())

    def block_degree(self, block: str) -> int:
        o = self._offsets[block]
        d = dict(self.space)[block]
        return max((sum(m[o:o + d]) for m in self.terms), default=-1)

    def max_abs_coeff(self) -> float:
        return max((abs(complex(c)) for c in self.terms.values()), default=0.0)

    def top_form(self) -> "BlockPolynomial":
        deg = self.total_degree
        return BlockPolynomial(self.space, {m: c for m, c in self.terms.items() if sum(m) == deg})

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "BlockPolynomial":
        if isinstance(other, BlockPolynomial):
            if other.space != self.space:
                raise DimensionError(f"space mismatch: {self.space} vs {other.space}")
            return other
        return BlockPolynomial.constant(self.space, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out[m] + c if m in out else c
        return BlockPolynomial(self.space, out)

    __radd__ = __add__

    def __neg__(self):
        return BlockPolynomial(self.space, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, BlockPolynomial):
            return BlockPolynomial(self.space, {m: c * other for m, c in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out[m] + c1 * c2 if m in out else c1 * c2
        return BlockPolynomial(self.space, out)

    def __rmul__(self, other):
        return self * other

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = BlockPolynomial.constant(self.space, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, BlockPolynomial):
            return NotImplemented
        return self.space == other.space and self.terms == other.terms

    __hash__ = None

    # evaluation ---------------------------------------------------------
    def flatten_point(self, point) -> np.ndarray:
        if isinstance(point, Mapping):
            parts = []
            for name, dim in self.space:
                parts.append(np.asarray(point[name], dtype=object if _any_exact(point[name]) else complex).reshape(dim))
            return np.concatenate(parts) if parts else np.zeros(0)
        v = np.asarray(point)
        if v.shape[-1] != self.nvars:
            raise DimensionError(f"point has {v.shape[-1]} coords, expected {self.nvars}")
        return v

    def evaluate(self, point):
        """Term-by-term evaluation at one point (dict of blocks or flat vector)."""
        x = self.flatten_point(point)
        total = 0
        for m, c in self.terms.items():
            t = c
            for v, e in enumerate(m):
                if e:
                    t = t * x[v] ** e
            total = total + t
        return total

    def evaluate_many(self, Z) -> np.ndarray:
        """Vectorised evaluation at the rows of ``Z`` (shape ``(P, nvars)``)."""
        Z = np.asarray(Z)
        if Z.ndim == 1:
            Z = Z[None, :]
        if Z.shape[1] != self.nvars:
            raise DimensionError(f"points have {Z.shape[1]} coords, expected {self.nvars}")
        out = np.zeros(Z.shape[0], dtype=complex)
        for m, c in self.terms.items():
            t = np.full(Z.shape[0], complex(c))
            for v, e in enumerate(m):
                if e:
                    t = t * Z[:, v] ** e
            out += t
        return out

    def __call__(self, point):
        return self.evaluate(point)

    # structure ----------------------------------------------------------
    def embed(self, space: Space) -> "BlockPolynomial":
        """Same polynomial viewed in a larger space containing all its blocks."""
        dims = dict(space)
        assignment = {}
        for name, dim in self.space:
            if dims.get(name) != dim:
                raise DimensionError(f"block {name!r} missing from target space")
            assignment[name] = Affine.of((name, np.eye(dim, dtype=int)))
        return compose_affine(self, assignment, space)

    def __str__(self) -> str:
        return format_polynomial(self)

    def __repr__(self) -> str:
        return f"BlockPolynomial({self.space}, {format_polynomial(self)!r})"


def _any_exact(v) -> bool:
    arr = np.asarray(v, dtype=object).ravel()
    return any(_exact(c) for c in arr) and all(_exact(c) for c in arr)


def _nvars(space: Space) -> int:
    return sum(d for _, d in space)


def _offsets(space: Space) -> dict[str, int]:
    out, o = {}, 0
    for name, d in space:
        out[name] = o
        o += d
    return out


# ---------------------------------------------------------------------------
# affine substitution and finite differences


@dataclass(frozen=True)
class Affine:
    """x = sum_k M_k y_{block_k} + shift, for one source block.

    ``parts`` pairs a target block name with the matrix acting on it; a
    matrix of shape ``(d_source, d_target)`` or a scalar (times identity).
    """

    parts: tuple
    shift: object = None

    @classmethod
    def of(cls, *parts, shift=None) -> "Affine":
        return cls(tuple(parts), shift)


def _as_matrix(M, rows: int, cols: int) -> np.ndarray:
    if np.isscalar(M) or isinstance(M, Fraction):
        if rows != cols:
            raise DimensionError("scalar coefficient needs equal block dimensions")
        out = np.zeros((rows, cols), dtype=object)
        for i in range(rows):
            out[i, i] = M
        return out
    M = np.asarray(getattr(M, "matrix", M))
    if M.shape != (rows, cols):
        raise DimensionError(f"affine block has shape {M.shape}, expected {(rows, cols)}")
    return M


def compose_affine(p: BlockPolynomial, assignment: Mapping[str, Affine], space: Space | None = None) -> BlockPolynomial:
    """Exact substitution of affine expressions for the blocks of ``p``.

    ``assignment[b]`` expresses source block ``b`` in terms of the blocks of
    ``space`` (defaults to ``p.space``).  Blocks left out of ``assignment``
    map to the same-named block of the target space.
    """
    space = p.space if space is None else tuple(space)
    tdims = dict(space)
    linears: list[BlockPolynomial] = []
    for name, dim in p.space:
        aff = assignment.get(name)
        if aff is None:
            if tdims.get(name) != dim:
                raise DimensionError(f"no assignment for block {name!r}")
            aff = Affine.of((name, 1))
        rows = [BlockPolynomial.zero(space) for _ in range(dim)]
        coeff_rows = [dict() for _ in range(dim)]
        for target, M in aff.parts:
            if target not in tdims:
                raise DimensionError(f"unknown target block {target!r}")
            M = _as_matrix(M, dim, tdims[target])
            for i in range(dim):
                coeff_rows[i].setdefault(target, [0] * tdims[target])
                acc = coeff_rows[i][target]
                for j in range(tdims[target]):
                    acc[j] = acc[j] + M[i, j]
        shift = None if aff.shift is None else np.asarray(aff.shift, dtype=object).reshape(dim)
        for i in range(dim):
            rows[i] = BlockPolynomial.linear(space, coeff_rows[i])
            if shift is not None:
                rows[i] = rows[i] + shift[i]
        linears.extend(rows)

    powers: dict[tuple[int, int], BlockPolynomial] = {}

    def power(v: int, e: int) -> BlockPolynomial:
        key = (v, e)
        if key not in powers:
            powers[key] = linears[v] if e == 1 else power(v, e - 1) * linears[v]
        return powers[key]

    out: dict = {}
    for mono, c in p.terms.items():
        t = BlockPolynomial.constant(space, c)
        for v, e in enumerate(mono):
            if e:
                t = t * power(v, e)
        for m, cc in t.terms.items():
            out[m] = out[m] + cc if m in out else cc
    return BlockPolynomial(space, out)


def shift_poly(p: BlockPolynomial, shift: Mapping[str, Sequence]) -> BlockPolynomial:
    """p(x + h) with ``h`` given per block (missing blocks are not shifted)."""
    assignment = {}
    for name, dim in p.space:
        h = shift.get(name)
        assignment[name] = Affine.of((name, 1), shift=None if h is None else np.asarray(h, dtype=object).reshape(dim))
    return compose_affine(p, assignment)


def delta_exact(p: BlockPolynomial, shift: Mapping[str, Sequence], order: int = 1) -> BlockPolynomial:
    """Delta_h^order p, computed by exact substitution."""
    out = p
    for _ in range(order):
        out = shift_poly(out, shift) - out
    return out


def is_zero(p: BlockPolynomial, tol: float | None = None) -> bool:
    """Exact test by default; with ``tol`` every coefficient must be within it."""
    if tol is None:
        return not p.terms
    return all(abs(complex(c)) <= tol for c in p.terms.values())


def restrict(p: BlockPolynomial, values: Mapping[str, Sequence]) -> BlockPolynomial:
    """Fix some blocks to constant vectors and drop them from the space."""
    space = tuple((n, d) for n, d in p.space if n not in values)
    assignment = {}
    for name, dim in p.space:
        if name in values:
            assignment[name] = Affine.of(shift=np.asarray(values[name], dtype=object).reshape(dim))
    return compose_affine(p, assignment, space)


def random_polynomial(space: Space, degree: int, rng: np.random.Generator, density: float = 0.6,
                      top_nonzero: bool = True) -> BlockPolynomial:
    """Random complex polynomial of total degree exactly ``degree`` (when ``top_nonzero``)."""
    nv = _nvars(space)
    terms = {}
    for mono in iproduct(range(degree + 1), repeat=nv):
        s = sum(mono)
        if s > degree:
            continue
        if rng.random() < density or (top_nonzero and s == degree and not any(sum(m) == degree for m in terms)):
            terms[mono] = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    if top_nonzero and not any(sum(m) == degree for m in terms):
        mono = (degree,) + (0,) * (nv - 1)
        terms[mono] = 1.0
    return BlockPolynomial(space, terms)


# ---------------------------------------------------------------------------
# pretty printing


def _var_name(block: str, coord: int) -> str:
    sep = "_" if block[-1:].isdigit() else ""
    return f"{block}{sep}{coord + 1}"


def _fmt_coeff(c) -> str:
    if isinstance(c, complex):
        return f"({c.real!r}{c.imag:+}j)"
    return repr(c) if isinstance(c, float) else str(c)


def _graded_lex_key(mono: tuple) -> tuple:
    return (-sum(mono), tuple(-e for e in mono))


def format_polynomial(p: BlockPolynomial) -> str:
    if not p.terms:
        return "0"
    names = [_var_name(b, i) for b, d in p.space for i in range(d)]
    parts = []
    for k, mono in enumerate(sorted(p.terms, key=_graded_lex_key)):
        c = p.terms[mono]
        factors = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, mono) if e]
        negative = not isinstance(c, complex) and c < 0
        body = _fmt_coeff(-c if (negative and k) else c)
        term = "*".join([body] + factors)
        if k == 0:
            parts.append(term)
        else:
            parts.append((" - " if negative else " + ") + term)
    return "".join(parts)


# ---------------------------------------------------------------------------
# Gaussian exponents


@dataclass(frozen=True)
class QuadraticExponent:
    """psi(f) = <linear, f> + <quad f, f> with linear = -i m and quad = R / 2."""

    linear: np.ndarray
    quad: np.ndarray

    @classmethod
    def from_gaussian(cls, mean, cov) -> "QuadraticExponent":
        mean = np.asarray(mean)
        cov = np.asarray(cov)
        if mean.dtype == object or cov.dtype == object:
            lin = np.array([0 if m == 0 else -1j * float(m) for m in mean.ravel()], dtype=object)
            quad = np.array([[Fraction(c) / 2 if _exact(c) else c / 2 for c in row] for row in cov], dtype=object)
            return cls(lin, quad)
        return cls(-1j * mean.astype(float), 0.5 * cov.astype(float))

    @property
    def d(self) -> int:
        return len(self.linear)

    def __call__(self, f) -> complex:
        f = np.asarray(f)
        return self.linear @ f + f @ self.quad @ f

    def evaluate_many(self, F) -> np.ndarray:
        F = np.atleast_2d(F)
        return F @ self.linear + np.einsum("pi,ij,pj->p", F, self.quad.astype(float), F)

    def to_poly(self, block: str = "y") -> BlockPolynomial:
        d = self.d
        space = ((block, d),)
        terms: dict = {}
        for i in range(d):
            mono = [0] * d
            mono[i] = 1
            terms[tuple(mono)] = self.linear[i]
        for i in range(d):
            for j in range(d):
                mono = [0] * d
                mono[i] += 1
                mono[j] += 1
                mono = tuple(mono)
                c = self.quad[i, j]
                terms[mono] = terms[mono] + c if mono in terms else c
        return BlockPolynomial(space, terms)


def finite_difference_coeffs(order: int) -> np.ndarray:
    """Weights w_k with Delta_h^order psi(f) = sum_k w_k psi(f + k h)."""
    return np.array([(-1) ** (order - k) * comb(order, k) for k in range(order + 1)], dtype=float)


def sum_polys(polys: Iterable[BlockPolynomial], space: Space) -> BlockPolynomial:
    out = BlockPolynomial.zero(space)
    for p in polys:
        out = out + p
    return out
