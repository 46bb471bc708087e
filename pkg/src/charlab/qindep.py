"""Q-independence: log-ratio fields q and r, their exact twins, and certification.

Every field here is a signed sum of ``psi_j(M z)`` over linear maps ``M`` of
the stacked dual variables ``z = (f, g, ...)``.  The same term list drives
the numeric :class:`~charlab.charfn.LogField` and the exact polynomial built
with :func:`~charlab.polyalgebra.compose_affine`, so the two can never drift
apart.

Sign convention: every field is the log of the factor ``exp(r)`` that
multiplies the product of marginal CFs, i.e. ``r = -psi_joint + sum psi``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from .charfn import (DEFAULT_FLOOR, CharFnHandle, Field, GridSpec, LogField, LogTerm,
                     PolyDegreeCertificate, degree_tests, star_grid)
from .errors import DimensionError, PreconditionError
from .polyalgebra import Affine, BlockPolynomial, Space, compose_affine, uniform_space
from .space import LinearOp

EQUATIONS = ("lemma1", "lemma4", "lemma6", "lemma6_slice", "q")


def _mat(A, d: int) -> np.ndarray:
    m = getattr(A, "matrix", A)
    m = np.asarray(m)
    if m.ndim == 0:
        m = m * np.eye(d, dtype=m.dtype if m.dtype == object else float)
    if m.shape != (d, d):
        raise DimensionError(f"operator of shape {m.shape} on R^{d}")
    return m


def _zeros(d: int, exact: bool) -> np.ndarray:
    return np.zeros((d, d), dtype=object if exact else float)


def _eye(d: int, exact: bool, c=1) -> np.ndarray:
    out = _zeros(d, exact)
    for i in range(d):
        out[i, i] = c
    return out


# ---------------------------------------------------------------------------
# term lists: (coef, component, M) with M acting on the stacked variables


def lemma1_terms(A: Sequence, B: Sequence, d: int) -> list[tuple]:
    """r(f,g) = sum_j psi_j(A_j* f) + psi_j(B_j* g) - psi_j(A_j* f + B_j* g)."""
    if len(A) != len(B):
        raise DimensionError("operator lists differ in length")
    out = []
    for j, (a, b) in enumerate(zip(A, B)):
        At, Bt = _mat(a, d).T, _mat(b, d).T
        Z = np.zeros_like(At)
        out += [(-1, j, np.hstack([At, Bt])), (1, j, np.hstack([At, Z])), (1, j, np.hstack([Z, Bt]))]
    return out


def lemma4_terms(A: Sequence, B: Sequence, d: int) -> list[tuple]:
    """r(f,g) = sum_j psi_j(A_j* f - B_j* g) - psi_j(A_j* f + B_j* g)."""
    if len(A) != len(B):
        raise DimensionError("operator lists differ in length")
    out = []
    for j, (a, b) in enumerate(zip(A, B)):
        At, Bt = _mat(a, d).T, _mat(b, d).T
        out += [(1, j, np.hstack([At, -Bt])), (-1, j, np.hstack([At, Bt]))]
    return out


def lemma6_terms(n: int, d: int, exact: bool = False) -> list[tuple]:
    """r(f, g_1..g_n) = n psi(f/n) + sum_j psi(g_j - gbar) - sum_j psi(f/n + g_j - gbar).

    Every term refers to component 0: the components are identically distributed.
    """
    if n < 2:
        raise PreconditionError("the sample-mean statistic needs n >= 2", where="n")
    from fractions import Fraction

    inv_n = Fraction(1, n) if exact else 1.0 / n
    one = 1 if exact else 1.0
    out = []
    for j in range(n):
        cen = [_eye(d, exact, (one if k == j else 0) - inv_n) for k in range(n)]
        out.append((-1, 0, np.hstack([_eye(d, exact, inv_n)] + cen)))
        out.append((1, 0, np.hstack([_zeros(d, exact)] + cen)))
    out.append((n, 0, np.hstack([_eye(d, exact, inv_n)] + [_zeros(d, exact)] * n)))
    return out


def slice_embedding(n: int, d: int, exact: bool = False) -> np.ndarray:
    """(f, g_1, ..., g_n) = (n h, g, -g, 0, ..., 0) as a matrix acting on (h, g)."""
    E = np.zeros(((n + 1) * d, 2 * d), dtype=object if exact else float)
    for i in range(d):
        E[i, i] = n
        E[d + i, d + i] = 1
        E[2 * d + i, d + i] = -1
    return E


def slice_terms(n: int, d: int, exact: bool = False) -> list[tuple]:
    E = slice_embedding(n, d, exact)
    return [(c, j, M.dot(E)) for c, j, M in lemma6_terms(n, d, exact)]


def q_terms(n: int, d: int) -> list[tuple]:
    """q(f_1..f_n) = -psi_joint(f_1..f_n) + sum_j psi_j(f_j); component ``n`` is the joint law."""
    out = [(-1, n, np.eye(n * d))]
    for j in range(n):
        M = np.zeros((d, n * d))
        M[:, j * d:(j + 1) * d] = np.eye(d)
        out.append((1, j, M))
    return out


def terms_polynomial(terms: Sequence[tuple], psis: Sequence[BlockPolynomial], space: Space) -> BlockPolynomial:
    """Exact twin of a term list: sum coef * psi_j(M z) with psi_j in a single block."""
    out = BlockPolynomial.zero(space)
    for coef, j, M in terms:
        p = psis[j]
        (src, dim), = p.space
        parts, col = [], 0
        for name, bd in space:
            parts.append((name, M[:, col:col + bd]))
            col += bd
        out = out + compose_affine(p, {src: Affine.of(*parts)}, space) * coef
    return out


# ---------------------------------------------------------------------------
# residual grids


@dataclass
class ResidualGrid:
    equation: str
    space: Space
    points: np.ndarray
    values: np.ndarray
    se: np.ndarray
    ok: np.ndarray
    field: Field
    source: str = "exact"
    diagnostics: list = field(default_factory=list)

    @property
    def nvars(self) -> int:
        return self.points.shape[1]

    @property
    def grid_points(self) -> int:
        return int(self.ok.sum())

    @property
    def informative_points(self) -> int:
        """Retained points other than the origin, where every field vanishes by construction."""
        return int((self.ok & np.any(self.points != 0, axis=1)).sum())

    def origin_value(self) -> complex:
        v, _, _ = self.field.evaluate(np.zeros((1, self.nvars)))
        return complex(v[0])

    def header(self) -> list[str]:
        names = []
        for b, dim in self.space:
            sep = "_" if b[-1:].isdigit() else ""
            names += [f"{b}{sep}{i + 1}" for i in range(dim)]
        return names + ["re", "im", "se"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for p, v, s, k in zip(self.points, self.values, self.se, self.ok):
                if k:
                    w.writerow([repr(float(x)) for x in p] + [repr(float(v.real)), repr(float(v.imag)), repr(float(s))])


class QEstimate(ResidualGrid):
    """Log-ratio field q(f_1..f_n) of a joint CF against its marginals."""


def _grid_points(space: Space, spec: GridSpec) -> np.ndarray:
    if len(space) == 2:
        a, _, _ = star_grid(space[0][1], spec)
        b, _, _ = star_grid(space[1][1], spec)
        return np.array([np.concatenate([x, y]) for x, y in iproduct(a, b)])
    nv = sum(d for _, d in space)
    # the coordinate axes alone see only trivial slices; add spec.rays generic directions
    wide = GridSpec(2 * nv + spec.rays, spec.radii, spec.radius, spec.floor)
    pts, _, _ = star_grid(nv, wide)
    return pts


def build_field(terms, handles: Sequence[CharFnHandle], nvars: int, floor: float = DEFAULT_FLOOR,
                grid: GridSpec = GridSpec(), bootstrap: int = 0, seed: int = 0) -> LogField:
    lt = [LogTerm(float(c), handles[j], np.asarray(M, dtype=float)) for c, j, M in terms]
    return LogField(lt, nvars, floor=floor, grid=grid, bootstrap=bootstrap, seed=seed)


def residual_grid(equation: str, terms, handles, space: Space, grid: GridSpec = GridSpec(),
                  bootstrap: int = 0, seed: int = 0, cls=ResidualGrid) -> ResidualGrid:
    nv = sum(d for _, d in space)
    fld = build_field(terms, handles, nv, grid.floor, grid, bootstrap, seed)
    pts = _grid_points(space, grid)
    v, se, ok = fld.evaluate(pts)
    source = "empirical" if any(h.kind == "empirical" for h in handles) else "exact"
    diags = list(fld.diagnostics)
    if not (ok & np.any(pts != 0, axis=1)).any():
        diags.append("every grid point was culled by the CF floor")
    return cls(equation, space, pts, v, se, ok, fld, source, diags)


def _check_handles(handles, n: int | None = None) -> int:
    if not handles:
        raise DimensionError("no characteristic functionals given")
    d = handles[0].d
    if any(h.d != d for h in handles):
        raise DimensionError("handles live in different dimensions")
    if n is not None and len(handles) != n:
        raise DimensionError(f"expected {n} handles, got {len(handles)}")
    return d


def lemma1_residual(marginals: Sequence[CharFnHandle], A: Sequence, B: Sequence,
                    grid: GridSpec = GridSpec(), **kw) -> ResidualGrid:
    d = _check_handles(marginals, len(A))
    space = uniform_space(["f", "g"], d)
    return residual_grid("lemma1", lemma1_terms(A, B, d), marginals, space, grid, **kw)


def lemma4_residual(marginals: Sequence[CharFnHandle], A: Sequence, B: Sequence,
                    grid: GridSpec = GridSpec(), **kw) -> ResidualGrid:
    d = _check_handles(marginals, len(A))
    space = uniform_space(["f", "g"], d)
    return residual_grid("lemma4", lemma4_terms(A, B, d), marginals, space, grid, **kw)


def lemma6_residual(psi_source: CharFnHandle, n: int, grid: GridSpec = GridSpec(), **kw) -> ResidualGrid:
    """Residual of the sample mean against the residue vector; one handle for the common law."""
    d = psi_source.d
    space = uniform_space(["f"] + [f"g{j + 1}" for j in range(n)], d)
    return residual_grid("lemma6", lemma6_terms(n, d), [psi_source], space, grid, **kw)


def lemma6_slice_residual(psi_source: CharFnHandle, n: int, grid: GridSpec = GridSpec(), **kw) -> ResidualGrid:
    """The lemma6 residual on the slice f = n h, g_1 = g, g_2 = -g, other g_j = 0."""
    d = psi_source.d
    space = uniform_space(["h", "g"], d)
    return residual_grid("lemma6_slice", slice_terms(n, d), [psi_source], space, grid, **kw)


def estimate_q(joint: CharFnHandle, marginals: Sequence[CharFnHandle], grid: GridSpec = GridSpec(), **kw) -> QEstimate:
    d = _check_handles(marginals)
    n = len(marginals)
    if joint.d != n * d:
        raise DimensionError(f"joint CF on R^{joint.d} for {n} components in R^{d}")
    space = uniform_space([f"f{j + 1}" for j in range(n)], d)
    out = residual_grid("q", q_terms(n, d), list(marginals) + [joint], space, grid, cls=QEstimate, **kw)
    if not out.informative_points:
        raise PreconditionError("every grid point lies below the CF floor", where="grid")
    return out


# exact twins --------------------------------------------------------------


def lemma1_polynomial(psis: Sequence[BlockPolynomial], A: Sequence, B: Sequence) -> BlockPolynomial:
    d = psis[0].nvars
    return terms_polynomial(lemma1_terms(A, B, d), psis, uniform_space(["f", "g"], d))


def lemma4_polynomial(psis: Sequence[BlockPolynomial], A: Sequence, B: Sequence) -> BlockPolynomial:
    d = psis[0].nvars
    return terms_polynomial(lemma4_terms(A, B, d), psis, uniform_space(["f", "g"], d))


def lemma6_polynomial(psi: BlockPolynomial, n: int) -> BlockPolynomial:
    d = psi.nvars
    exact = psi.is_exact
    space = uniform_space(["f"] + [f"g{j + 1}" for j in range(n)], d)
    return terms_polynomial(lemma6_terms(n, d, exact), [psi], space)


# ---------------------------------------------------------------------------
# certification


@dataclass
class QIndependenceCertificate:
    equation: str
    D: int | None
    verdict: str
    max_residual: float
    noise_threshold: float
    grid_points: int
    per_degree: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def certificate(self) -> PolyDegreeCertificate:
        if self.D is not None:
            return next(c for c in self.per_degree if c.degree_bound == self.D)
        return self.per_degree[-1]

    def to_dict(self) -> dict:
        return {"equation": self.equation, "D": self.D, "verdict": self.verdict,
                "max_residual": self.max_residual, "noise_threshold": self.noise_threshold,
                "grid_points": self.grid_points,
                "per_degree": [c.to_dict() for c in self.per_degree]}


def certify(residual, D_max: int = 4, probes: int = 64, seed: int = 0, equation: str | None = None) -> QIndependenceCertificate:
    """Smallest D <= D_max at which the field passes the degree test.

    ``residual`` is a :class:`ResidualGrid`, a :class:`Field`, or a
    :class:`BlockPolynomial` (probed on the unit ball).
    """
    if D_max < 0:
        raise ValueError("D_max must be >= 0")
    if isinstance(residual, ResidualGrid):
        fld, eq, npts = residual.field, residual.equation, residual.grid_points
    elif isinstance(residual, BlockPolynomial):
        from .charfn import CallableField

        fld, eq, npts = CallableField(residual.evaluate_many, residual.nvars, 1.0), "polynomial", 0
    else:
        fld, eq, npts = residual, "field", 0
    eq = equation or eq
    certs = degree_tests(fld, list(range(D_max + 1)), probes, seed)
    chosen = next((c for c in certs if c.verdict == "polynomial"), None)
    if chosen is not None:
        verdict, D, pick = "polynomial", chosen.degree_bound, chosen
    else:
        pick = certs[-1]
        verdict = "not_polynomial" if pick.verdict == "not_polynomial" else "inconclusive"
        D = None
    return QIndependenceCertificate(eq, D, verdict, pick.max_residual, pick.noise_threshold, npts, certs,
                                    {"D_max": D_max, "probes": probes, "seed": seed, "radius": float(fld.radius)})
