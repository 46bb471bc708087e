"""Exact replays of the finite-difference elimination arguments.

An equation is kept as a list of terms ``coef * G(M z)``: ``G`` is an
already-differenced polynomial in its own variables and ``M`` maps the
stacked dual variables ``z`` into them.  Applying ``Delta_v`` in ``z``
replaces ``G`` by ``Delta_{Mv} G``; a term is eliminated when ``Mv = 0``.

Every stage records
* ``elimination``: largest coefficient left in the terms the stage is meant
  to remove;
* ``commutation``: largest gap between ``Delta_v (G o M)`` and
  ``(Delta_{Mv} G) o M`` over all terms;
* ``equation``: largest coefficient of the whole equation (zero iff the
  inputs are mutually consistent);
* ``claim`` for the terminal stages: the polynomial that the argument
  concludes must vanish.

A stage fails on its structural checks or its claim.  Consistency of the
input equation is reported separately so that a planted inconsistency is
located where the argument's conclusion breaks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .polyalgebra import (Affine, BlockPolynomial, Space, compose_affine, delta_exact, restrict,
                          uniform_space)
from .space import _exact_inverse

TOL = 1e-10


# ---------------------------------------------------------------------------
# small exact/float linear algebra helpers


def _is_exact(*arrays) -> bool:
    return all(np.asarray(a).dtype == object for a in arrays)


def _mat(C, d: int) -> np.ndarray:
    m = np.asarray(getattr(C, "matrix", C))
    if m.ndim == 0:
        out = np.zeros((d, d), dtype=object if m.dtype == object else float)
        for i in range(d):
            out[i, i] = m.item()
        return out
    return m


def _inv(M: np.ndarray) -> np.ndarray:
    if M.dtype == object:
        return _exact_inverse(M)
    return np.linalg.inv(M)


def _eye(d: int, exact: bool, c=1) -> np.ndarray:
    out = np.zeros((d, d), dtype=object if exact else float)
    for i in range(d):
        out[i, i] = c
    return out


def _zero(d: int, exact: bool) -> np.ndarray:
    return np.zeros((d, d), dtype=object if exact else float)


def random_shift(rng: np.random.Generator, d: int, exact: bool) -> np.ndarray:
    if exact:
        num = rng.integers(-6, 7, d)
        den = rng.integers(1, 4, d)
        return np.array([Fraction(int(a), int(b)) for a, b in zip(num, den)], dtype=object)
    return rng.uniform(-1.0, 1.0, d)


# ---------------------------------------------------------------------------
# terms and equations


@dataclass
class Term:
    label: str
    coef: object
    inner: BlockPolynomial
    M: np.ndarray

    def realize(self, zspace: Space) -> BlockPolynomial:
        assignment, row = {}, 0
        for name, dim in self.inner.space:
            parts, col = [], 0
            for zname, zd in zspace:
                parts.append((zname, self.M[row:row + dim, col:col + zd]))
                col += zd
            assignment[name] = Affine.of(*parts)
            row += dim
        return compose_affine(self.inner, assignment, zspace) * self.coef

    def shifted(self, v: np.ndarray) -> "Term":
        u = self.M.dot(v)
        shift, row = {}, 0
        for name, dim in self.inner.space:
            shift[name] = u[row:row + dim]
            row += dim
        return Term(self.label, self.coef, delta_exact(self.inner, shift), self.M)


def _split(v: np.ndarray, zspace: Space) -> dict:
    out, col = {}, 0
    for name, dim in zspace:
        out[name] = v[col:col + dim]
        col += dim
    return out


@dataclass
class Stage:
    name: str
    description: str
    elimination: float = 0.0
    commutation: float = 0.0
    equation: float = 0.0
    claim: float | None = None
    eliminated: list = field(default_factory=list)
    ok: bool = True

    def to_dict(self) -> dict:
        out = {"stage": self.name, "description": self.description, "elimination": self.elimination,
               "commutation": self.commutation, "equation": self.equation, "eliminated": self.eliminated,
               "ok": self.ok}
        if self.claim is not None:
            out["claim"] = self.claim
        return out


@dataclass
class EliminationReport:
    pipeline: str
    stages: list
    input_residual: float
    l: int
    tol: float = TOL

    @property
    def input_consistent(self) -> bool:
        return self.input_residual <= self.tol

    @property
    def first_failing_stage(self) -> str | None:
        return next((s.name for s in self.stages if not s.ok), None)

    @property
    def ok(self) -> bool:
        return self.input_consistent and self.first_failing_stage is None

    @property
    def max_residual(self) -> float:
        vals = [self.input_residual]
        for s in self.stages:
            vals += [s.elimination, s.commutation, s.equation]
            if s.claim is not None:
                vals.append(s.claim)
        return float(max(vals))

    def to_dict(self) -> dict:
        return {"pipeline": self.pipeline, "l": self.l, "input_residual": self.input_residual,
                "input_consistent": self.input_consistent, "first_failing_stage": self.first_failing_stage,
                "max_residual": self.max_residual, "ok": self.ok,
                "stages": [s.to_dict() for s in self.stages]}


class Equation:
    """sum of terms == 0 over the variable space ``zspace``."""

    def __init__(self, zspace: Space, terms: list[Term], tol: float = TOL):
        self.zspace = zspace
        self.terms = terms
        self.tol = tol

    def residual(self) -> float:
        total = BlockPolynomial.zero(self.zspace)
        for t in self.terms:
            total = total + t.realize(self.zspace)
        return total.max_abs_coeff()

    def apply(self, v: np.ndarray, name: str, description: str, expect: Sequence[str] = (),
              order: int = 1) -> Stage:
        """Apply Delta_v ``order`` times; terms in ``expect`` must vanish."""
        comm = 0.0
        elim = 0.0
        kept = []
        vz = _split(v, self.zspace)
        for t in self.terms:
            cur = t
            for _ in range(order):
                nxt = cur.shifted(v)
                lhs = delta_exact(cur.realize(self.zspace), vz)
                comm = max(comm, (lhs - nxt.realize(self.zspace)).max_abs_coeff())
                cur = nxt
            if t.label in expect:
                elim = max(elim, cur.inner.max_abs_coeff() * abs(complex(t.coef)))
            else:
                kept.append(cur)
        self.terms = kept
        st = Stage(name, description, elim, comm, self.residual(), eliminated=list(expect))
        st.ok = elim <= self.tol and comm <= self.tol
        return st

    def term(self, label: str) -> Term:
        return next(t for t in self.terms if t.label == label)


def _claim(name: str, description: str, p: BlockPolynomial, tol: float) -> Stage:
    c = p.max_abs_coeff()
    return Stage(name, description, claim=c, ok=c <= tol)


def _default_l(r: BlockPolynomial, l: int | None) -> int:
    return max(r.total_degree, 0) if l is None else int(l)


def _psi_block(p: BlockPolynomial) -> tuple[str, int]:
    if len(p.space) != 1:
        raise ValueError("psi must be a polynomial in a single block")
    return p.space[0]


# ---------------------------------------------------------------------------
# Skitovich-Darmois


def elimination_pipeline_sd(psis: Sequence[BlockPolynomial], C: Sequence, r: BlockPolynomial,
                            rng: np.random.Generator | None = None, l: int | None = None,
                            fault: str | None = None, tol: float = TOL) -> EliminationReport:
    """Replay of the SD elimination for sum psi_j(f + C_j* g) = P(f) + Q(g) - r(f, g).

    ``r`` uses the log-factor convention of :func:`charlab.qindep.lemma1_polynomial`
    (A_j = I, B_j = C_j).  ``fault="sign"`` flips the sign of every k_m.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = len(psis)
    _, d = _psi_block(psis[0])
    Cs = [_mat(c, d) for c in C]
    exact = _is_exact(*Cs) and all(p.is_exact for p in psis)
    zspace = uniform_space(["f", "g"], d)
    I, Z = _eye(d, exact), _zero(d, exact)
    l = _default_l(r, l)

    P = psis[0]
    for p in psis[1:]:
        P = P + p
    (yb, _), = P.space
    Q = BlockPolynomial.zero(P.space)
    for p, c in zip(psis, Cs):
        Q = Q + compose_affine(p, {yb: Affine.of((yb, c.T))})
    terms = [Term(f"psi_{j + 1}", 1, p, np.hstack([I, c.T])) for j, (p, c) in enumerate(zip(psis, Cs))]
    terms += [Term("P", -1, P, np.hstack([I, Z])), Term("Q", -1, Q, np.hstack([Z, I])),
              Term("r", 1, r, _eye(2 * d, exact))]
    eq = Equation(zspace, terms, tol)
    input_res = eq.residual()
    stages = []

    for m in range(n, 0, -1):
        Ct = Cs[m - 1].T
        try:
            Cinv = _inv(Ct)
        except np.linalg.LinAlgError as exc:
            raise PreconditionError(f"C_{m} is not invertible", where=f"C_{m}") from exc
        h = random_shift(rng, d, exact)
        k = -Cinv.dot(h)
        if fault == "sign":
            k = -k
        name = f"eliminate_psi_{m}"
        stages.append(eq.apply(np.concatenate([h, k]), name,
                               f"Delta_(h_{m},k_{m}) with k_{m} = -(C_{m}*)^-1 h_{m}", [f"psi_{m}"]))

    h = random_shift(rng, d, exact)
    zero = np.zeros(d, dtype=object if exact else float)
    stages.append(eq.apply(np.concatenate([h, zero]), "eliminate_Q", "Delta_(h,0) removes Q(g)", ["Q"]))

    k = random_shift(rng, d, exact)
    hk = np.concatenate([h, k])
    stages.append(_claim("r_degree", f"Delta_(h,k)^{l + 1} r = 0", delta_exact(r, _split(hk, zspace), l + 1), tol))
    stages.append(eq.apply(hk, "eliminate_r", f"Delta_(h,k)^{l + 1} removes r", ["r"], order=l + 1))

    hf = random_shift(rng, d, exact)
    stages.append(_claim("P_polynomial", f"Delta_h^{n + l + 2} P = 0", delta_exact(P, {yb: hf}, n + l + 2), tol))
    return EliminationReport("sd", stages, input_res, l, tol)


# ---------------------------------------------------------------------------
# Heyde


def elimination_pipeline_heyde(psis: Sequence[BlockPolynomial], C: Sequence, r: BlockPolynomial,
                               rng: np.random.Generator | None = None, l: int | None = None,
                               fault: str | None = None, tol: float = TOL) -> EliminationReport:
    """Replay for sum psi_j(f + C_j* g) = sum psi_j(f - C_j* g) - r(f, g).

    ``r`` follows :func:`charlab.qindep.lemma4_polynomial` with A_j = I, B_j = C_j.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = len(psis)
    _, d = _psi_block(psis[0])
    Cs = [_mat(c, d) for c in C]
    exact = _is_exact(*Cs) and all(p.is_exact for p in psis)
    zspace = uniform_space(["f", "g"], d)
    I = _eye(d, exact)
    l = _default_l(r, l)
    for i in range(n):
        for j in range(i + 1, n):
            for s, M in (("+", Cs[i] + Cs[j]), ("-", Cs[i] - Cs[j])):
                if abs(np.linalg.det(M.astype(float))) < 1e-12:
                    raise PreconditionError(f"C_{i + 1} {s} C_{j + 1} is not invertible", where=f"({i + 1}, {j + 1})")

    terms = []
    for j, (p, c) in enumerate(zip(psis, Cs)):
        terms.append(Term(f"psi+_{j + 1}", 1, p, np.hstack([I, c.T])))
        terms.append(Term(f"psi-_{j + 1}", -1, p, np.hstack([I, -c.T])))
    terms.append(Term("r", 1, r, _eye(2 * d, exact)))
    eq = Equation(zspace, terms, tol)
    input_res = eq.residual()
    stages = []

    for i in range(n, 0, -1):
        h = random_shift(rng, d, exact)
        shift_f = Cs[i - 1].T.dot(h)
        if fault == "sign":
            shift_f = -shift_f
        name = f"eliminate_psi-_{i}"
        stages.append(eq.apply(np.concatenate([shift_f, h]), name,
                               f"Delta_(C_{i}* h_{i}, h_{i}) removes psi_{i}(f - C_{i}* g)", [f"psi-_{i}"]))
    for i in range(n, 1, -1):
        k = random_shift(rng, d, exact)
        name = f"eliminate_psi+_{i}"
        stages.append(eq.apply(np.concatenate([Cs[i - 1].T.dot(k), -k]), name,
                               f"Delta_(C_{i}* k_{i}, -k_{i}) removes psi_{i}(f + C_{i}* g)", [f"psi+_{i}"]))

    h = random_shift(rng, d, exact)
    k = random_shift(rng, d, exact)
    hk = np.concatenate([h, k])
    stages.append(_claim("r_degree", f"Delta_(h,k)^{l + 1} r = 0", delta_exact(r, _split(hk, zspace), l + 1), tol))
    st = eq.apply(hk, "eliminate_r", f"Delta_(h,k)^{l + 1} removes r; then g = 0", ["r"], order=l + 1)
    # setting g = 0 turns (Delta_u G)(f + C_1* g) into (Delta_u G)(f)
    t = eq.term("psi+_1")
    (yb, _), = t.inner.space
    at_zero = restrict(t.realize(zspace), {"g": np.zeros(d, dtype=object if exact else float)})
    direct = BlockPolynomial(at_zero.space, (t.inner * t.coef).terms)
    gap = (at_zero - direct).max_abs_coeff()
    st.commutation = max(st.commutation, gap)
    st.ok = st.ok and gap <= tol
    stages.append(st)

    for j in range(n):
        stages.append(_heyde_terminal(psis, Cs, j, l, rng, exact, tol))
    return EliminationReport("heyde", stages, input_res, l, tol)


def _heyde_terminal(psis, Cs, j: int, l: int, rng, exact: bool, tol: float) -> Stage:
    """Choose h_i, k_i so every difference in the chain is Delta_h, then check psi_j."""
    n = len(psis)
    d = Cs[0].shape[0]
    h = random_shift(rng, d, exact)
    gap = 0.0
    two = 2 if exact else 2.0
    for i in range(n):
        if i == j:
            hi = _inv((two * Cs[j]).T).dot(h)
            li = (two * Cs[j]).T.dot(hi)
            gap = max(gap, float(np.max(np.abs((li - h).astype(complex)))))
            continue
        hi = _inv((Cs[i] + Cs[j]).T).dot(h)
        ki = _inv((Cs[i] - Cs[j]).T).dot(h)
        li = (Cs[i] + Cs[j]).T.dot(hi)
        bi = (Cs[i] - Cs[j]).T.dot(ki)
        gap = max(gap, float(np.max(np.abs((li - h).astype(complex)))), float(np.max(np.abs((bi - h).astype(complex)))))
    (yb, _), = psis[j].space
    c = delta_exact(psis[j], {yb: h}, 2 * n + l).max_abs_coeff()
    st = Stage(f"psi_{j + 1}_polynomial", f"Delta_h^{2 * n + l} psi_{j + 1} = 0", commutation=gap, claim=c)
    st.ok = gap <= tol and c <= tol
    return st


# ---------------------------------------------------------------------------
# sample mean and residue vector


def elimination_pipeline_sample_mean(psi: BlockPolynomial, n: int, r: BlockPolynomial,
                                     rng: np.random.Generator | None = None, l: int | None = None,
                                     fault: str | None = None, tol: float = TOL) -> EliminationReport:
    """Replay on the scaled equation
    sum_j psi(f + n g_j - sum g) = n psi(f) + sum_j psi(n g_j - sum g) - r(n f, n g).

    ``r`` follows :func:`charlab.qindep.lemma6_polynomial`.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    _, d = _psi_block(psi)
    exact = psi.is_exact
    zspace = uniform_space(["f"] + [f"g{j + 1}" for j in range(n)], d)
    nv = (n + 1) * d
    I, Z = _eye(d, exact), _zero(d, exact)
    l = _default_l(r, l)

    def centred(j: int) -> list:
        return [_eye(d, exact, (n if k == j else 0) - 1) for k in range(n)]

    terms = []
    for j in range(n):
        terms.append(Term(f"plus_{j + 1}", 1, psi, np.hstack([I] + centred(j))))
        terms.append(Term(f"cen_{j + 1}", -1, psi, np.hstack([Z] + centred(j))))
    terms.append(Term("npsi", -n, psi, np.hstack([I] + [Z] * n)))
    terms.append(Term("r", 1, r, _eye(nv, exact, n)))
    eq = Equation(zspace, terms, tol)
    input_res = eq.residual()
    stages = []
    zero = np.zeros(d, dtype=object if exact else float)

    h1 = random_shift(rng, d, exact)
    v1 = np.concatenate([h1] * (n + 1))
    if fault == "sign":
        v1[d:2 * d] = -v1[d:2 * d]
    stages.append(eq.apply(v1, "eliminate_centred", "Delta_(h1,...,h1) removes the centred terms",
                           [f"cen_{j + 1}" for j in range(n)]))
    h2 = random_shift(rng, d, exact)
    stages.append(eq.apply(np.concatenate([h2, h2] + [zero] * (n - 1)), "keep_first_shifted",
                           "Delta_(h2,h2,0,...,0) keeps only the first shifted term",
                           [f"plus_{j + 1}" for j in range(1, n)]))
    h3 = random_shift(rng, d, exact)
    stages.append(eq.apply(np.concatenate([h3, zero, h3] + [zero] * (n - 2)), "eliminate_first_shifted",
                           "Delta_(h3,0,h3,0,...,0) removes it", ["plus_1"]))
    kk = np.concatenate([random_shift(rng, d, exact) for _ in range(n + 1)])
    stages.append(_claim("r_degree", f"Delta_(k,k_1..k_n)^{l + 1} r = 0",
                         delta_exact(r, _split(kk, zspace), l + 1), tol))
    stages.append(eq.apply(kk, "eliminate_r", f"Delta_(k,k_1..k_n)^{l + 1} removes r", ["r"], order=l + 1))
    (yb, _), = psi.space
    h = random_shift(rng, d, exact)
    stages.append(_claim("psi_polynomial", f"Delta_h^{l + 4} psi = 0", delta_exact(psi, {yb: h}, l + 4), tol))
    return EliminationReport("sample_mean", stages, input_res, l, tol)
