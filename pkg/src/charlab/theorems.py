"""Experiment drivers for the characterization theorems.

Each driver checks preconditions, reduces the linear forms to
``L_1 = sum xi_j``, ``L_2 = sum C_j xi_j``, symmetrizes the laws, certifies
the polynomial degree of the relevant log-residual, runs a Gaussianity
oracle, replays the elimination argument in exact mode, and adjudicates.

A run can only ever be *consistent with* a theorem: Gaussian inputs must
give polynomial residuals and pass the Gaussianity oracle, and non-Gaussian
inputs must give non-polynomial residuals (the contrapositive).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .charfn import (CharFnHandle, GridSpec, _assess, draw_stencils, ray_directions)
from .distributions import (Distribution, GaussianDist, ProductDist, SampleMatrix, sample)
from .elimination import (EliminationReport, elimination_pipeline_heyde, elimination_pipeline_sample_mean,
                          elimination_pipeline_sd)
from .errors import PreconditionError
from .polyalgebra import Affine, BlockPolynomial, compose_affine, uniform_space
from .qindep import (QEstimate, QIndependenceCertificate, ResidualGrid, certify, lemma6_slice_residual, estimate_q, lemma1_polynomial,
                     lemma1_residual, lemma4_polynomial, lemma4_residual, lemma6_polynomial, lemma6_residual,
                     q_terms, residual_grid)
from .space import LinearOp, check_invertible, heyde_failures, inverse, reduce_operators

THEOREMS = ("sd", "heyde", "thm3", "sample_mean")
CONSISTENT = "consistent_with_theorem"
VIOLATION = "violation_detected"
INCONCLUSIVE = "inconclusive"


# ---------------------------------------------------------------------------
# specs and verdicts


@dataclass
class ExperimentSpec:
    theorem: str
    marginals: tuple
    A: tuple = ()
    B: tuple = ()
    C: LinearOp | None = None
    coupling: dict = field(default_factory=dict)
    source: str = "exact"
    N: int = 100_000
    seed: int = 0
    bootstrap: int = 200
    grid: GridSpec = GridSpec()
    D_max: int = 4
    probes: int = 64
    directions: int = 16
    replays: int = 5
    name: str = ""

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise ValueError(f"unknown theorem {self.theorem!r}; expected one of {THEOREMS}")
        if self.source not in ("exact", "empirical"):
            raise ValueError("source must be 'exact' or 'empirical'")
        self.marginals = tuple(self.marginals)
        self.A = tuple(a if isinstance(a, LinearOp) else LinearOp(np.asarray(a, float).reshape(self.d, self.d)) for a in self.A)
        self.B = tuple(b if isinstance(b, LinearOp) else LinearOp(np.asarray(b, float).reshape(self.d, self.d)) for b in self.B)
        if self.C is not None and not isinstance(self.C, LinearOp):
            self.C = LinearOp(np.asarray(self.C, float).reshape(self.d, self.d))

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def d(self) -> int:
        return self.marginals[0].d

    @property
    def tuple_dist(self) -> ProductDist:
        return ProductDist(self.marginals, self.coupling)

    @property
    def expected_gaussian(self) -> bool:
        return all(m.is_gaussian for m in self.marginals)


@dataclass
class TheoremVerdict:
    theorem: str
    preconditions_ok: bool
    conclusion: str
    certificates: list = field(default_factory=list)
    primary: list = field(default_factory=list)
    gaussianity: list = field(default_factory=list)
    elimination: dict | None = None
    diagnostics: list = field(default_factory=list)
    seed: int = 0
    timing_ms: float = 0.0

    def certificate(self, equation: str) -> QIndependenceCertificate:
        return next(c for c in self.certificates if c.equation == equation)

    def to_dict(self) -> dict:
        return {"theorem": self.theorem,
                "preconditions": {"ok": self.preconditions_ok, "diagnostics": list(self.diagnostics)},
                "certificates": [dict(c.to_dict(), primary=c.equation in self.primary) for c in self.certificates],
                "gaussianity": [g.to_dict() for g in self.gaussianity],
                "elimination": self.elimination or {"stages": []},
                "conclusion": self.conclusion, "seed": self.seed, "timing_ms": self.timing_ms}


# ---------------------------------------------------------------------------
# Gaussianity oracle


@dataclass
class GaussianityReport:
    mode: str
    directions: int
    gaussian: bool | None
    max_deviation: float = float("nan")
    verdicts: list = field(default_factory=list)
    label: str = ""

    @property
    def rejected_fraction(self) -> float:
        if not self.verdicts:
            return 0.0 if self.gaussian else 1.0
        return sum(v == "not_polynomial" for v in self.verdicts) / len(self.verdicts)

    def to_dict(self) -> dict:
        counts = {k: self.verdicts.count(k) for k in ("polynomial", "not_polynomial", "inconclusive")}
        return {"label": self.label, "mode": self.mode, "directions": self.directions, "gaussian": self.gaussian,
                "max_deviation": self.max_deviation, "verdict_counts": counts,
                "rejected_fraction": self.rejected_fraction}


def _directions(d: int, count: int, seed: int) -> np.ndarray:
    if d == 1:
        return np.where(np.arange(count) % 2 == 0, 1.0, -1.0)[:, None]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(13,))))
    v = rng.standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _ray_radii(handle: CharFnHandle, U: np.ndarray, grid: GridSpec) -> np.ndarray:
    t = grid.radius * np.arange(1, grid.radii + 1) / grid.radii
    pts = (U[:, None, :] * t[None, :, None]).reshape(-1, U.shape[1])
    _, _, ok = handle.psi(pts, grid.floor)
    ok = ok.reshape(len(U), len(t))
    stop = np.where(ok.all(axis=1), len(t), np.argmin(ok, axis=1))
    return np.where(stop > 0, t[np.maximum(stop - 1, 0)], 0.0)


def gaussianity_check(source, directions: int = 16, tol: float = 1e-10, grid: GridSpec = GridSpec(),
                      probes: int = 64, seed: int = 0, symmetric: bool | None = None,
                      label: str = "") -> GaussianityReport:
    """Is psi quadratic along random rays?

    ``source`` is a distribution (exact mode: least-squares quadratic fit of
    the closed-form log CF along each ray) or samples / an empirical handle
    (empirical mode: degree test at D = 2 on t -> psi(t u) per direction).
    """
    if isinstance(source, (Distribution, ProductDist)) or (isinstance(source, CharFnHandle) and source.kind == "exact"):
        handle = source if isinstance(source, CharFnHandle) else CharFnHandle.exact(source)
        return _gaussianity_exact(handle, directions, tol, grid, seed, label)
    if isinstance(source, CharFnHandle):
        handle = source
    else:
        handle = CharFnHandle.empirical(source, None if not isinstance(source, SampleMatrix) or source.n == 1 else 0,
                                        symmetric=bool(symmetric))
    return _gaussianity_empirical(handle, directions, grid, probes, seed, label)


def _gaussianity_exact(handle, directions, tol, grid, seed, label) -> GaussianityReport:
    U = _directions(handle.d, directions, seed)
    radii = _ray_radii(handle, U, grid)
    worst = 0.0
    for u, rad in zip(U, radii):
        if rad <= 0:
            return GaussianityReport("exact", directions, None, float("nan"), label=label)
        t = rad * np.arange(1, 25) / 24
        psi, _, _ = handle.psi(t[:, None] * u[None, :], grid.floor)
        X = np.column_stack([t, t * t])
        coef = np.linalg.lstsq(X, psi.real, rcond=None)[0] + 1j * np.linalg.lstsq(X, psi.imag, rcond=None)[0]
        worst = max(worst, float(np.max(np.abs(X @ coef - psi))))
    return GaussianityReport("exact", directions, worst <= tol, worst, label=label)


def _gaussianity_empirical(handle, directions, grid, probes, seed, label) -> GaussianityReport:
    U = _directions(handle.d, directions, seed)
    radii = _ray_radii(handle, U, grid)
    D = 2
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(17,))))
    blocks = []
    for u, rad in zip(U, radii):
        f, h = draw_stencils(D, probes, max(rad, 1e-300), 1, rng)
        t = np.concatenate([f + k * h for k in range(D + 2)], axis=0)[:, 0]
        blocks.append((t[:, None] * u[None, :], len(f), rad))
    pts = np.concatenate([b[0] for b in blocks], axis=0)
    psi, se, ok = handle.psi(pts, grid.floor)
    verdicts, lo = [], 0
    for P, m, rad in blocks:
        sl = slice(lo, lo + len(P))
        lo += len(P)
        if rad <= 0:
            verdicts.append("inconclusive")
            continue
        verdicts.append(_assess(D, psi[sl], se[sl], ok[sl], m, probes).verdict)
    if "not_polynomial" in verdicts:
        gaussian = False
    elif all(v == "polynomial" for v in verdicts):
        gaussian = True
    else:
        gaussian = None
    return GaussianityReport("empirical", directions, gaussian, verdicts=verdicts, label=label)


# ---------------------------------------------------------------------------
# transformed forms


@dataclass
class Lemma5Transform:
    L1: tuple
    L2: tuple
    C1: np.ndarray
    C2: np.ndarray

    def compose(self, r: BlockPolynomial) -> BlockPolynomial:
        """r'(k, l) = r(C1* l + C2* k, k + l) + r(C2* k, -k) + r(-C1* l, l), with k, l in blocks f, g."""
        d = self.C1.shape[0]
        space = uniform_space(["f", "g"], d)
        I = np.eye(d, dtype=object if self.C1.dtype == object else float)
        if I.dtype == object:
            I = np.array([[1 if i == j else 0 for j in range(d)] for i in range(d)], dtype=object)
        Z = I * 0
        a = compose_affine(r, {"f": Affine.of(("f", self.C2.T), ("g", self.C1.T)), "g": Affine.of(("f", I), ("g", I))}, space)
        b = compose_affine(r, {"f": Affine.of(("f", self.C2.T), ("g", Z)), "g": Affine.of(("f", -I), ("g", Z))}, space)
        c = compose_affine(r, {"f": Affine.of(("f", Z), ("g", -self.C1.T)), "g": Affine.of(("f", Z), ("g", I))}, space)
        return a + b + c


def lemma5_transform(C1, C2) -> Lemma5Transform:
    """Coefficients of the Q-independent forms L'_1 = (C1+C2) xi_1 + 2 C2 xi_2, L'_2 = 2 C1 xi_1 + (C1+C2) xi_2."""
    m1 = np.asarray(getattr(C1, "matrix", C1))
    m2 = np.asarray(getattr(C2, "matrix", C2))
    for name, m in (("C_1", m1), ("C_2", m2)):
        if not check_invertible(LinearOp(m)):
            raise PreconditionError(f"{name} is not invertible", where=name)
    L1 = (LinearOp(m1 + m2), LinearOp(2 * m2))
    L2 = (LinearOp(2 * m1), LinearOp(m1 + m2))
    return Lemma5Transform(L1, L2, m1, m2)


def lemma5_identities(psi1: BlockPolynomial, psi2: BlockPolynomial, C1, C2) -> dict[str, float]:
    """Max coefficient of each log-form identity of the transformed-forms argument (all should vanish)."""
    T = lemma5_transform(C1, C2)
    c1, c2 = T.C1, T.C2
    d = c1.shape[0]
    exact = c1.dtype == object
    I = np.array([[1 if i == j else 0 for j in range(d)] for i in range(d)], dtype=object if exact else float)
    (y, _), = psi1.space
    r = lemma4_polynomial([psi1, psi2], [I, I], [c1, c2])

    hs = uniform_space(["h"], d)
    ks = uniform_space(["f", "g"], d)

    def at(p, space, **parts):
        return compose_affine(p, {y: Affine.of(*parts.items())}, space)

    def rr(space, fparts, gparts):
        return compose_affine(r, {"f": Affine.of(*fparts.items()), "g": Affine.of(*gparts.items())}, space)

    sub1 = (-at(psi1, hs, h=(c2 - c1).T) + at(psi1, hs, h=(c1 + c2).T) + at(psi2, hs, h=2 * c2.T)
           - rr(hs, {"h": c2.T}, {"h": -I}))
    sub2 = (-at(psi2, hs, h=(c2 - c1).T) + at(psi1, hs, h=-2 * c1.T) + at(psi2, hs, h=-(c1 + c2).T)
           - rr(hs, {"h": -c1.T}, {"h": I}))
    lhs = -at(psi1, ks, f=(c1 + c2).T, g=2 * c1.T) - at(psi2, ks, f=2 * c2.T, g=(c1 + c2).T)
    comb = (lhs + at(psi1, ks, f=(c2 - c1).T, g=0 * I) + at(psi2, ks, f=0 * I, g=-(c2 - c1).T)
           - rr(ks, {"f": c2.T, "g": c1.T}, {"f": I, "g": I}))
    rprime = T.compose(r)
    comp = (lhs + at(psi1, ks, f=(c1 + c2).T, g=0 * I) + at(psi2, ks, f=2 * c2.T, g=0 * I)
           + at(psi1, ks, f=0 * I, g=2 * c1.T) + at(psi2, ks, f=0 * I, g=(c1 + c2).T) - rprime)
    forms = rprime - lemma1_polynomial([psi1, psi2], [m.matrix for m in T.L1], [m.matrix for m in T.L2])
    return {"first_substitution": sub1.max_abs_coeff(), "second_substitution": sub2.max_abs_coeff(),
            "combined": comb.max_abs_coeff(), "composed": comp.max_abs_coeff(), "forms": forms.max_abs_coeff()}


# ---------------------------------------------------------------------------
# shared plumbing


def _timer():
    t0 = time.perf_counter()
    return lambda: round(1000.0 * (time.perf_counter() - t0), 3)


def _symmetrized_samples(spec: ExperimentSpec) -> SampleMatrix:
    """Rows of xi - xi' for two independent draws of the whole tuple."""
    dist = spec.tuple_dist
    s0 = sample(dist, spec.N, spec.seed, stream=0)
    s1 = sample(dist, spec.N, spec.seed, stream=1)
    return SampleMatrix(s0.data - s1.data, s0.n, s0.d, spec.seed)


def _reduced_handles(spec: ExperimentSpec, ops: Sequence[LinearOp]):
    """Handles of the symmetrized laws of A_j xi_j, plus the exact laws when available."""
    if spec.source == "exact":
        laws = [m.pushforward(A).symmetrize() for m, A in zip(spec.marginals, ops)]
        return [CharFnHandle.exact(nu, label=f"nu_{j + 1}") for j, nu in enumerate(laws)], laws
    S = _symmetrized_samples(spec)
    hs = [CharFnHandle.empirical(S, j, transform=None if np.array_equal(A.matrix, np.eye(spec.d)) else A,
                                 symmetric=True, label=f"nu_{j + 1}") for j, A in enumerate(ops)]
    return hs, None


def _psi_polys(laws) -> list[BlockPolynomial] | None:
    if laws is None:
        return None
    exps = [nu.psi_exponent() for nu in laws]
    if any(e is None for e in exps):
        return None
    return [e.to_poly("y") for e in exps]


def _replay(pipeline, replays: int, seed: int, *args) -> EliminationReport:
    worst = None
    for k in range(replays):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(23, k))))
        rep = pipeline(*args, rng=rng)
        if worst is None or (not rep.ok and worst.ok) or (rep.ok == worst.ok and rep.max_residual > worst.max_residual):
            worst = rep
    return worst


def _elimination_dict(reports: dict, replays: int) -> dict:
    stages = []
    for name, rep in reports.items():
        for s in rep.stages:
            stages.append(dict(s.to_dict(), pipeline=name))
    return {"replays": replays, "ok": all(r.ok for r in reports.values()),
            "pipelines": {k: {kk: vv for kk, vv in r.to_dict().items() if kk != "stages"} for k, r in reports.items()},
            "stages": stages}


def _gauss_reports(spec: ExperimentSpec, handles, laws) -> list[GaussianityReport]:
    out = []
    for j, h in enumerate(handles):
        src = laws[j] if laws is not None else h
        out.append(gaussianity_check(src, spec.directions, grid=spec.grid, probes=spec.probes,
                                     seed=spec.seed + j, label=f"nu_{j + 1}"))
    return out


def adjudicate(expected_gaussian: bool, exact: bool, certs: Sequence[QIndependenceCertificate],
               primary: Sequence[str], gauss: Sequence[GaussianityReport],
               elimination_ok: bool | None) -> str:
    """Combine sub-reports into one of the three conclusions."""
    if expected_gaussian:
        if any(c.verdict == "not_polynomial" for c in certs):
            return VIOLATION
        if any(g.gaussian is False for g in gauss) or elimination_ok is False:
            return VIOLATION
        if any(c.verdict != "polynomial" for c in certs) or any(g.gaussian is None for g in gauss):
            return INCONCLUSIVE
        return CONSISTENT
    main = [c for c in certs if c.equation in primary]
    if any(c.verdict == "polynomial" for c in main):
        return VIOLATION if exact else INCONCLUSIVE
    if all(c.verdict == "not_polynomial" for c in main):
        return CONSISTENT
    return INCONCLUSIVE


def _certify(res, spec: ExperimentSpec, equation: str | None = None) -> QIndependenceCertificate:
    return certify(res, spec.D_max, spec.probes, spec.seed, equation=equation)


# ---------------------------------------------------------------------------
# drivers


def _linear_forms_q_grid(spec: ExperimentSpec, A, B) -> ResidualGrid:
    """Log-ratio field q of the pair (L_1, L_2) of symmetrized forms, as a joint-vs-marginals field."""
    d = spec.d
    T = np.vstack([np.hstack([_opmat(a) for a in A]), np.hstack([_opmat(b) for b in B])])
    if spec.source == "exact":
        joint = spec.tuple_dist.symmetrize()
        if joint.is_gaussian:
            jg = joint.joint_gaussian()
            g = GaussianDist(T @ jg.mean, T @ jg.cov @ T.T)
            h_joint = CharFnHandle.exact(g, label="L")
            parts = [CharFnHandle.exact(GaussianDist(g.mean[i * d:(i + 1) * d], g.cov[i * d:(i + 1) * d, i * d:(i + 1) * d]),
                                        label=f"L_{i + 1}") for i in range(2)]
        else:
            # CF of (L_1, L_2) at (f, g) is the tuple CF at T* (f, g)
            h_joint = CharFnHandle.from_callable(lambda F: joint.cf(np.asarray(F) @ T), 2 * d, symmetric=True, label="L")
            parts = [CharFnHandle.from_callable(lambda F, M=M: joint.cf(np.asarray(F) @ M), d, symmetric=True,
                                                label=f"L_{i + 1}")
                     for i, M in enumerate((T[:d], T[d:]))]
    else:
        S = _symmetrized_samples(spec)
        LX = S.data @ T.T
        h_joint = CharFnHandle.empirical(LX, symmetric=True, label="L")
        parts = [CharFnHandle.empirical(LX[:, i * d:(i + 1) * d], symmetric=True, label=f"L_{i + 1}") for i in range(2)]
    space = uniform_space(["f1", "f2"], d)
    return residual_grid("q", q_terms(2, d), parts + [h_joint], space, spec.grid, cls=QEstimate)


def tuple_q_grid(spec: ExperimentSpec) -> QEstimate:
    """Log-ratio field q(f_1..f_n) of the symmetrized tuple against its marginals."""
    if spec.source == "exact":
        sym = spec.tuple_dist.symmetrize()
        joint = CharFnHandle.exact(sym, label="xi")
        parts = [CharFnHandle.exact(m, label=f"xi_{j + 1}") for j, m in enumerate(sym.marginals)]
    else:
        S = _symmetrized_samples(spec)
        joint = CharFnHandle.empirical(S, None, symmetric=True, label="xi")
        parts = [CharFnHandle.empirical(S, j, symmetric=True, label=f"xi_{j + 1}") for j in range(spec.n)]
    return estimate_q(joint, parts, spec.grid)


def _linear_forms_q(spec: ExperimentSpec) -> QIndependenceCertificate:
    return _certify(_linear_forms_q_grid(spec, spec.A, spec.B), spec, "q")


def _opmat(a) -> np.ndarray:
    return np.asarray(getattr(a, "matrix", a), dtype=float)


def _forms(spec: ExperimentSpec):
    """Operator lists (A, B) of the linear forms a driver works with."""
    d = spec.d
    I = LinearOp.identity(d)
    if spec.theorem == "thm3":
        if spec.C is None:
            raise PreconditionError("missing operator C", where="C")
        T = lemma5_transform(I, spec.C)
        return T.L1, T.L2
    if spec.theorem == "sample_mean":
        if spec.n != 2:
            raise PreconditionError("the sample mean and residues are not a pair of forms for n > 2", where="n")
        return (I, I), (I, -I)
    return spec.A, spec.B


def residual_field(spec: ExperimentSpec, equation: str) -> ResidualGrid:
    """The residual grid a driver would certify for ``equation``."""
    d = spec.d
    if equation == "q":
        A, B = _forms(spec)
        return _linear_forms_q_grid(spec, A, B)
    if equation in ("lemma6", "lemma6_slice"):
        if spec.source == "exact":
            handle = CharFnHandle.exact(spec.marginals[0].symmetrize(), label="nu")
            boot = 0
        else:
            handle = CharFnHandle.empirical(_symmetrized_samples(spec), "pooled", symmetric=True, label="nu")
            boot = spec.bootstrap
        build = lemma6_residual if equation == "lemma6" else lemma6_slice_residual
        if boot:
            with handle.batched_bootstrap(boot, spec.seed, spec.grid.floor):
                build(handle, spec.n, spec.grid, bootstrap=boot, seed=spec.seed)
        return build(handle, spec.n, spec.grid, bootstrap=boot, seed=spec.seed)
    if equation == "lemma1":
        A, B = _forms(spec)
        C = reduce_operators(A, B)
        handles, _ = _reduced_handles(spec, A)
        return lemma1_residual(handles, [np.eye(d)] * spec.n, [c.matrix for c in C], spec.grid)
    if equation == "lemma4":
        if spec.theorem == "thm3":
            A, B = (LinearOp.identity(d),) * 2, (LinearOp.identity(d), spec.C)
        else:
            A, B = spec.A, spec.B
        if len(A) != spec.n:
            raise PreconditionError("lemma4 needs operator lists A and B", where="A/B")
        C = reduce_operators(A, B)
        handles, _ = _reduced_handles(spec, A)
        return lemma4_residual(handles, [np.eye(d)] * spec.n, [c.matrix for c in C], spec.grid)
    raise ValueError(f"unknown equation {equation!r}")


def run_skitovich_darmois(spec: ExperimentSpec) -> TheoremVerdict:
    clock = _timer()
    n, d = spec.n, spec.d
    if len(spec.A) != n or len(spec.B) != n:
        raise PreconditionError(f"need {n} operators in each of A and B", where="A/B")
    C = reduce_operators(spec.A, spec.B)
    handles, laws = _reduced_handles(spec, spec.A)
    I = [np.eye(d)] * n
    res = lemma1_residual(handles, I, [c.matrix for c in C], spec.grid)
    certs = [_certify(res, spec)]
    primary = ["lemma1"]
    if spec.coupling:
        # the hypothesis (xi_j Q-independent) and the conclusion (L_1, L_2 Q-independent)
        certs.append(_certify(tuple_q_grid(spec), spec, "q_input"))
        certs.append(_linear_forms_q(spec))
        primary.append("q")
    gauss = _gauss_reports(spec, handles, laws)
    elim = None
    psis = _psi_polys(laws)
    if psis is not None:
        r = lemma1_polynomial(psis, I, [c.matrix for c in C])
        rep = _replay(elimination_pipeline_sd, spec.replays, spec.seed, psis, [c.matrix for c in C], r)
        elim = _elimination_dict({"sd": rep}, spec.replays)
    concl = adjudicate(spec.expected_gaussian, spec.source == "exact", certs, primary, gauss,
                       None if elim is None else elim["ok"])
    return TheoremVerdict("sd", True, concl, certs, primary, gauss, elim, list(res.diagnostics),
                          spec.seed, clock())


def run_heyde(spec: ExperimentSpec) -> TheoremVerdict:
    clock = _timer()
    n, d = spec.n, spec.d
    if len(spec.A) != n or len(spec.B) != n:
        raise PreconditionError(f"need {n} operators in each of A and B", where="A/B")
    bad = heyde_failures(spec.A, spec.B)
    if bad:
        diags = [f"B_{i}A_{i}^-1 {s} B_{j}A_{j}^-1 is not invertible for pair ({i}, {j})" for i, j, s in bad]
        return TheoremVerdict("heyde", False, INCONCLUSIVE, diagnostics=diags, seed=spec.seed, timing_ms=clock())
    C = reduce_operators(spec.A, spec.B)
    handles, laws = _reduced_handles(spec, spec.A)
    I = [np.eye(d)] * n
    Cm = [c.matrix for c in C]
    res = lemma4_residual(handles, I, Cm, spec.grid)
    certs = [_certify(res, spec)]
    gauss = _gauss_reports(spec, handles, laws)
    elim = None
    psis = _psi_polys(laws)
    if psis is not None:
        r = lemma4_polynomial(psis, I, Cm)
        rep = _replay(elimination_pipeline_heyde, spec.replays, spec.seed, psis, Cm, r)
        elim = _elimination_dict({"heyde": rep}, spec.replays)
    concl = adjudicate(spec.expected_gaussian, spec.source == "exact", certs, ["lemma4"], gauss,
                       None if elim is None else elim["ok"])
    return TheoremVerdict("heyde", True, concl, certs, ["lemma4"], gauss, elim, list(res.diagnostics),
                          spec.seed, clock())


def run_theorem3(spec: ExperimentSpec) -> TheoremVerdict:
    clock = _timer()
    if spec.n != 2:
        raise PreconditionError("the single-operator Heyde form needs n = 2", where="n")
    if spec.C is None:
        raise PreconditionError("missing operator C", where="C")
    d = spec.d
    I = LinearOp.identity(d)
    inverse(spec.C, "C")
    if not check_invertible(I + spec.C):
        raise PreconditionError("I + C is not invertible (in finite dimension this is the same as Ker(I + C) != {0})",
                                where="I + C")
    T = lemma5_transform(I, spec.C)
    for name, op in zip(("I + C", "2C", "2I", "I + C"), T.L1 + T.L2):
        inverse(op, name)
    sd_spec = replace(spec, theorem="sd", A=T.L1, B=T.L2, C=None)
    sd = run_skitovich_darmois(sd_spec)

    handles, laws = _reduced_handles(spec, [I, I])
    res4 = lemma4_residual(handles, [np.eye(d)] * 2, [np.eye(d), spec.C.matrix], spec.grid)
    certs = [_certify(res4, spec)] + sd.certificates
    primary = ["lemma4", "lemma1"]
    elim = dict(sd.elimination) if sd.elimination else None
    psis = _psi_polys(laws)
    if psis is not None:
        ids = lemma5_identities(psis[0], psis[1], np.eye(d), spec.C.matrix)
        l5 = [{"pipeline": "lemma5", "stage": k, "equation": v, "ok": v <= 1e-10} for k, v in ids.items()]
        elim = elim or {"stages": [], "ok": True}
        elim["stages"] = list(elim["stages"]) + l5
        elim["ok"] = bool(elim["ok"] and all(s["ok"] for s in l5))
    concl = adjudicate(spec.expected_gaussian, spec.source == "exact", certs, primary, sd.gaussianity,
                       None if elim is None else elim["ok"])
    diags = list(res4.diagnostics) + list(sd.diagnostics)
    return TheoremVerdict("thm3", True, concl, certs, primary, sd.gaussianity, elim, diags, spec.seed, clock())


def run_sample_mean_residue(spec: ExperimentSpec) -> TheoremVerdict:
    clock = _timer()
    n, d = spec.n, spec.d
    if n < 2:
        raise PreconditionError("need n >= 2 components", where="n")
    first = spec.marginals[0].to_config()
    if any(m.to_config() != first for m in spec.marginals[1:]):
        raise PreconditionError("components must be identically distributed", where="marginals")
    if spec.source == "exact":
        law = spec.marginals[0].symmetrize()
        handle = CharFnHandle.exact(law, label="nu")
        laws = [law]
        boot = 0
    else:
        S = _symmetrized_samples(spec)
        handle = CharFnHandle.empirical(S, "pooled", symmetric=True, label="nu")
        laws = None
        boot = spec.bootstrap
    def fields():
        r6 = lemma6_residual(handle, n, spec.grid, bootstrap=boot, seed=spec.seed)
        r24 = lemma6_slice_residual(handle, n, spec.grid, bootstrap=boot, seed=spec.seed)
        return r6, r24, [_certify(r6, spec), _certify(r24, spec)]

    if boot:
        # dry run to collect every frequency, so the replicates cost one pass over the data
        with handle.batched_bootstrap(boot, spec.seed, spec.grid.floor):
            fields()
    res6, res24, certs = fields()
    primary = ["lemma6"]
    diags = list(res6.diagnostics)
    gauss = [gaussianity_check(laws[0] if laws else handle, spec.directions, grid=spec.grid,
                               probes=spec.probes, seed=spec.seed, label="nu")]
    elim = None
    psis = _psi_polys(laws)
    if psis is not None:
        r = lemma6_polynomial(psis[0], n)
        rep = _replay(elimination_pipeline_sample_mean, spec.replays, spec.seed, psis[0], n, r)
        elim = _elimination_dict({"sample_mean": rep}, spec.replays)
    if n == 2:
        # with two components the slice is the SD equation for L_1 = xi_1 + xi_2, L_2 = xi_1 - xi_2
        I = LinearOp.identity(d)
        sd = run_skitovich_darmois(replace(spec, theorem="sd", A=(I, I), B=(I, -I)))
        certs += sd.certificates
        primary.append("lemma1")
        diags.append(f"n = 2 routed through the SD driver: {sd.conclusion}")
        if sd.elimination:
            elim = elim or {"stages": [], "ok": True}
            elim["stages"] = list(elim["stages"]) + list(sd.elimination["stages"])
            elim["ok"] = bool(elim["ok"] and sd.elimination["ok"])
    concl = adjudicate(spec.expected_gaussian, spec.source == "exact", certs, primary, gauss,
                       None if elim is None else elim["ok"])
    if not res6.ok.any():
        concl = INCONCLUSIVE
        diags.append("lemma6 grid starved by the CF floor")
    return TheoremVerdict("sample_mean", True, concl, certs, primary, gauss, elim, diags, spec.seed, clock())


DRIVERS = {"sd": run_skitovich_darmois, "heyde": run_heyde, "thm3": run_theorem3,
           "sample_mean": run_sample_mean_residue}


def run(spec: ExperimentSpec) -> TheoremVerdict:
    return DRIVERS[spec.theorem](spec)
