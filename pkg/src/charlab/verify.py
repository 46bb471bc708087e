"""Seeded exact-identity suite behind ``charlab verify-algebra``."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .elimination import (TOL, elimination_pipeline_heyde, elimination_pipeline_sample_mean,
                          elimination_pipeline_sd)
from .polyalgebra import QuadraticExponent, delta_exact, random_polynomial, uniform_space
from .qindep import lemma1_polynomial, lemma4_polynomial, lemma6_polynomial


@dataclass
class QuadraticInstance:
    R: list
    C: list
    exact: bool

    @property
    def psis(self):
        out = []
        for R in self.R:
            mean = np.zeros(len(R), dtype=object if self.exact else float)
            out.append(QuadraticExponent.from_gaussian(mean, R).to_poly("y"))
        return out


def _nonsingular(M: np.ndarray, exact: bool) -> bool:
    M = M.astype(float)
    if exact:
        # integer matrices: the determinant is an integer
        return abs(round(float(np.linalg.det(M)))) >= 1
    s = np.linalg.svd(M, compute_uv=False)
    return s[-1] > 1e-3 * s[0]


def random_quadratic_instance(n: int, d: int, rng: np.random.Generator, exact: bool = False,
                              heyde: bool = True) -> QuadraticInstance:
    """Zero-mean quadratic exponents with random SPD R_j and random C_j.

    Every C_j is invertible; with ``heyde`` so is every C_i +- C_j.
    Exact instances use integer matrices.
    """
    def draw_c():
        if exact:
            return rng.integers(-3, 4, (d, d)).astype(object)
        return rng.standard_normal((d, d))

    for _ in range(1000):
        C = [draw_c() for _ in range(n)]
        mats = list(C)
        if heyde:
            mats += [C[i] + s * C[j] for i in range(n) for j in range(i + 1, n) for s in (1, -1)]
        if all(_nonsingular(m, exact) for m in mats):
            break
    else:
        raise RuntimeError("could not draw admissible operators")
    R = []
    for _ in range(n):
        if exact:
            L = rng.integers(-2, 3, (d, d))
            R.append((L @ L.T + np.eye(d, dtype=int)).astype(object))
        else:
            L = rng.standard_normal((d, d))
            R.append(L @ L.T + 0.5 * np.eye(d))
    return QuadraticInstance(R, C, exact)


@dataclass
class IdentityResult:
    identity: str
    max_residual: float
    ok: bool
    stage: str | None = None


@dataclass
class VerifyReport:
    n: int
    d: int
    seed: int
    exact: bool
    results: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def worst(self) -> dict[str, IdentityResult]:
        out: dict[str, IdentityResult] = {}
        for r in self.results:
            cur = out.get(r.identity)
            if cur is None or (cur.ok and not r.ok) or (cur.ok == r.ok and r.max_residual > cur.max_residual):
                out[r.identity] = r
        return out

    def lines(self) -> list[str]:
        rows = []
        for name, r in self.worst().items():
            tag = "ok  " if r.ok else "FAIL"
            where = "" if r.ok or r.stage is None else f"  (first failing stage {r.stage})"
            rows.append(f"{tag} {name:<30} max residual {r.max_residual:.3e}{where}")
        return rows


def _delta_checks(d: int, rng: np.random.Generator, exact: bool) -> list[IdentityResult]:
    out = []
    space = uniform_space(["x"], d)
    for D in range(5):
        p = random_polynomial(space, D, rng)
        h = {"x": [int(v) for v in rng.integers(-3, 4, d)] if exact else rng.uniform(-1, 1, d)}
        while not any(h["x"]):
            h = {"x": [int(v) for v in rng.integers(-3, 4, d)]}
        k = {"x": rng.uniform(-1, 1, d)}
        kill = delta_exact(p, h, D + 1).max_abs_coeff()
        out.append(IdentityResult("delta.kill", kill, kill <= TOL))
        comm = (delta_exact(delta_exact(p, h), k) - delta_exact(delta_exact(p, k), h)).max_abs_coeff()
        out.append(IdentityResult("delta.commute", comm, comm <= TOL))
    return out


def verify_algebra(n: int = 3, d: int = 2, seed: int = 0, exact: bool = False, instances: int = 5,
                   fault: str | None = None) -> VerifyReport:
    """Replay every elimination argument and the transformed-forms identities on seeded instances."""
    from .theorems import lemma5_identities

    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(29, n, d))))
    rep = VerifyReport(n, d, seed, exact)
    for _ in range(instances):
        inst = random_quadratic_instance(n, d, rng, exact)
        psis = inst.psis
        eye = [np.eye(d, dtype=int).astype(object) if exact else np.eye(d)] * n
        for name, pipeline, r, args in (
                ("sd", elimination_pipeline_sd, lemma1_polynomial(psis, eye, inst.C), (psis, inst.C)),
                ("heyde", elimination_pipeline_heyde, lemma4_polynomial(psis, eye, inst.C), (psis, inst.C)),
                ("sample_mean", elimination_pipeline_sample_mean, lemma6_polynomial(psis[0], n), (psis[0], n))):
            e = pipeline(*args, r, rng=rng, fault=fault)
            rep.results.append(IdentityResult(name, e.max_residual, e.ok, e.first_failing_stage))
        c2 = inst.C[1] if n >= 2 else inst.C[0]
        for key, v in lemma5_identities(psis[0], psis[1 % n], inst.C[0], c2).items():
            rep.results.append(IdentityResult(f"transform.{key}", float(v), v <= TOL))
        rep.results += _delta_checks(d, rng, exact)
    rep.seconds = time.perf_counter() - t0
    return rep
