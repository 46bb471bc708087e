"""Distribution families on R^d and on n-tuples.

Every family has a closed-form characteristic functional, a continuous
logarithm of it (where one exists near the origin), and a sampler.  Tuples
are :class:`ProductDist`; with ``coupling`` blocks present the tuple is
jointly Gaussian and Q-independent but not independent.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError, UnsupportedFamilyError
from .polyalgebra import BlockPolynomial, QuadraticExponent, uniform_space

PSD_TOL = 1e-12
BLOCK_ROWS = 8192
_JOINT_STREAM = 2**31


def block_rng(seed: int, stream: int, component: int, block: int) -> np.random.Generator:
    """Independent generator for (seed, stream, component, replicate block)."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(int(stream), int(component), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def _as_points(F, d: int) -> tuple[np.ndarray, bool]:
    F = np.asarray(F, dtype=float)
    single = F.ndim <= 1
    F = F.reshape(1, -1) if single else F
    if F.shape[1] != d:
        raise DimensionError(f"dual vector of length {F.shape[1]} for a distribution on R^{d}")
    return F, single


class Distribution:
    """Interface: ``cf``, ``log_cf``, ``sample`` on R^d."""

    d: int
    is_gaussian: bool = False
    is_symmetric: bool = False

    def cf(self, F) -> np.ndarray:
        raise NotImplementedError

    def log_cf(self, F) -> tuple[np.ndarray, np.ndarray]:
        """(log cf, ok) with log cf continuous along rays from 0 where ok."""
        raise UnsupportedFamilyError(f"{type(self).__name__} has no closed-form log CF")

    def draw(self, rng: np.random.Generator, N: int) -> np.ndarray:
        raise NotImplementedError

    def reflect(self) -> "Distribution":
        return Reflected(self)

    def symmetrize(self) -> "Distribution":
        return Symmetrized(self)

    def pushforward(self, A) -> "Distribution":
        A = np.asarray(getattr(A, "matrix", A), dtype=float)
        if np.array_equal(A, np.eye(self.d)):
            return self
        return Pushforward(self, A)

    def psi_exponent(self) -> QuadraticExponent | None:
        """Exact -log cf as a quadratic exponent, when the law is Gaussian."""
        return None

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class GaussianDist(Distribution):
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        R = np.asarray(self.cov, dtype=float)
        if R.ndim == 0:
            R = R.reshape(1, 1)
        if R.shape != (m.size, m.size):
            raise DimensionError(f"cov shape {R.shape} does not match mean of length {m.size}")
        if np.max(np.abs(R - R.T), initial=0.0) > PSD_TOL * max(1.0, np.max(np.abs(R))):
            raise PreconditionError("covariance is not symmetric", where="cov")
        R = 0.5 * (R + R.T)
        w = np.linalg.eigvalsh(R)
        if w.size and w[0] < -PSD_TOL * max(1.0, w[-1]):
            raise PreconditionError(f"covariance is not PSD (min eigenvalue {w[0]:.3g})", where="cov")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", R)

    @property
    def d(self) -> int:
        return self.mean.size

    is_gaussian = True

    @property
    def is_symmetric(self) -> bool:
        return not np.any(self.mean)

    def log_cf(self, F):
        F, single = _as_points(F, self.d)
        out = 1j * (F @ self.mean) - 0.5 * np.einsum("pi,ij,pj->p", F, self.cov, F)
        ok = np.ones(len(out), bool)
        return (out[0], ok[0]) if single else (out, ok)

    def cf(self, F):
        v, _ = self.log_cf(F)
        return np.exp(v)

    def draw(self, rng, N):
        w, V = np.linalg.eigh(self.cov)
        scale = np.sqrt(np.clip(w, 0.0, None))
        z = rng.standard_normal((N, self.d))
        return self.mean + (z * scale) @ V.T

    def reflect(self):
        return GaussianDist(-self.mean, self.cov)

    def symmetrize(self):
        return GaussianDist(np.zeros(self.d), 2.0 * self.cov)

    def pushforward(self, A):
        A = np.asarray(getattr(A, "matrix", A), dtype=float)
        if np.array_equal(A, np.eye(self.d)):
            return self
        return GaussianDist(A @ self.mean, A @ self.cov @ A.T)

    def psi_exponent(self):
        return QuadraticExponent.from_gaussian(self.mean, self.cov)

    def to_config(self):
        return {"family": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


def point_mass(m) -> GaussianDist:
    m = np.atleast_1d(np.asarray(m, dtype=float))
    return GaussianDist(m, np.zeros((m.size, m.size)))


# ---------------------------------------------------------------------------
# scalar families, used coordinate-wise (iid coordinates)

SCALAR_KINDS = ("gaussian1d", "uniform", "laplace", "exponential", "mixture")
_DEFAULTS = {
    "gaussian1d": {"mu": 0.0, "sigma": 1.0},
    "uniform": {"a": -1.0, "b": 1.0},
    "laplace": {"b": 1.0, "mu": 0.0},
    "exponential": {"rate": 1.0},
    "mixture": {"w": 0.5, "m1": -1.0, "m2": 1.0, "sigma": 1.0},
}


def _sinc(x):
    return np.sinc(x / np.pi)


def _scalar_cf(kind: str, p: Mapping[str, float], t: np.ndarray) -> np.ndarray:
    if kind == "gaussian1d":
        return np.exp(1j * p["mu"] * t - 0.5 * p["sigma"] ** 2 * t**2)
    if kind == "uniform":
        a, b = p["a"], p["b"]
        return np.exp(0.5j * (a + b) * t) * _sinc(0.5 * (b - a) * t)
    if kind == "laplace":
        return np.exp(1j * p["mu"] * t) / (1.0 + (p["b"] * t) ** 2)
    if kind == "exponential":
        return 1.0 / (1.0 - 1j * t / p["rate"])
    if kind == "mixture":
        w, m1, m2, s = p["w"], p["m1"], p["m2"], p["sigma"]
        return np.exp(-0.5 * s**2 * t**2) * (w * np.exp(1j * m1 * t) + (1 - w) * np.exp(1j * m2 * t))
    raise UnsupportedFamilyError(kind)


def _scalar_log_cf(kind: str, p: Mapping[str, float], t: np.ndarray):
    ok = np.ones(t.shape, bool)
    if kind == "gaussian1d":
        return 1j * p["mu"] * t - 0.5 * p["sigma"] ** 2 * t**2, ok
    if kind == "uniform":
        a, b = p["a"], p["b"]
        x = 0.5 * (b - a) * t
        ok = np.abs(x) < np.pi
        s = np.where(ok, _sinc(x), 1.0)
        return 0.5j * (a + b) * t + np.log(s), ok
    if kind == "laplace":
        return 1j * p["mu"] * t - np.log1p((p["b"] * t) ** 2), ok
    if kind == "exponential":
        return -np.log(1.0 - 1j * t / p["rate"]), ok
    if kind == "mixture":
        w, m1, m2, s = p["w"], p["m1"], p["m2"], p["sigma"]
        if w < 0.5:
            w, m1, m2 = 1 - w, m2, m1
        base = -0.5 * s**2 * t**2
        if w > 0.5:
            # w + (1-w) e^{i theta} has positive real part, so the principal log is continuous
            return base + 1j * m1 * t + np.log(w + (1 - w) * np.exp(1j * (m2 - m1) * t)), ok
        half = 0.5 * (m2 - m1) * t
        ok = np.abs(half) < 0.5 * np.pi
        c = np.where(ok, np.cos(half), 1.0)
        return base + 0.5j * (m1 + m2) * t + np.log(c), ok
    raise UnsupportedFamilyError(kind)


def _scalar_draw(kind: str, p: Mapping[str, float], rng: np.random.Generator, shape) -> np.ndarray:
    if kind == "gaussian1d":
        return p["mu"] + p["sigma"] * rng.standard_normal(shape)
    if kind == "uniform":
        return rng.uniform(p["a"], p["b"], shape)
    if kind == "laplace":
        return rng.laplace(p["mu"], p["b"], shape)
    if kind == "exponential":
        return rng.exponential(1.0 / p["rate"], shape)
    if kind == "mixture":
        first = rng.random(shape) < p["w"]
        centre = np.where(first, p["m1"], p["m2"])
        return centre + p["sigma"] * rng.standard_normal(shape)
    raise UnsupportedFamilyError(kind)


@dataclass(frozen=True, eq=False)
class ScalarFamily(Distribution):
    """A random vector in R^d whose coordinates are iid from a 1-D family."""

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    d: int = 1

    def __post_init__(self):
        if self.kind not in SCALAR_KINDS:
            raise UnsupportedFamilyError(f"unknown scalar family {self.kind!r}")
        p = dict(_DEFAULTS[self.kind])
        unknown = set(self.params) - set(p)
        if unknown:
            raise UnsupportedFamilyError(f"unknown parameters {sorted(unknown)} for {self.kind}")
        p.update({k: float(v) for k, v in self.params.items()})
        if self.kind == "uniform" and not p["a"] < p["b"]:
            raise PreconditionError("uniform needs a < b", where="params")
        if self.kind in ("laplace",) and p["b"] <= 0 or self.kind == "exponential" and p["rate"] <= 0:
            raise PreconditionError("scale must be positive", where="params")
        if self.kind == "mixture" and not 0 <= p["w"] <= 1:
            raise PreconditionError("mixture weight must lie in [0, 1]", where="params")
        object.__setattr__(self, "params", p)
        if self.d < 1:
            raise DimensionError("d must be >= 1")

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian1d"

    @property
    def is_symmetric(self) -> bool:
        p = self.params
        if self.kind == "gaussian1d":
            return p["mu"] == 0
        if self.kind == "uniform":
            return p["a"] == -p["b"]
        if self.kind == "laplace":
            return p["mu"] == 0
        if self.kind == "mixture":
            return p["w"] == 0.5 and p["m1"] == -p["m2"] or p["m1"] == p["m2"] == 0
        return False

    def cf(self, F):
        F, single = _as_points(F, self.d)
        out = np.prod(_scalar_cf(self.kind, self.params, F), axis=1)
        return out[0] if single else out

    def log_cf(self, F):
        F, single = _as_points(F, self.d)
        v, ok = _scalar_log_cf(self.kind, self.params, F)
        out, ok = v.sum(axis=1), ok.all(axis=1)
        return (out[0], ok[0]) if single else (out, ok)

    def draw(self, rng, N):
        return _scalar_draw(self.kind, self.params, rng, (N, self.d))

    def psi_exponent(self):
        if self.kind != "gaussian1d":
            return None
        p = self.params
        return QuadraticExponent.from_gaussian(np.full(self.d, p["mu"]), p["sigma"] ** 2 * np.eye(self.d))

    def to_config(self):
        return {"family": self.kind, "d": self.d, **self.params}


# ---------------------------------------------------------------------------
# derived laws


@dataclass(frozen=True, eq=False)
class Reflected(Distribution):
    base: Distribution

    @property
    def d(self):
        return self.base.d

    @property
    def is_gaussian(self):
        return self.base.is_gaussian

    @property
    def is_symmetric(self):
        return self.base.is_symmetric

    def cf(self, F):
        return np.conj(self.base.cf(F))

    def log_cf(self, F):
        F, single = _as_points(F, self.d)
        v, ok = self.base.log_cf(-F)
        return (v[0], ok[0]) if single else (v, ok)

    def draw(self, rng, N):
        return -self.base.draw(rng, N)

    def reflect(self):
        return self.base

    def psi_exponent(self):
        e = self.base.psi_exponent()
        return None if e is None else QuadraticExponent(-e.linear, e.quad)

    def to_config(self):
        return {"family": "reflect", "base": self.base.to_config()}


@dataclass(frozen=True, eq=False)
class Symmetrized(Distribution):
    """nu = mu * reflect(mu): CF |mu^|^2, sampled as xi - xi'."""

    base: Distribution

    @property
    def d(self):
        return self.base.d

    @property
    def is_gaussian(self):
        return self.base.is_gaussian

    is_symmetric = True

    def cf(self, F):
        return np.abs(self.base.cf(F)) ** 2 + 0j

    def log_cf(self, F):
        F, single = _as_points(F, self.d)
        c = np.abs(self.base.cf(F)) ** 2
        ok = c > 0
        v = np.log(np.where(ok, c, 1.0)) + 0j
        return (v[0], ok[0]) if single else (v, ok)

    def draw(self, rng, N):
        return self.base.draw(rng, N) - self.base.draw(rng, N)

    def psi_exponent(self):
        e = self.base.psi_exponent()
        if e is None:
            return None
        return QuadraticExponent(np.zeros_like(e.linear), 2 * e.quad)

    def to_config(self):
        return {"family": "symmetrize", "base": self.base.to_config()}


@dataclass(frozen=True, eq=False)
class Pushforward(Distribution):
    """Law of A xi: CF f -> mu^(A* f)."""

    base: Distribution
    A: np.ndarray

    @property
    def d(self):
        return self.base.d

    @property
    def is_gaussian(self):
        return self.base.is_gaussian

    @property
    def is_symmetric(self):
        return self.base.is_symmetric

    def cf(self, F):
        F, single = _as_points(F, self.d)
        out = self.base.cf(F @ self.A)
        return out[0] if single else out

    def log_cf(self, F):
        F, single = _as_points(F, self.d)
        v, ok = self.base.log_cf(F @ self.A)
        return (v[0], ok[0]) if single else (v, ok)

    def draw(self, rng, N):
        return self.base.draw(rng, N) @ self.A.T

    def symmetrize(self):
        return Pushforward(self.base.symmetrize(), self.A)

    def psi_exponent(self):
        e = self.base.psi_exponent()
        if e is None:
            return None
        return QuadraticExponent(self.A @ e.linear, self.A @ e.quad @ self.A.T)

    def to_config(self):
        return {"family": "pushforward", "A": self.A.tolist(), "base": self.base.to_config()}


def reflect(dist):
    return dist.reflect()


def symmetrize(dist):
    return dist.symmetrize()


# ---------------------------------------------------------------------------
# tuples


@dataclass(frozen=True, eq=False)
class ProductDist:
    """(xi_1, ..., xi_n) on (R^d)^n.

    ``coupling`` maps 0-based pairs ``(i, j)`` with ``i < j`` to the
    cross-covariance block Cov(xi_i, xi_j); it requires Gaussian marginals.
    """

    marginals: tuple
    coupling: Mapping[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        margs = tuple(self.marginals)
        if not margs:
            raise DimensionError("need at least one component")
        d = margs[0].d
        if any(m.d != d for m in margs):
            raise DimensionError("components live in different dimensions")
        cpl = {}
        for (i, j), blk in dict(self.coupling).items():
            i, j = int(i), int(j)
            if i == j or not (0 <= i < len(margs) and 0 <= j < len(margs)):
                raise DimensionError(f"bad coupling pair {(i, j)}")
            blk = np.asarray(blk, dtype=float).reshape(d, d)
            if i > j:
                i, j, blk = j, i, blk.T
            cpl[(i, j)] = blk
        object.__setattr__(self, "marginals", margs)
        object.__setattr__(self, "coupling", cpl)
        if cpl:
            if not all(isinstance(m, GaussianDist) for m in margs):
                raise UnsupportedFamilyError("coupling blocks require Gaussian marginals")
            S = self.joint_cov()
            w = np.linalg.eigvalsh(S)
            if w[0] < -PSD_TOL * max(1.0, w[-1]):
                raise PreconditionError(f"block covariance is not PSD (min eigenvalue {w[0]:.3g})", where="coupling")

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def d(self) -> int:
        return self.marginals[0].d

    @property
    def coupled(self) -> bool:
        return bool(self.coupling)

    @property
    def is_gaussian(self) -> bool:
        return all(m.is_gaussian for m in self.marginals)

    @property
    def is_symmetric(self) -> bool:
        return all(m.is_symmetric for m in self.marginals)

    def joint_cov(self) -> np.ndarray:
        n, d = self.n, self.d
        S = np.zeros((n * d, n * d))
        for j, m in enumerate(self.marginals):
            S[j * d:(j + 1) * d, j * d:(j + 1) * d] = m.cov
        for (i, j), blk in self.coupling.items():
            S[i * d:(i + 1) * d, j * d:(j + 1) * d] = blk
            S[j * d:(j + 1) * d, i * d:(i + 1) * d] = blk.T
        return S

    def joint_mean(self) -> np.ndarray:
        return np.concatenate([m.mean for m in self.marginals])

    def joint_gaussian(self) -> GaussianDist:
        return GaussianDist(self.joint_mean(), self.joint_cov())

    def cf(self, F):
        F, single = _as_points(F, self.n * self.d)
        if self.coupled:
            out = self.joint_gaussian().cf(F)
        else:
            out = np.ones(len(F), complex)
            for j, m in enumerate(self.marginals):
                out = out * m.cf(F[:, j * self.d:(j + 1) * self.d])
        return out[0] if single else out

    def log_cf(self, F):
        F, single = _as_points(F, self.n * self.d)
        if self.coupled:
            v, ok = self.joint_gaussian().log_cf(F)
        else:
            v = np.zeros(len(F), complex)
            ok = np.ones(len(F), bool)
            for j, m in enumerate(self.marginals):
                vj, okj = m.log_cf(F[:, j * self.d:(j + 1) * self.d])
                v, ok = v + vj, ok & okj
        return (v[0], ok[0]) if single else (v, ok)

    def reflect(self) -> "ProductDist":
        return ProductDist(tuple(m.reflect() for m in self.marginals), self.coupling)

    def symmetrize(self) -> "ProductDist":
        """Tuple xi - xi' for an independent copy xi' of the whole tuple."""
        return ProductDist(tuple(m.symmetrize() for m in self.marginals),
                           {k: 2.0 * v for k, v in self.coupling.items()})

    def pushforward(self, ops: Sequence) -> "ProductDist":
        mats = [np.asarray(getattr(A, "matrix", A), dtype=float) for A in ops]
        if len(mats) != self.n:
            raise DimensionError("one operator per component required")
        margs = tuple(m.pushforward(A) for m, A in zip(self.marginals, mats))
        cpl = {(i, j): mats[i] @ blk @ mats[j].T for (i, j), blk in self.coupling.items()}
        return ProductDist(margs, cpl)


def exact_cf(dist, f):
    """Closed-form characteristic functional value(s)."""
    return dist.cf(f)


def coupled_gaussian_q(dist: ProductDist) -> BlockPolynomial:
    """q(f_1..f_n) = -sum_{i<j} <Sigma_ij f_j, f_i> over blocks f1..fn."""
    if not dist.is_gaussian or not all(isinstance(m, GaussianDist) for m in dist.marginals):
        raise UnsupportedFamilyError("q witness is only available for jointly Gaussian tuples")
    d, n = dist.d, dist.n
    names = [f"f{j + 1}" for j in range(n)]
    space = uniform_space(names, d)
    nv = n * d
    terms: dict = {}
    for (i, j), blk in dist.coupling.items():
        for a in range(d):
            for b in range(d):
                mono = [0] * nv
                mono[i * d + a] += 1
                mono[j * d + b] += 1
                mono = tuple(mono)
                terms[mono] = terms.get(mono, 0.0) - blk[a, b]
    return BlockPolynomial(space, terms)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """N replicates of an n-tuple in R^d, stored as an (N, n*d) array."""

    data: np.ndarray
    n: int
    d: int
    seed: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] != self.n * self.d or data.shape[0] < 1:
            raise DimensionError(f"sample matrix of shape {data.shape} for n={self.n}, d={self.d}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    def component(self, j: int) -> np.ndarray:
        return self.data[:, j * self.d:(j + 1) * self.d]

    def components(self) -> np.ndarray:
        """View as (N, n, d)."""
        return self.data.reshape(self.N, self.n, self.d)

    def header(self) -> list[str]:
        return [f"comp{j + 1}_dim{i + 1}" for j in range(self.n) for i in range(self.d)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.data:
                w.writerow([repr(float(x)) for x in row])


def sample_block(dist: ProductDist, N: int, seed: int, block: int, stream: int = 0) -> np.ndarray:
    """Rows ``[block * BLOCK_ROWS, ...)`` of ``sample(dist, N, seed, stream)``."""
    lo = block * BLOCK_ROWS
    rows = min(BLOCK_ROWS, N - lo)
    if rows <= 0:
        raise ValueError("block outside the sample")
    if dist.coupled:
        rng = block_rng(seed, stream, _JOINT_STREAM, block)
        return dist.joint_gaussian().draw(rng, rows)
    parts = [m.draw(block_rng(seed, stream, j, block), rows) for j, m in enumerate(dist.marginals)]
    return np.concatenate(parts, axis=1)


def sample(dist: ProductDist, N: int, seed: int, stream: int = 0) -> SampleMatrix:
    """Deterministic in (dist, N, seed, stream); blocks are independent streams."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not isinstance(dist, ProductDist):
        dist = ProductDist((dist,))
    nblocks = -(-N // BLOCK_ROWS)
    data = np.concatenate([sample_block(dist, N, seed, b, stream) for b in range(nblocks)], axis=0)
    return SampleMatrix(data, dist.n, dist.d, int(seed))


# ---------------------------------------------------------------------------
# config round-trip


def _mat(x, d: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return a * np.eye(d)
    return a.reshape(d, d)


def dist_from_config(spec: Mapping, d: int) -> Distribution:
    spec = dict(spec)
    fam = spec.pop("family", None)
    if fam is None:
        raise UnsupportedFamilyError("distribution spec needs a 'family'")
    if fam == "gaussian":
        mean = np.asarray(spec.get("mean", np.zeros(d)), dtype=float).reshape(d)
        return GaussianDist(mean, _mat(spec.get("cov", 1.0), d))
    if fam == "point":
        return point_mass(np.asarray(spec.get("mean", np.zeros(d)), dtype=float).reshape(d))
    if fam in SCALAR_KINDS:
        spec.pop("d", None)
        return ScalarFamily(fam, spec, d)
    raise UnsupportedFamilyError(f"unknown family {fam!r}")
