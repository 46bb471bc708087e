"""Characteristic-functional numerics.

Empirical CFs come from a non-uniform FFT (type 3) when the sample is large,
and from direct summation otherwise; the direct path doubles as the oracle.
``psi = -log cf`` is taken with a continuous branch: closed form for exact
laws, the principal branch for symmetric laws, and phase continuation along
the segment from 0 otherwise.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, OutOfDomainError, PreconditionError, UnsupportedFamilyError
from .polyalgebra import BlockPolynomial, delta_exact, finite_difference_coeffs

DEFAULT_FLOOR = 0.2
NUFFT_EPS = 1e-12
DIRECT_LIMIT = 2_000_000  # N * P below which direct summation is used
UNWRAP_STEPS = 16
BOOT_CHUNK = 20
BOOT_EPS = 1e-6  # replicate spread is O(1/sqrt(N)); tighter tolerance buys nothing
ROUNDOFF = 1e-12


# ---------------------------------------------------------------------------
# empirical characteristic function


def _direct(X: np.ndarray, F: np.ndarray, C: np.ndarray) -> np.ndarray:
    """sum_k C[t, k] exp(i <X_k, F_p>) for every transform t; chunked over points."""
    out = np.empty((C.shape[0], F.shape[0]), dtype=complex)
    step = max(1, 4_000_000 // max(1, X.shape[0]))
    for lo in range(0, F.shape[0], step):
        E = np.exp(1j * (X @ F[lo:lo + step].T))
        out[:, lo:lo + step] = C @ E
    return out


def _nufft(X: np.ndarray, F: np.ndarray, C: np.ndarray, eps: float = NUFFT_EPS) -> np.ndarray:
    import finufft

    d = X.shape[1]
    if not np.iscomplexobj(C) and C.shape[0] > 1:
        # two real weight rows per complex strength: with S = A + iB at +-F,
        # A(F) = (S(F) + conj S(-F)) / 2 and B(F) = (S(F) - conj S(-F)) / 2i
        T = C.shape[0]
        if T % 2:
            C = np.vstack([C, np.zeros((1, C.shape[1]))])
        S = _nufft(X, np.vstack([F, -F]), C[0::2] + 1j * C[1::2], eps)
        P = F.shape[0]
        Sp, Sm = S[:, :P], np.conj(S[:, P:])
        out = np.empty((C.shape[0], P), complex)
        out[0::2] = 0.5 * (Sp + Sm)
        out[1::2] = -0.5j * (Sp - Sm)
        return out[:T]
    xs = [np.ascontiguousarray(X[:, i]) for i in range(d)]
    fs = [np.ascontiguousarray(F[:, i]) for i in range(d)]
    c = np.ascontiguousarray(C.astype(complex))
    kw = dict(eps=eps, isign=1, nthreads=1)
    if C.shape[0] == 1:
        c = c[0]
    if d == 1:
        out = finufft.nufft1d3(xs[0], c, fs[0], **kw)
    elif d == 2:
        out = finufft.nufft2d3(xs[0], xs[1], c, fs[0], fs[1], **kw)
    else:
        out = finufft.nufft3d3(xs[0], xs[1], xs[2], c, fs[0], fs[1], fs[2], **kw)
    return np.atleast_2d(out)


def ecf_values(X, F, weights=None, backend: str = "auto", eps: float = NUFFT_EPS) -> np.ndarray:
    """Weighted empirical CF of the rows of ``X`` at the rows of ``F``.

    ``weights`` of shape ``(N,)`` or ``(T, N)`` must sum to one per row; the
    default is the uniform 1/N.  Returns shape ``(P,)`` or ``(T, P)``.
    ``eps`` is the NUFFT tolerance (the direct sum is exact).
    """
    X = np.asarray(X, dtype=float)
    F = np.asarray(F, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimensionError("empirical CF of an empty sample")
    if F.ndim == 1:
        F = F.reshape(-1, X.shape[1])
    if F.shape[1] != X.shape[1]:
        raise DimensionError(f"dual vectors of length {F.shape[1]} for samples in R^{X.shape[1]}")
    N, d = X.shape
    if weights is None:
        C = np.full((1, N), 1.0 / N)
        single = True
    else:
        C = np.atleast_2d(np.asarray(weights, dtype=float))
        single = np.asarray(weights).ndim == 1
    if F.shape[0] == 0:
        out = np.zeros((C.shape[0], 0), complex)
    else:
        if backend == "auto":
            backend = "direct" if d > 3 or N * F.shape[0] < DIRECT_LIMIT else "nufft"
        out = _direct(X, F, C) if backend == "direct" else _nufft(X, F, C, eps)
        zero = ~F.any(axis=1)
        if zero.any():
            out[:, zero] = C.sum(axis=1)[:, None]
    return out[0] if single else out


def _ecf_se(values: np.ndarray, N: int) -> np.ndarray:
    """se of a mean of unit-modulus summands: var(Re) + var(Im) = 1 - |mean|^2."""
    return np.sqrt(np.clip(1.0 - np.abs(values) ** 2, 0.0, None) / max(N - 1, 1))


def _component_data(samples, selector, transform) -> np.ndarray:
    from .distributions import SampleMatrix

    if isinstance(samples, SampleMatrix):
        if selector is None:
            X = samples.data
        elif selector == "pooled":
            X = samples.data.reshape(samples.N * samples.n, samples.d)
        else:
            X = samples.component(int(selector))
    else:
        X = np.asarray(samples, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
    if transform is not None:
        A = np.asarray(getattr(transform, "matrix", transform), dtype=float)
        X = X @ A.T
    return np.ascontiguousarray(X)


def ecf(samples, selector, f, transform=None):
    """(mean of exp(i<x_k, f>), standard error) for one component block."""
    X = _component_data(samples, selector, transform)
    if X.shape[0] == 0:
        raise DimensionError("empirical CF of an empty sample")
    F = np.atleast_2d(np.asarray(f, dtype=float))
    v = ecf_values(X, F)
    se = _ecf_se(v, X.shape[0])
    if np.ndim(f) <= 1:
        return complex(v[0]), float(se[0])
    return v, se


# ---------------------------------------------------------------------------
# handles


@dataclass(eq=False)
class CharFnHandle:
    """Evaluator of a characteristic functional on (R^d)."""

    kind: str
    d: int
    dist: object = None
    X: np.ndarray | None = None
    fn: Callable | None = None
    symmetric: bool = False
    group: int = 1  # rows per replicate (pooled components share a replicate)
    label: str = ""
    _boot: dict = field(default_factory=dict, repr=False)
    _pending: list | None = field(default=None, repr=False)

    @classmethod
    def exact(cls, dist, label: str = "") -> "CharFnHandle":
        d = getattr(dist, "n", 1) * dist.d if hasattr(dist, "marginals") else dist.d
        return cls("exact", d, dist=dist, symmetric=bool(dist.is_symmetric), label=label)

    @classmethod
    def empirical(cls, samples, selector=None, transform=None, symmetric: bool = False,
                  label: str = "") -> "CharFnHandle":
        X = _component_data(samples, selector, transform)
        group = samples.n if selector == "pooled" else 1
        return cls("empirical", X.shape[1], X=X, symmetric=symmetric, group=group, label=label)

    @classmethod
    def from_callable(cls, fn: Callable, d: int, symmetric: bool = False, label: str = "") -> "CharFnHandle":
        return cls("callable", d, fn=fn, symmetric=symmetric, label=label)

    @property
    def N(self) -> int:
        return 0 if self.X is None else self.X.shape[0]

    def _points(self, F) -> tuple[np.ndarray, bool]:
        F = np.asarray(F, dtype=float)
        single = F.ndim <= 1
        F = F.reshape(1, -1) if single else F
        if F.shape[1] != self.d:
            raise DimensionError(f"dual vector of length {F.shape[1]} for a CF on R^{self.d}")
        return F, single

    def evaluate(self, F) -> tuple[np.ndarray, np.ndarray]:
        """(cf values, standard errors)."""
        F, single = self._points(F)
        if self.kind == "exact":
            v = np.asarray(self.dist.cf(F), dtype=complex).reshape(-1)
            se = np.zeros(len(v))
        elif self.kind == "empirical":
            v = ecf_values(self.X, F)
            se = _ecf_se(v, self.N)
        else:
            v = np.asarray(self.fn(F), dtype=complex).reshape(-1)
            se = np.zeros(len(v))
        return (v[0], se[0]) if single else (v, se)

    def eval(self, F):
        return self.evaluate(F)[0]

    def se(self, F):
        return self.evaluate(F)[1]

    def psi(self, F, floor: float = DEFAULT_FLOOR):
        """(psi, se, ok) with psi = -log cf on a continuous branch.

        ``ok`` is false where |cf| < floor anywhere the branch depends on.
        """
        F, single = self._points(F)
        if self.kind == "exact":
            cf = np.asarray(self.dist.cf(F), dtype=complex).reshape(-1)
            try:
                lg, ok = self.dist.log_cf(F)
                lg = np.asarray(lg, dtype=complex).reshape(-1)
                ok = np.asarray(ok, bool).reshape(-1) & (np.abs(cf) >= floor)
                psi, se = -lg, np.zeros(len(cf))
            except UnsupportedFamilyError:
                psi, se, ok = self._continued(F, floor)
        elif self.symmetric:
            cf, se_cf = self.evaluate(F)
            ok = np.abs(cf) >= floor
            safe = np.where(ok, cf, 1.0)
            psi = -np.log(safe)
            se = np.where(ok, se_cf / np.abs(safe), 0.0)
        else:
            psi, se, ok = self._continued(F, floor)
        psi = np.where(ok, psi, np.nan)
        return (psi[0], se[0], ok[0]) if single else (psi, se, ok)

    def _continued(self, F, floor):
        """Phase continuation along t -> tF, t in (0, 1]."""
        K = UNWRAP_STEPS
        t = np.arange(1, K + 1) / K
        path = (t[:, None, None] * F[None, :, :]).reshape(-1, self.d)
        cf, se_cf = self.evaluate(path)
        cf = cf.reshape(K, -1)
        se_cf = se_cf.reshape(K, -1)
        mod_ok = (np.abs(cf) >= floor).all(axis=0)
        ang = np.angle(cf)
        steps = np.diff(np.vstack([np.zeros(ang.shape[1]), ang]), axis=0)
        wrapped = (steps + np.pi) % (2 * np.pi) - np.pi
        # continuation is trusted only if every step is well inside (-pi, pi)
        ok = mod_ok & (np.abs(wrapped) < 0.5 * np.pi).all(axis=0)
        phase = wrapped.sum(axis=0)
        end = cf[-1]
        safe = np.where(ok, np.abs(end), 1.0)
        psi = -(np.log(safe) + 1j * phase)
        se = np.where(ok, se_cf[-1] / safe, 0.0)
        return psi, se, ok

    def psi_bootstrap(self, F, B: int, seed: int, floor: float = DEFAULT_FLOOR) -> np.ndarray:
        """(B, P) bootstrap replicates of psi; replicate rows drawn with multinomial weights.

        Replicates are cached per point, so repeated requests are free.
        """
        if self.kind != "empirical":
            raise PreconditionError("bootstrap needs an empirical source", where=self.label or "handle")
        F, _ = self._points(F)
        if self._pending is not None:
            self._pending.append(F)
            return np.zeros((B, len(F)), complex)
        index, reps = self._boot.get((B, seed, floor), ({}, np.empty((B, 0), complex)))
        keys = [row.tobytes() for row in F]
        missing = list(dict.fromkeys(k for k in keys if k not in index))
        if missing:
            Fm = np.frombuffer(b"".join(missing), dtype=float).reshape(-1, self.d)
            for k in missing:
                index[k] = len(index)
            reps = np.hstack([reps, self._bootstrap_block(Fm, B, seed, floor)])
            self._boot[(B, seed, floor)] = (index, reps)
        return reps[:, [index[k] for k in keys]]

    def _bootstrap_block(self, F, B, seed, floor):
        psi0, _, ok = self.psi(F, floor)
        cf0 = np.where(ok, np.exp(-np.where(ok, psi0, 0)), 1.0)
        reps = self.N // self.group
        out = np.empty((B, len(F)), complex)
        for c0 in range(0, B, BOOT_CHUNK):
            nb = min(BOOT_CHUNK, B - c0)
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(7, c0))))
            # uniform multinomial counts, drawn as bincounts of resampled row indices
            W = np.stack([np.bincount(rng.integers(0, reps, reps), minlength=reps) for _ in range(nb)]).astype(float)
            if self.group > 1:
                W = np.repeat(W, self.group, axis=1)
            W /= W.sum(axis=1, keepdims=True)
            cf_b = ecf_values(self.X, F, W, eps=BOOT_EPS)
            ratio = np.where(ok, cf_b / cf0, 1.0)
            ratio = np.where(ratio == 0, 1.0, ratio)
            out[c0:c0 + nb] = np.where(ok, psi0 - np.log(ratio), np.nan)
        return out

    @contextmanager
    def batched_bootstrap(self, B: int, seed: int, floor: float = DEFAULT_FLOOR):
        """Collect bootstrap requests, then compute them all in one pass on exit.

        Inside the block ``psi_bootstrap`` returns placeholders; re-running
        the same computation afterwards reads the cached replicates.
        """
        self._pending = []
        try:
            yield self
            pending = self._pending
        finally:
            self._pending = None
        if pending and B > 0 and self.kind == "empirical":
            self.psi_bootstrap(np.vstack(pending), B, seed, floor)


# ---------------------------------------------------------------------------
# log fields on star grids


@dataclass(frozen=True)
class GridSpec:
    rays: int = 8
    radii: int = 12
    radius: float = 2.0
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.rays < 1 or self.radii < 1 or self.radius <= 0:
            raise ValueError("grid needs positive rays, radii and radius")
        if not 0 < self.floor < 1:
            raise ValueError("floor must lie in (0, 1)")


def ray_directions(d: int, count: int) -> np.ndarray:
    """Unit directions: +-e_i first, then fixed pseudo-random fill."""
    dirs = []
    for i in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = s
            dirs.append(e)
    if d == 1:
        return np.array(dirs[:max(1, min(count, 2))])
    rng = np.random.Generator(np.random.PCG64(20240611 + d))
    while len(dirs) < count:
        v = rng.standard_normal(d)
        dirs.append(v / np.linalg.norm(v))
    return np.array(dirs[:count])


def star_grid(d: int, spec: GridSpec = GridSpec()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(points, ray ids, radii); the origin comes first with ray id -1."""
    dirs = ray_directions(d, spec.rays)
    rad = spec.radius * np.arange(1, spec.radii + 1) / spec.radii
    pts = [np.zeros((1, d))]
    ids = [np.array([-1])]
    rr = [np.zeros(1)]
    for k, u in enumerate(dirs):
        pts.append(rad[:, None] * u[None, :])
        ids.append(np.full(len(rad), k))
        rr.append(rad)
    return np.vstack(pts), np.concatenate(ids), np.concatenate(rr)


@dataclass
class LogCfField:
    grid: np.ndarray
    ray_id: np.ndarray
    radius: np.ndarray
    values: np.ndarray
    se: np.ndarray
    kept: np.ndarray
    branch_ok: bool
    ray_radius: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def valid_radius(self) -> float:
        """Largest r such that every ray is retained up to r."""
        return float(self.ray_radius.min()) if len(self.ray_radius) else 0.0

    def rows(self):
        for p, k, r, v, s, keep in zip(self.grid, self.ray_id, self.radius, self.values, self.se, self.kept):
            if keep:
                yield int(k), float(r), p, complex(v), float(s)


def log_cf_field(cf: CharFnHandle, spec: GridSpec = GridSpec()) -> LogCfField:
    """psi on a star grid, truncated along each ray at the first point below the floor."""
    pts, ids, rad = star_grid(cf.d, spec)
    vals = np.zeros(len(pts), complex)
    se = np.zeros(len(pts))
    kept = np.zeros(len(pts), bool)
    kept[0] = True
    c, s = cf.evaluate(pts[1:])
    vals_cf = np.concatenate([[1.0], c])
    se_cf = np.concatenate([[0.0], s])
    nrays = ids.max() + 1
    ray_radius = np.zeros(nrays)
    diags = []
    branch_ok = True
    exact_psi = None
    if cf.kind == "exact":
        exact_psi, _, exact_ok = cf.psi(pts, spec.floor)
    for k in range(nrays):
        idx = np.flatnonzero(ids == k)
        mod = np.abs(vals_cf[idx])
        good = mod >= spec.floor
        if exact_psi is not None:
            good &= exact_ok[idx]
        stop = len(idx) if good.all() else int(np.argmin(good))
        if stop == 0:
            diags.append(f"ray {k}: |cf| below floor {spec.floor} at the first grid point")
            continue
        use = idx[:stop]
        if exact_psi is not None:
            v = exact_psi[use]
        else:
            ang = np.unwrap(np.concatenate([[0.0], np.angle(vals_cf[use])]))[1:]
            v = -(np.log(mod[:stop]) + 1j * ang)
        jumps = np.abs(np.diff(np.concatenate([[0.0], v.imag])))
        if np.any(jumps >= np.pi):
            branch_ok = False
            diags.append(f"ray {k}: phase step of {jumps.max():.3g} rad")
        vals[use] = v
        se[use] = se_cf[use] / mod[:stop]
        kept[use] = True
        ray_radius[k] = rad[use[-1]]
    cut = [k for k in range(nrays) if 0 < ray_radius[k] < rad[ids == k].max()]
    if cut:
        diags.append(f"{len(cut)} of {nrays} rays truncated by the floor, "
                     f"radii {ray_radius[cut].min():.4g} to {ray_radius[cut].max():.4g}")
    return LogCfField(pts, ids, rad, np.where(kept, vals, np.nan), se, kept, branch_ok, ray_radius, diags)


# ---------------------------------------------------------------------------
# fields of linear combinations of psi's


@dataclass(frozen=True)
class LogTerm:
    """coef * psi_handle(M z) for z in the flattened variable space."""

    coef: float
    handle: CharFnHandle
    matrix: np.ndarray


class Field:
    """Interface of anything the degree test can probe."""

    nvars: int
    radius: float

    def evaluate(self, Z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(eq=False)
class CallableField(Field):
    fn: Callable
    nvars: int
    radius: float = 1.0

    def evaluate(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        v = np.asarray(self.fn(Z), dtype=complex).reshape(-1)
        return v, np.zeros(len(v)), np.isfinite(v)


@dataclass(eq=False)
class LogField(Field):
    """sum_t coef_t psi_t(M_t z) + offset(z); se by quadrature or bootstrap."""

    terms: list
    nvars: int
    floor: float = DEFAULT_FLOOR
    grid: GridSpec = GridSpec()
    bootstrap: int = 0
    seed: int = 0
    radius: float = field(default=np.nan)
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        for t in self.terms:
            if t.matrix.shape != (t.handle.d, self.nvars):
                raise DimensionError(f"term matrix {t.matrix.shape} does not map R^{self.nvars} to R^{t.handle.d}")
        if np.isnan(self.radius):
            self.radius = self._domain_radius()

    def _domain_radius(self) -> float:
        cache: dict[int, float] = {}
        rho = np.inf
        spec = GridSpec(self.grid.rays, self.grid.radii, self.grid.radius, self.floor)
        for t in self.terms:
            key = id(t.handle)
            if key not in cache:
                fld = log_cf_field(t.handle, spec)
                cache[key] = fld.valid_radius
                self.diagnostics.extend(f"{t.handle.label or 'psi'}: {m}" for m in fld.diagnostics)
            nrm = np.linalg.norm(t.matrix, 2)
            if nrm > 0:
                rho = min(rho, cache[key] / nrm)
        return float(rho) if np.isfinite(rho) else float(self.grid.radius)

    def _grouped(self):
        groups: dict[int, list[int]] = {}
        for i, t in enumerate(self.terms):
            groups.setdefault(id(t.handle), []).append(i)
        return groups

    def evaluate(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        P = Z.shape[0]
        val = np.zeros(P, complex)
        var = np.zeros(P)
        ok = np.ones(P, bool)
        boots = np.zeros((self.bootstrap, P), complex) if self.bootstrap else None
        for idxs in self._grouped().values():
            h = self.terms[idxs[0]].handle
            F = np.vstack([Z @ self.terms[i].matrix.T for i in idxs])
            psi, se, okh = h.psi(F, self.floor)
            if boots is not None and h.kind == "empirical":
                pb = h.psi_bootstrap(F, self.bootstrap, self.seed, self.floor)
            for k, i in enumerate(idxs):
                sl = slice(k * P, (k + 1) * P)
                c = self.terms[i].coef
                ok &= okh[sl]
                val += c * np.where(okh[sl], psi[sl], 0)
                var += (c * se[sl]) ** 2
                if boots is not None:
                    if h.kind == "empirical":
                        boots += c * np.nan_to_num(pb[:, sl])
                    else:
                        boots += c * np.where(okh[sl], psi[sl], 0)[None, :]
        if boots is not None:
            dev = boots - boots.mean(axis=0)
            se_out = np.sqrt(np.mean(np.abs(dev) ** 2, axis=0) * self.bootstrap / max(self.bootstrap - 1, 1))
        else:
            se_out = np.sqrt(var)
        return np.where(ok, val, np.nan), np.where(ok, se_out, np.nan), ok


# ---------------------------------------------------------------------------
# finite differences


def finite_difference(psi, h, order: int = 1, f=None, radius: float | None = None):
    """Delta_h^order psi.

    ``psi`` may be a :class:`BlockPolynomial` (``h`` a per-block mapping;
    returns a polynomial), a :class:`Field`, or a plain callable acting on
    rows of points.  For the latter two the result is evaluated at the base
    points ``f`` (shape ``(P, nvars)`` or ``(nvars,)``).
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if isinstance(psi, BlockPolynomial):
        return delta_exact(psi, h, order)
    if f is None:
        raise ValueError("base points are required for a numeric finite difference")
    f = np.asarray(f, dtype=float)
    single = f.ndim == 1
    F = np.atleast_2d(f)
    h = np.asarray(h, dtype=float).reshape(1, -1)
    if h.shape[1] != F.shape[1]:
        raise DimensionError(f"shift of length {h.shape[1]} for points of length {F.shape[1]}")
    w = finite_difference_coeffs(order)
    pts = np.vstack([F + k * h for k in range(order + 1)])
    if radius is None:
        radius = getattr(psi, "radius", None)
    if radius is not None:
        far = np.linalg.norm(pts, axis=1) > radius * (1 + 1e-12)
        if far.any():
            p = pts[np.argmax(far)]
            raise OutOfDomainError(f"stencil point {p.tolist()} lies outside radius {radius:.4g}", point=p)
    if isinstance(psi, Field):
        v, _, ok = psi.evaluate(pts)
        if not ok.all():
            p = pts[np.argmin(ok)]
            raise OutOfDomainError(f"field undefined at stencil point {p.tolist()}", point=p)
    else:
        v = np.asarray(psi(pts)).reshape(-1)
    out = (w[:, None] * v.reshape(order + 1, -1)).sum(axis=0)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# polynomial-degree test


@dataclass
class PolyDegreeCertificate:
    degree_bound: int
    max_residual: float
    noise_threshold: float
    verdict: str
    probe_count: int
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {"D": self.degree_bound, "max_residual": self.max_residual,
                "noise_threshold": self.noise_threshold, "verdict": self.verdict,
                "probe_count": self.probe_count, "diagnostic": self.diagnostic}


def _unit(rng, k: int, n: int) -> np.ndarray:
    v = rng.standard_normal((k, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def draw_stencils(D: int, probes: int, radius: float, nvars: int, rng: np.random.Generator,
                  oversample: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Base points f and shifts h with ||h|| <= radius/(D+2) and f + kh inside the ball."""
    m = oversample * probes
    hmax = radius / (D + 2)
    h = _unit(rng, m, nvars) * (hmax * rng.uniform(0.5, 1.0, m))[:, None]
    room = radius - (D + 1) * np.linalg.norm(h, axis=1)
    f = _unit(rng, m, nvars) * (room * rng.uniform(0.0, 1.0, m) ** (1.0 / nvars))[:, None]
    return f, h


def _stencil_points(f, h, order):
    return np.concatenate([f + k * h for k in range(order + 1)], axis=0)


def _assess(D: int, values, se, ok, m: int, probes: int) -> PolyDegreeCertificate:
    order = D + 1
    w = finite_difference_coeffs(order)
    V = values.reshape(order + 1, m)
    S = se.reshape(order + 1, m)
    OK = ok.reshape(order + 1, m).all(axis=0)
    keep = np.flatnonzero(OK)[:probes]
    if len(keep) < probes:
        return PolyDegreeCertificate(D, float("nan"), float("nan"), "inconclusive", int(len(keep)),
                                     f"only {len(keep)} of {probes} stencils fit the valid field")
    res = np.abs((w[:, None] * V[:, keep]).sum(axis=0))
    max_se = float(S[:, keep].max())
    scale = float(np.abs(V[:, keep]).max())
    thr = 2.0 ** order * (4.0 * max_se + ROUNDOFF * (1.0 + scale))
    mr = float(res.max())
    if mr <= thr:
        verdict = "polynomial"
    elif mr > 3 * thr:
        verdict = "not_polynomial"
    else:
        verdict = "inconclusive"
    return PolyDegreeCertificate(D, mr, thr, verdict, int(len(keep)))


def degree_tests(field_: Field, degrees: Sequence[int], probes: int = 64, seed: int = 0,
                 radius: float | None = None) -> list[PolyDegreeCertificate]:
    """Several degree tests sharing one batched field evaluation."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    if any(D < 0 for D in degrees):
        raise ValueError("degree bound must be >= 0")
    rho = field_.radius if radius is None else radius
    nv = field_.nvars
    if not rho > 0:
        return [PolyDegreeCertificate(D, float("nan"), float("nan"), "inconclusive", 0,
                                      "field has an empty valid neighbourhood") for D in degrees]
    batches = []
    for D in degrees:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) % 2**64, spawn_key=(11, D))))
        f, h = draw_stencils(D, probes, rho, nv, rng)
        batches.append((D, _stencil_points(f, h, D + 1), len(f)))
    Z = np.concatenate([b[1] for b in batches], axis=0)
    v, se, ok = field_.evaluate(Z)
    out, lo = [], 0
    for D, pts, m in batches:
        sl = slice(lo, lo + len(pts))
        lo += len(pts)
        out.append(_assess(D, v[sl], se[sl], ok[sl], m, probes))
    return out


def degree_test(psi, D: int, probes: int = 64, radius: float | None = None, seed: int = 0,
                nvars: int | None = None) -> PolyDegreeCertificate:
    """Finite-difference test of "psi is a polynomial of degree <= D" near 0."""
    if not isinstance(psi, Field):
        if isinstance(psi, BlockPolynomial):
            nvars, fn = psi.nvars, psi.evaluate_many
        else:
            fn = psi
        if nvars is None:
            raise ValueError("nvars is required for a plain callable")
        psi = CallableField(fn, nvars, 1.0 if radius is None else radius)
    return degree_tests(psi, [D], probes, seed, radius)[0]
