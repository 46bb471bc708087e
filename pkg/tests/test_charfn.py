import numpy as np
import pytest
from hypothesis import given, strategies as st

from charlab.charfn import (CallableField, CharFnHandle, GridSpec, LogField, LogTerm, degree_test, degree_tests,
                            ecf, ecf_values, finite_difference, log_cf_field, star_grid)
from charlab.distributions import GaussianDist, ProductDist, ScalarFamily, sample
from charlab.errors import DimensionError, OutOfDomainError, PreconditionError
from charlab.polyalgebra import BlockPolynomial, random_polynomial, uniform_space

N = 100_000


@pytest.fixture(scope="module")
def gauss_samples():
    return sample(ProductDist((GaussianDist(np.zeros(1), np.eye(1)),)), N, seed=2)


def test_ecf_at_zero_is_one(gauss_samples):
    v, se = ecf(gauss_samples, 0, [0.0])
    assert abs(v - 1) <= 1e-12 and se == 0.0


def test_ecf_gaussian_value(gauss_samples):
    v, se = ecf(gauss_samples, 0, [1.0])
    assert abs(v - np.exp(-0.5)) <= 4 * se


def test_ecf_with_transform(gauss_samples):
    v, se = ecf(gauss_samples, 0, [1.0], transform=2 * np.eye(1))
    assert abs(v - np.exp(-2.0)) <= 4 * se


def test_nufft_matches_direct(rng):
    X = rng.standard_normal((20_000, 2))
    F = rng.uniform(-3, 3, (400, 2))
    W = rng.random((3, len(X)))
    W /= W.sum(axis=1, keepdims=True)
    for w in (None, W):
        a = ecf_values(X, F, w, backend="nufft")
        b = ecf_values(X, F, w, backend="direct")
        assert np.abs(a - b).max() <= 1e-10


def test_ecf_dimension_errors(rng):
    with pytest.raises(DimensionError):
        ecf_values(rng.standard_normal((10, 2)), np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        ecf_values(np.zeros((0, 1)), np.zeros((1, 1)))


def test_ecf_noise_model():
    # fraction of |ECF - exact| > 4 se stays small across seeds
    dist = ScalarFamily("laplace", {}, 1)
    t = np.linspace(0.1, 3, 25)[:, None]
    bad = 0
    for seed in range(20):
        v, se = ecf(sample(ProductDist((dist,)), 20_000, seed), 0, t)
        bad += int(np.sum(np.abs(v - dist.cf(t)) > 4 * se))
    assert bad / (20 * len(t)) <= 0.05


def test_handle_eval_bounds(gauss_samples):
    h = CharFnHandle.empirical(gauss_samples, 0)
    F = np.linspace(-3, 3, 31)[:, None]
    v, se = h.evaluate(F)
    assert np.all(np.abs(v) <= 1 + 3 * se + 1e-12)
    assert CharFnHandle.exact(GaussianDist(np.zeros(1), np.eye(1))).eval([0.0]) == 1


def test_log_cf_field_gaussian_exact():
    m, R = np.array([0.3, -0.2]), np.array([[1.0, 0.2], [0.2, 0.5]])
    fld = log_cf_field(CharFnHandle.exact(GaussianDist(m, R)))
    P = fld.grid[fld.kept]
    want = -1j * P @ m + 0.5 * np.einsum("pi,ij,pj->p", P, R, P)
    assert np.abs(fld.values[fld.kept] - want).max() <= 1e-10
    assert fld.values[0] == 0


def test_log_cf_field_constant_cf():
    h = CharFnHandle.from_callable(lambda F: np.ones(len(F)), 2)
    fld = log_cf_field(h)
    assert np.all(fld.values[fld.kept] == 0) and fld.kept.all()


def test_uniform_ray_truncated_before_zero():
    fld = log_cf_field(CharFnHandle.exact(ScalarFamily("uniform", {}, 1)), GridSpec(radius=4.0))
    assert np.all(fld.ray_radius < np.pi)
    assert fld.diagnostics


def test_branch_reproduces_cf_empirical():
    # asymmetric law with drift: psi has an imaginary part that needs continuation
    x = sample(ProductDist((ScalarFamily("exponential", {}, 1),)), N, seed=4)
    h = CharFnHandle.empirical(x, 0)
    fld = log_cf_field(h, GridSpec(radius=3.0))
    v, se = h.evaluate(fld.grid[fld.kept])
    back = np.exp(-fld.values[fld.kept])
    assert np.all(np.abs(back - v) <= 1e-10 + 3 * se)
    steps = np.abs(np.diff(fld.values[fld.kept][1:].imag))
    assert np.all(steps < np.pi)


def test_branch_reproduces_cf_exact_closed_form():
    dist = ScalarFamily("exponential", {}, 1)
    fld = log_cf_field(CharFnHandle.exact(dist), GridSpec(radius=3.0))
    P = fld.grid[fld.kept]
    assert np.abs(np.exp(-fld.values[fld.kept]) - dist.cf(P)).max() <= 1e-10


def test_finite_difference_examples():
    sq = lambda Z: Z[:, 0] ** 2
    assert np.allclose(finite_difference(sq, [1.0], 2, f=np.array([[0.3], [1.7]])), 2.0)
    assert np.abs(finite_difference(sq, [0.7], 3, f=np.array([[0.1], [-0.4]]))).max() <= 1e-12
    const = lambda Z: np.full(len(Z), 3.0)
    assert np.all(finite_difference(const, [0.5], 1, f=np.zeros((3, 1))) == 0)


def test_finite_difference_out_of_domain():
    fld = CallableField(lambda Z: Z[:, 0] ** 2, 1, radius=1.0)
    with pytest.raises(OutOfDomainError):
        finite_difference(fld, [0.6], 2, f=np.array([[0.0]]))


def test_finite_difference_polynomial_is_exact():
    space = uniform_space(["f"], 1)
    p = BlockPolynomial.variable(space, "f", 0) ** 2
    assert finite_difference(p, {"f": [1]}, 2).terms == {(0,): 2}


def test_degree_test_gaussian():
    psi = CharFnHandle.exact(GaussianDist(np.zeros(2), np.array([[1.0, 0.3], [0.3, 2.0]])))
    fld = LogField([LogTerm(1.0, psi, np.eye(2))], 2)
    c2 = degree_test(fld, 2)
    assert c2.verdict == "polynomial" and c2.max_residual <= 1e-9
    assert degree_test(fld, 1).verdict == "not_polynomial"


def test_degree_test_log_sinc():
    psi = CharFnHandle.exact(ScalarFamily("uniform", {}, 1))
    fld = LogField([LogTerm(1.0, psi, np.eye(1))], 1)
    for D in range(5):
        assert degree_test(fld, D).verdict == "not_polynomial"


def test_degree_test_verdict_consistency(rng):
    space = uniform_space(["x"], 2)
    for D in range(5):
        p = random_polynomial(space, D, rng)
        at = degree_test(p, D)
        assert at.verdict == "polynomial" and at.max_residual <= 1e-9
        if D:
            assert degree_test(p, D - 1).verdict == "not_polynomial"
        for c in (at, degree_test(p, max(D - 1, 0))):
            if c.verdict == "polynomial":
                assert c.max_residual <= c.noise_threshold
            elif c.verdict == "not_polynomial":
                assert c.max_residual > 3 * c.noise_threshold


def test_degree_test_empty_neighbourhood():
    psi = CharFnHandle.from_callable(lambda F: np.full(len(F), 0.01), 1)
    fld = LogField([LogTerm(1.0, psi, np.eye(1))], 1)
    assert fld.radius == 0
    assert degree_test(fld, 2).verdict == "inconclusive"


def test_degree_tests_batch_matches_single():
    psi = CharFnHandle.exact(ScalarFamily("laplace", {}, 1))
    fld = LogField([LogTerm(1.0, psi, np.eye(1))], 1)
    batch = degree_tests(fld, [0, 1, 2], seed=5)
    for c in batch:
        single = degree_test(fld, c.degree_bound, seed=5)
        assert single.max_residual == pytest.approx(c.max_residual, rel=1e-12)


def test_bootstrap_cache_and_batching():
    x = sample(ProductDist((ScalarFamily("uniform", {}, 1),) * 2), 5000, seed=1)
    F = np.linspace(0.1, 1.5, 9)[:, None]
    a = CharFnHandle.empirical(x, "pooled", symmetric=True)
    first = a.psi_bootstrap(F, 40, seed=3)
    assert first.shape == (40, 9)
    assert np.array_equal(a.psi_bootstrap(F[::-1], 40, seed=3), first[:, ::-1])
    b = CharFnHandle.empirical(x, "pooled", symmetric=True)
    with b.batched_bootstrap(40, 3):
        assert np.all(b.psi_bootstrap(F, 40, seed=3) == 0)
    assert np.abs(b.psi_bootstrap(F, 40, seed=3) - first).max() <= 1e-10
    with pytest.raises(PreconditionError):
        CharFnHandle.exact(ScalarFamily("uniform", {}, 1)).psi_bootstrap(F, 10, 0)


def test_bootstrap_se_tracks_quadrature():
    x = sample(ProductDist((ScalarFamily("laplace", {}, 1),)), 50_000, seed=9)
    h = CharFnHandle.empirical(x, 0, symmetric=True)
    F = np.array([[0.5], [1.0]])
    _, se, _ = h.psi(F)
    reps = h.psi_bootstrap(F, 200, seed=0)
    boot = reps.std(axis=0)
    assert np.all(np.abs(boot / se - 1) < 0.35)


def test_star_grid_origin_first():
    pts, ids, rad = star_grid(2, GridSpec(rays=6, radii=4))
    assert np.all(pts[0] == 0) and ids[0] == -1 and len(pts) == 1 + 6 * 4
    assert np.allclose(np.linalg.norm(pts[1:], axis=1), rad[1:])


@given(st.floats(-3, 3), st.floats(0.05, 0.5), st.floats(0.05, 0.5))
def test_differences_linear_and_commute(a, h, k):
    p1 = lambda Z: np.sin(Z[:, 0])
    p2 = lambda Z: Z[:, 0] ** 3
    f = np.array([[0.2], [-0.4]])
    lin = finite_difference(lambda Z: a * p1(Z) + p2(Z), [h], 1, f=f)
    assert np.abs(lin - a * finite_difference(p1, [h], 1, f=f) - finite_difference(p2, [h], 1, f=f)).max() <= 1e-12
    hk = finite_difference(lambda Z: finite_difference(p1, [k], 1, f=Z), [h], 1, f=f)
    kh = finite_difference(lambda Z: finite_difference(p1, [h], 1, f=Z), [k], 1, f=f)
    assert np.abs(hk - kh).max() <= 1e-12
