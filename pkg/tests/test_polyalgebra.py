from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from charlab.errors import DegreeCapError, DimensionError
from charlab.polyalgebra import (Affine, BlockPolynomial, QuadraticExponent, compose_affine, delta_exact,
                                 finite_difference_coeffs, is_zero, make_space, random_polynomial, restrict,
                                 uniform_space)

FG = uniform_space(["f", "g"], 1)


def var(space, block, i=0):
    return BlockPolynomial.variable(space, block, i)


f, g = var(FG, "f"), var(FG, "g")


def test_canonical_form_drops_zeros():
    p = BlockPolynomial(FG, {(1, 0): 0.0, (0, 1): 1e-15, (2, 0): 3.0})
    assert p.terms == {(2, 0): 3.0}
    assert BlockPolynomial.zero(FG).total_degree == -1


def test_arithmetic_and_str():
    p = f * f + 2 * f * g
    assert str(p) == "1*f1^2 + 2*f1*g1"
    assert str(f * f - 3 * g) == "1*f1^2 - 3*g1"
    assert (p - p).terms == {}
    assert ((f + g) ** 2) == f * f + 2 * f * g + g * g


def test_is_zero_examples():
    assert is_zero(f * f - f * f)
    assert is_zero(f * f + (-1) * f * f)
    assert not is_zero(f * f - g * g)


def test_degree_cap():
    with pytest.raises(DegreeCapError):
        BlockPolynomial(make_space(("x", 1)), {(9,): 1.0})


def test_bad_monomial_length():
    with pytest.raises(DimensionError):
        BlockPolynomial(FG, {(1,): 1.0})


def test_compose_binomial():
    space = make_space(("f", 1))
    p = var(space, "f") ** 2
    q = compose_affine(p, {"f": Affine.of(("f", 1), ("g", 1))}, FG)
    assert q == f * f + 2 * f * g + g * g
    c = compose_affine(p, {"f": Affine.of(("g", 3))}, FG)
    assert c == 9 * g * g


def test_compose_quadratic_exponent():
    psi = QuadraticExponent.from_gaussian(np.zeros(1), np.eye(1)).to_poly("y")
    q = compose_affine(psi, {"y": Affine.of(("g", 2.0))}, FG)
    assert q.terms == {(0, 2): 2.0}


def test_delta_examples():
    space = make_space(("f", 1))
    p = var(space, "f") ** 2
    d1 = delta_exact(p, {"f": [Fraction(1, 3)]})
    assert d1.terms == {(1,): Fraction(2, 3), (0,): Fraction(1, 9)}
    assert is_zero(delta_exact(BlockPolynomial.constant(space, 5), {"f": [1]}))
    assert delta_exact(p, {"f": [1]}, 2).terms == {(0,): 2}


def test_delta_kills_degree_exactly(rng):
    space = uniform_space(["x", "y"], 2)
    for D in range(5):
        for _ in range(5):
            p = random_polynomial(space, D, rng)
            h = {"x": [Fraction(int(a), 3) for a in rng.integers(-4, 5, 2)], "y": [1, -2]}
            assert is_zero(delta_exact(p, h, D + 1), tol=1e-10)
            assert delta_exact(p, h).total_degree <= max(D - 1, -1)


def test_restrict_and_embed():
    p = f * g + g
    r = restrict(p, {"g": [2]})
    assert r.space == (("f", 1),) and r.terms == {(1,): 2, (0,): 2}
    big = uniform_space(["f", "g", "h"], 1)
    e = p.embed(big)
    assert e.evaluate({"f": [2.0], "g": [3.0], "h": [7.0]}) == pytest.approx(p.evaluate({"f": [2.0], "g": [3.0]}))


def test_evaluate_many_matches_pointwise(rng):
    space = uniform_space(["f", "g"], 2)
    p = random_polynomial(space, 4, rng)
    Z = rng.uniform(-1, 1, (20, 4))
    many = p.evaluate_many(Z)
    for z, v in zip(Z, many):
        assert abs(complex(p.evaluate(z)) - v) <= 1e-12 * (1 + abs(v))


def test_quadratic_exponent_embedding(rng):
    for _ in range(10):
        L = rng.standard_normal((3, 3))
        qe = QuadraticExponent.from_gaussian(rng.standard_normal(3), L @ L.T)
        p = qe.to_poly()
        F = rng.standard_normal((5, 3))
        assert np.abs(p.evaluate_many(F) - qe.evaluate_many(F)).max() <= 1e-12 * (1 + np.abs(qe.evaluate_many(F)).max())


def test_exact_rational_mode():
    qe = QuadraticExponent.from_gaussian(np.zeros(1, dtype=object), np.array([[Fraction(3)]], dtype=object))
    p = qe.to_poly()
    assert p.is_exact and p.terms == {(2,): Fraction(3, 2)}


def test_finite_difference_coeffs():
    assert list(finite_difference_coeffs(2)) == [1, -2, 1]
    assert list(finite_difference_coeffs(3)) == [-1, 3, -3, 1]


@given(st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_delta_commutes_with_affine_substitution(D, seed):
    # Delta_h (p o sigma) = (Delta_{sigma_bar h} p) o sigma
    rng = np.random.default_rng(seed)
    src = uniform_space(["y"], 2)
    p = random_polynomial(src, D, rng)
    M = rng.integers(-2, 3, (2, 4)).astype(object)
    shift = np.array([Fraction(int(a), 2) for a in rng.integers(-3, 4, 2)], dtype=object)
    tgt = uniform_space(["f", "g"], 2)
    sigma = {"y": Affine.of(("f", M[:, :2]), ("g", M[:, 2:]), shift=shift)}
    h = np.array([Fraction(int(a), 3) for a in rng.integers(-3, 4, 4)], dtype=object)
    lhs = delta_exact(compose_affine(p, sigma, tgt), {"f": h[:2], "g": h[2:]})
    rhs = compose_affine(delta_exact(p, {"y": M.dot(h)}), sigma, tgt)
    assert is_zero(lhs - rhs, tol=1e-10)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_delta_lowers_degree(D, seed):
    rng = np.random.default_rng(seed)
    space = uniform_space(["f", "g"], 1)
    p = random_polynomial(space, D, rng)
    h = {"f": rng.uniform(-1, 1, 1), "g": rng.uniform(-1, 1, 1)}
    assert delta_exact(p, h).total_degree <= D - 1
