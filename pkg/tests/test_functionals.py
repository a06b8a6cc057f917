import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqftlab.contraction import Pairing, contract, count_matchings, gaussian
from aqftlab.functionals import (
    DegreeOverflow,
    RegularFunctional,
    derivative,
    derivative_density,
    evaluate,
    make_linear,
    make_monomial,
    permanent,
    point_atom,
    point_uid,
    pointwise_product,
    random_functional,
    shifted,
    support_additivity_holds,
)
from aqftlab.geometry import Region, bump, support_of
from aqftlab.series import FormalSeries, TruncationError, bilinear

from conftest import block


def test_zero_and_constant(grid, rng):
    phi = rng.standard_normal(grid.shape)
    assert make_linear(grid, np.zeros(grid.shape)).is_zero()
    assert RegularFunctional.constant(grid, 2.5)(phi) == 2.5


def test_linear_at_constant_field(grid):
    f = bump(grid, 3.0, 3.0, 1.0, 1.0)
    F = make_linear(grid, f)
    assert F(np.ones(grid.shape)) == pytest.approx(np.sum(f * grid.a[None, :] ** 2 * grid.dt * grid.dx))


def test_linear_support(grid):
    f = bump(grid, 3.0, 3.0, 1.0, 1.0)
    assert make_linear(grid, f).support == support_of(f)


def test_linear_rejects_boundary_rows(grid):
    f = np.zeros(grid.shape)
    f[0, 4] = 1.0
    with pytest.raises(ValueError):
        make_linear(grid, f)


def test_monomial_degree_one_matches_linear(grid, rng):
    f = block(grid, 10, 12, 3, 6)
    phi = rng.standard_normal(grid.shape)
    assert make_monomial(grid, 1, f)(phi) == pytest.approx(make_linear(grid, f)(phi))


def test_square_is_positive(grid, rng):
    F = make_monomial(grid, 2, block(grid, 5, 9, 0, 8))
    for _ in range(5):
        assert F(rng.standard_normal(grid.shape)).real >= 0


def test_monomial_second_derivative_is_diagonal(grid, rng):
    f = block(grid, 10, 11, 3, 5)
    F = make_monomial(grid, 2, f)
    K = derivative(F, rng.standard_normal(grid.shape), 2)
    p1, p2 = np.zeros(grid.shape), np.zeros(grid.shape)
    p1[10, 3] = p2[10, 3] = 1.0
    assert K.pair([p1, p2]) == pytest.approx(2 * grid.weights[10, 3])
    p2[10, 3], p2[10, 4] = 0.0, 1.0
    assert K.pair([p1, p2]) == 0


def test_degree_bound():
    from aqftlab.geometry import GridConfig, build_grid

    g = build_grid(GridConfig(8, 8, 1.0, 1.0))
    with pytest.raises(DegreeOverflow):
        make_monomial(g, 7, np.ones(g.shape))
    F = make_monomial(g, 4, np.ones(g.shape))
    with pytest.raises(DegreeOverflow):
        F * F


def test_first_derivative_finite_difference(grid, rng):
    F = random_functional(grid, rng, 3)
    phi, psi = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    lam = 1e-4
    fd = (F(phi + lam * psi) - F(phi - lam * psi)) / (2 * lam)
    exact = derivative(F, phi, 1).pair([psi])
    assert abs(fd - exact) < 1e-6 * max(1.0, abs(exact))


def test_top_derivative_is_constant(grid, rng):
    F = make_monomial(grid, 3, block(grid, 10, 11, 3, 4))
    p = np.zeros(grid.shape)
    p[10, 3] = 1.0
    a = derivative(F, rng.standard_normal(grid.shape), 3).pair([p, p, p])
    b = derivative(F, rng.standard_normal(grid.shape), 3).pair([p, p, p])
    assert a == pytest.approx(b)
    assert a == pytest.approx(math.factorial(3) * grid.weights[10, 3])


def test_second_derivative_symmetric(grid, rng):
    F = random_functional(grid, rng, 3)
    phi = rng.standard_normal(grid.shape)
    a, b = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    K = derivative(F, phi, 2)
    assert K.pair([a, b]) == K.pair([b, a])


def test_leibniz(grid, rng):
    F, G = random_functional(grid, rng, 2), random_functional(grid, rng, 2)
    phi = rng.standard_normal(grid.shape)
    lhs = derivative_density(F * G, phi)
    rhs = derivative_density(F, phi) * G(phi) + F(phi) * derivative_density(G, phi)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_pointwise_product(grid, rng):
    F, G = random_functional(grid, rng, 2), random_functional(grid, rng, 3)
    phi = rng.standard_normal(grid.shape)
    assert pointwise_product(F, G)(phi) == pytest.approx(F(phi) * G(phi))
    assert (F * RegularFunctional.constant(grid, 1.0))(phi) == pytest.approx(F(phi))


def test_product_support(grid):
    f, h = block(grid, 4, 6, 2, 4), block(grid, 20, 22, 10, 12)
    P = make_linear(grid, f) * make_monomial(grid, 2, h)
    assert P.support <= (support_of(f) | support_of(h))


def test_support_additivity_for_local_monomials(grid, rng):
    F = make_monomial(grid, 3, block(grid, 8, 24, 0, 32))
    phi = rng.standard_normal(grid.shape)
    psi1 = bump(grid, 2.0, 1.0, 0.6, 0.6)
    psi2 = bump(grid, 4.0, 4.0, 0.6, 0.6)
    assert support_additivity_holds(F, phi, psi1, psi2)


def test_shift(grid, rng):
    F = random_functional(grid, rng, 3)
    phi, psi = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    assert shifted(F, psi)(phi) == pytest.approx(F(phi + psi))


def test_json_layout(grid):
    F = make_monomial(grid, 2, block(grid, 10, 11, 3, 4)) + 1.0
    doc = F.to_json()
    assert [d["n"] for d in doc["degree_terms"]] == [0, 2]
    assert doc["degree_terms"][1]["terms"][0]["factors"] == ["p10,3", "p10,3"]


def test_permanent():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert permanent(M) == pytest.approx(10.0)
    assert permanent(np.ones((4, 4))) == pytest.approx(24.0)


def test_matching_count():
    assert [count_matchings(n) for n in range(6)] == [1, 1, 2, 4, 10, 26]


@settings(max_examples=20, deadline=None)
@given(perm_seed=st.integers(0, 1000))
def test_kernel_evaluation_is_permutation_invariant(grid, perm_seed):
    r = np.random.default_rng(perm_seed)
    F = random_functional(grid, r, 3)
    phi = r.standard_normal(grid.shape)
    psis = [r.standard_normal(grid.shape) for _ in range(3)]
    K = derivative(F, phi, 3)
    order = r.permutation(3)
    assert K.pair(psis) == pytest.approx(K.pair([psis[i] for i in order]), rel=1e-12, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_multilinear_evaluation(grid, seed):
    r = np.random.default_rng(seed)
    f = r.standard_normal(grid.shape) * Region.slab(grid, 2, 30).mask
    F = make_linear(grid, f)
    a, b = r.standard_normal(grid.shape), r.standard_normal(grid.shape)
    assert F(2 * a + b) == pytest.approx(2 * F(a) + F(b))


# -- contraction engine ----------------------------------------------------------------


def test_contract_linear_pair(grid, Delta):
    f, h = bump(grid, 2.0, 2.0, 1.0, 1.0), bump(grid, 4.0, 3.0, 1.0, 1.0)
    out = contract(make_linear(grid, f), make_linear(grid, h), Pairing(Delta, 1.0))
    assert out[1].terms[()] == pytest.approx(Delta.pair(f, h))


def test_gaussian_of_square(grid, W):
    f = block(grid, 10, 11, 3, 5)
    F = make_monomial(grid, 2, f)
    out = gaussian(F, Pairing(W, 1.0), sign=1)
    # a single pair is matched per point, leaving the diagonal value of W at that point
    expected = 0.0
    for j in (3, 4):
        d = point_atom(grid, point_uid(grid, 10, j))
        expected += grid.weights[10, j] * W.pair(d, d)
    assert out[1].terms[()] == pytest.approx(expected, rel=1e-12)
    assert out[0](np.ones(grid.shape)) == pytest.approx(F(np.ones(grid.shape)))


# -- formal series -----------------------------------------------------------------------


def test_series_floor(grid):
    with pytest.raises(TruncationError):
        FormalSeries(grid, {(1, -2): RegularFunctional.constant(grid, 1.0)})


def test_series_truncation_is_flagged(grid):
    s = FormalSeries(grid, {(4, 0): RegularFunctional.constant(grid, 1.0)}, P_max=3, Q_max=2)
    assert (4, 0) in s.overflow and not s.coeffs


def test_guard_band(grid):
    s = FormalSeries(grid, {(0, 5): RegularFunctional.constant(grid, 1.0)}, P_max=3, Q_max=4)
    assert s.keeps(0, 5) and not s.is_exact(0, 5)
    assert s.exact_labels() == []


def test_series_arithmetic(grid, rng):
    F = random_functional(grid, rng, 2)
    s = FormalSeries.from_functional(F, 1, 0)
    t = (s + s).scale(0.5) - s
    assert t.max_deviation(FormalSeries.zero(grid)) == 0
    phi = rng.standard_normal(grid.shape)
    assert s.shift(1, 2).evaluate(phi, hbar=0.5, lam=2.0) == pytest.approx(F(phi) * 4 * 0.25)


def test_bilinear_respects_orders(grid):
    one = RegularFunctional.constant(grid, 1.0)
    a = FormalSeries(grid, {(2, 0): one}, P_max=3, Q_max=2)
    out = bilinear(a, a, lambda A, B: {0: A * B})
    assert not out.coeffs and (4, 0) in out.overflow
