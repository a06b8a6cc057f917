import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqftlab.functionals import RegularFunctional, make_linear, make_monomial, random_functional
from aqftlab.geometry import GridError, Region, bump
from aqftlab.propagators import PropagatorKernel, kernel, sigma
from aqftlab.quantization import (
    NotHadamard,
    SigmaTable,
    WeylElement,
    alpha_H,
    classical_limit_check,
    commutator,
    hadamard_part,
    net_causality_check,
    peierls,
    star,
    star_H,
    star_equivalence_check,
    timeslice_check,
    weyl_relation_check,
    weyl_star,
    wick_square,
)
from aqftlab.series import FormalSeries

from conftest import block


def _symmetric_H(W):
    H = hadamard_part(W)
    return PropagatorKernel("hadamard_H", H.op, 0.5 * (H.lags + H.lags[:, ::-1]).real, beta=W.beta)


@pytest.fixture(scope="module")
def fh(grid):
    return bump(grid, 2.0, 2.0, 0.8, 0.8), bump(grid, 3.5, 4.0, 0.8, 0.8)


def test_linear_star(grid, op, Delta, fh):
    f, h = fh
    Ff, Fh = make_linear(grid, f), make_linear(grid, h)
    S = star(Ff, Fh, Delta)
    phi = np.random.default_rng(0).standard_normal(grid.shape)
    assert S.coefficient(0, 0)(phi) == pytest.approx(Ff(phi) * Fh(phi))
    assert S.coefficient(0, 1).terms[()] == pytest.approx(0.5j * sigma(op, f, h), abs=1e-12)
    assert set(S.labels()) <= {(0, 0), (0, 1)}


def test_linear_commutator_is_sigma(grid, op, Delta, fh):
    f, h = fh
    c = commutator(make_linear(grid, f), make_linear(grid, h), Delta)
    assert c.coefficient(0, 1).terms[()] == pytest.approx(1j * sigma(op, f, h), abs=1e-12)
    assert c.coefficient(0, 0).is_zero(1e-14)


def test_unit_is_neutral(grid, Delta, rng):
    G = random_functional(grid, rng, 3)
    one = RegularFunctional.constant(grid, 1.0)
    assert star(one, G, Delta).max_deviation(FormalSeries.from_functional(G)) == 0
    assert star(G, one, Delta).max_deviation(FormalSeries.from_functional(G)) == 0


def test_star_requires_causal_propagator(grid, dirac, fh):
    F = make_linear(grid, fh[0])
    with pytest.raises(ValueError):
        star(F, F, dirac)


def test_star_associativity(grid, Delta, rng):
    F, G, K = (random_functional(grid, rng, 3, max_degree=9) for _ in range(3))
    lhs = star(star(F, G, Delta), K, Delta)
    rhs = star(F, star(G, K, Delta), Delta)
    assert lhs.max_deviation(rhs) < 1e-10


def test_star_involution(grid, Delta, rng):
    F, G = random_functional(grid, rng, 3), random_functional(grid, rng, 3)
    assert star(F, G, Delta).conj().max_deviation(star(G.conj(), F.conj(), Delta)) < 1e-10


def test_star_H_linear(grid, W, fh):
    f, h = fh
    S = star_H(make_linear(grid, f), make_linear(grid, h), W)
    assert S.coefficient(0, 1).terms[()] == pytest.approx(W.pair(f, h), rel=1e-12)


def test_star_H_rejects_non_hadamard(op, W):
    bad = PropagatorKernel("wightman", op, W.lags.real.astype(complex), beta=None)
    with pytest.raises(NotHadamard):
        star_H(RegularFunctional.constant(op.grid, 1.0), RegularFunctional.constant(op.grid, 1.0), bad)


def test_alpha_H_fixes_linear(grid, W, fh):
    F = make_linear(grid, fh[0])
    out = alpha_H(F, _symmetric_H(W))
    assert out.max_deviation(FormalSeries.from_functional(F)) == 0


def test_alpha_H_inverse(grid, W, rng):
    H = _symmetric_H(W)
    F = random_functional(grid, rng, 3)
    back = alpha_H(alpha_H(F, H, "inverse"), H, "forward")
    assert back.max_deviation(FormalSeries.from_functional(F)) < 1e-12


def test_alpha_H_rejects_asymmetric(grid, W, fh):
    with pytest.raises(NotHadamard):
        alpha_H(make_linear(grid, fh[0]), hadamard_part(W).__class__("hadamard_H", W.op, W.lags))


def test_wick_square_removes_coincident_H(grid, op, W):
    f = block(grid, 12, 13, 4, 8)
    H = _symmetric_H(W)
    ws = wick_square(grid, f, H)
    Hdiag = np.array([H.coefficient(k, 0) for k in range(len(op.frequencies))])
    Hxx = (op.modes**2) @ Hdiag
    assert ws.coefficient(0, 1).terms[()] == pytest.approx(-np.sum(Hxx[None, :] * f * grid.weights), rel=1e-12)


@pytest.mark.parametrize("which", ["random", "linear"])
def test_star_equivalence(grid, Delta, W, rng, which):
    if which == "random":
        F, G = random_functional(grid, rng, 3), random_functional(grid, rng, 3)
    else:
        F, G = make_linear(grid, bump(grid, 2, 2, 1, 1)), make_linear(grid, bump(grid, 4, 3, 1, 1))
    assert star_equivalence_check(F, G, Delta, W).passed


def test_star_equivalence_negative_control(grid, op, Delta, W, rng):
    noise = 1e-3 * np.random.default_rng(7).standard_normal(W.lags.shape)
    bad = PropagatorKernel("wightman", op, W.lags + noise, beta=None)
    F, G = random_functional(grid, rng, 2), random_functional(grid, rng, 2)
    assert not star_equivalence_check(F, G, Delta, bad).passed


def test_peierls_linear(grid, op, Delta, fh, rng):
    f, h = fh
    phi = rng.standard_normal(grid.shape)
    val = peierls(make_linear(grid, f), make_linear(grid, h), Delta, phi)
    assert val == pytest.approx(sigma(op, f, h), rel=1e-12)


def test_peierls_antisymmetric_and_constant(grid, Delta, rng):
    F, G = random_functional(grid, rng, 3), random_functional(grid, rng, 2)
    phi = rng.standard_normal(grid.shape)
    assert peierls(F, G, Delta, phi) == pytest.approx(-peierls(G, F, Delta, phi), abs=1e-12)
    assert peierls(F, RegularFunctional.constant(grid, 1.0), Delta, phi) == 0


def test_classical_limit(grid, Delta, rng):
    F, G = random_functional(grid, rng, 3), random_functional(grid, rng, 3)
    phis = [rng.standard_normal(grid.shape) for _ in range(3)]
    assert classical_limit_check(F, G, Delta, phis).passed
    assert classical_limit_check(F, F, Delta, phis).passed


def test_weyl_relations(op, fh):
    g = bump(op.grid, 3.0, 1.0, 0.8, 0.8)
    rep = weyl_relation_check(op, *fh, g)
    assert rep.passed, rep.failures()


def test_weyl_phase_unimodular(Delta, fh):
    table = SigmaTable(Delta)
    prod = weyl_star(WeylElement.of("f", fh[0]), WeylElement.of("h", fh[1], 2.5))
    table.register(prod)
    assert abs(prod.phase(table)) == pytest.approx(1.0)


def test_net_causality(op):
    g = op.grid
    R1 = Region.slab(g, 14, 18, 2, 5)
    R2 = Region.slab(g, 14, 18, 18, 21)
    assert net_causality_check(op, R1, R2, np.random.default_rng(3)).passed
    with pytest.raises(GridError):
        net_causality_check(op, R1, R1, np.random.default_rng(3))


def test_timelike_commutator_nonzero(grid, Delta):
    F = make_linear(grid, block(grid, 8, 10, 4, 6))
    G = make_linear(grid, block(grid, 22, 24, 4, 6))
    assert abs(commutator(F, G, Delta).coefficient(0, 1).terms[()]) > 1e-6


def test_timeslice(op):
    assert timeslice_check(op, 12, 18, np.random.default_rng(5)).passed


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_commutator_antisymmetry(grid, Delta, seed):
    r = np.random.default_rng(seed)
    F, G = random_functional(grid, r, 2), random_functional(grid, r, 2)
    assert (commutator(F, G, Delta) + commutator(G, F, Delta)).max_deviation(FormalSeries.zero(grid)) < 1e-12
