"""Time-ordered products, the formal S-matrix, interacting observables, and the
classical phi^4 linearized propagator.

Time ordering contracts with i Delta_D (Dirac kernel, paired with the star product)
or with Delta_F = i Delta_D + H (paired with the Hadamard-ordered product). As a
Gaussian operator, T = exp((hbar/2) <i Delta_D, d^2/dphi^2>), so that

    F ._T G = T(T^{-1} F . T^{-1} G) = sum_n hbar^n / n! <F^(n), (i Delta_D)^{x n} G^(n)>.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .contraction import gaussian
from .functionals import (
    RegularFunctional,
    gradient_square,
    make_linear,
    make_monomial,
    pointwise_product,
    shifted,
)
from .geometry import GridError, Region, SpacetimeGrid, causal_future, time_separated
from .propagators import (
    PropagatorKernel,
    SpectralOperator,
    apply_P,
    kernel,
    lattice_step_matrix,
    step_advanced,
    step_retarded,
)
from .quantization import alpha_H, hadamard_part, pairing_for, product_with, star
from .reports import Report
from .series import FormalSeries, as_series, bilinear


class InstabilityError(RuntimeError):
    pass


@dataclass
class LagrangianSpec:
    """Free or phi^4 Lagrangian; the window multiplies the interaction term."""

    kind: str  # "free" | "phi4"
    mass: float
    coupling: float
    window: np.ndarray

    def __post_init__(self):
        if self.kind not in ("free", "phi4"):
            raise ValueError(f"unknown Lagrangian kind {self.kind!r}")
        self.window = np.asarray(self.window, dtype=float)
        if self.window.ndim == 2 and (np.any(self.window[0]) or np.any(self.window[-1])):
            raise ValueError("interaction window must vanish on the first and last time rows")


def _interaction(spec: LagrangianSpec) -> float:
    return spec.coupling if spec.kind == "phi4" else 0.0


def euler_lagrange(spec: LagrangianSpec, op: SpectralOperator, phi) -> np.ndarray:
    """Field equation (box + m^2) phi + (lambda/3!) f phi^3 on interior rows (= -S'(phi))."""
    phi = np.asarray(phi)
    out = -apply_P(op, phi)
    lam = _interaction(spec)
    if lam:
        cubic = (lam / 6.0) * spec.window * phi**3
        cubic[0] = 0
        cubic[-1] = 0
        out = out + cubic
    return out


def action(spec: LagrangianSpec, op: SpectralOperator, phi) -> float:
    """Discrete action 1/2 <phi, P phi> - (lambda/4!) sum f phi^4 w.

    Its first variation along h vanishing near the time boundary is
    -<euler_lagrange(phi), h>.
    """
    phi = np.asarray(phi, dtype=float)
    w = op.grid.weights
    val = 0.5 * np.sum(phi * apply_P(op, phi) * w)
    lam = _interaction(spec)
    if lam:
        val -= lam / 24.0 * np.sum(spec.window * phi**4 * w)
    return float(val)


@dataclass(eq=False)
class LinearizedPropagator:
    background: np.ndarray
    retarded: np.ndarray  # dense (N, N)
    advanced: np.ndarray
    pair_weights: np.ndarray  # b[n] couples rows n and n+1

    @property
    def causal(self) -> np.ndarray:
        return self.retarded - self.advanced


def _pair_weights(spec: LagrangianSpec, grid: SpacetimeGrid, phi) -> np.ndarray:
    lam = _interaction(spec)
    win = spec.window if spec.window.ndim == 2 else np.zeros(grid.shape)
    eps = 0.5 * grid.dt**2 * grid.a**2 * (grid.m**2 + 0.5 * lam * win * np.asarray(phi) ** 2)
    b = np.empty(grid.shape)
    b[:-1] = 1 + 0.5 * (eps[:-1] + eps[1:])
    b[-1] = 1 + eps[-1]
    return b


def linearized_operator(grid: SpacetimeGrid, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """dt^{-2} (b[n] u[n+1] + b[n-1] u[n-1] - A u[n]) on interior rows; trailing axes batched."""
    A = lattice_step_matrix(grid)
    ex = (1,) * (u.ndim - 2)
    bb = b.reshape(b.shape + ex)
    out = np.zeros_like(u)
    Au = np.tensordot(A, u[1:-1], axes=(1, 1)).swapaxes(0, 1)
    out[1:-1] = bb[1:-1] * u[2:] + bb[:-2] * u[:-2] - Au
    return out / grid.dt**2


def linearized_propagator(spec: LagrangianSpec, op: SpectralOperator, phi, growth_limit: float = 1e6) -> LinearizedPropagator:
    """Retarded, advanced and causal kernels of S''(phi) = -(box + m^2 + (lambda/2) f phi^2).

    Leapfrog time stepping with symmetric pair weights, one column per source
    point (all columns stepped together). The advanced kernel is the transpose
    of the retarded one, which the symmetric scheme makes exact.
    """
    grid = op.grid
    if grid.discretization != "lattice":
        raise GridError("linearized propagator uses lattice time stepping")
    N = grid.size
    b = _pair_weights(spec, grid, phi)
    src = np.zeros(grid.shape + (N,))
    idx = np.arange(N)
    src[idx // grid.Nx, idx % grid.Nx, idx] = -1.0 / (grid.dt * grid.dx)
    u = step_retarded(grid, src, b)
    peak = np.max(np.abs(u))
    ref = grid.dt / grid.dx
    if not np.isfinite(peak) or peak > growth_limit * max(ref, 1.0):
        raise InstabilityError(f"linearized stepping grew to {peak:.3g}; reduce dt or the background amplitude")
    R = u.reshape(N, N)
    return LinearizedPropagator(np.asarray(phi), R, R.T.copy(), b)


def linearized_checks(spec: LagrangianSpec, op: SpectralOperator, phi, tol: float = 1e-6) -> Report:
    grid = op.grid
    lp = linearized_propagator(spec, op, phi)
    Nt, Nx = grid.shape
    N = grid.size
    D = lp.causal.reshape(Nt, Nx, Nt, Nx)
    rep = Report("linearized_propagator")
    rep.add("antisymmetry", np.max(np.abs(lp.causal + lp.causal.T)), 1e-12, "Delta_S(phi) is antisymmetric")
    rows = range(1, Nt - 1)
    eq = max(np.max(np.abs(D[s, :, s, :])) for s in rows)
    rep.add("equal_time_value", eq, tol, "Delta_S(phi) vanishes at equal times")
    b = lp.pair_weights
    mom_dev = 0.0
    for s in rows:
        mom = (b[s][:, None] * D[s + 1, :, s, :] - b[s - 1][:, None] * D[s - 1, :, s, :]) / (2 * grid.dt)
        mom_dev = max(mom_dev, np.max(np.abs(mom + np.eye(Nx) / grid.dx)) * grid.dx)
    rep.add("equal_time_momentum", mom_dev, tol, "time derivative at equal times is minus the discrete delta")
    res = linearized_operator(grid, b, lp.causal.reshape(Nt, Nx, N))
    scale = np.max(np.abs(lp.causal))
    rep.add("field_equation_first", np.max(np.abs(res)) / scale, tol, "solves the linearized equation in x")
    res2 = linearized_operator(grid, b, lp.causal.T.reshape(Nt, Nx, N))
    rep.add("field_equation_second", np.max(np.abs(res2)) / scale, tol, "solves the linearized equation in y")
    # advanced route by backward stepping, independent of the transpose
    src = np.zeros(grid.shape + (Nx,))
    s0 = Nt // 2
    src[s0, np.arange(Nx), np.arange(Nx)] = -1.0 / (grid.dt * grid.dx)
    adv = step_advanced(grid, src, b)
    rep.add("advanced_by_stepping", np.max(np.abs(adv.reshape(N, Nx) - lp.advanced[:, s0 * Nx:(s0 + 1) * Nx])) / scale,
            1e-10, "backward stepping agrees with the transposed retarded kernel")
    # support of retarded columns
    R = lp.retarded.reshape(Nt, Nx, N)
    ok = True
    for col in range(0, N, max(1, N // 16)):
        src_region = Region.from_points(grid, [divmod(col, Nx)])
        fut = causal_future(grid, src_region).dilate(1)
        ok &= bool(np.all(~(np.abs(R[:, :, col]) > grid.zero_threshold) | fut.mask))
    rep.add("retarded_support", ok, 0, "retarded columns lie in the causal future of the source", mode="true")
    return rep


# -- time ordering -----------------------------------------------------------------


def _tord_pairing(DK: PropagatorKernel):
    if DK.kind == "dirac":
        return pairing_for(DK, 1j)
    if DK.kind == "feynman":
        return pairing_for(DK, 1.0)
    raise ValueError("time ordering needs a dirac or feynman kernel")


def tord(F, G, DK: PropagatorKernel) -> FormalSeries:
    """Time-ordered product F ._T G (commutative, associative)."""
    return product_with(F, G, _tord_pairing(DK))


def T_map(F, DK: PropagatorKernel, direction: str = "forward") -> FormalSeries:
    """T = exp(+-(hbar/2) <i Delta_D, d^2>) (or with Delta_F)."""
    sign = {"forward": 1, "inverse": -1}[direction]
    F = as_series(F)
    p = _tord_pairing(DK)
    sym = pairing_for(DK, p.scale, symmetric=True)
    coeffs: dict = {}
    for (pp, q), A in F.coeffs.items():
        for n, C in gaussian(A, sym, sign).items():
            k = (pp, q + n)
            if F.keeps(*k):
                coeffs[k] = coeffs[k] + C if k in coeffs else C
    return FormalSeries(F.grid, coeffs, F.P_max, F.Q_max, set(F.overflow))


def tord_by_conjugation(F, G, DK: PropagatorKernel) -> FormalSeries:
    """Second route: T(T^{-1} F . T^{-1} G) with the pointwise product."""
    A, B = T_map(F, DK, "inverse"), T_map(G, DK, "inverse")
    prod = bilinear(A, B, lambda X, Y: {0: pointwise_product(X, Y)})
    return T_map(prod, DK, "forward")


def _support(X) -> Region:
    X = as_series(X)
    masks = [F.support.mask for F in X.coeffs.values()]
    return Region(np.any(masks, axis=0)) if masks else Region(np.zeros(X.grid.shape, dtype=bool))


def ordering_check(F, G, DK: PropagatorKernel, Delta: PropagatorKernel, tol: float = 1e-10) -> Report:
    """F ._T G = F * G when supp F is later than supp G, = G * F when earlier."""
    sF, sG = _support(F), _support(G)
    T = tord(F, G, DK)
    rep = Report("ordering")
    if time_separated(sF, sG):
        rep.add("later_first", T.max_deviation(star(F, G, Delta)), tol, "time ordering equals F * G for F later")
    elif time_separated(sG, sF):
        rep.add("earlier_first", T.max_deviation(star(G, F, Delta)), tol, "time ordering equals G * F for F earlier")
    else:
        raise GridError("supports are not separated by a constant-time slice")
    return rep


def smatrix(V, DK: PropagatorKernel, P_max: int = 3, Q_max: int = 4) -> FormalSeries:
    """S(V) = sum_n (1/n!) (i V / hbar)^{._T n}; V is placed at lambda^1."""
    if isinstance(V, FormalSeries):
        Vs = V
        if any(p != 1 for p, _ in Vs.coeffs):
            raise ValueError("V must carry exactly one power of lambda")
    else:
        Vs = FormalSeries.from_functional(V, 1, 0, P_max=P_max, Q_max=Q_max)
    grid = Vs.grid
    X = FormalSeries(grid, {(p, q - 1): A.scale(1j) for (p, q), A in Vs.coeffs.items()}, P_max, Q_max)
    S = FormalSeries.one(grid, P_max=P_max, Q_max=Q_max)
    term = FormalSeries.one(grid, P_max=P_max, Q_max=Q_max)
    for n in range(1, P_max + 1):
        term = tord(term, X, DK).scale(1.0 / n)
        S = S + term
    return S


def star_inverse(S: FormalSeries, Delta: PropagatorKernel) -> FormalSeries:
    """Neumann series for the star inverse; the leading coefficient must be a nonzero constant."""
    lead = S.coefficient(0, 0)
    if set(lead.terms) - {()} or abs(lead.terms.get((), 0)) == 0:
        raise ValueError("leading coefficient of the series is not an invertible constant")
    c = lead.terms[()]
    grid = S.grid
    one = FormalSeries.one(grid, P_max=S.P_max, Q_max=S.Q_max)
    A = S.scale(1 / c) - one
    A = A.like({k: F.prune() for k, F in A.coeffs.items() if not F.prune().is_zero()})
    inv = one
    power = one
    for _ in range(2 * (S.P_max + S.Q_max) + 2):
        power = star(power, A, Delta).scale(-1)
        power = power.like({k: F.prune() for k, F in power.coeffs.items() if not F.prune().is_zero()})
        if not power.coeffs:
            break
        inv = inv + power
    return inv.scale(1 / c)


def bogoliubov(V, F, DK: PropagatorKernel, Delta: PropagatorKernel, P_max: int = 3, Q_max: int = 4) -> FormalSeries:
    """R_V(F) = S(TV)^{*-1} * (S(TV) ._T TF)."""
    TV = T_map(FormalSeries.from_functional(V, 1, 0, P_max=P_max, Q_max=Q_max) if isinstance(V, RegularFunctional) else V, DK)
    TF = T_map(as_series(F, P_max=P_max, Q_max=Q_max) if isinstance(F, RegularFunctional) else F, DK)
    S = smatrix(TV, DK, P_max, Q_max)
    return star(star_inverse(S, Delta), tord(S, TF, DK), Delta)


# -- axioms ---------------------------------------------------------------------------


def tord_n(fs, DF: PropagatorKernel) -> FormalSeries:
    """Hadamard-picture time-ordered product T_n^H(F_1, ..., F_n), T_0 = 1."""
    if not fs:
        raise ValueError("use FormalSeries.one for the empty product")
    out = as_series(fs[0])
    for F in fs[1:]:
        out = tord(out, F, DF)
    return out


def tord_axiom_check(fs, op: SpectralOperator, W: PropagatorKernel, tol: float = 1e-10) -> Report:
    """T1-T3 for the product family in time order fs[0] latest ... fs[-1] earliest.

    T_n = alpha_H^{-1} o T_n^H maps into the star algebra; T_n^H uses Delta_F.
    """
    grid = op.grid
    Delta = kernel(op, "pauli_jordan")
    H = hadamard_part(W)
    DF = PropagatorKernel("feynman", op, 1j * kernel(op, "dirac").lags + H.lags, beta=W.beta)
    DD = kernel(op, "dirac")
    rep = Report("tord_axioms")
    one = FormalSeries.one(grid)
    rep.add("T1_empty", one.max_deviation(FormalSeries.one(grid)), tol, "empty time-ordered product is the unit")
    # T2: unary product is normal ordering; compare with the Wick-square closed form
    f = np.zeros(grid.shape)
    n0 = grid.Nt // 2
    f[n0, : grid.Nx // 4] = 1.0
    T1 = alpha_H(make_monomial(grid, 2, f), H, "inverse")
    Hdiag = np.array([H.coefficient(k, 0) for k in range(len(op.frequencies))])
    Hxx = (op.modes**2) @ np.real(Hdiag)
    expected = -np.sum(Hxx * f[n0] * grid.weights[n0])
    rep.add("T2_normal_ordering", abs(T1.coefficient(0, 1).terms.get((), 0) - expected) / max(abs(expected), 1e-300),
            tol, "unary product subtracts hbar H(x, x)")
    # Dirac and Feynman pictures agree under alpha_H
    A, B = fs[0], fs[-1]
    lhs = tord(A, B, DF)
    rhs = alpha_H(tord(alpha_H(A, H, "inverse"), alpha_H(B, H, "inverse"), DD), H, "forward")
    rep.add("dirac_feynman_conjugation", lhs.max_deviation(rhs), tol, "Feynman ordering is alpha_H-conjugate of Dirac ordering")
    # T3: causal factorization for n = 2..len(fs)
    for n in range(2, len(fs) + 1):
        sub = fs[:n]
        full = alpha_H(tord_n(sub, DF), H, "inverse")
        for k in range(1, n):
            left = alpha_H(tord_n(sub[:k], DF), H, "inverse")
            right = alpha_H(tord_n(sub[k:], DF), H, "inverse")
            dev = full.max_deviation(star(left, right, Delta))
            rep.add(f"T3_factorization_n{n}_k{k}", dev, tol, "later block times earlier block under the star product")
        perm_dev = 0.0
        perms = list(itertools.permutations(range(n)))[1:] if n <= 3 else [tuple(range(n))[::-1], tuple(range(1, n)) + (0,)]
        for perm in perms:
            other = alpha_H(tord_n([sub[i] for i in perm], DF), H, "inverse")
            perm_dev = max(perm_dev, full.max_deviation(other))
        rep.add(f"T_symmetry_n{n}", perm_dev, tol, "time-ordered products are symmetric in their arguments")
    return rep


# -- renormalization group ----------------------------------------------------------


def gradient_square_Z(c: float):
    """Z(F) = F + hbar c sum_x w (F'(phi)(x))^2: local, shift covariant, Z'(0) = id."""

    def Z(F: RegularFunctional) -> FormalSeries:
        G = gradient_square(F)
        return FormalSeries(F.grid, {(0, 0): F, (0, 1): G.scale(c)})

    return Z


def explicit_field_Z(c: float, chi):
    """Negative control: Z(F) = F + hbar c <chi, phi> sum_x w (F')^2 depends on phi explicitly."""

    def Z(F: RegularFunctional) -> FormalSeries:
        G = pointwise_product(make_linear(F.grid, chi), gradient_square(F))
        return FormalSeries(F.grid, {(0, 0): F, (0, 1): G.scale(c)})

    return Z


def identity_Z(F: RegularFunctional) -> FormalSeries:
    return FormalSeries.from_functional(F)


def renormalization_group_check(Z, probes, op: SpectralOperator, rng: np.random.Generator,
                                tol: float = 1e-10, P_max: int = 2, Q_max: int = 2) -> Report:
    """Z1-Z5 on probe functionals, then causal factorization of S o Z.

    ``probes`` is a list of (later, earlier) local functionals with time-separated
    supports.
    """
    grid = op.grid
    rep = Report("renormalization_group")
    phis = [0.3 * rng.standard_normal(grid.shape) for _ in range(3)]

    def ev(X, phi, hbar=1.0):
        return as_series(X).evaluate(phi, hbar)

    zero = RegularFunctional.zero(grid)
    rep.add("Z1_zero", max(abs(ev(Z(zero), p)) for p in phis), tol, "Z(0) = 0")
    z2 = z3 = z4 = z5 = 0.0
    eps = 1e-3
    for A, B in probes:
        for phi in phis:
            d = (ev(Z(A.scale(eps)), phi) - ev(Z(A.scale(-eps)), phi)) / (2 * eps)
            z2 = max(z2, abs(d - A(phi)) / max(1.0, abs(A(phi))))
            z3 = max(z3, abs(Z(A).coefficient(0, 0)(phi) - A(phi)))
            mid = make_linear(grid, np.zeros(grid.shape))
            lhs = ev(Z(A + mid + B), phi)
            rhs = ev(Z(A + mid), phi) - ev(Z(mid), phi) + ev(Z(mid + B), phi)
            z4 = max(z4, abs(lhs - rhs))
            psi = 0.3 * rng.standard_normal(grid.shape)
            z5 = max(z5, abs(ev(Z(shifted(A, psi)), phi) - ev(Z(A), phi + psi)))
    rep.add("Z2_first_derivative", z2, 1e-6, "derivative of Z at 0 is the identity")
    rep.add("Z3_classical", z3, tol, "hbar^0 part of Z(F) is F")
    rep.add("Z4_additivity", z4, tol, "Z is additive on disjointly supported arguments")
    rep.add("Z5_field_independence", z5, tol, "Z commutes with field shifts")
    # S o Z factorizes for time-separated arguments
    DD = kernel(op, "dirac")
    Delta = kernel(op, "pauli_jordan")
    dev = 0.0
    for A, B in probes:
        def ZV(F):
            return FormalSeries(grid, {(1, q): X for (_, q), X in Z(F).coeffs.items()}, P_max, Q_max)

        S_sum = smatrix(ZV(A + B), DD, P_max, Q_max)
        S_prod = star(smatrix(ZV(A), DD, P_max, Q_max), smatrix(ZV(B), DD, P_max, Q_max), Delta)
        dev = max(dev, S_sum.max_deviation(S_prod))
    rep.add("SZ_causal_factorization", dev, tol, "S o Z factorizes for time-separated arguments")
    return rep


def locality_probe(V, dV_late, dV_early, F, DK, Delta, P_max=2, Q_max=2) -> dict:
    """Change of R_V(F) when the interaction is perturbed later, or earlier, than F."""
    base = bogoliubov(V, F, DK, Delta, P_max, Q_max)
    late = bogoliubov(V + dV_late, F, DK, Delta, P_max, Q_max)
    early = bogoliubov(V + dV_early, F, DK, Delta, P_max, Q_max)
    return {"later_change": base.max_deviation(late), "earlier_change": base.max_deviation(early),
            "base": base, "early": early}


def conjugation_probe(V, dV_early, F, DK, Delta, P_max=2, Q_max=2) -> float:
    """R_{V + dV}(F) = U^{-1} * R_V(F) * U with U = S(T dV) when dV precedes V and F."""
    base = bogoliubov(V, F, DK, Delta, P_max, Q_max)
    moved = bogoliubov(V + dV_early, F, DK, Delta, P_max, Q_max)
    TdV = T_map(FormalSeries.from_functional(dV_early, 1, 0, P_max=P_max, Q_max=Q_max), DK)
    U = smatrix(TdV, DK, P_max, Q_max)
    conj = star(star(star_inverse(U, Delta), base, Delta), U, Delta)
    return moved.max_deviation(conj)
