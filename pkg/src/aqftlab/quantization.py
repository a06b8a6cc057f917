"""Deformation quantization: star products, normal ordering, Weyl elements, net checks.

Products act coefficient-wise on FormalSeries. The contraction prefactors:

    star      (i/2) Delta
    star_H    W                   (= (i/2) Delta + H)
    alpha_H   exp(+(hbar/2) <H, d^2>), inverse with -H
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contraction import Pairing, contract, gaussian
from .functionals import RegularFunctional, derivative_density, make_linear, random_functional
from .geometry import GridError, Region, spacelike_separated
from .propagators import (
    PropagatorKernel,
    SpectralOperator,
    _lag_table,
    apply_P,
    causal_propagate,
    kernel,
    sigma,
    solution_from_slab,
)
from .reports import Report
from .series import FormalSeries, as_series, bilinear


class NotHadamard(ValueError):
    pass


def pairing_for(K: PropagatorKernel, scale: complex, symmetric: bool = False) -> Pairing:
    cache = K.__dict__.setdefault("_pairings", {})
    key = (complex(scale), symmetric)
    if key not in cache:
        cache[key] = Pairing(K, scale, symmetric)
    return cache[key]


def _series_pair(F, G):
    if isinstance(F, FormalSeries):
        return F, as_series(G, F.grid, P_max=F.P_max, Q_max=F.Q_max)
    if isinstance(G, FormalSeries):
        return as_series(F, G.grid, P_max=G.P_max, Q_max=G.Q_max), G
    return as_series(F), as_series(G)


def product_with(F, G, pairing: Pairing) -> FormalSeries:
    F, G = _series_pair(F, G)
    return bilinear(F, G, lambda A, B: contract(A, B, pairing))


def star(F, G, Delta: PropagatorKernel) -> FormalSeries:
    """F * G = sum_n hbar^n / n! <F^(n), ((i/2) Delta)^{x n} G^(n)>."""
    if Delta.kind != "pauli_jordan":
        raise ValueError("star needs the causal propagator (pauli_jordan)")
    return product_with(F, G, pairing_for(Delta, 0.5j))


def hadamard_deviation(W: PropagatorKernel) -> float:
    """max |2 Im W - Delta| over the mode coefficients."""
    return float(np.max(np.abs(2 * np.imag(W.lags) - _lag_table(W.op, "pauli_jordan", None))))


def star_H(F, G, W: PropagatorKernel, tol: float = 1e-8) -> FormalSeries:
    if hadamard_deviation(W) > tol:
        raise NotHadamard(f"2 Im W differs from Delta by {hadamard_deviation(W):.3g}")
    return product_with(F, G, pairing_for(W, 1.0))


def hadamard_part(W: PropagatorKernel) -> PropagatorKernel:
    """H = W - (i/2) Delta, the symmetric part of W."""
    lags = W.lags - 0.5j * _lag_table(W.op, "pauli_jordan", None)
    return PropagatorKernel("hadamard_H", W.op, lags, beta=W.beta, state=W.kind)


def symmetry_defect(H: PropagatorKernel) -> float:
    """Largest deviation of H from a real symmetric kernel: g_k(tau) real and even."""
    return float(max(np.max(np.abs(np.imag(H.lags))), np.max(np.abs(H.lags - H.lags[:, ::-1]))))


def alpha_H(F, H: PropagatorKernel, direction: str = "forward", tol: float = 1e-10) -> FormalSeries:
    """exp(+-(hbar/2) Gamma_H) with Gamma_H = <H, d^2/dphi^2>."""
    if symmetry_defect(H) > tol:
        raise NotHadamard("alpha_H needs a real symmetric H")
    sign = {"forward": 1, "inverse": -1}[direction]
    F = as_series(F)
    pairing = pairing_for(H, 1.0, symmetric=True)
    coeffs: dict = {}
    dropped = set(F.overflow)
    for (p, q), A in F.coeffs.items():
        for n, C in gaussian(A, pairing, sign).items():
            k = (p, q + n)
            if not F.keeps(*k):
                dropped.add(k)
                continue
            coeffs[k] = coeffs[k] + C if k in coeffs else C
    return FormalSeries(F.grid, coeffs, F.P_max, F.Q_max, dropped)


def star_equivalence_check(F, G, Delta: PropagatorKernel, W: PropagatorKernel, tol: float = 1e-10) -> Report:
    """F *_H G against alpha_H((alpha_H^{-1} F) * (alpha_H^{-1} G)), coefficient by coefficient."""
    rep = Report("star_equivalence")
    H = hadamard_part(W)
    Hs = PropagatorKernel("hadamard_H", H.op, 0.5 * (H.lags + H.lags[:, ::-1]).real, beta=W.beta)
    lhs = product_with(F, G, pairing_for(W, 1.0))
    inner = star(alpha_H(F, Hs, "inverse"), alpha_H(G, Hs, "inverse"), Delta)
    rhs = alpha_H(inner, Hs, "forward")
    rep.add("hprod_intertwining", lhs.max_deviation(rhs), tol, "W-product equals alpha_H-conjugated star product")
    return rep


def wick_square(grid, f, H: PropagatorKernel, **kw) -> FormalSeries:
    """:phi^2:(f) = alpha_H^{-1}(sum f phi^2 w)."""
    from .functionals import make_monomial

    return alpha_H(make_monomial(grid, 2, f), H, "inverse")


# -- classical structures -----------------------------------------------------------


def peierls(F: RegularFunctional, G: RegularFunctional, Delta: PropagatorKernel, phi) -> complex:
    """Bracket <F'(phi), Delta G'(phi)>, so that {F_f, F_h} = sigma(f, h)."""
    if Delta.kind != "pauli_jordan":
        raise ValueError("peierls needs the causal propagator")
    dF = derivative_density(F, phi)
    dG = derivative_density(G, phi)
    return Delta.pair(dF, dG)


def commutator(F, G, Delta: PropagatorKernel) -> FormalSeries:
    return star(F, G, Delta) - star(G, F, Delta)


def classical_limit_check(F: RegularFunctional, G: RegularFunctional, Delta: PropagatorKernel, phis,
                          tol: float = 1e-12) -> Report:
    """hbar^0 part of [F, G]_* / (i hbar) against the Peierls bracket at sample fields."""
    rep = Report("classical_limit")
    comm = commutator(F, G, Delta)
    first = comm.coefficient(0, 1)
    if comm.coefficient(0, 0).is_zero(1e-14) is False:
        rep.add("commutator_hbar0", max(abs(c) for c in comm.coefficient(0, 0).terms.values()), tol,
                "commutator has no hbar^0 part")
    dev = 0.0
    scale = 1.0
    for phi in phis:
        a = first(phi) / 1j
        b = peierls(F, G, Delta, phi)
        dev = max(dev, abs(a - b))
        scale = max(scale, abs(b))
    rep.add("peierls_limit", dev / scale, tol, "commutator over i hbar at hbar^0 equals the Peierls bracket")
    return rep


# -- Weyl elements -------------------------------------------------------------------


@dataclass
class WeylElement:
    """phase * exp(i F_f) with f = sum_l c_l g_l over named generators g_l.

    The phase is kept symbolically as exp(-i hbar/2 * sum_{l<m} n_lm sigma(g_l, g_m)),
    so cocycle identities compare exactly.
    """

    exponent: dict  # label -> real coefficient
    generators: dict  # label -> grid function
    phase_terms: dict = field(default_factory=dict)  # (l, m) with l < m -> coefficient
    prefactor: complex = 1.0

    @classmethod
    def of(cls, label, f, coeff: float = 1.0) -> "WeylElement":
        return cls({label: coeff}, {label: np.asarray(f)})

    def function(self) -> np.ndarray:
        return sum(c * self.generators[l] for l, c in sorted(self.exponent.items()))

    def phase_exponent(self, sig) -> float:
        """sum n_lm sigma_lm with sigma looked up through sig(l, m)."""
        return float(sum(c * sig(l, m) for (l, m), c in sorted(self.phase_terms.items())))

    def phase(self, sig, hbar: float = 1.0) -> complex:
        return self.prefactor * np.exp(-0.5j * hbar * self.phase_exponent(sig))

    def evaluate(self, grid, phi, sig, hbar: float = 1.0) -> complex:
        F = make_linear(grid, self.function())
        return self.phase(sig, hbar) * np.exp(1j * F(phi))


class SigmaTable:
    """Cached sigma(g_l, g_m) for named generators."""

    def __init__(self, Delta: PropagatorKernel):
        self.Delta = Delta
        self._vals: dict = {}
        self._gens: dict = {}

    def register(self, w: WeylElement):
        self._gens.update(w.generators)

    def __call__(self, l, m) -> float:
        if (l, m) not in self._vals:
            self._vals[(l, m)] = float(np.real(self.Delta.pair(self._gens[l], self._gens[m])))
        return self._vals[(l, m)]


def weyl_star(w1: WeylElement, w2: WeylElement, Delta: PropagatorKernel | None = None) -> WeylElement:
    """W(f) * W(h) = exp(-i hbar sigma(f, h) / 2) W(f + h)."""
    exponent = dict(w1.exponent)
    for l, c in w2.exponent.items():
        exponent[l] = exponent.get(l, 0.0) + c
    exponent = {l: c for l, c in exponent.items() if c != 0}
    terms = dict(w1.phase_terms)
    for (l, m), c in w2.phase_terms.items():
        terms[(l, m)] = terms.get((l, m), 0.0) + c
    for l, a in w1.exponent.items():
        for m, b in w2.exponent.items():
            if l == m:
                continue  # sigma(g, g) = 0 by antisymmetry
            key, s = ((l, m), 1.0) if l < m else ((m, l), -1.0)
            terms[key] = terms.get(key, 0.0) + s * a * b
    terms = {k: c for k, c in terms.items() if c != 0}
    return WeylElement(exponent, {**w1.generators, **w2.generators}, terms, w1.prefactor * w2.prefactor)


def weyl_relation_check(op: SpectralOperator, f, h, g=None, tol: float = 1e-12) -> Report:
    """Weyl phase against an independent sigma, cocycle identity, and centrality of W(Ph)."""
    rep = Report("weyl")
    Delta = kernel(op, "pauli_jordan")
    table = SigmaTable(Delta)
    Wf, Wh = WeylElement.of("f", f), WeylElement.of("h", h)
    prod = weyl_star(Wf, Wh)
    table.register(prod)
    # independent sigma: dense kernel matrix instead of the mode-space apply
    D = Delta.dense()
    w = op.grid.weights.ravel()
    sig_dense = float((f.ravel() * w) @ D @ (h.ravel() * w))
    rep.add("phase_vs_sigma", abs(prod.phase_exponent(table) - sig_dense), tol,
            "Weyl phase exponent equals sigma(f, h) from the dense kernel")
    inv = weyl_star(Wf, WeylElement.of("f", f, -1.0))
    table.register(inv)
    rep.add("inverse_is_one", abs(inv.phase(table) - 1) + len(inv.exponent), tol, "W(f) * W(-f) = 1")
    if g is not None:
        Wg = WeylElement.of("g", g)
        table.register(Wg)
        left = weyl_star(weyl_star(Wf, Wh), Wg)
        right = weyl_star(Wf, weyl_star(Wh, Wg))
        exact = left.phase_terms == right.phase_terms and left.exponent == right.exponent
        rep.add("cocycle_exact", exact, 0, "both bracketings give identical phase terms", mode="true")
        rep.add("cocycle_value", abs(left.phase(table) - right.phase(table)), tol, "phases agree numerically")
        # field-equation ideal: sigma(P h, g) = 0, so W(P h) is central
        Ph = apply_P(op, h)
        s1 = sigma(op, Ph, g)
        rep.add("ideal_central", abs(s1), 1e-8, "sigma(P h, g) vanishes so W(P h) is central")
    return rep


def exp_series(F: RegularFunctional, order: int) -> RegularFunctional:
    """Truncated exp(i F) as a polynomial functional."""
    out = RegularFunctional.constant(F.grid, 1.0, max_degree=F.max_degree)
    term = RegularFunctional.constant(F.grid, 1.0, max_degree=F.max_degree)
    for n in range(1, order + 1):
        term = (term * F).scale(1j / n)
        out = out + term
    return out


# -- net axioms ----------------------------------------------------------------------


def net_causality_check(op: SpectralOperator, R1: Region, R2: Region, rng: np.random.Generator,
                        n_samples: int = 3, degree: int = 2, tol: float = 1e-10) -> Report:
    """Star commutators of functionals localized in spacelike separated regions vanish."""
    grid = op.grid
    if R1 == R2 or not spacelike_separated(grid, R1, R2):
        raise GridError("regions are not spacelike separated")
    Delta = kernel(op, "pauli_jordan")
    worst = 0.0
    for _ in range(n_samples):
        F = random_functional(grid, rng, degree, region=R1)
        G = random_functional(grid, rng, degree, region=R2)
        c = commutator(F, G, Delta)
        for A in c.coeffs.values():
            for v in A.terms.values():
                worst = max(worst, abs(v))
    rep = Report("net_causality")
    rep.add("spacelike_commutator", worst, tol, "commutator of spacelike separated observables vanishes")
    return rep


def commutator_size(op: SpectralOperator, R1: Region, R2: Region, rng, degree: int = 2) -> float:
    Delta = kernel(op, "pauli_jordan")
    F = random_functional(op.grid, rng, degree, region=R1)
    G = random_functional(op.grid, rng, degree, region=R2)
    c = commutator(F, G, Delta)
    return max((abs(v) for A in c.coeffs.values() for v in A.terms.values()), default=0.0)


def timeslice_check(op: SpectralOperator, n1: int, n2: int, rng: np.random.Generator, f=None,
                    n_probes: int = 5, tol: float = 1e-8) -> Report:
    """Move a test function into the slab n1..n2 modulo the field equation, compare sigma."""
    from .geometry import bump

    grid = op.grid
    if f is None:
        t0 = rng.uniform(0.25, 0.75) * grid.T
        f = bump(grid, t0, rng.uniform(0, grid.L), 0.15 * grid.T, 0.2 * grid.L)
    phi = causal_propagate(op, f)
    f2 = solution_from_slab(op, phi, n1, n2)
    rep = Report("timeslice")
    resid = np.linalg.norm(causal_propagate(op, f2) - phi) / max(np.linalg.norm(phi), 1e-300)
    rep.add("reconstruction_residual", resid, 1e-6, "Delta f' reproduces Delta f")
    dev = 0.0
    for _ in range(n_probes):
        g = bump(grid, rng.uniform(0.25, 0.75) * grid.T, rng.uniform(0, grid.L), 0.15 * grid.T, 0.2 * grid.L)
        dev = max(dev, abs(sigma(op, f, g) - sigma(op, f2, g)))
    rep.add("sigma_pairings", dev, tol, "sigma(f, g) = sigma(f', g) for probe g")
    rows = Region(np.abs(f2) > grid.zero_threshold).rows()
    inside = bool(rows.size == 0 or (rows.min() >= n1 - 1 and rows.max() <= n2 + 1))
    rep.add("support_in_slab", inside, 0, "f' is supported in the slab", mode="true")
    return rep
