"""Named verification suites. Each takes a SuiteContext and returns a Report.

Suites derive their randomness from (seed, suite name), so a suite gives the
same numbers whether it runs alone or after others.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import microlocal as ml
from .functionals import (
    RegularFunctional,
    make_linear,
    make_monomial,
    random_functional,
)
from .geometry import (
    GridConfig,
    GridError,
    Region,
    build_grid,
    bump,
    causal_future,
    causal_past,
    spacelike_separated,
    support_of,
)
from .interaction import (
    LagrangianSpec,
    T_map,
    action,
    bogoliubov,
    conjugation_probe,
    euler_lagrange,
    explicit_field_Z,
    gradient_square_Z,
    identity_Z,
    linearized_checks,
    linearized_propagator,
    locality_probe,
    ordering_check,
    renormalization_group_check,
    smatrix,
    star_inverse,
    tord,
    tord_axiom_check,
    tord_by_conjugation,
)
from .propagators import (
    apply_P,
    assemble_K,
    cauchy_data,
    causal_propagate,
    green_operator,
    hadamard_checks,
    kernel,
    kms_identity_check,
    kms_vacuum_limit,
    sigma,
    sigma_cauchy,
    solution_from_slab,
    step_advanced,
    step_retarded,
    two_point,
)
from .quantization import (
    alpha_H,
    classical_limit_check,
    commutator_size,
    hadamard_part,
    net_causality_check,
    product_with,
    pairing_for,
    star,
    star_equivalence_check,
    symmetry_defect,
    timeslice_check,
    weyl_relation_check,
    wick_square,
)
from .reports import Report
from .series import FormalSeries

KMS_BETAS = (0.5, 1.0, 2.0)


@dataclass
class SuiteContext:
    grid_config: GridConfig
    seed: int = 0
    state: str = "vacuum"  # "vacuum" | "kms"
    beta: float | None = None
    P_max: int = 3
    Q_max: int = 4
    options: dict = field(default_factory=dict)  # suite name -> keyword overrides

    def __post_init__(self):
        if self.state not in ("vacuum", "kms"):
            raise ValueError(f"unknown state {self.state!r}")
        if self.state == "kms" and (self.beta is None or self.beta <= 0):
            raise ValueError("a kms state needs beta > 0")

    @cached_property
    def grid(self):
        return build_grid(self.grid_config)

    @cached_property
    def op(self):
        return assemble_K(self.grid)

    @cached_property
    def Delta(self):
        return kernel(self.op, "pauli_jordan")

    @cached_property
    def dirac(self):
        return kernel(self.op, "dirac")

    @cached_property
    def W(self):
        if self.state == "kms":
            return two_point(self.op, "wightman_kms", beta=self.beta)
        return two_point(self.op, "wightman_vacuum")

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode())])

    def opt(self, name: str, key: str, default):
        return self.options.get(name, {}).get(key, default)

    # -- placement helpers in grid fractions ---------------------------------------
    def row(self, frac: float) -> int:
        return int(round(frac * (self.grid.Nt - 1)))

    def col(self, frac: float) -> int:
        return int(round(frac * self.grid.Nx)) % self.grid.Nx

    def block(self, t0: float, t1: float, x0: float, x1: float) -> np.ndarray:
        """Indicator of rows row(t0)..row(t1) and columns col(x0)..col(x1)-1 (at least one each)."""
        g = self.grid
        f = np.zeros(g.shape)
        n0, n1 = self.row(t0), max(self.row(t1), self.row(t0))
        j0 = self.col(x0)
        width = max(1, int(round((x1 - x0) * g.Nx)))
        f[n0:n1 + 1, (j0 + np.arange(width)) % g.Nx] = 1.0
        return f

    def random_bump(self, rng, width=0.12) -> np.ndarray:
        g = self.grid
        return bump(g, rng.uniform(0.3, 0.7) * g.T, rng.uniform(0, g.L), width * g.T, width * 1.5 * g.L)


def _band_limited(ctx: SuiteContext, rng, k_max: int = 3) -> np.ndarray:
    """Random low-frequency function times sin^2 in time, so the first and last rows vanish."""
    g = ctx.grid
    n = np.arange(g.Nt)[:, None]
    j = np.arange(g.Nx)[None, :]
    out = np.zeros(g.shape)
    for kt in range(1, k_max + 1):
        for kx in range(-k_max, k_max + 1):
            a, p = rng.standard_normal(), rng.uniform(0, 2 * np.pi)
            out += a * np.cos(np.pi * kt * n / (g.Nt - 1) + 2 * np.pi * kx * j / g.Nx + p)
    return out * np.sin(np.pi * n / (g.Nt - 1)) ** 2


def _coeff_max(X) -> float:
    if isinstance(X, FormalSeries):
        return max((abs(c) for F in X.coeffs.values() for c in F.terms.values()), default=0.0)
    return max((abs(c) for c in X.terms.values()), default=0.0)


# -- suites --------------------------------------------------------------------------


def suite_geometry(ctx: SuiteContext) -> Report:
    g = ctx.grid
    rep = Report("geometry")
    p = Region.from_points(g, [(g.Nt // 2, g.Nx // 2)])
    fut, past = causal_future(g, p), causal_past(g, p)
    rep.add("point_in_own_cones", p <= fut and p <= past, 0, "a point lies in its own future and past", mode="true")
    rep.add("cones_meet_at_point", (fut & past) == p, 0, "future and past cones of a point meet only there",
            mode="true")
    # light speed one: the future cone grows by dt/dx cells per row
    n1 = min(g.Nt - 1, g.Nt // 2 + 4)
    width = int(fut.mask[n1].sum())
    reach = int(np.floor((n1 - g.Nt // 2) * g.dt / g.dx + 1e-9))
    rep.add("cone_width", abs(width - min(g.Nx, 2 * reach + 1)), 0.5, "cone row width matches unit light speed")
    a = Region.slab(g, ctx.row(0.45), ctx.row(0.55), ctx.col(0.1), ctx.col(0.1) + 2)
    b = Region.slab(g, ctx.row(0.45), ctx.row(0.55), ctx.col(0.6), ctx.col(0.6) + 2)
    rep.add("spacelike_symmetric", spacelike_separated(g, a, b) == spacelike_separated(g, b, a), 0,
            "spacelike separation is symmetric", mode="true")
    big = a.dilate(1)
    rep.add("cone_monotone", causal_future(g, a) <= causal_future(g, big), 0,
            "a larger region has a larger future", mode="true")
    try:
        bad = replace(ctx.grid_config, Nt=max(1, int(ctx.grid_config.T / (2 * g.dx))))
        build_grid(bad)
        rejected = False
    except GridError as exc:
        rejected = "Nt" in str(exc)
    rep.add("rejects_dt_above_dx", rejected, 0, "dt > dx is refused and the field is named", mode="true")
    rep.add("positive_weights", float(np.min(g.weights)), 0.0, "integration weights are positive", mode="above")
    return rep


def suite_green(ctx: SuiteContext) -> Report:
    g, op = ctx.grid, ctx.op
    rng = ctx.rng("green")
    n_fun = ctx.opt("green", "n_functions", 20)
    rep = Report("green")
    worst_r = worst_a = worst_step = 0.0
    for _ in range(n_fun):
        f = _band_limited(ctx, rng)
        norm = np.linalg.norm(f[1:-1])
        ur = green_operator(op, "retarded", f)
        ua = green_operator(op, "advanced", f)
        worst_r = max(worst_r, np.linalg.norm(apply_P(op, ur)[1:-1] - f[1:-1]) / norm)
        worst_a = max(worst_a, np.linalg.norm(apply_P(op, ua)[1:-1] - f[1:-1]) / norm)
        if g.discretization == "lattice":
            src = -(g.a**2)[None, :] * f
            sr = step_retarded(g, src)
            sa = step_advanced(g, src)
            worst_step = max(worst_step, np.max(np.abs(sr - ur)) / np.max(np.abs(ur)),
                             np.max(np.abs(sa - ua)) / np.max(np.abs(ua)))
    rep.add("P_retarded_identity", worst_r, 1e-6, "P applied to the retarded solution returns the source")
    rep.add("P_advanced_identity", worst_a, 1e-6, "P applied to the advanced solution returns the source")
    if g.discretization == "lattice":
        rep.add("stepping_matches_modes", worst_step, 1e-10, "time stepping agrees with the mode-sum kernels")
    ok = True
    for _ in range(5):
        f = ctx.random_bump(rng)
        s = support_of(f, g.zero_threshold)
        ur = green_operator(op, "retarded", f)
        ua = green_operator(op, "advanced", f)
        ok &= support_of(ur, g.zero_threshold) <= causal_future(g, s).dilate(1)
        ok &= support_of(ua, g.zero_threshold) <= causal_past(g, s).dilate(1)
    rep.add("causal_support", ok, 0, "retarded (advanced) solutions lie in the dilated future (past)", mode="true")
    D = ctx.Delta.dense()
    rep.add("antisymmetry", np.max(np.abs(D + D.T)), 1e-12, "Delta(x, y) = -Delta(y, x)")
    ideal = 0.0
    for _ in range(5):
        h, k = ctx.random_bump(rng), ctx.random_bump(rng)
        ideal = max(ideal, abs(sigma(op, apply_P(op, h), k)))
    rep.add("field_equation_ideal", ideal, 1e-8, "sigma(P h, g) vanishes")
    f = ctx.random_bump(rng)
    phi = causal_propagate(op, f)
    n1, n2 = ctx.row(0.4), max(ctx.row(0.6), ctx.row(0.4) + 4)
    fs = solution_from_slab(op, phi, n1, n2)
    rep.add("slab_round_trip", np.max(np.abs(causal_propagate(op, fs) - phi)) / np.max(np.abs(phi)), 1e-6,
            "Delta(P chi phi) reproduces phi")
    h = ctx.random_bump(rng)
    n = g.Nt // 2
    s2 = sigma_cauchy(cauchy_data(op, causal_propagate(op, f), n), cauchy_data(op, causal_propagate(op, h), n))
    rep.add("sigma_equals_cauchy_form", abs(sigma(op, f, h) - s2), 1e-8,
            "spacetime sigma equals the symplectic form of the Cauchy data")
    return rep


def _hadamard_tests(ctx, rng, n=6):
    return [ctx.random_bump(rng) * (rng.standard_normal() + 1j * rng.standard_normal()) for _ in range(n)]


def suite_hadamard(ctx: SuiteContext) -> Report:
    rng = ctx.rng("hadamard")
    rep = Report("hadamard")
    tests = _hadamard_tests(ctx, rng)
    kernels = [("vacuum", two_point(ctx.op, "wightman_vacuum"))]
    kernels += [(f"kms_beta{b:g}", two_point(ctx.op, "wightman_kms", beta=b)) for b in KMS_BETAS]
    for name, W in kernels:
        r = hadamard_checks(W, tests)
        rep.add(f"{name}_imaginary_part", r["im_deviation"], 1e-12, "2 Im W equals Delta mode by mode")
        rep.add(f"{name}_positive_type", r["min_gram_eigenvalue"], -1e-10, "Gram matrix of W is positive",
                mode="above")
        rep.add(f"{name}_bisolution", r["bisolution_residual"], 1e-8, "W solves the field equation in each argument")
        rep.add(f"{name}_H_symmetric", symmetry_defect(hadamard_part(W)), 1e-12,
                "H = W - (i/2) Delta is real and symmetric")
    return rep


def suite_kms(ctx: SuiteContext) -> Report:
    rep = Report("kms")
    for b in KMS_BETAS:
        K = two_point(ctx.op, "wightman_kms", beta=b)
        rep.add(f"kms_identity_beta{b:g}", kms_identity_check(K)["max_deviation"], 1e-12,
                "W(tau - i beta) = W(-tau) per mode")
    rep.add("vacuum_limit", kms_vacuum_limit(ctx.op, 40.0), 1e-12, "thermal modes equal vacuum modes at beta w = 40")
    return rep


def suite_weyl(ctx: SuiteContext) -> Report:
    rng = ctx.rng("weyl")
    f, h, k = (ctx.random_bump(rng) for _ in range(3))
    return weyl_relation_check(ctx.op, f, h, k, tol=1e-12)


def suite_star_assoc(ctx: SuiteContext) -> Report:
    g, D = ctx.grid, ctx.Delta
    rng = ctx.rng("star-assoc")
    n_triples = ctx.opt("star-assoc", "n_triples", 50)
    rep = Report("star-assoc")
    assoc = inv = classical = 0.0
    for _ in range(n_triples):
        F, G, K = (random_functional(g, rng, 3, max_degree=9) for _ in range(3))
        FG = star(F, G, D)
        assoc = max(assoc, star(FG, K, D).max_deviation(star(F, star(G, K, D), D)))
        inv = max(inv, FG.conj().max_deviation(star(G.conj(), F.conj(), D)))
        classical = max(classical, _coeff_max(FG.coefficient(0, 0) - F * G))
    rep.add("associativity", assoc, 1e-10, "(F * G) * K = F * (G * K) coefficient by coefficient")
    rep.add("involution", inv, 1e-10, "(F * G)^* = G^* * F^*")
    rep.add("classical_product", classical == 0.0, 0, "hbar^0 part is the pointwise product, exactly", mode="true",
            max_deviation=classical)
    f, h = ctx.random_bump(rng), ctx.random_bump(rng)
    lin = star(make_linear(g, f), make_linear(g, h), D).coefficient(0, 1).terms.get((), 0.0)
    rep.add("linear_star_sigma", abs(lin - 0.5j * sigma(ctx.op, f, h)), 1e-12,
            "first-order part for linear observables is (i/2) sigma(f, h)")
    rep.info["n_triples"] = n_triples
    return rep


def suite_wick(ctx: SuiteContext) -> Report:
    g, op, D = ctx.grid, ctx.op, ctx.Delta
    rng = ctx.rng("wick")
    rep = Report("wick")
    F, G = random_functional(g, rng, 3), random_functional(g, rng, 3)
    for name, W in [("vacuum", two_point(op, "wightman_vacuum")), ("kms", two_point(op, "wightman_kms", beta=1.0))]:
        rep.extend(star_equivalence_check(F, G, D, W, tol=1e-10), prefix=f"{name}_")
    W = ctx.W
    H = hadamard_part(W)
    Hs = type(H)("hadamard_H", op, 0.5 * (H.lags + H.lags[:, ::-1]).real, beta=W.beta)
    f1 = ctx.block(0.55, 0.6, 0.2, 0.35)
    f2 = ctx.block(0.35, 0.4, 0.3, 0.45)
    A, B = make_monomial(g, 2, f1), make_monomial(g, 2, f2)
    wick = product_with(A, B, pairing_for(W, 1.0))
    oracle = alpha_H(star(alpha_H(A, Hs, "inverse"), alpha_H(B, Hs, "inverse"), D), Hs, "forward")
    rep.add("expansion_vs_conjugation", wick.max_deviation(oracle), 1e-10,
            "Wick expansion equals the alpha_H-conjugated star product term by term")
    # degree-0 term against the dense kernel: 2 sum W(x, y)^2 f1(x) f2(y) w w
    Wd = W.dense()
    w = g.weights.ravel()
    a, b = f1.ravel() * w, f2.ravel() * w
    expected = 2 * (a @ (Wd**2) @ b)
    got = wick.coefficient(0, 2).terms.get((), 0.0)
    oracle_c = oracle.coefficient(0, 2).terms.get((), 0.0)
    rep.add("degree0_coefficient", abs(got - expected) / abs(expected), 1e-10,
            "constant hbar^2 term equals 2 sum W^2 f1 f2")
    rep.add("degree0_oracle", abs(oracle_c - expected) / abs(expected), 1e-10,
            "conjugation route gives the same constant term")
    # degree-2 term: 4 sum W(x, y) f1(x) f2(y) phi(x) phi(y)
    phi = rng.standard_normal(g.shape)
    p = phi.ravel()
    lin_expected = 4 * ((a * p) @ Wd @ (b * p))
    lin_got = wick.coefficient(0, 1)(phi)
    rep.add("degree2_coefficient", abs(lin_got - lin_expected) / abs(lin_expected), 1e-10,
            "hbar^1 term equals 4 sum W f1 f2 phi phi")
    rep.info["degree0_normalization"] = (
        "constant term = 2 * (sum W f1 f2)^2-type contraction, i.e. 2 * (i hbar W / 2)^2 in units of the star "
        "contraction; a prefactor 4 is excluded by both routes"
    )
    # Wick square subtracts the coincident H
    ws = wick_square(g, f1, Hs)
    Hdiag = np.array([Hs.coefficient(k, 0) for k in range(len(op.frequencies))])
    Hxx = ((op.modes**2) @ Hdiag)[None, :]
    rep.add("wick_square_constant", abs(ws.coefficient(0, 1).terms.get((), 0.0) + np.sum(Hxx * f1 * g.weights)), 1e-10,
            ":phi^2:(f) = phi^2(f) - hbar sum H(x, x) f")
    return rep


def suite_peierls(ctx: SuiteContext) -> Report:
    g, op, D = ctx.grid, ctx.op, ctx.Delta
    rng = ctx.rng("peierls")
    rep = Report("peierls")
    F, G = random_functional(g, rng, 3), random_functional(g, rng, 3)
    phis = [rng.standard_normal(g.shape) for _ in range(3)]
    rep.extend(classical_limit_check(F, G, D, phis, tol=1e-12))
    if g.discretization != "lattice":
        rep.info["linearized"] = "skipped: the linearized propagator uses lattice stepping"
        return rep
    window = bump(g, 0.5 * g.T, 0.5 * g.L, 0.25 * g.T, 0.25 * g.L)
    window[0] = window[-1] = 0.0
    background = 5 * causal_propagate(op, bump(g, 0.3 * g.T, 0.3 * g.L, 0.15 * g.T, 0.15 * g.L))
    spec = LagrangianSpec("phi4", g.m, ctx.opt("peierls", "coupling", 0.5), window)
    rep.extend(linearized_checks(spec, op, background, tol=1e-6), prefix="phi4_")
    free = linearized_propagator(LagrangianSpec("phi4", g.m, 0.0, window), op, background)
    rep.add("free_limit", np.max(np.abs(free.causal - D.dense())), 1e-8, "lambda = 0 gives the free Delta")
    h = ctx.random_bump(rng)
    eps = 1e-5
    fd = (action(spec, op, background + eps * h) - action(spec, op, background - eps * h)) / (2 * eps)
    el = -np.sum(euler_lagrange(spec, op, background) * h * g.weights)
    rep.add("euler_lagrange_vs_action", abs(fd - el) / max(abs(el), 1.0), 1e-6,
            "field equation is minus the action derivative")
    return rep


def suite_causality_net(ctx: SuiteContext) -> Report:
    g, op = ctx.grid, ctx.op
    rng = ctx.rng("causality-net")
    n0, n1 = ctx.row(0.45), ctx.row(0.55) + 1
    w = max(2, g.Nx // 16)
    R1 = Region.slab(g, n0, n1, ctx.col(0.1), ctx.col(0.1) + w)
    R2 = Region.slab(g, n0, n1, ctx.col(0.6), ctx.col(0.6) + w)
    rep = net_causality_check(op, R1, R2, rng, n_samples=3, tol=1e-10)
    rep.name = "causality-net"
    shift = g.Nt // 4
    R3 = Region.slab(g, n0 + shift, n1 + shift, ctx.col(0.1), ctx.col(0.1) + w)
    rep.add("timelike_control", commutator_size(op, R1, R3, rng), 1e-6,
            "commutator across timelike separation is nonzero", mode="above")
    F = random_functional(g, rng, 2, region=R1)
    big = R1.dilate(1)
    rep.add("isotony", F.support <= big, 0, "an observable of a region belongs to every larger region",
            mode="true")
    return rep


def suite_timeslice(ctx: SuiteContext) -> Report:
    n1 = ctx.row(0.4)
    n2 = max(ctx.row(0.6), n1 + 4)
    rep = timeslice_check(ctx.op, n1, n2, ctx.rng("timeslice"), tol=1e-8)
    rep.name = "timeslice"
    return rep


def suite_tord_axioms(ctx: SuiteContext) -> Report:
    g, D, DD = ctx.grid, ctx.Delta, ctx.dirac
    rep = Report("tord-axioms")
    late = make_linear(g, ctx.block(0.75, 0.8, 0.3, 0.4))
    early = make_monomial(g, 2, ctx.block(0.25, 0.3, 0.35, 0.45))
    rep.extend(ordering_check(late, early, DD, D, tol=1e-10))
    rep.extend(ordering_check(early, late, DD, D, tol=1e-10))
    rep.add("two_routes", tord(late, early, DD).max_deviation(tord_by_conjugation(late, early, DD)), 1e-10,
            "contraction and exponential-map routes agree")
    fs = [
        make_monomial(g, 2, ctx.block(0.78, 0.82, 0.1, 0.16)),
        make_linear(g, ctx.block(0.58, 0.62, 0.13, 0.19)),
        make_linear(g, ctx.block(0.38, 0.42, 0.16, 0.22)),
        make_monomial(g, 2, ctx.block(0.18, 0.22, 0.13, 0.19)),
    ]
    rep.extend(tord_axiom_check(fs, ctx.op, ctx.W, tol=1e-10))
    return rep


def suite_bogoliubov(ctx: SuiteContext) -> Report:
    g, D, DD = ctx.grid, ctx.Delta, ctx.dirac
    P, Q = ctx.P_max, ctx.Q_max
    rep = Report("bogoliubov")
    one = FormalSeries.one(g, P_max=P, Q_max=Q)
    S0 = smatrix(RegularFunctional.zero(g), DD, P, Q)
    rep.add("S_of_zero", S0.max_deviation(one), 1e-15, "S(0) = 1")
    V = make_monomial(g, 3, ctx.block(0.48, 0.52, 0.12, 0.16), max_degree=12)
    S = smatrix(V, DD, P, Q)
    rep.add("unitarity", star(S.conj(), S, D).max_deviation(one), 1e-10, "S(V)^* * S(V) = 1 per kept coefficient")
    F = make_linear(g, ctx.block(0.66, 0.7, 0.3, 0.36))
    V2 = make_monomial(g, 2, ctx.block(0.48, 0.52, 0.12, 0.18), max_degree=12)
    R0 = bogoliubov(RegularFunctional.zero(g), F, DD, D, 2, 2)
    TF = T_map(FormalSeries.from_functional(F, P_max=2, Q_max=2), DD)
    rep.add("R0_is_TF", R0.max_deviation(TF), 1e-15, "R_0(F) = T F")
    R = bogoliubov(V2, F, DD, D, 2, 2)
    TV = T_map(FormalSeries.from_functional(V2, 1, 0, P_max=2, Q_max=2), DD)
    first = (tord(TV, TF, DD) - star(TV, TF, D)).shift(0, -1).scale(1j)
    dev = max(_coeff_max(R.coefficient(1, q) - first.coefficient(1, q)) for q in range(-1, 3))
    rep.add("first_order", dev, 1e-10, "lambda^1 part is (i/hbar)(TV ._T TF - TV * TF)")
    dV_late = make_monomial(g, 2, ctx.block(0.82, 0.86, 0.3, 0.36))
    dV_early = make_monomial(g, 2, ctx.block(0.25, 0.3, 0.3, 0.36))
    pr = locality_probe(V2, dV_late, dV_early, F, DD, D)
    rep.add("locality_later", pr["later_change"], 1e-10, "perturbing V after F leaves R_V(F) unchanged")
    rep.add("locality_earlier", pr["earlier_change"], 1e-6, "perturbing V before F changes R_V(F)", mode="above")
    dV_far = make_monomial(g, 2, ctx.block(0.15, 0.2, 0.0, 0.1))
    rep.add("conjugation", conjugation_probe(V2, dV_far, F, DD, D), 1e-10,
            "an early perturbation acts by conjugation with its S-matrix")
    inv = star(star_inverse(S, D), S, D)
    rep.add("star_inverse", inv.max_deviation(one), 1e-10, "Neumann-series inverse is a two-sided inverse")
    return rep


def suite_rg_group(ctx: SuiteContext) -> Report:
    g, op = ctx.grid, ctx.op
    rng = ctx.rng("rg-group")
    rep = Report("rg-group")
    A = make_monomial(g, 2, ctx.block(0.62, 0.68, 0.1, 0.2))
    B = make_monomial(g, 2, ctx.block(0.25, 0.3, 0.1, 0.2))
    probes = [(A, B)]
    rep.extend(renormalization_group_check(identity_Z, probes, op, rng), prefix="identity_")
    rep.extend(renormalization_group_check(gradient_square_Z(0.1), probes, op, rng), prefix="gradient_square_")
    chi = np.zeros(g.shape)
    chi[1:-1] = 1.0
    control = renormalization_group_check(explicit_field_Z(0.1, chi), probes, op, rng)
    rep.add("control_violates_Z5", control["Z5_field_independence"].value, 1e-6,
            "a field-dependent Z is caught by the shift test", mode="above")
    rep.info["control_failures"] = control.failures()
    return rep


def suite_microlocal(ctx: SuiteContext) -> Report:
    rep = Report("microlocal-calibration")
    p = ml.WFParams()
    sh = (32, 32)
    centre = (16, 16)
    wd = ml.wf_estimate(ml.delta(sh, centre), p)
    rep.add("delta_all_directions", wd.entries == {centre: frozenset(range(p.n_dirs))}, 0,
            "a point mass is flagged in every direction at its point only", mode="true")
    wg = ml.wf_estimate(ml.gaussian(sh, centre), p)
    rep.add("gaussian_empty", len(wg) == 0, 0, "a Gaussian is not flagged", mode="true")
    wdg = ml.wf_estimate(ml.delta(sh, centre) + ml.gaussian(sh, centre), p)
    rep.add("smooth_part_ignored", wdg == wd, 0, "adding a Gaussian does not change the estimate", mode="true")
    wo = ml.wf_estimate(ml.oscillatory_family(sh), p)
    rep.add("oscillatory_single_bucket", len(wo) > 0 and len(wo.directions()) == 1, 0,
            "a one-sided oscillatory family is flagged in one direction", mode="true",
            directions=sorted(wo.directions()))
    line = ml.wf_estimate(ml.vacuum_line(64), p)
    rep.add("vacuum_line_positive", len(line) > 0 and line.directions() == {0}, 0,
            "vacuum W on a timelike line is flagged at positive frequency only", mode="true",
            directions=sorted(line.directions()))
    d1 = ml.wf_estimate(ml.delta((64,), (32,)), p)
    rep.add("delta_squared_rejected", not ml.hormander_product_ok(d1, d1), 0,
            "delta times delta fails the product criterion", mode="true")
    rep.add("wightman_squared_accepted", ml.hormander_product_ok(line, line), 0,
            "W times W passes the product criterion", mode="true")
    rep.add("delta_times_smooth_accepted", ml.hormander_product_ok(wd, wg), 0,
            "delta times a smooth function passes", mode="true")
    rep.extend(ml.microcausal_check(ml.vacuum_kernel(), p), prefix="vacuum_kernel_")
    rep.extend(ml.microcausal_check(ml.gaussian((48, 48), (20, 20)), p), prefix="smooth_kernel_")
    control = ml.microcausal_check(ml.same_cone_kernel(), p)
    rep.add("same_cone_control_fails", not control.passed, 0, "a co-oriented kernel is caught", mode="true")
    # monotone in the decay degree
    subsets = True
    for arr in (ml.vacuum_line(64), ml.oscillatory_family(sh)):
        prev = None
        for d in (2.0, 3.0, 4.0, 5.0):
            est = ml.wf_estimate(arr, replace(p, degree=d))
            flags = {(pt, b) for pt, dirs in est.entries.items() for b in dirs}
            if prev is not None and not prev <= flags:
                subsets = False
            prev = flags
    rep.add("monotone_in_degree", subsets, 0, "a higher decay degree flags a superset", mode="true")
    pp = replace(p, periodic=True)
    base = ml.wf_estimate(ml.delta(sh, (10, 12)), pp)
    moved = ml.wf_estimate(np.roll(ml.delta(sh, (10, 12)), (5, -7), axis=(0, 1)), pp)
    rep.add("translation_covariance", moved == base.shifted((5, -7)), 0, "periodic shifts move base points only",
            mode="true")
    again = ml.wf_estimate(ml.oscillatory_family(sh), p)
    rep.add("reproducible", again == wo, 0, "identical inputs give identical estimates", mode="true")
    g = ctx.grid
    if min(g.shape) >= 4 * p.w:
        src = np.zeros(g.shape)
        src[g.Nt // 2, g.Nx // 2] = 1.0
        prop = ml.wf_estimate(np.real(ctx.Delta.apply(src)), p)
        rep.extend(ml.propagation_check(prop), prefix="Delta_")
    return rep


SUITES = {
    "geometry": suite_geometry,
    "green": suite_green,
    "hadamard": suite_hadamard,
    "kms": suite_kms,
    "weyl": suite_weyl,
    "star-assoc": suite_star_assoc,
    "wick": suite_wick,
    "peierls": suite_peierls,
    "causality-net": suite_causality_net,
    "timeslice": suite_timeslice,
    "tord-axioms": suite_tord_axioms,
    "bogoliubov": suite_bogoliubov,
    "rg-group": suite_rg_group,
    "microlocal-calibration": suite_microlocal,
}


def list_suites() -> list:
    return list(SUITES)


def run_suite(name: str, ctx: SuiteContext) -> Report:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    return SUITES[name](ctx)
