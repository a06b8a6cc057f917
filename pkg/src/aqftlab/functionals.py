"""Regular polynomial functionals of the field on the grid.

A functional is stored in separable form

    F(phi) = sum_terms c * prod_{a in key} <a, phi>,    <a, phi> = sum_x a(x) phi(x) w(x)

where each key is a sorted tuple of atom ids (repeats allowed) and atoms are grid
functions held in a registry. Degree-n kernels are the symmetrized tensor
products of the atoms, so products and contractions never build dense n-point
arrays. Local monomials use point atoms delta_x / w(x), whose ids are fixed by the
grid index so that equal monomials share keys.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .geometry import Region, SpacetimeGrid, support_of

DEFAULT_MAX_DEGREE = 6

_uid = itertools.count(1)
_conj_uid: dict[int, int] = {}


class DegreeOverflow(ValueError):
    """A product exceeded the configured degree bound."""


def new_uid() -> int:
    return next(_uid)


def point_uid(grid: SpacetimeGrid, n: int, j: int) -> int:
    return -(grid.flat(n, j) + 1)


def point_atom(grid: SpacetimeGrid, uid: int) -> np.ndarray:
    idx = -uid - 1
    n, j = divmod(idx, grid.Nx)
    v = grid.zeros()
    v[n, j] = 1.0 / grid.weights[n, j]
    return v


@dataclass(eq=False)
class RegularFunctional:
    grid: SpacetimeGrid
    terms: dict = field(default_factory=dict)  # key tuple -> complex coefficient
    atoms: dict = field(default_factory=dict)  # uid -> (Nt, Nx) array
    max_degree: int = DEFAULT_MAX_DEGREE

    # -- construction --------------------------------------------------------
    @classmethod
    def zero(cls, grid, max_degree=DEFAULT_MAX_DEGREE) -> "RegularFunctional":
        return cls(grid, {}, {}, max_degree)

    @classmethod
    def constant(cls, grid, value=1.0, max_degree=DEFAULT_MAX_DEGREE) -> "RegularFunctional":
        return cls(grid, {(): complex(value)} if value != 0 else {}, {}, max_degree)

    def atom(self, uid: int) -> np.ndarray:
        if uid not in self.atoms:
            if uid < 0:
                self.atoms[uid] = point_atom(self.grid, uid)
            else:
                raise KeyError(f"unknown atom {uid}")
        return self.atoms[uid]

    def copy(self) -> "RegularFunctional":
        return RegularFunctional(self.grid, dict(self.terms), dict(self.atoms), self.max_degree)

    def _check_degree(self):
        if self.terms and self.degree > self.max_degree:
            raise DegreeOverflow(f"degree {self.degree} exceeds bound {self.max_degree}")

    # -- structure -------------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def homogeneous(self, n: int) -> "RegularFunctional":
        return RegularFunctional(
            self.grid, {k: c for k, c in self.terms.items() if len(k) == n}, self.atoms, self.max_degree
        )

    @property
    def support(self) -> Region:
        mask = np.zeros(self.grid.shape, dtype=bool)
        for key, c in self.terms.items():
            if c == 0:
                continue
            for uid in set(key):
                mask |= np.abs(self.atom(uid)) > self.grid.zero_threshold
        return Region(mask)

    def prune(self, tol: float = 0.0) -> "RegularFunctional":
        terms = {k: c for k, c in self.terms.items() if abs(c) > tol}
        return RegularFunctional(self.grid, terms, self.atoms, self.max_degree)

    # -- algebra -------------------------------------------------------------
    def __add__(self, other) -> "RegularFunctional":
        if not isinstance(other, RegularFunctional):
            other = RegularFunctional.constant(self.grid, other, self.max_degree)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        atoms = {**self.atoms, **other.atoms}
        return RegularFunctional(self.grid, terms, atoms, max(self.max_degree, other.max_degree))

    __radd__ = __add__

    def __neg__(self) -> "RegularFunctional":
        return self.scale(-1)

    def __sub__(self, other) -> "RegularFunctional":
        return self + (-other)

    def scale(self, s) -> "RegularFunctional":
        return RegularFunctional(self.grid, {k: s * c for k, c in self.terms.items()}, self.atoms, self.max_degree)

    def __mul__(self, other):
        if isinstance(other, RegularFunctional):
            return pointwise_product(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def conj(self) -> "RegularFunctional":
        atoms = {}
        terms = {}
        for key, c in self.terms.items():
            new_key = tuple(sorted(self._conj_atom(u, atoms) for u in key))
            terms[new_key] = terms.get(new_key, 0) + np.conj(c)
        for u, v in self.atoms.items():
            atoms.setdefault(u, v)
        return RegularFunctional(self.grid, terms, atoms, self.max_degree)

    def _conj_atom(self, uid: int, atoms: dict) -> int:
        v = self.atom(uid)
        if not np.iscomplexobj(v) or not np.any(v.imag):
            atoms[uid] = v
            return uid
        if uid not in _conj_uid:
            cu = new_uid()
            _conj_uid[uid] = cu
            _conj_uid[cu] = uid
        cu = _conj_uid[uid]
        atoms[cu] = np.conj(v)
        return cu

    # -- evaluation -----------------------------------------------------------
    def atom_values(self, phi: np.ndarray) -> dict:
        w = self.grid.weights
        uids = {u for k in self.terms for u in k}
        return {u: complex(np.sum(self.atom(u) * phi * w)) for u in uids}

    def __call__(self, phi) -> complex:
        return evaluate(self, phi)

    def atom_ref(self, uid: int) -> str:
        """Stable name of a factor: p<n>,<j> for a point atom, a<uid> otherwise."""
        if uid < 0:
            n, j = divmod(-uid - 1, self.grid.Nx)
            return f"p{n},{j}"
        return f"a{uid}"

    def to_json(self) -> dict:
        by_degree: dict = {}
        for k, c in sorted(self.terms.items()):
            by_degree.setdefault(len(k), []).append(
                {"coeff": [float(np.real(c)), float(np.imag(c))], "factors": [self.atom_ref(u) for u in k]}
            )
        return {"degree_terms": [{"n": n, "terms": by_degree[n]} for n in sorted(by_degree)]}


def evaluate(F: RegularFunctional, phi) -> complex:
    phi = np.asarray(getattr(phi, "values", phi))
    vals = F.atom_values(phi)
    total = 0j
    for key, c in F.terms.items():
        p = c
        for u in key:
            p *= vals[u]
        total += p
    return complex(total)


def make_linear(grid: SpacetimeGrid, f, max_degree: int = DEFAULT_MAX_DEGREE) -> RegularFunctional:
    """F_f(phi) = sum_x phi(x) f(x) w(x)."""
    f = np.asarray(getattr(f, "values", f))
    if not np.any(np.abs(f) > 0):
        return RegularFunctional.zero(grid, max_degree)
    if np.any(np.abs(f[0]) > grid.zero_threshold) or np.any(np.abs(f[-1]) > grid.zero_threshold):
        raise ValueError("test function touches the first or last time row")
    uid = new_uid()
    return RegularFunctional(grid, {(uid,): 1.0 + 0j}, {uid: f.copy()}, max_degree)


def make_monomial(grid: SpacetimeGrid, degree: int, f, max_degree: int = DEFAULT_MAX_DEGREE) -> RegularFunctional:
    """Local monomial sum_x f(x) phi(x)^n w(x): one diagonal term per point of supp f."""
    if degree > max_degree:
        raise DegreeOverflow(f"degree {degree} exceeds bound {max_degree}")
    f = np.asarray(getattr(f, "values", f))
    w = grid.weights
    terms = {}
    atoms = {}
    for n, j in np.argwhere(np.abs(f) > grid.zero_threshold):
        u = point_uid(grid, n, j)
        atoms[u] = point_atom(grid, u)
        terms[(u,) * degree] = complex(f[n, j] * w[n, j])
    return RegularFunctional(grid, terms, atoms, max_degree)


def pointwise_product(F: RegularFunctional, G: RegularFunctional) -> RegularFunctional:
    terms: dict = {}
    for kf, cf in F.terms.items():
        for kg, cg in G.terms.items():
            k = tuple(sorted(kf + kg))
            terms[k] = terms.get(k, 0) + cf * cg
    out = RegularFunctional(F.grid, terms, {**F.atoms, **G.atoms}, max(F.max_degree, G.max_degree))
    out._check_degree()
    return out


@dataclass
class SymmetricKernel:
    """Symmetrized sum of elementary tensors: sum_t c_t Sym(a_1 x ... x a_k)."""

    grid: SpacetimeGrid
    order: int
    terms: list  # list of (coeff, list of atom arrays)

    def pair(self, psis) -> complex:
        """<K, psi_1 x ... x psi_k> with the measure w in each slot (symmetrized)."""
        w = self.grid.weights
        total = 0j
        k = self.order
        for c, atoms in self.terms:
            M = np.array([[np.sum(a * p * w) for p in psis] for a in atoms]) if k else np.zeros((0, 0))
            total += c * permanent(M) / math.factorial(k)
        return complex(total)

    def density(self) -> np.ndarray:
        """For order 1: the grid function g with <K, psi> = sum g psi w."""
        if self.order != 1:
            raise ValueError("density is only defined for first derivatives")
        out = self.grid.zeros(dtype=complex)
        for c, (a,) in self.terms:
            out = out + c * a
        return out


def _submultisets(counter: Counter, k: int):
    """Yield (sub Counter, multiplicity) for all size-k sub-multisets; multiplicity = prod binom."""
    items = sorted(counter.items())
    uids = [u for u, _ in items]
    caps = [m for _, m in items]

    def rec(i, left):
        if i == len(uids):
            if left == 0:
                yield ()
            return
        for take in range(min(caps[i], left) + 1):
            for rest in rec(i + 1, left - take):
                yield (take,) + rest

    for takes in rec(0, k):
        sub = Counter({u: t for u, t in zip(uids, takes) if t})
        mult = 1
        for cap, t in zip(caps, takes):
            mult *= math.comb(cap, t)
        yield sub, mult


def derivative(F: RegularFunctional, phi, order: int) -> SymmetricKernel:
    """Exact k-th functional derivative at phi as a symmetric kernel.

    For a term c prod_i <a_i, phi>, removing a k-sub-multiset S gives
    k! * mult(S) * c * prod_{rest} <a, phi> times Sym(tensor of S).
    """
    phi = np.asarray(getattr(phi, "values", phi))
    vals = F.atom_values(phi)
    grouped: dict = {}
    for key, c in F.terms.items():
        if len(key) < order:
            continue
        for sub, mult in _submultisets(Counter(key), order):
            rest = Counter(key) - sub
            val = c * mult * math.factorial(order)
            for u, e in rest.items():
                val *= vals[u] ** e
            skey = tuple(sorted(sub.elements()))
            grouped[skey] = grouped.get(skey, 0) + val
    terms = [(c, [F.atom(u) for u in k]) for k, c in grouped.items() if c != 0]
    return SymmetricKernel(F.grid, order, terms)


def derivative_density(F: RegularFunctional, phi) -> np.ndarray:
    """First derivative as a density g: d/ds F(phi + s psi) = sum g psi w."""
    return derivative(F, phi, 1).density()


def permanent(M: np.ndarray) -> complex:
    """Ryser's formula; the 0x0 permanent is 1."""
    n = M.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return M[0, 0]
    if n == 2:
        return M[0, 0] * M[1, 1] + M[0, 1] * M[1, 0]
    total = 0
    for r in range(1, n + 1):
        for cols in itertools.combinations(range(n), r):
            total += (-1) ** r * np.prod(M[:, list(cols)].sum(axis=1))
    return (-1) ** n * total


def random_functional(grid: SpacetimeGrid, rng: np.random.Generator, degree: int = 3, n_atoms: int = 2,
                      region: Region | None = None, max_degree: int = DEFAULT_MAX_DEGREE,
                      n_terms: int = 4, complex_coeffs: bool = True) -> RegularFunctional:
    """Random polynomial of degree <= `degree` built from a few smooth random atoms."""
    mask = np.ones(grid.shape, dtype=bool) if region is None else region.mask
    atoms = {}
    for _ in range(n_atoms):
        u = new_uid()
        v = rng.standard_normal(grid.shape) * mask
        atoms[u] = v / max(np.sqrt(np.sum(v**2 * grid.weights)), 1e-300)
    uids = list(atoms)
    terms = {}
    for _ in range(n_terms):
        d = int(rng.integers(0, degree + 1))
        key = tuple(sorted(rng.choice(uids, size=d).tolist()))
        c = rng.standard_normal() + (1j * rng.standard_normal() if complex_coeffs else 0)
        terms[key] = terms.get(key, 0) + c
    # make sure the top degree is present
    key = tuple(sorted(rng.choice(uids, size=degree).tolist()))
    terms[key] = terms.get(key, 0) + 1.0
    return RegularFunctional(grid, terms, atoms, max_degree)


def support_additivity_holds(F: RegularFunctional, phi, psi1, psi2, tol: float = 1e-10) -> bool:
    """F(phi + psi1 + psi2) = F(phi + psi1) - F(phi) + F(phi + psi2) for disjointly supported psi."""
    if np.any(support_of(psi1).mask & support_of(psi2).mask):
        raise ValueError("psi1 and psi2 must have disjoint supports")
    lhs = evaluate(F, phi + psi1 + psi2)
    rhs = evaluate(F, phi + psi1) - evaluate(F, phi) + evaluate(F, phi + psi2)
    return abs(lhs - rhs) <= tol * max(1.0, abs(lhs))


def shifted(F: RegularFunctional, psi) -> RegularFunctional:
    """F^psi(phi) = F(phi + psi), expanded into terms."""
    psi = np.asarray(getattr(psi, "values", psi))
    shifts = F.atom_values(psi)
    terms: dict = {}
    for key, c in F.terms.items():
        for mask in itertools.product((0, 1), repeat=len(key)):
            val = c
            kept = []
            for u, keep in zip(key, mask):
                if keep:
                    kept.append(u)
                else:
                    val *= shifts[u]
            k = tuple(sorted(kept))
            terms[k] = terms.get(k, 0) + val
    return RegularFunctional(F.grid, terms, dict(F.atoms), F.max_degree)


def gradient_square(F: RegularFunctional, chi=None) -> RegularFunctional:
    """G(phi) = sum_x w(x) chi(x) (F'(phi)(x))^2, a local functional quadratic in F."""
    grid = F.grid
    w = grid.weights if chi is None else grid.weights * np.asarray(chi)
    # first-derivative pieces: (coeff, atom uid, remaining key)
    pieces = []
    for key, c in F.terms.items():
        for i, u in enumerate(key):
            pieces.append((c, u, key[:i] + key[i + 1 :]))
    overlap: dict = {}
    terms: dict = {}
    for c1, u1, r1 in pieces:
        for c2, u2, r2 in pieces:
            pair = (min(u1, u2), max(u1, u2))
            if pair not in overlap:
                overlap[pair] = complex(np.sum(F.atom(u1) * F.atom(u2) * w))
            v = c1 * c2 * overlap[pair]
            if v == 0:
                continue
            k = tuple(sorted(r1 + r2))
            terms[k] = terms.get(k, 0) + v
    out = RegularFunctional(grid, terms, dict(F.atoms), F.max_degree)
    out._check_degree()
    return out
