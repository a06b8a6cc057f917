"""Bidifferential contraction of separable functionals with a two-point kernel.

For a kernel C and atoms a, b the elementary pairing is M[a, b] = s * <a, C b>,
with the scalar s carrying the conventional prefactor (i/2 for the star product,
1 for the Hadamard-ordered one, i for time ordering). All products and the
Gaussian operators exp((hbar/2) <C, d^2/dphi^2>) reduce to sums of permanents
and matchings of this matrix over the atoms of each term.
"""
from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .functionals import RegularFunctional, _submultisets, permanent
from .propagators import PropagatorKernel


class Pairing:
    """Cached pairings s * <a, C b>, with <a, C b> = sum a(x) w(x) C(x, y) b(y) w(y)."""

    def __init__(self, kernel: PropagatorKernel, scale: complex = 1.0, symmetric: bool = False, name: str = ""):
        self.kernel = kernel
        self.scale = complex(scale)
        self.symmetric = symmetric
        self.name = name or kernel.kind
        self._applied: dict = {}
        self._values: dict = {}

    def _apply(self, uid, vec):
        if uid not in self._applied:
            self._applied[uid] = self.kernel.apply(vec)
        return self._applied[uid]

    def value(self, ua, va, ub, vb) -> complex:
        key = (ua, ub)
        if key not in self._values:
            w = self.kernel.grid.weights
            if self.symmetric:
                v = 0.5 * (np.sum(va * w * self._apply(ub, vb)) + np.sum(vb * w * self._apply(ua, va)))
            else:
                v = np.sum(va * w * self._apply(ub, vb))
            self._values[key] = self.scale * complex(v)
        return self._values[key]

    def prefetch(self, uids, atoms):
        """Apply the kernel to many atoms at once (batched mode-space transform)."""
        todo = [u for u in uids if u not in self._applied]
        if len(todo) > 1:
            out = self.kernel.apply(np.stack([atoms[u] for u in todo]))
            for u, v in zip(todo, out):
                self._applied[u] = v

    def matrix(self, ka, kb, atoms) -> np.ndarray:
        return np.array([[self.value(a, atoms[a], b, atoms[b]) for b in kb] for a in ka], dtype=complex)


def _atoms_of(F: RegularFunctional) -> dict:
    for key in F.terms:
        for u in key:
            F.atom(u)
    return F.atoms


def contract(F: RegularFunctional, G: RegularFunctional, pairing: Pairing) -> dict:
    """Bidifferential product sum_n hbar^n / n! <F^(n), C^{x n} G^(n)>.

    Returns {n: RegularFunctional}, the coefficient of hbar^n.
    """
    af, ag = _atoms_of(F), _atoms_of(G)
    atoms = {**af, **ag}
    pairing.prefetch({u for k in G.terms for u in k}, atoms)
    grid = F.grid
    max_degree = max(F.max_degree, G.max_degree)
    out: dict = {}
    for kf, cf in F.terms.items():
        cF = Counter(kf)
        for kg, cg in G.terms.items():
            cG = Counter(kg)
            for n in range(min(len(kf), len(kg)) + 1):
                bucket = out.setdefault(n, {})
                for sf, mf in _submultisets(cF, n):
                    lf = list(sf.elements())
                    restf = tuple((cF - sf).elements())
                    for sg, mg in _submultisets(cG, n):
                        lg = list(sg.elements())
                        val = cf * cg * mf * mg
                        if n:
                            val *= permanent(pairing.matrix(lf, lg, atoms))
                        if val == 0:
                            continue
                        key = tuple(sorted(restf + tuple((cG - sg).elements())))
                        bucket[key] = bucket.get(key, 0) + val
    res = {}
    for n, terms in out.items():
        Fn = RegularFunctional(grid, terms, atoms, max_degree)
        Fn._check_degree()
        res[n] = Fn
    return res


def _matchings(positions):
    """All partial matchings of a list of positions, as lists of pairs."""
    if len(positions) < 2:
        yield []
        return
    first, rest = positions[0], positions[1:]
    for m in _matchings(rest):
        yield m
    for i, other in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for m in _matchings(remaining):
            yield [(first, other)] + m


def gaussian(F: RegularFunctional, pairing: Pairing, sign: int = 1) -> dict:
    """exp(sign * (hbar/2) <C, d^2/dphi^2>) F for symmetric C, as {hbar power: functional}.

    Each application of the Laplacian-type operator picks an unordered pair of
    factors (factor 2 from the two orderings), so the exponential becomes a sum
    over partial matchings with hbar^(number of pairs).
    """
    atoms = _atoms_of(F)
    pairing.prefetch({u for k in F.terms for u in k}, atoms)
    out: dict = {}
    cache: dict = {}
    for key, c in F.terms.items():
        if key not in cache:
            res: dict = {}
            pos = list(range(len(key)))
            for m in _matchings(pos):
                val = (sign ** len(m)) * 1.0
                for i, j in m:
                    val *= pairing.value(key[i], atoms[key[i]], key[j], atoms[key[j]])
                used = {p for pair in m for p in pair}
                rest = tuple(key[p] for p in pos if p not in used)
                res.setdefault(len(m), {})
                res[len(m)][rest] = res[len(m)].get(rest, 0) + val
            cache[key] = res
        for q, terms in cache[key].items():
            bucket = out.setdefault(q, {})
            for rest, v in terms.items():
                bucket[rest] = bucket.get(rest, 0) + c * v
    return {q: RegularFunctional(F.grid, t, atoms, F.max_degree) for q, t in out.items()}


def count_matchings(n: int) -> int:
    return sum(math.comb(n, 2 * k) * math.prod(range(2 * k - 1, 0, -2)) for k in range(n // 2 + 1))

