"""Truncated bivariate formal series in the coupling (lambda) and Planck's constant (hbar).

Coefficients are RegularFunctionals keyed by (p, q) = (lambda power, hbar power),
with q >= -p: every interaction vertex brings one 1/hbar.

Truncation keeps (p, q) when p <= P_max and q <= Q_max + (P_max - p). The extra
hbar orders at low lambda power form a guard band: a later product with a
lambda^k factor can lower the hbar power by up to k, so without the band the
coefficients with q <= Q_max at higher lambda would be silently wrong. Only the
coefficients with p <= P_max and q <= Q_max are reported as exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import DEFAULT_MAX_DEGREE, RegularFunctional
from .geometry import SpacetimeGrid

DEFAULT_P_MAX = 3
DEFAULT_Q_MAX = 4


class TruncationError(ValueError):
    pass


@dataclass(eq=False)
class FormalSeries:
    grid: SpacetimeGrid
    coeffs: dict = field(default_factory=dict)  # (p, q) -> RegularFunctional
    P_max: int = DEFAULT_P_MAX
    Q_max: int = DEFAULT_Q_MAX
    overflow: set = field(default_factory=set)  # labels dropped by truncation

    def __post_init__(self):
        kept = {}
        for (p, q), F in self.coeffs.items():
            if q < -p:
                raise TruncationError(f"hbar power {q} below the floor -{p} at lambda^{p}")
            if not self.keeps(p, q):
                if not F.is_zero():
                    self.overflow.add((p, q))
                continue
            kept[(p, q)] = F
        self.coeffs = kept

    def keeps(self, p: int, q: int) -> bool:
        return p <= self.P_max and q <= self.Q_max + (self.P_max - p)

    def is_exact(self, p: int, q: int) -> bool:
        return p <= self.P_max and q <= self.Q_max

    # -- construction --------------------------------------------------------
    @classmethod
    def from_functional(cls, F: RegularFunctional, p: int = 0, q: int = 0, **kw) -> "FormalSeries":
        return cls(F.grid, {(p, q): F}, **kw)

    @classmethod
    def one(cls, grid, **kw) -> "FormalSeries":
        return cls(grid, {(0, 0): RegularFunctional.constant(grid, 1.0)}, **kw)

    @classmethod
    def zero(cls, grid, **kw) -> "FormalSeries":
        return cls(grid, {}, **kw)

    def like(self, coeffs: dict, overflow=()) -> "FormalSeries":
        return FormalSeries(self.grid, coeffs, self.P_max, self.Q_max, set(self.overflow) | set(overflow))

    def coefficient(self, p: int, q: int) -> RegularFunctional:
        return self.coeffs.get((p, q), RegularFunctional.zero(self.grid))

    def labels(self):
        return sorted(self.coeffs)

    def exact_labels(self):
        return [k for k in sorted(self.coeffs) if self.is_exact(*k)]

    @property
    def max_degree(self) -> int:
        return max((F.max_degree for F in self.coeffs.values()), default=DEFAULT_MAX_DEGREE)

    # -- arithmetic -------------------------------------------------------------
    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        coeffs = dict(self.coeffs)
        for k, F in other.coeffs.items():
            coeffs[k] = coeffs[k] + F if k in coeffs else F
        return self.like(coeffs, other.overflow)

    def __neg__(self) -> "FormalSeries":
        return self.scale(-1)

    def __sub__(self, other: "FormalSeries") -> "FormalSeries":
        return self + (-other)

    def scale(self, s) -> "FormalSeries":
        return self.like({k: F.scale(s) for k, F in self.coeffs.items()})

    def shift(self, dp: int = 0, dq: int = 0) -> "FormalSeries":
        """Multiply by lambda^dp hbar^dq."""
        return self.like({(p + dp, q + dq): F for (p, q), F in self.coeffs.items()})

    def conj(self) -> "FormalSeries":
        """Complex conjugation; lambda and hbar are real formal parameters."""
        return self.like({k: F.conj() for k, F in self.coeffs.items()})

    def map(self, fn) -> "FormalSeries":
        return self.like({k: fn(F) for k, F in self.coeffs.items()})

    def evaluate(self, phi, hbar: float = 1.0, lam: float = 1.0) -> complex:
        return complex(sum(F(phi) * lam**p * hbar**q for (p, q), F in self.coeffs.items()))

    def max_deviation(self, other: "FormalSeries", exact_only: bool = True) -> float:
        """Largest coefficient difference over all kept labels (exact ones by default)."""
        diff = self - other
        worst = 0.0
        for k, F in diff.coeffs.items():
            if exact_only and not self.is_exact(*k):
                continue
            for c in F.terms.values():
                worst = max(worst, abs(c))
        return worst

    def to_json(self) -> dict:
        return {
            "P_max": self.P_max,
            "Q_max": self.Q_max,
            "overflow": [f"({p},{q})" for p, q in sorted(self.overflow)],
            "coefficients": {f"({p},{q})": F.to_json() for (p, q), F in sorted(self.coeffs.items())},
        }


def as_series(X, grid: SpacetimeGrid | None = None, **kw) -> FormalSeries:
    if isinstance(X, FormalSeries):
        return X
    if isinstance(X, RegularFunctional):
        return FormalSeries.from_functional(X, **kw)
    if grid is None:
        raise TypeError("cannot promote a scalar without a grid")
    return FormalSeries(grid, {(0, 0): RegularFunctional.constant(grid, X)}, **kw)


def bilinear(F: FormalSeries, G: FormalSeries, product) -> FormalSeries:
    """Extend a functional product {hbar^n: functional} = product(A, B) to series."""
    P_max, Q_max = min(F.P_max, G.P_max), min(F.Q_max, G.Q_max)
    template = FormalSeries(F.grid, {}, P_max, Q_max)
    coeffs: dict = {}
    dropped = set(F.overflow) | set(G.overflow)
    for (p1, q1), A in F.coeffs.items():
        for (p2, q2), B in G.coeffs.items():
            p = p1 + p2
            if p > P_max:
                if not (A.is_zero() or B.is_zero()):
                    dropped.add((p, q1 + q2))
                continue
            if q1 + q2 > Q_max + (P_max - p):
                dropped.add((p, q1 + q2))
                continue
            for n, C in product(A, B).items():
                k = (p, q1 + q2 + n)
                if not template.keeps(*k):
                    if not C.is_zero():
                        dropped.add(k)
                    continue
                coeffs[k] = coeffs[k] + C if k in coeffs else C
    return FormalSeries(F.grid, coeffs, P_max, Q_max, dropped)
