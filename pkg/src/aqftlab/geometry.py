"""Discretized 1+1D conformal-static spacetime R x S^1 and its causal structure.

The metric is ``a(x)^2 (dt^2 - dx^2)``. Null cones are those of flat space
(conformal factor does not tilt them), so J+ and J- are computed exactly on the
lattice with unit coordinate light speed and periodic wrap-around in x.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_ZERO_THRESHOLD = 1e-12
# slack used when comparing spatial distance against elapsed time
_CONE_TOL = 1e-9


class GridError(ValueError):
    """Invalid grid configuration."""


@dataclass(frozen=True)
class GridConfig:
    Nt: int
    Nx: int
    T: float
    L: float
    mass: float = 1.0
    lapse_kind: str = "constant"
    lapse_params: tuple[float, ...] = (1.0,)
    discretization: str = "lattice"
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD

    @classmethod
    def from_dict(cls, doc: dict) -> "GridConfig":
        lapse = doc.get("lapse", {"kind": "constant", "params": [1.0]})
        try:
            return cls(
                Nt=int(doc["Nt"]),
                Nx=int(doc["Nx"]),
                T=float(doc["T"]),
                L=float(doc["L"]),
                mass=float(doc.get("mass", 1.0)),
                lapse_kind=str(lapse.get("kind", "constant")),
                lapse_params=tuple(float(p) for p in lapse.get("params", [1.0])),
                discretization=str(doc.get("discretization", "lattice")),
                zero_threshold=float(doc.get("zero_threshold", DEFAULT_ZERO_THRESHOLD)),
            )
        except KeyError as exc:
            raise GridError(f"grid config missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "GridConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "Nt": self.Nt,
            "Nx": self.Nx,
            "T": self.T,
            "L": self.L,
            "mass": self.mass,
            "lapse": {"kind": self.lapse_kind, "params": list(self.lapse_params)},
            "discretization": self.discretization,
            "zero_threshold": self.zero_threshold,
        }


def lapse_profile(kind: str, params: Sequence[float], x: np.ndarray, L: float) -> np.ndarray:
    """Evaluate a lapse profile a(x) on the spatial nodes.

    ``constant``: ``a = params[0]``.
    ``cosine``: ``a = params[0] + params[1] * cos(2 pi params[2] x / L)`` (mode number
    defaults to 1).
    """
    if kind == "constant":
        return np.full_like(x, params[0] if params else 1.0, dtype=float)
    if kind == "cosine":
        base, amp = params[0], params[1]
        mode = params[2] if len(params) > 2 else 1.0
        return base + amp * np.cos(2 * np.pi * mode * x / L)
    raise GridError(f"unknown lapse kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SpacetimeGrid:
    Nt: int
    Nx: int
    T: float
    L: float
    a: np.ndarray
    m: float
    discretization: str = "lattice"
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nt, self.Nx)

    @property
    def size(self) -> int:
        return self.Nt * self.Nx

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.Nt) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.Nx) * self.dx

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights a(x)^2 dt dx, shape (Nt, Nx)."""
        return np.broadcast_to(self.a**2 * self.dt * self.dx, self.shape).copy()

    @property
    def total_volume(self) -> float:
        return float(self.Nt * self.dt * self.dx * np.sum(self.a**2))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.t, self.x, indexing="ij")

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def index(self, t: float, x: float) -> tuple[int, int]:
        """Nearest grid index for coordinates (t, x), x taken mod L."""
        n = int(round(t / self.dt))
        j = int(round((x % self.L) / self.dx)) % self.Nx
        if not 0 <= n < self.Nt:
            raise GridError(f"time {t} outside the window [0, {self.T})")
        return n, j

    def flat(self, n: int, j: int) -> int:
        return n * self.Nx + j


def build_grid(config: GridConfig) -> SpacetimeGrid:
    if config.Nt <= 0 or config.Nx <= 0:
        raise GridError("Nt and Nx must be positive")
    if config.Nx % 2:
        raise GridError("Nx must be even")
    if config.T <= 0 or config.L <= 0:
        raise GridError("T and L must be positive")
    if config.mass < 0:
        raise GridError("mass must be non-negative")
    if config.discretization not in ("lattice", "fourier"):
        raise GridError(f"unknown discretization {config.discretization!r}")
    dt, dx = config.T / config.Nt, config.L / config.Nx
    if dt > dx * (1 + 1e-12):
        raise GridError(f"dt = {dt:.6g} exceeds dx = {dx:.6g} (field 'Nt' too small for 'T')")
    x = np.arange(config.Nx) * dx
    a = lapse_profile(config.lapse_kind, config.lapse_params, x, config.L)
    if np.any(a <= 0):
        raise GridError("lapse profile must be strictly positive")
    a.setflags(write=False)
    return SpacetimeGrid(
        Nt=config.Nt,
        Nx=config.Nx,
        T=config.T,
        L=config.L,
        a=a,
        m=config.mass,
        discretization=config.discretization,
        zero_threshold=config.zero_threshold,
    )


@dataclass(frozen=True, eq=False)
class Region:
    """A set of grid points, stored as a boolean (Nt, Nx) mask."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_points(cls, grid: SpacetimeGrid, points) -> "Region":
        mask = np.zeros(grid.shape, dtype=bool)
        for n, j in points:
            mask[n, j % grid.Nx] = True
        return cls(mask)

    @classmethod
    def slab(cls, grid: SpacetimeGrid, n0: int, n1: int, j0: int = 0, j1: int | None = None) -> "Region":
        """Rows n0..n1-1, columns j0..j1-1 (columns wrap)."""
        mask = np.zeros(grid.shape, dtype=bool)
        j1 = grid.Nx if j1 is None else j1
        cols = np.arange(j0, j1) % grid.Nx
        mask[n0:n1][:, cols] = True
        return cls(mask)

    @property
    def points(self) -> list[tuple[int, int]]:
        return [tuple(p) for p in np.argwhere(self.mask)]

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __bool__(self) -> bool:
        return bool(self.mask.any())

    def __or__(self, other: "Region") -> "Region":
        return Region(self.mask | other.mask)

    def __and__(self, other: "Region") -> "Region":
        return Region(self.mask & other.mask)

    def __le__(self, other: "Region") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def __eq__(self, other) -> bool:
        return isinstance(other, Region) and np.array_equal(self.mask, other.mask)

    def rows(self) -> np.ndarray:
        return np.flatnonzero(self.mask.any(axis=1))

    def dilate(self, cells: int = 1) -> "Region":
        """Grow by `cells` in every direction (time clipped, space periodic)."""
        out = self.mask.copy()
        for _ in range(cells):
            m = out.copy()
            m[1:] |= out[:-1]
            m[:-1] |= out[1:]
            m |= np.roll(out, 1, axis=1) | np.roll(out, -1, axis=1)
            out = m
        return Region(out)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: SpacetimeGrid
    values: np.ndarray

    @property
    def support(self) -> Region:
        return support_of(self.values, self.grid.zero_threshold)


def support_of(values: np.ndarray, threshold: float = DEFAULT_ZERO_THRESHOLD) -> Region:
    return Region(np.abs(values) > threshold)


def _periodic_distance_to_rows(grid: SpacetimeGrid, mask: np.ndarray) -> np.ndarray:
    """For each row s and column j, periodic cell distance to the nearest marked cell in row s."""
    Nx = grid.Nx
    cols = np.arange(Nx)
    diff = np.abs(cols[:, None] - cols[None, :])
    ring = np.minimum(diff, Nx - diff)  # (j, i)
    dist = np.where(mask[:, None, :], ring[None, :, :], np.inf)  # (s, j, i)
    return dist.min(axis=2)


def causal_future(grid: SpacetimeGrid, region: Region) -> Region:
    """Exact J+ of a region: points reachable at unit coordinate light speed."""
    if not region:
        raise GridError("causal_future of an empty region")
    d = _periodic_distance_to_rows(grid, region.mask) * grid.dx  # (s, j)
    n = np.arange(grid.Nt)
    elapsed = (n[:, None] - n[None, :]) * grid.dt  # (n, s)
    reach = (elapsed[:, :, None] >= 0) & (d[None, :, :] <= elapsed[:, :, None] + _CONE_TOL)
    return Region(reach.any(axis=1))


def causal_past(grid: SpacetimeGrid, region: Region) -> Region:
    if not region:
        raise GridError("causal_past of an empty region")
    flipped = Region(region.mask[::-1])
    return Region(causal_future(grid, flipped).mask[::-1])


def spacelike_separated(grid: SpacetimeGrid, r1: Region, r2: Region) -> bool:
    if not r1 or not r2:
        raise GridError("spacelike_separated needs non-empty regions")
    fut = causal_future(grid, r1)
    past = causal_past(grid, r1)
    return not bool(np.any((fut.mask | past.mask) & r2.mask))


def later_than(grid: SpacetimeGrid, r1: Region, r2: Region) -> bool:
    """True when r1 does not meet the causal past of r2 (r2 is 'not later' than r1)."""
    return not bool(np.any(causal_past(grid, r2).mask & r1.mask))


def time_separated(r_late: Region, r_early: Region) -> bool:
    """A constant-t slice separates the two regions with r_late strictly after r_early."""
    if not r_late or not r_early:
        return False
    return int(r_late.rows().min()) > int(r_early.rows().max())


def bump(grid: SpacetimeGrid, t0: float, x0: float, width_t: float, width_x: float) -> np.ndarray:
    """Smooth compactly supported bump exp(-1/(1-r^2)) centred at (t0, x0), periodic in x."""
    T, X = grid.mesh()
    dxp = (X - x0 + grid.L / 2) % grid.L - grid.L / 2
    r2 = ((T - t0) / width_t) ** 2 + (dxp / width_x) ** 2
    out = np.zeros(grid.shape)
    inside = r2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out
