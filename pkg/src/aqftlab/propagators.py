"""Spatial operator, Green operators and two-point functions of the field operator.

Sign convention: the field operator is the Hessian of the free action,
``P = -(box_g + m^2) = -a^{-2} (d_t^2 + K)``, with ``K = -d_x^2 + m^2 a^2``
(in 1+1D the conformal factor drops out of the principal part). With this choice
``P o G_ret = id``, ``Delta = G_ret - G_adv`` and ``2 Im W = Delta`` hold together for
the positive-frequency two-point function ``W ~ exp(-i w (t - s)) / 2w``.

Time is discretized per mode by the exact-dispersion three-point scheme

    c[n+1] + c[n-1] - 2 cos(theta_k) c[n] = nu_k * source[n]

so every kernel below is the exact inverse (or bisolution) of the discrete
operator, not an O(dt^2) approximation of it. Two spatial discretizations:

``lattice``
    Local nearest-neighbour scheme with the mass term averaged over n +/- 1.
    Finite propagation speed is exact (one cell per step), so supports respect
    the light cone when dt = dx.
``fourier``
    Spectral -d_x^2. Exact Fourier modes for constant lapse; not strictly causal.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import GridError, Region, SpacetimeGrid, support_of

KINDS = (
    "retarded",
    "advanced",
    "pauli_jordan",
    "dirac",
    "wightman_vacuum",
    "wightman_kms",
    "hadamard_H",
    "feynman",
)


class InfraredObstruction(ValueError):
    """The spatial operator has a zero mode; the propagator formulas divide by sqrt(K)."""


class SupportError(ValueError):
    """A test function touches the boundary of the time window."""


class NotASolution(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    grid: SpacetimeGrid
    matrix: np.ndarray  # assembled symmetric spatial matrix (K or the lattice step matrix)
    matrix_eigenvalues: np.ndarray
    V: np.ndarray  # orthonormal eigenvectors, columns
    theta: np.ndarray  # phase advance per time step
    nu: np.ndarray  # per-mode source normalization
    dhalf: np.ndarray  # sqrt of the lattice mass-averaging diagonal (ones for fourier)

    @property
    def frequencies(self) -> np.ndarray:
        return self.theta / self.grid.dt

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.frequencies**2

    @property
    def omega_hat(self) -> np.ndarray:
        """Amplitude normalization: kernels carry sin(w t) / omega_hat."""
        return np.sin(self.theta) * self.grid.dt / self.nu

    @cached_property
    def modes(self) -> np.ndarray:
        """Spatial mode functions e_k(x), shape (Nx, n_modes), L^2(dx)-normalized for fourier."""
        return (self.V / self.dhalf[:, None]) / np.sqrt(self.grid.dx)

    @cached_property
    def momentum_map(self) -> np.ndarray:
        g = self.grid
        core = self.V @ np.diag(g.dt**2 / self.nu) @ self.V.T
        return self.dhalf[:, None] * core * self.dhalf[None, :]

    def reconstruction_error(self) -> float:
        rebuilt = self.V @ np.diag(self.matrix_eigenvalues) @ self.V.T
        return float(np.max(np.abs(rebuilt - self.matrix)))

    def orthonormality_error(self) -> float:
        n = self.V.shape[1]
        return float(np.max(np.abs(self.V.T @ self.V - np.eye(n))))

    # -- mode-space transforms -------------------------------------------------
    def analyse(self, u: np.ndarray) -> np.ndarray:
        """Mode amplitudes c = V^T D^{1/2} u per row, shape (Nt, n_modes)."""
        return (u * self.dhalf[None, :]) @ self.V

    def synthesise(self, c: np.ndarray) -> np.ndarray:
        return (c @ self.V.T) / self.dhalf[None, :]

    def project(self, f: np.ndarray) -> np.ndarray:
        """Weighted projection F_k(s) = sum_j e_k(j) w(s, j) f(s, j), shape (Nt, n_modes)."""
        return (f * self.grid.weights) @ self.modes


def _second_derivative_fourier(Nx: int, L: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(Nx, d=L / Nx)
    eye = np.eye(Nx)
    cols = np.real(np.fft.ifft(np.fft.fft(eye, axis=0) * (k**2)[:, None], axis=0))
    return 0.5 * (cols + cols.T)


def assemble_K(grid: SpacetimeGrid, ir_tol: float = 1e-12) -> SpectralOperator:
    dt, dx = grid.dt, grid.dx
    mass_term = grid.m**2 * grid.a**2
    if grid.discretization == "fourier":
        K = _second_derivative_fourier(grid.Nx, grid.L) + np.diag(mass_term)
        evals, V = np.linalg.eigh(K)
        if evals.min() <= ir_tol:
            raise InfraredObstruction(
                f"infrared obstruction: K has a zero mode (smallest eigenvalue {evals.min():.3g})"
            )
        omega = np.sqrt(evals)
        theta = omega * dt
        s = np.sin(theta)
        if np.min(np.abs(s)) < 1e-8:
            raise GridError("time step is resonant with a spatial mode (sin(w dt) = 0)")
        nu = dt * s / omega
        return SpectralOperator(grid, K, evals, V, theta, nu, np.ones(grid.Nx))

    r2 = (dt / dx) ** 2
    eps = 0.5 * dt**2 * mass_term
    D = 1.0 + eps
    Nx = grid.Nx
    A = 2 * (1 - r2) * np.eye(Nx)
    idx = np.arange(Nx)
    A[idx, (idx + 1) % Nx] += r2
    A[idx, (idx - 1) % Nx] += r2
    dinv = 1 / np.sqrt(D)
    M = dinv[:, None] * A * dinv[None, :]
    evals, V = np.linalg.eigh(M)
    if evals.max() >= 2 - ir_tol:
        raise InfraredObstruction("infrared obstruction: the lattice operator has a zero mode (m = 0?)")
    if evals.min() <= -2 + ir_tol:
        raise GridError("lattice scheme unstable for this time step")
    theta = np.arccos(evals / 2)
    nu = np.full(Nx, dt**2)
    return SpectralOperator(grid, M, evals, V, theta, nu, np.sqrt(D))


# -- field operator --------------------------------------------------------------


def apply_L(op: SpectralOperator, u: np.ndarray) -> np.ndarray:
    """(d_t^2 + K) u on interior rows; boundary rows are set to zero."""
    c = op.analyse(u)
    out = np.zeros_like(c)
    out[1:-1] = (c[2:] + c[:-2] - 2 * np.cos(op.theta)[None, :] * c[1:-1]) / op.nu[None, :]
    res = (out @ op.V.T) * op.dhalf[None, :]
    res[0] = 0
    res[-1] = 0
    return res


def apply_P(op: SpectralOperator, u: np.ndarray) -> np.ndarray:
    """Field operator P = -a^{-2}(d_t^2 + K) on interior rows."""
    return -apply_L(op, u) / (op.grid.a**2)[None, :]


# -- kernels ---------------------------------------------------------------------


def _lag_table(op: SpectralOperator, kind: str, beta: float | None) -> np.ndarray:
    Nt = op.grid.Nt
    m = np.arange(-(Nt - 1), Nt)[None, :].astype(float)
    th = op.theta[:, None]
    oh = op.omega_hat[:, None]
    sin = np.sin(th * m)
    if kind == "retarded":
        return np.where(m > 0, -sin / oh, 0.0)
    if kind == "advanced":
        return np.where(m < 0, sin / oh, 0.0)
    if kind == "pauli_jordan":
        return -sin / oh
    if kind == "dirac":
        return -0.5 * np.sin(th * np.abs(m)) / oh
    if kind == "wightman_vacuum":
        return np.exp(-1j * th * m) / (2 * oh)
    if kind == "wightman_kms":
        n = 1.0 / np.expm1(beta * op.frequencies[:, None])
        return ((1 + n) * np.exp(-1j * th * m) + n * np.exp(1j * th * m)) / (2 * oh)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(eq=False)
class PropagatorKernel:
    """A two-point kernel stored per mode: K(n,i; s,j) = sum_k e_k(i) e_k(j) g_k(n - s)."""

    kind: str
    op: SpectralOperator
    lags: np.ndarray  # (n_modes, 2 Nt - 1), lag index offset by Nt - 1
    beta: float | None = None
    state: str | None = None
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def grid(self) -> SpacetimeGrid:
        return self.op.grid

    def coefficient(self, k: int, lag: int) -> complex:
        return self.lags[k, lag + self.grid.Nt - 1]

    def toeplitz(self) -> np.ndarray:
        """Per-mode time matrices G_k[n, s] = g_k(n - s), shape (n_modes, Nt, Nt)."""
        Nt = self.grid.Nt
        n = np.arange(Nt)
        return self.lags[:, n[:, None] - n[None, :] + Nt - 1]

    def dense(self) -> np.ndarray:
        """Kernel values K(x, y) as an (N, N) matrix over flattened grid points."""
        if self._dense is None:
            e = self.op.modes
            G = self.toeplitz()
            Nt, Nx = self.grid.shape
            dense = np.einsum("ik,jk,kns->nisj", e, e, G, optimize=True)
            self._dense = dense.reshape(Nt * Nx, Nt * Nx)
        return self._dense

    def weighted_dense(self) -> np.ndarray:
        """diag(w) K diag(w): bilinear pairing matrix for grid functions."""
        w = self.grid.weights.ravel()
        return w[:, None] * self.dense() * w[None, :]

    def apply(self, f: np.ndarray) -> np.ndarray:
        """(K f)(x) = sum_y K(x, y) f(y) w(y), computed in mode space; leading axes are batched."""
        F = self.op.project(np.asarray(f))  # (Nt, k)
        out = np.einsum("kns,...sk->...nk", self.toeplitz(), F)
        return out @ self.op.modes.T

    def pair(self, f: np.ndarray, h: np.ndarray) -> complex:
        """<f, K h> = sum_{x,y} f(x) K(x,y) h(y) w(x) w(y)."""
        return complex(np.sum(np.asarray(f) * self.grid.weights * self.apply(h)))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "beta": self.beta,
            "modes": [
                {
                    "omega": float(w),
                    "coeffs": [[float(z.real), float(z.imag)] for z in np.asarray(row, dtype=complex)],
                }
                for w, row in zip(self.op.frequencies, self.lags)
            ],
        }

    def to_csv(self, path) -> None:
        d = self.dense()
        if np.iscomplexobj(d) and np.any(d.imag != 0):
            np.savetxt(path, np.hstack([d.real, d.imag]), delimiter=",")
        else:
            np.savetxt(path, np.real(d), delimiter=",")


def kernel(op: SpectralOperator, kind: str) -> PropagatorKernel:
    """Causal kernels: retarded, advanced, pauli_jordan, dirac."""
    if kind not in ("retarded", "advanced", "pauli_jordan", "dirac"):
        raise ValueError(f"{kind!r} is not a causal kernel; use two_point")
    return PropagatorKernel(kind, op, _lag_table(op, kind, None))


def two_point(op: SpectralOperator, kind: str, beta: float | None = None, state: str = "vacuum") -> PropagatorKernel:
    """Two-point functions.

    ``kind`` is one of ``wightman_vacuum``, ``wightman_kms`` (needs beta),
    ``dirac``, ``pauli_jordan``, ``hadamard_H`` and ``feynman``. The last two
    depend on a state (``vacuum`` or ``kms``): H = W - (i/2) Delta and
    Delta_F = i Delta_D + H.
    """
    if np.min(op.frequencies) <= 0:
        raise InfraredObstruction("infrared obstruction: zero mode")
    if kind == "wightman_kms" or state == "kms":
        if beta is None or beta <= 0:
            raise ValueError("KMS kernels need beta > 0")
    if kind in ("wightman_vacuum", "wightman_kms"):
        return PropagatorKernel(kind, op, _lag_table(op, kind, beta), beta=beta)
    if kind in ("dirac", "pauli_jordan", "retarded", "advanced"):
        return kernel(op, kind)
    wkind = "wightman_kms" if state == "kms" else "wightman_vacuum"
    W = _lag_table(op, wkind, beta)
    H = W - 0.5j * _lag_table(op, "pauli_jordan", None)
    if kind == "hadamard_H":
        return PropagatorKernel(kind, op, np.real_if_close(H, tol=1000), beta=beta, state=state)
    if kind == "feynman":
        return PropagatorKernel(kind, op, 1j * _lag_table(op, "dirac", None) + H, beta=beta, state=state)
    raise ValueError(f"unknown two-point kind {kind!r}")


# -- Green operators -------------------------------------------------------------


def _check_margin(grid: SpacetimeGrid, f: np.ndarray, margin: int) -> None:
    rows = support_of(f, grid.zero_threshold).rows()
    if rows.size and (rows.min() < margin or rows.max() > grid.Nt - 1 - margin):
        raise SupportError(
            f"support rows {rows.min()}..{rows.max()} closer than {margin} steps to the window boundary"
        )


def green_operator(op: SpectralOperator, kind: str, f: np.ndarray, margin: int = 1) -> np.ndarray:
    """Retarded or advanced solution u of P u = f."""
    if kind not in ("retarded", "advanced"):
        raise ValueError("kind must be 'retarded' or 'advanced'")
    f = np.asarray(f)
    _check_margin(op.grid, f, margin)
    return kernel(op, kind).apply(f)


def causal_propagate(op: SpectralOperator, f: np.ndarray, margin: int = 1) -> np.ndarray:
    """Delta f = G_ret f - G_adv f."""
    f = np.asarray(f)
    _check_margin(op.grid, f, margin)
    return kernel(op, "pauli_jordan").apply(f)


def lattice_step_matrix(grid: SpacetimeGrid) -> np.ndarray:
    r2 = (grid.dt / grid.dx) ** 2
    Nx = grid.Nx
    A = 2 * (1 - r2) * np.eye(Nx)
    idx = np.arange(Nx)
    A[idx, (idx + 1) % Nx] += r2
    A[idx, (idx - 1) % Nx] += r2
    return A


def step_retarded(grid: SpacetimeGrid, source: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Leapfrog solution of  b[n] u[n+1] + b[n-1] u[n-1] - A u[n] = dt^2 source[n]  with u = 0 early.

    ``b`` has shape (Nt, Nx) (pair weights between rows n and n+1); by default the
    free lattice weights 1 + dt^2 m^2 a^2 / 2. Trailing dimensions of ``source``
    beyond (Nt, Nx) are batched.
    """
    if grid.discretization != "lattice":
        raise ValueError("time stepping is only defined for the lattice discretization")
    A = lattice_step_matrix(grid)
    if b is None:
        b = np.broadcast_to(1 + 0.5 * grid.dt**2 * grid.m**2 * grid.a**2, grid.shape)
    extra = source.shape[2:]
    bb = b.reshape(b.shape + (1,) * len(extra))
    u = np.zeros(source.shape, dtype=np.result_type(source, float))
    dt2 = grid.dt**2
    for n in range(grid.Nt - 1):
        rhs = np.tensordot(A, u[n], axes=(1, 0)) + dt2 * source[n]
        if n > 0:
            rhs = rhs - bb[n - 1] * u[n - 1]
        u[n + 1] = rhs / bb[n]
    return u


def step_advanced(grid: SpacetimeGrid, source: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    if b is not None:
        # row pairing (n, n+1) becomes (Nt-2-n, Nt-1-n) after reflection
        b = np.concatenate([b[:-1][::-1], b[-1:]], axis=0)
    return step_retarded(grid, source[::-1], b)[::-1]


def sigma(op: SpectralOperator, f: np.ndarray, h: np.ndarray) -> float:
    """Symplectic form sigma(f, h) = int f (Delta h) dmu."""
    return float(np.real(kernel(op, "pauli_jordan").pair(f, h)))


def cauchy_data(op: SpectralOperator, phi: np.ndarray, n: int, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Restriction and momentum density of a solution on the slice t = n dt.

    The momentum is the central difference d_t phi, weighted by the scheme's
    conserved momentum map and the slice measure dx.
    """
    g = op.grid
    if not 1 <= n <= g.Nt - 2:
        raise ValueError("slice must be an interior row")
    res = apply_P(op, phi)
    scale = max(np.max(np.abs(phi)), 1e-300)
    if np.max(np.abs(res[1:-1])) > tol * scale:
        raise NotASolution(f"input is not a solution (residual {np.max(np.abs(res)):.3g})")
    phi1 = np.real_if_close(phi[n])
    phi2 = op.momentum_map @ (phi[n + 1] - phi[n - 1]) * g.dx / (2 * g.dt)
    return phi1, phi2


def sigma_cauchy(data1, data2) -> float:
    """sigma_2((p1, p2), (q1, q2)) = sum_x (p1 q2 - p2 q1)."""
    (p1, p2), (q1, q2) = data1, data2
    return float(np.real(np.sum(p1 * q2 - p2 * q1)))


def smooth_step(grid: SpacetimeGrid, n1: int, n2: int) -> np.ndarray:
    """Rows profile chi: 0 for n <= n1, 1 for n >= n2, C-infinity in between."""
    if n2 - n1 < 4:
        raise ValueError("slab too thin for a smooth step (needs >= 4 time steps)")
    n = np.arange(grid.Nt, dtype=float)
    s = np.clip((n - n1) / (n2 - n1), 0.0, 1.0)

    def bump_side(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    num = bump_side(s)
    chi = num / (num + bump_side(1 - s))
    return chi


def solution_from_slab(op: SpectralOperator, phi: np.ndarray, n1: int, n2: int, tol: float = 1e-6) -> np.ndarray:
    """Source f = P(chi phi) supported in the slab rows n1..n2 with Delta f = phi."""
    g = op.grid
    if not (1 <= n1 and n2 <= g.Nt - 2 and n1 < n2):
        raise ValueError("slab must lie strictly inside the time window")
    chi = smooth_step(g, n1, n2)
    res = apply_P(op, phi)
    scale = max(np.max(np.abs(phi)), 1e-300)
    if np.max(np.abs(res)) > tol * scale:
        raise NotASolution(f"input is not a solution (residual {np.max(np.abs(res)):.3g})")
    f = apply_P(op, chi[:, None] * phi)
    keep = np.zeros(g.Nt, dtype=bool)
    keep[max(n1 - 1, 0) : n2 + 2] = True
    return np.where(keep[:, None], f, 0.0)


def kms_identity_check(K: PropagatorKernel, taus=None) -> dict:
    """Per mode, compare g(tau - i beta) with g(-tau) using the closed form."""
    if K.kind != "wightman_kms":
        raise ValueError("not a KMS kernel")
    op, beta = K.op, K.beta
    w = op.frequencies[:, None]
    oh = op.omega_hat[:, None]
    taus = np.linspace(-1.0, 1.0, 9) if taus is None else np.asarray(taus, dtype=float)
    n = 1.0 / np.expm1(beta * w)

    def g(tau):
        return ((1 + n) * np.exp(-1j * w * tau) + n * np.exp(1j * w * tau)) / (2 * oh)

    lhs = g(taus[None, :] - 1j * beta)
    rhs = g(-taus[None, :])
    dev = float(np.max(np.abs(lhs - rhs)))
    return {"name": "kms_identity", "max_deviation": dev, "beta": beta}


def kms_vacuum_limit(op: SpectralOperator, beta_omega: float = 40.0) -> float:
    """Largest gap between thermal and vacuum mode coefficients with beta_k = beta_omega / omega_k."""
    Nt = op.grid.Nt
    m = np.arange(-(Nt - 1), Nt)[None, :]
    th = op.theta[:, None]
    oh = op.omega_hat[:, None]
    n = 1.0 / np.expm1(np.full_like(th, beta_omega))
    kms = ((1 + n) * np.exp(-1j * th * m) + n * np.exp(1j * th * m)) / (2 * oh)
    return float(np.max(np.abs(kms - _lag_table(op, "wightman_vacuum", None))))


def hadamard_checks(W: PropagatorKernel, test_functions) -> dict:
    """2 Im W = Delta per mode, positivity of the Gram matrix, bisolution residual."""
    op = W.op
    pj = _lag_table(op, "pauli_jordan", None)
    im_dev = float(np.max(np.abs(2 * np.imag(W.lags) - pj)))
    fs = [np.asarray(f) for f in test_functions]
    gram = np.array([[np.conj(f).ravel() @ (op.grid.weights * W.apply(h)).ravel() for h in fs] for f in fs])
    gram = 0.5 * (gram + gram.conj().T)
    min_eig = float(np.min(np.linalg.eigvalsh(gram)))
    # bisolution: columns of W solve P in the first argument; conjugate symmetry covers the second
    res = 0.0
    for h in fs:
        u = W.apply(h)
        res = max(res, float(np.max(np.abs(apply_P(op, u)))) / max(np.max(np.abs(u)), 1e-300))
        v = np.conj(W.apply(np.conj(h)))  # W(x, y) as a function of y
        res = max(res, float(np.max(np.abs(apply_P(op, v)))) / max(np.max(np.abs(v)), 1e-300))
    return {"im_deviation": im_dev, "min_gram_eigenvalue": min_eig, "bisolution_residual": res}


def export_kernel_json(K: PropagatorKernel, path) -> None:
    with open(path, "w") as fh:
        json.dump(K.to_json(), fh)
