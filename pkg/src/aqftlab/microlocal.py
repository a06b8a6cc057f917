"""Heuristic wave-front-set estimation for gridded (bi-)distributions.

A fixed grid has no true wave front set; what is estimated is the direction of
non-decaying high-frequency content of a discretization family, window by window:

1. cut a (2w+1)^dim window around each centre and multiply by a Kaiser taper;
2. evaluate the localized Fourier transform F(k) = sum x(n) e^{+i k.n} exactly
   along D rays (directions atan2(k_x, k_t) = 2 pi b / D) in a high-frequency
   band below the Nyquist frequency;
3. flag direction b when max_r |F(r, b)| (1 + r)^d > cutoff * C, with r in units
   of the taper's frequency resolution 2 pi / (w + 1), and C the largest |F| at
   low frequency in the window, but at least a fixed fraction of the largest C
   over all windows;
4. keep only flags that are local maxima in direction (adjacent buckets) and
   are not beaten by a stronger flag of any direction within one window
   half-width, with ties kept.

With the physics convention above, exp(-i w t) contributes at k = +w.
In 1D there are two buckets: 0 for k > 0 and 1 for k < 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WFParams:
    w: int = 8
    n_dirs: int = 16
    degree: float = 4.0
    cutoff: float = 10.0
    band: tuple = (0.4, 0.7)  # high-frequency band as a fraction of the Nyquist frequency pi
    n_radii: int = 6
    periodic: bool = False
    tie_tol: float = 1e-3
    floor: float = 0.25  # minimum scale C, as a fraction of the largest window scale

    def to_json(self) -> dict:
        return {
            "w": self.w,
            "D": self.n_dirs,
            "d": self.degree,
            "cutoff": self.cutoff,
            "band": list(self.band),
            "periodic": self.periodic,
            "floor": self.floor,
        }


@dataclass
class WFEstimate:
    shape: tuple
    n_dirs: int
    entries: dict = field(default_factory=dict)  # point tuple -> frozenset of bucket indices
    params: WFParams = field(default_factory=WFParams)

    @property
    def points(self) -> list:
        return sorted(self.entries)

    def directions(self) -> set:
        out = set()
        for d in self.entries.values():
            out |= set(d)
        return out

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, WFEstimate)
            and self.shape == other.shape
            and self.n_dirs == other.n_dirs
            and self.entries == other.entries
        )

    def shifted(self, offset) -> "WFEstimate":
        """Base points moved by a periodic offset."""
        entries = {
            tuple((p + o) % s for p, o, s in zip(pt, offset, self.shape)): dirs for pt, dirs in self.entries.items()
        }
        return WFEstimate(self.shape, self.n_dirs, entries, self.params)

    def to_json(self, dt: float = 1.0, dx: float = 1.0) -> dict:
        pts = []
        for pt in self.points:
            item = {"t": pt[0] * dt}
            if len(pt) > 1:
                item["x"] = pt[1] * dx
            item["dirs"] = sorted(self.entries[pt])
            pts.append(item)
        return {"points": pts, "params": self.params.to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def taper(w: int, beta: float = 8.0) -> np.ndarray:
    """Kaiser taper on offsets -w..w; its spectral leakage past ~1 rad/sample is ~1e-4."""
    return np.kaiser(2 * w + 1, beta)


class WindowError(ValueError):
    pass


def _ray_frequencies(p: WFParams, dim: int):
    """Frequency vectors (rad per sample) of the band rays and of the scale samples."""
    radii = np.pi * np.linspace(p.band[0], p.band[1], p.n_radii)
    scale_radii = np.pi * np.linspace(0.0, p.band[1], 4 * p.n_radii)
    if dim == 1:
        dirs = np.array([1.0, -1.0])[:, None]
        band = dirs[:, None, :] * radii[None, :, None]  # (2, R, 1)
        scale = np.concatenate([(dirs * r)[None] for r in scale_radii]).reshape(-1, 1)
    else:
        ang = 2 * np.pi * np.arange(p.n_dirs) / p.n_dirs
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)  # (D, 2): (k_t, k_x)
        band = dirs[:, None, :] * radii[None, :, None]
        scale = (dirs[:, None, :] * scale_radii[None, :, None]).reshape(-1, 2)
    return band, scale, radii


def _windows(values: np.ndarray, p: WFParams):
    """Yield (centre index tuple, tapered window) over all admissible centres."""
    tp = taper(p.w)
    if values.ndim == 1:
        N = values.shape[0]
        centres = range(N) if p.periodic else range(p.w, N - p.w)
        for c in centres:
            idx = np.arange(c - p.w, c + p.w + 1)
            seg = np.take(values, idx, mode="wrap") if p.periodic else values[idx]
            yield (c,), seg * tp
    else:
        Nt, Nx = values.shape
        tp2 = tp[:, None] * tp[None, :]
        ct = range(Nt) if p.periodic else range(p.w, Nt - p.w)
        cx = range(Nx) if p.periodic else range(p.w, Nx - p.w)
        for a in ct:
            it = np.arange(a - p.w, a + p.w + 1)
            rows = np.take(values, it, axis=0, mode="wrap") if p.periodic else values[it]
            for b in cx:
                ix = np.arange(b - p.w, b + p.w + 1)
                seg = np.take(rows, ix, axis=1, mode="wrap") if p.periodic else rows[:, ix]
                yield (a, b), seg * tp2


def _strengths(values: np.ndarray, p: WFParams):
    """Per centre: decay-test statistic per bucket, and whether it exceeds the cutoff."""
    dim = values.ndim
    band_k, scale_k, radii = _ray_frequencies(p, dim)
    n = np.arange(-p.w, p.w + 1)  # offsets relative to the centre
    if dim == 1:
        Eb = np.exp(1j * band_k[..., 0, None] * n)  # (bucket, radius, offset)
        Es = np.exp(1j * scale_k[:, 0, None] * n)
    else:
        nt, nx = np.meshgrid(n, n, indexing="ij")
        Eb = np.exp(1j * (band_k[..., 0, None, None] * nt + band_k[..., 1, None, None] * nx))
        Es = np.exp(1j * (scale_k[:, 0, None, None] * nt + scale_k[:, 1, None, None] * nx))
    # frequency in units of the taper's resolution, 2 pi / (w + 1)
    weight = (1 + radii * (p.w + 1) / (2 * np.pi)) ** p.degree
    axes = tuple(range(-dim, 0))
    stats, scales = {}, {}
    for c, seg in _windows(values, p):
        bandF = np.abs(np.tensordot(Eb, seg, axes=(axes, tuple(range(dim)))))  # (B, R)
        scales[c] = np.max(np.abs(np.tensordot(Es, seg, axes=(axes, tuple(range(dim))))))
        stats[c] = np.max(bandF * weight[None, :], axis=1)
    # windows holding only a faint tail of the input are judged against a floor
    floor = p.floor * max(scales.values(), default=0.0)
    out = {}
    for c, stat in stats.items():
        C = max(scales[c], floor)
        out[c] = (stat, stat > p.cutoff * C if C > 0 else np.zeros(stat.shape, dtype=bool))
    return out


def wf_estimate(values, params: WFParams | None = None, **kw) -> WFEstimate:
    p = params or WFParams(**kw)
    values = np.asarray(values)
    if values.ndim not in (1, 2):
        raise ValueError("wf_estimate handles 1D and 2D arrays")
    if not p.periodic and any(s < 4 * p.w for s in values.shape):
        raise WindowError(f"grid {values.shape} too small for window half-width {p.w} (needs >= {4 * p.w} per axis)")
    if p.periodic and any(s < 2 * p.w + 1 for s in values.shape):
        raise WindowError("window larger than the grid")
    n_dirs = 2 if values.ndim == 1 else p.n_dirs
    data = _strengths(values, p)
    peak = {c: float(np.max(stat[flags])) for c, (stat, flags) in data.items() if flags.any()}
    entries = {}
    for c, (stat, flags) in data.items():
        if not flags.any():
            continue
        keep = set()
        for b in np.flatnonzero(flags):
            s = stat[b]
            # direction maximum (2D only: adjacent buckets on the circle)
            if values.ndim == 2:
                nb = max(stat[(b - 1) % n_dirs], stat[(b + 1) % n_dirs])
                if s < (1 - p.tie_tol) * nb:
                    continue
            # position maximum: no stronger flag of any direction within one window
            ok = True
            for off in _neighbour_offsets(values.ndim, p.w):
                q = tuple(ci + oi for ci, oi in zip(c, off))
                if p.periodic:
                    q = tuple(qi % si for qi, si in zip(q, values.shape))
                if q in data and data[q][1].any() and peak[q] > s * (1 + p.tie_tol):
                    ok = False
                    break
            if ok:
                keep.add(int(b))
        if keep:
            entries[c] = frozenset(keep)
    return WFEstimate(values.shape, n_dirs, entries, p)


def _neighbour_offsets(dim: int, radius: int = 1):
    r = range(-radius, radius + 1)
    if dim == 1:
        return [(a,) for a in r if a != 0]
    return [(a, b) for a in r for b in r if (a, b) != (0, 0)]


def hormander_product_ok(wf1: WFEstimate, wf2: WFEstimate) -> bool:
    """False iff some shared point carries antipodal directions (k in wf1, -k in wf2)."""
    if wf1.shape != wf2.shape or wf1.n_dirs != wf2.n_dirs:
        raise ValueError("wave front estimates have different layouts")
    half = wf1.n_dirs // 2
    for pt, d1 in wf1.entries.items():
        d2 = wf2.entries.get(pt)
        if not d2:
            continue
        if any((b + half) % wf1.n_dirs in d2 for b in d1):
            return False
    return True


def direction_vector(b: int, n_dirs: int) -> np.ndarray:
    """Unit covector (k_first_axis, k_second_axis) of a bucket."""
    a = 2 * np.pi * b / n_dirs
    return np.array([np.cos(a), np.sin(a)])


def microcausal_check(kernel_values, params: WFParams | None = None, tol: float = 1e-9):
    """Flag covector pairs (k1, k2) of a kernel K(t1, t2) lying both in the closed
    forward cone (k1, k2 >= 0) or both in the closed backward cone (k1, k2 <= 0)."""
    from .reports import Report

    wf = wf_estimate(np.asarray(kernel_values), params)
    bad = []
    for pt, dirs in wf.entries.items():
        for b in dirs:
            k1, k2 = direction_vector(b, wf.n_dirs)
            if (k1 >= -tol and k2 >= -tol) or (k1 <= tol and k2 <= tol):
                bad.append((pt, b))
    rep = Report("microcausal")
    rep.add("no_same_cone_pairs", len(bad) == 0, 0, "no flagged covector pair lies entirely in one closed cone",
            mode="true", violations=len(bad))
    rep.info["flagged_points"] = len(wf)
    return rep


def lightlike_buckets(n_dirs: int) -> set:
    """Buckets whose direction is within half a bucket of a null covector (|k_t| = |k_x|)."""
    out = set()
    for b in range(n_dirs):
        k = direction_vector(b, n_dirs)
        ang = np.arctan2(abs(k[1]), abs(k[0]))
        if abs(ang - np.pi / 4) <= np.pi / n_dirs + 1e-12:
            out.add(b)
    return out


def propagation_check(wf: WFEstimate, slack: int = 1):
    """Flagged directions of a propagator lie within `slack` buckets of lightlike ones."""
    from .reports import Report

    null = lightlike_buckets(wf.n_dirs)
    near = {(b + s) % wf.n_dirs for b in null for s in range(-slack, slack + 1)}
    stray = sorted({b for dirs in wf.entries.values() for b in dirs} - near)
    rep = Report("propagation")
    rep.add("flags_present", len(wf) > 0, 0, "the propagator is flagged somewhere", mode="true")
    rep.add("directions_near_lightlike", not stray, 0, "every flagged direction is within the slack of a null bucket",
            mode="true", stray=stray)
    return rep


# -- calibration inputs -----------------------------------------------------------


def _rolloff(frac, lo: float = 0.6, hi: float = 0.9):
    """Smooth spectral weight: 1 below lo, 0 above hi (fractions of Nyquist).

    A hard cutoff would leave slowly decaying ringing at the cutoff frequency
    far from the singular point."""
    u = np.clip((np.abs(frac) - lo) / (hi - lo), 0.0, 1.0)
    return np.cos(0.5 * np.pi * u) ** 2


def vacuum_line(n_samples: int = 64, n_modes: int = 256, L: float = 2 * np.pi, mass: float = 1.0,
                centre: int | None = None) -> np.ndarray:
    """Vacuum two-point function restricted to the timelike line x = y, sampled in t - s.

    Mode sum over the circle sampled with dt = 0.9 L / n_modes, so the sampled
    frequencies reach 0.9 of the Nyquist frequency; a smooth roll-off above 0.6
    keeps the truncation from ringing.
    """
    dt = 0.9 * L / n_modes
    c = n_samples // 2 if centre is None else centre
    tau = (np.arange(n_samples) - c) * dt
    k = 2 * np.pi * np.fft.fftfreq(n_modes, d=L / n_modes)
    omega = np.sqrt(k**2 + mass**2)
    amp = _rolloff(omega * dt / np.pi) / (2 * omega)
    return np.sum(amp[:, None] * np.exp(-1j * omega[:, None] * tau[None, :]), axis=0) / L


def vacuum_kernel(n: int = 48, n_modes: int = 256, L: float = 2 * np.pi, mass: float = 1.0) -> np.ndarray:
    """W(t1, t2) at coinciding spatial points, as a 2D array over (t1, t2)."""
    line = vacuum_line(2 * n - 1, n_modes, L, mass, centre=n - 1)
    i = np.arange(n)
    return line[(i[:, None] - i[None, :]) + n - 1]


def oscillatory_family(shape=(32, 32), centre: int | None = None, n_freq: int | None = None) -> np.ndarray:
    """sum_{k > 0} exp(i k (t - t0)) along t, constant in x: a one-sided singular family."""
    Nt, Nx = shape
    t0 = Nt // 2 if centre is None else centre
    K = (9 * Nt) // 20 if n_freq is None else n_freq
    t = np.arange(Nt) - t0
    k = np.arange(1, K + 1)
    amp = _rolloff(2 * k / Nt)
    line = np.sum(amp[:, None] * np.exp(2j * np.pi * k[:, None] * t[None, :] / Nt), axis=0)
    return np.repeat(line[:, None], Nx, axis=1)


def same_cone_kernel(n: int = 48) -> np.ndarray:
    """exp(i w (t1 + t2))-type kernel summed over w > 0: singular with both covectors co-oriented."""
    i = np.arange(n)
    s = (i[:, None] + i[None, :]) - (n - 1)
    k = np.arange(1, (9 * n) // 20 + 1)
    amp = _rolloff(2 * k / n)
    return np.sum(amp[:, None, None] * np.exp(2j * np.pi * k[:, None, None] * s[None] / n), axis=0)


def delta(shape, point) -> np.ndarray:
    v = np.zeros(shape)
    v[tuple(point)] = 1.0
    return v


def gaussian(shape, centre, sigma: float = 3.0, amplitude: float = 1.0) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
    r2 = sum((g - c) ** 2 for g, c in zip(grids, centre))
    return amplitude * np.exp(-r2 / (2 * sigma**2))
