"""Temporal phase differences and phase-based local flow.

Sign convention: content translating by ``+d`` between two frames changes a
band coefficient's phase by about ``-omega . d``. :func:`flow_from_phase`
negates this, so flow reads "pixels move by (u, v) from prev to next".
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import DataError, StructureError, UsageError
from .pyramid import Pyramid, PyramidSpec, make_filter_bank

EPS_AMP = 0.05
KAPPA_MAX = 1e4


def wrap_angle(x):
    """Reduce angles to the half-open interval [-pi, pi)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("wrap_angle got non-finite input")
    out = np.mod(x + np.pi, 2 * np.pi) - np.pi
    # mod can round up to exactly 2*pi for tiny negative inputs
    out = np.where(out >= np.pi, out - 2 * np.pi, out)
    return out if out.ndim else float(out)


def conj_phase(a, b):
    """Wrapped ``arg(b * conj(a))`` computed in one step."""
    # explicit real products: identical inputs give an exactly zero imaginary part
    re = b.real * a.real + b.imag * a.imag
    im = b.imag * a.real - b.real * a.imag
    d = np.arctan2(im, re)
    return np.where(d >= np.pi, -np.pi, d)


@dataclass
class PhaseDelta:
    """Per-band wrapped phase change and amplitude-product weights."""

    spec: PyramidSpec
    deltas: list
    weights: list
    source_dims: tuple

    def __neg__(self):
        return PhaseDelta(self.spec, [[wrap_angle(-d) for d in row] for row in self.deltas],
                          self.weights, self.source_dims)


@dataclass
class FlowField:
    """Dense displacement field in full-resolution pixels per frame."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.u.shape

    @classmethod
    def constant(cls, shape, u=0.0, v=0.0):
        return cls(np.full(shape, float(u)), np.full(shape, float(v)), np.ones(shape, dtype=bool))


def _check_pair(prev, nxt):
    if prev.spec != nxt.spec:
        raise StructureError(f"pyramid specs differ: {prev.spec} vs {nxt.spec}")
    if tuple(prev.source_dims) != tuple(nxt.source_dims):
        raise StructureError(f"pyramid dims differ: {prev.source_dims} vs {nxt.source_dims}")


def phase_delta(prev, nxt):
    """Wrapped phase change from ``prev`` to ``nxt`` for every band."""
    _check_pair(prev, nxt)
    deltas, weights = [], []
    for a_row, b_row in zip(prev.bands, nxt.bands):
        deltas.append([conj_phase(a, b) for a, b in zip(a_row, b_row)])
        weights.append([np.abs(a) * np.abs(b) for a, b in zip(a_row, b_row)])
    return PhaseDelta(prev.spec, deltas, weights, tuple(prev.source_dims))


@lru_cache(maxsize=64)
def _centroids(spec, dims):
    bank = make_filter_bank(spec, dims)
    h, w = dims
    wx = 2 * np.pi * np.fft.fftfreq(w)[None, :]
    wy = 2 * np.pi * np.fft.fftfreq(h)[:, None]
    out = {}
    for s in range(spec.scales):
        for k in range(spec.orientations):
            p = bank.effective_mask(s, k) ** 2
            tot = p.sum()
            out[s, k] = (float((p * wx).sum() / tot), float((p * wy).sum() / tot))
    return out


def band_center_frequency(spec, scale, orientation, dims=(128, 128)):
    """Energy-weighted centroid ``(omega_x, omega_y)`` of a band, in rad per full-res pixel."""
    if not (0 <= scale < spec.scales and 0 <= orientation < spec.orientations):
        raise UsageError(f"band ({scale},{orientation}) outside spec {spec}")
    return _centroids(spec, (int(dims[0]), int(dims[1])))[scale, orientation]


def _upsample_nn(a, dims):
    """Nearest-neighbour upsampling of a band grid to full resolution."""
    h, w = dims
    bh, bw = a.shape
    rows = (np.arange(h) * bh) // h
    cols = (np.arange(w) * bw) // w
    return a[np.ix_(rows, cols)]


def _local_frequency(prev_band, next_band, dims):
    """Spatial phase gradient of a band in rad per full-res pixel.

    Forward and backward conjugate products of both frames are summed before
    taking the angle, so no unwrapping is needed.
    """
    bh, bw = prev_band.shape
    fx = fy = 0
    for c in (prev_band, next_band):
        fx = fx + np.roll(c, -1, axis=1) * np.conj(c) + c * np.conj(np.roll(c, 1, axis=1))
        fy = fy + np.roll(c, -1, axis=0) * np.conj(c) + c * np.conj(np.roll(c, 1, axis=0))
    return np.angle(fx) * bw / dims[1], np.angle(fy) * bh / dims[0]


def smooth_deltas(delta, radius):
    """Amplitude-weighted Gaussian smoothing of each band's deltas (circular)."""
    if radius <= 0:
        return delta
    out = []
    for s, (drow, wrow) in enumerate(zip(delta.deltas, delta.weights)):
        sigma = radius / 2**s
        row = []
        for d, w in zip(drow, wrow):
            z = w * np.exp(1j * d)
            zs = ndimage.gaussian_filter(z.real, sigma, mode="wrap") + 1j * ndimage.gaussian_filter(
                z.imag, sigma, mode="wrap")
            row.append(np.where(np.abs(zs) > 0, np.angle(zs), 0.0))
        out.append(row)
    return PhaseDelta(delta.spec, out, delta.weights, delta.source_dims)


def flow_from_phase(delta, prev=None, nxt=None, eps_amp=EPS_AMP, kappa_max=KAPPA_MAX,
                    gradient="local"):
    """Weighted least-squares flow from per-band phase constraints.

    Each band contributes ``omega . (u, v) = -delta`` at every full-res pixel,
    weighted by its amplitude product. Bands are processed coarse to fine:
    a finer band's delta is unwrapped around the value predicted by the flow
    accumulated from coarser scales, which keeps fast motions from aliasing.

    ``gradient="local"`` uses the measured spatial phase gradient of each band
    (needs ``prev`` and ``nxt`` pyramids); ``"center"`` uses the band centroid
    frequency everywhere.

    Pixels whose total weight is below ``eps_amp`` of the maximum, or whose
    2x2 normal matrix has condition number above ``kappa_max``, are invalid
    and carry zero flow.
    """
    if gradient not in ("local", "center"):
        raise UsageError(f"gradient must be 'local' or 'center', got {gradient!r}")
    if gradient == "local" and (prev is None or nxt is None):
        gradient = "center"
    dims = tuple(delta.source_dims)
    spec = delta.spec
    u = np.zeros(dims)
    v = np.zeros(dims)
    axx, axy, ayy = np.zeros(dims), np.zeros(dims), np.zeros(dims)
    bx, by = np.zeros(dims), np.zeros(dims)
    total = np.zeros(dims)
    valid = np.zeros(dims, dtype=bool)
    for s in reversed(range(spec.scales)):
        for k in range(spec.orientations):
            w = delta.weights[s][k]
            wmax = w.max()
            if not wmax > 0:
                continue
            w = np.where(w >= eps_amp * wmax, w, 0.0)
            if gradient == "local":
                ox, oy = _local_frequency(prev.bands[s][k], nxt.bands[s][k], dims)
                ox, oy = _upsample_nn(ox, dims), _upsample_nn(oy, dims)
            else:
                cx, cy = band_center_frequency(spec, s, k, dims)
                ox, oy = np.full(dims, cx), np.full(dims, cy)
            d = _upsample_nn(delta.deltas[s][k], dims)
            w = _upsample_nn(w, dims)
            pred = -(ox * u + oy * v)
            d = pred + wrap_angle(d - pred)
            axx += w * ox * ox
            axy += w * ox * oy
            ayy += w * oy * oy
            bx -= w * ox * d
            by -= w * oy * d
            total += w
        u, v, valid = _solve(axx, axy, ayy, bx, by, total, eps_amp, kappa_max)
    return FlowField(u, v, valid)


def _solve(axx, axy, ayy, bx, by, total, eps_amp, kappa_max):
    det = axx * ayy - axy * axy
    tr = axx + ayy
    disc = np.sqrt(np.maximum((axx - ayy) ** 2 + 4 * axy * axy, 0.0))
    lmax = 0.5 * (tr + disc)
    lmin = 0.5 * (tr - disc)
    tmax = total.max() if total.size else 0.0
    valid = (total > 0) & (total >= eps_amp * tmax) & (lmin > 0) & (lmax <= kappa_max * lmin)
    safe = np.where(valid, det, 1.0)
    u = np.where(valid, (ayy * bx - axy * by) / safe, 0.0)
    v = np.where(valid, (axx * by - axy * bx) / safe, 0.0)
    return u, v, valid


def estimate_flow(prev_frame, next_frame, spec=None, **kwargs):
    """Convenience wrapper: decompose two frames and return their phase flow."""
    from .pyramid import decompose, split_channels

    a = decompose(split_channels(prev_frame)[0], spec)
    b = decompose(split_channels(next_frame)[0], spec)
    smoothing = kwargs.pop("smoothing_radius", 0)
    return flow_from_phase(smooth_deltas(phase_delta(a, b), smoothing), a, b, **kwargs)
