"""Synthetic sequences with exact ground-truth motion, and the metrics used to score them.

Translations and oscillations are realised with Fourier phase ramps on a
periodic texture, so sub-pixel ground truth carries no interpolation bias.
Integer translations use an exact circular roll. Rotation is the one kind
that needs spatial resampling (cubic spline).
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import StructureError, UsageError
from .motion import FlowField

KINDS = ("translate", "oscillate", "rotate", "static")
TEXTURES = ("noise", "sinusoid", "checker")
INTERIOR_MARGIN = 8


@dataclass(frozen=True)
class SynthSpec:
    """What to generate.

    ``velocity`` is px/frame for ``translate``; for ``oscillate`` it only sets
    the direction, with ``amplitude`` px peak and ``period`` frames.
    ``degrees`` is the rotation per frame about the image centre.
    """

    kind: str = "translate"
    texture: str = "noise"
    dims: tuple = (128, 128)
    frames: int = 5
    velocity: tuple = (1.0, 0.0)
    amplitude: float = 0.0
    period: float = 8.0
    degrees: float = 0.0
    seed: int = 0
    smooth: float = 1.5
    omega: tuple = (0.6, 0.0)
    checker: int = 8

    def validate(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown kind {self.kind!r}; choose from {KINDS}")
        if self.texture not in TEXTURES:
            raise UsageError(f"unknown texture {self.texture!r}; choose from {TEXTURES}")
        if self.frames < 1:
            raise UsageError("frames must be >= 1")
        h, w = self.dims
        if h < 1 or w < 1:
            raise UsageError(f"bad dims {self.dims}")
        nums = [*self.velocity, self.amplitude, self.period, self.degrees, self.smooth, *self.omega]
        if not all(np.isfinite(nums)):
            raise UsageError("synthetic parameters must be finite")
        if self.kind == "oscillate" and self.period <= 0:
            raise UsageError("period must be positive")
        if self.texture == "checker" and self.checker < 1:
            raise UsageError("checker size must be >= 1")


def make_texture(spec):
    h, w = spec.dims
    if spec.texture == "noise":
        rng = np.random.default_rng(spec.seed)
        base = rng.random((h, w))
        if spec.smooth > 0:
            base = ndimage.gaussian_filter(base, spec.smooth, mode="wrap")
    elif spec.texture == "sinusoid":
        y, x = np.mgrid[0:h, 0:w]
        base = np.cos(spec.omega[0] * x + spec.omega[1] * y)
    else:
        y, x = np.mgrid[0:h, 0:w]
        base = ((x // spec.checker + y // spec.checker) % 2).astype(float)
    lo, hi = base.min(), base.max()
    if hi - lo <= 0:
        return np.full((h, w), 0.5)
    return 0.1 + 0.8 * (base - lo) / (hi - lo)


def fourier_shift(frame, dx, dy):
    """Circularly translate ``frame`` by ``(dx, dy)`` px (content moves toward +x, +y)."""
    if float(dx).is_integer() and float(dy).is_integer():
        return np.roll(frame, (int(dy), int(dx)), axis=(0, 1))
    h, w = frame.shape
    wx = 2 * np.pi * np.fft.fftfreq(w)[None, :]
    wy = 2 * np.pi * np.fft.fftfreq(h)[:, None]
    return np.fft.ifft2(np.fft.fft2(frame) * np.exp(-1j * (wx * dx + wy * dy))).real


def _displacement(spec, t):
    vx, vy = spec.velocity
    if spec.kind == "translate":
        return vx * t, vy * t
    if spec.kind == "oscillate":
        n = np.hypot(vx, vy)
        ux, uy = (vx / n, vy / n) if n > 0 else (1.0, 0.0)
        a = spec.amplitude * np.sin(2 * np.pi * t / spec.period)
        return a * ux, a * uy
    return 0.0, 0.0


def _rotation_flow(dims, degrees):
    h, w = dims
    cy, cx = (h - 1) / 2, (w - 1) / 2
    y, x = np.mgrid[0:h, 0:w].astype(float)
    th = np.deg2rad(degrees)
    c, s = np.cos(th), np.sin(th)
    xr = c * (x - cx) - s * (y - cy) + cx
    yr = s * (x - cx) + c * (y - cy) + cy
    return xr - x, yr - y


def _rotate(frame, degrees):
    h, w = frame.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    th = np.deg2rad(degrees)
    c, s = np.cos(th), np.sin(th)
    # output (y, x) samples input at the inverse-rotated position
    mat = np.array([[c, -s], [s, c]])
    off = np.array([cy, cx]) - mat @ np.array([cy, cx])
    return ndimage.affine_transform(frame, mat, offset=off, order=3, mode="wrap")


def generate(spec):
    """Return ``(frames, flows)``; ``flows[t]`` is the true motion from frame t to t+1."""
    spec.validate()
    tex = make_texture(spec)
    frames, flows = [], []
    for t in range(spec.frames):
        if spec.kind == "rotate":
            frames.append(tex.copy() if t == 0 else _rotate(tex, spec.degrees * t))
        else:
            frames.append(fourier_shift(tex, *_displacement(spec, t)))
    for t in range(spec.frames - 1):
        if spec.kind == "rotate":
            # forward motion of the frame-t content; exact only at small angles
            du, dv = _rotation_flow(spec.dims, spec.degrees)
            flows.append(FlowField(du, dv, np.ones(spec.dims, dtype=bool)))
        else:
            x0, y0 = _displacement(spec, t)
            x1, y1 = _displacement(spec, t + 1)
            flows.append(FlowField.constant(spec.dims, x1 - x0, y1 - y0))
    return frames, flows


def _interior(a, margin):
    if margin <= 0:
        return a
    return a[margin:-margin, margin:-margin]


def _check_margin(shape, margin):
    if margin < 0 or 2 * margin >= min(shape[:2]):
        raise UsageError(f"margin {margin} too large for frame {shape}")


def psnr(a, b, interior_margin=INTERIOR_MARGIN, peak=1.0):
    """Peak signal-to-noise ratio in dB over the interior; ``inf`` for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise StructureError(f"psnr dims differ: {a.shape} vs {b.shape}")
    _check_margin(a.shape, interior_margin)
    mse = np.mean((_interior(a, interior_margin) - _interior(b, interior_margin)) ** 2)
    if mse == 0:
        return float("inf")
    return float(10 * np.log10(peak**2 / mse))


def mae(a, b, interior_margin=INTERIOR_MARGIN):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise StructureError(f"mae dims differ: {a.shape} vs {b.shape}")
    _check_margin(a.shape, interior_margin)
    return float(np.mean(np.abs(_interior(a, interior_margin) - _interior(b, interior_margin))))


def flow_error(est, gt, interior_margin=0):
    """Endpoint and per-component errors over pixels valid in both fields.

    Returns a dict with ``epe`` (mean endpoint error), ``mae`` (mean absolute
    component error) and ``valid_fraction``.
    """
    if est.shape != gt.shape:
        raise StructureError(f"flow dims differ: {est.shape} vs {gt.shape}")
    _check_margin(est.shape, interior_margin)
    m = _interior(est.valid & gt.valid, interior_margin)
    du = _interior(est.u - gt.u, interior_margin)[m]
    dv = _interior(est.v - gt.v, interior_margin)[m]
    if m.sum() == 0:
        return {"epe": float("nan"), "mae": float("nan"), "valid_fraction": 0.0}
    return {
        "epe": float(np.mean(np.hypot(du, dv))),
        "mae": float(np.mean(0.5 * (np.abs(du) + np.abs(dv)))),
        "valid_fraction": float(m.mean()),
    }
