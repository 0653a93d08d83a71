"""Phase-edit applications: frame prediction, magnification and motion transfer.

Every operation measures phase changes on luma and applies them to the
pyramid of each colour channel. Residual bands are never edited.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import StructureError, UsageError
from .motion import conj_phase, flow_from_phase, phase_delta, smooth_deltas
from .pyramid import PyramidSpec, decompose, merge_channels, reconstruct, split_channels


@dataclass(frozen=True)
class PredictionConfig:
    """Frame extrapolation settings.

    ``method="advect"`` (default) measures a flow field from the last two
    frames and moves every band of the newest frame along it:
    ``c * exp(-(u . grad) log c)``, whose imaginary part is the phase step
    ``-u . grad(phase)`` and whose real part carries the amplitude envelope
    along. It runs in ``substeps`` pieces with re-decomposition in between.
    A rollout keeps the velocity from the observed pair.

    ``method="delta"`` applies the raw per-pixel phase change between the two
    frames again (``c * exp(i delta)``); a rollout re-measures the change
    from its own predictions. Both methods copy residuals forward.

    ``clamp`` bounds the phase advance per (sub)step. With
    ``amplitude_extrapolation`` magnitudes change too, by at most a factor
    ``max_amplitude_ratio`` per step; without it only phase is advanced.
    """

    steps: int = 1
    delta_smoothing_radius: float = 0.0
    clamp: float = np.pi / 2
    amplitude_extrapolation: bool = True
    max_amplitude_ratio: float = 2.0
    method: str = "advect"
    substeps: int = 2

    def __post_init__(self):
        if int(self.steps) < 1:
            raise UsageError(f"steps must be >= 1, got {self.steps}")
        if self.delta_smoothing_radius < 0:
            raise UsageError("delta_smoothing_radius must be >= 0")
        if not (0 < self.clamp <= np.pi):
            raise UsageError(f"clamp must lie in (0, pi], got {self.clamp}")
        if not self.max_amplitude_ratio >= 1.0:
            raise UsageError("max_amplitude_ratio must be >= 1")
        if self.method not in ("advect", "delta"):
            raise UsageError(f"method must be 'advect' or 'delta', got {self.method!r}")
        if int(self.substeps) < 1:
            raise UsageError(f"substeps must be >= 1, got {self.substeps}")


@dataclass(frozen=True)
class TransferConfig:
    """Motion transfer settings.

    ``alpha`` scales the injected motion (1 is faithful, >1 magnifies, <0
    inverts). ``lambda_t`` sets exponential temporal smoothing of the injected
    motion in video transfer: ``s_t = (d_t + lambda_t * s_{t-1}) / (1 + lambda_t)``.

    ``method="advect"`` (default) turns each source step into a flow field
    and moves the target's bands by the accumulated displacement using the
    target's own phase and log-amplitude gradients, so an unrelated target
    moves by the source's displacement rather than its phase change.
    ``method="delta"`` adds the source's raw accumulated phase deltas to the
    target's bands. Source positions below ``amplitude_gate`` of a band's
    peak amplitude contribute no motion in either method.
    """

    alpha: float = 1.0
    amplitude_gate: float = 0.05
    lambda_t: float = 0.0
    correlation_layer: int = 1
    use_correlation_weighting: bool = False
    method: str = "advect"

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise UsageError("alpha must be finite")
        if not (0.0 <= self.amplitude_gate <= 1.0):
            raise UsageError(f"amplitude_gate must lie in [0, 1], got {self.amplitude_gate}")
        if not (np.isfinite(self.lambda_t) and self.lambda_t >= 0):
            raise UsageError("lambda_t must be finite and >= 0")
        if int(self.correlation_layer) < 0:
            raise UsageError("correlation_layer must be >= 0")
        if self.method not in ("advect", "delta"):
            raise UsageError(f"method must be 'advect' or 'delta', got {self.method!r}")


def pmap(fn, items, threads=1):
    """Order-preserving map, optionally on a thread pool."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


class _Decomposed:
    """Luma pyramid plus one pyramid per colour channel of a frame."""

    def __init__(self, frame, spec):
        luma, planes = split_channels(frame)
        self.luma = decompose(luma, spec)
        self.planes = [self.luma] if len(planes) == 1 else [decompose(p, spec) for p in planes]


def _decompose_all(frames, spec, threads):
    return pmap(lambda f: _Decomposed(f, spec), frames, threads)


def _check_same_dims(frames):
    shapes = {np.shape(f) for f in frames}
    if len(shapes) != 1:
        raise StructureError(f"frames have differing shapes: {sorted(shapes)}")


def _apply_phase(dec, shifts, gains=None, residuals=None):
    """Rotate every channel's bands by ``exp(i * shifts[s][k])`` and reconstruct.

    ``gains`` optionally rescales band magnitudes as well. ``residuals`` is
    an optional ``(weight, ref)`` pair: residuals become
    ``ref + weight * (own - ref)`` per channel.
    """
    planes = []
    for c, pyr in enumerate(dec.planes):
        if gains is None:
            edited = pyr.map_bands(lambda s, k, b: b * np.exp(1j * shifts[s][k]))
        else:
            edited = pyr.map_bands(lambda s, k, b: b * gains[s][k] * np.exp(1j * shifts[s][k]))
        if residuals is not None:
            w, ref = residuals
            r = ref.planes[c]
            edited.highpass = r.highpass + w * (pyr.highpass - r.highpass)
            edited.lowpass = r.lowpass + w * (pyr.lowpass - r.lowpass)
        planes.append(reconstruct(edited))
    return np.clip(merge_channels(planes), 0.0, 1.0)


def predict_next(frames, cfg=None, spec=None):
    """Extrapolate one frame ahead from the last two frames."""
    cfg = cfg or PredictionConfig()
    if len(frames) < 2:
        raise UsageError("prediction needs two frames")
    spec = spec or PyramidSpec.for_dims(np.shape(frames[-1])[:2])
    prev, last = frames[-2], frames[-1]
    _check_same_dims([prev, last])
    return predict_rollout([prev, last], replace(cfg, steps=1), spec)[0]


def _smoothed_delta(a, b, cfg):
    return smooth_deltas(phase_delta(a.luma, b.luma), cfg.delta_smoothing_radius)


def _extrapolate(a, b, cfg):
    delta = _smoothed_delta(a, b, cfg)
    steps = [[np.clip(d, -cfg.clamp, cfg.clamp) for d in row] for row in delta.deltas]
    gains = None
    if cfg.amplitude_extrapolation:
        r = cfg.max_amplitude_ratio
        gains = []
        for prow, nrow in zip(a.luma.bands, b.luma.bands):
            row = []
            for p, n in zip(prow, nrow):
                ap, an = np.abs(p), np.abs(n)
                safe = np.where(ap > 0, ap, 1.0)
                row.append(np.where(ap > 0, np.clip(an / safe, 1.0 / r, r), 1.0))
            gains.append(row)
    return _apply_phase(b, steps, gains)


def _velocity(a, b, cfg):
    delta = _smoothed_delta(a, b, cfg)
    f = flow_from_phase(delta, a.luma, b.luma)
    return np.where(f.valid, f.u, 0.0), np.where(f.valid, f.v, 0.0)


def _resize(a, shape):
    if a.shape == tuple(shape):
        return a
    zoom = (shape[0] / a.shape[0], shape[1] / a.shape[1])
    return ndimage.zoom(a, zoom, order=1, mode="grid-wrap", grid_mode=True)


def _log_gradient(c):
    """Spatial gradient of ``log c`` in band pixels, via exact spectral derivatives.

    The real part is the log-amplitude slope and the imaginary part the
    local frequency. Near-zero coefficients get a floored denominator.
    """
    h, w = c.shape
    spec = np.fft.fft2(c)
    wx = 2 * np.pi * np.fft.fftfreq(w)[None, :]
    wy = 2 * np.pi * np.fft.fftfreq(h)[:, None]
    power = np.abs(c) ** 2
    denom = np.maximum(power, 1e-6 * power.max() + 1e-300)
    gx = np.fft.ifft2(spec * (1j * wx)) * np.conj(c) / denom
    gy = np.fft.ifft2(spec * (1j * wy)) * np.conj(c) / denom
    return gx, gy


def _move_bands(pyr, u, v, clamp=None, log_r=None, amplitude=True, grads=None):
    """First-order move of every band of ``pyr`` by ``(u, v)`` full-res pixels.

    Each coefficient becomes ``c * exp(-(u . grad) log c)``; ``clamp`` bounds
    the phase part and ``log_r`` the log-amplitude part (None: unbounded).
    """
    dims = pyr.source_dims

    def move(s, k, b):
        bh, bw = b.shape
        ub = _resize(u, b.shape) * (bw / dims[1])
        vb = _resize(v, b.shape) * (bh / dims[0])
        gx, gy = grads[s][k] if grads is not None else _log_gradient(b)
        phase = -(gx.imag * ub + gy.imag * vb)
        if clamp is not None:
            phase = np.clip(phase, -clamp, clamp)
        step = 1j * phase
        if amplitude:
            gain = -(gx.real * ub + gy.real * vb)
            step = step + (gain if log_r is None else np.clip(gain, -log_r, log_r))
        return b * np.exp(step)

    return pyr.map_bands(move)


def _advect(dec, u, v, cfg, spec):
    """Move every channel of ``dec`` along the flow ``(u, v)`` by one frame."""
    n = int(cfg.substeps)
    log_r = np.log(cfg.max_amplitude_ratio) / n
    planes = []
    for pyr in dec.planes:
        for _ in range(n):
            plane = reconstruct(_move_bands(pyr, u / n, v / n, cfg.clamp, log_r, cfg.amplitude_extrapolation))
            pyr = decompose(plane, spec)
        planes.append(plane)
    return np.clip(merge_channels(planes), 0.0, 1.0)


def predict_rollout(frames, cfg=None, spec=None):
    """Predict ``cfg.steps`` frames past the last two, re-decomposing each prediction."""
    cfg = cfg or PredictionConfig()
    if len(frames) < 2:
        raise UsageError("prediction needs two frames")
    spec = spec or PyramidSpec.for_dims(np.shape(frames[-1])[:2])
    _check_same_dims(frames[-2:])
    a, b = _Decomposed(frames[-2], spec), _Decomposed(frames[-1], spec)
    if cfg.method == "advect":
        u, v = _velocity(a, b, cfg)
    out = []
    for _ in range(cfg.steps):
        nxt = _advect(b, u, v, cfg, spec) if cfg.method == "advect" else _extrapolate(a, b, cfg)
        out.append(nxt)
        a, b = b, _Decomposed(nxt, spec)
    return out


def temporal_bandpass(signal, low, high):
    """Ideal FFT bandpass along axis 0; ``low``/``high`` in cycles per frame."""
    n = signal.shape[0]
    freqs = np.abs(np.fft.fftfreq(n))
    keep = (freqs >= low) & (freqs <= high)
    shape = (n,) + (1,) * (signal.ndim - 1)
    return np.fft.ifft(np.fft.fft(signal, axis=0) * keep.reshape(shape), axis=0).real


def _log_ratio(ref, cur):
    safe = (ref > 0) & (cur > 0)
    return np.where(safe, np.log(np.where(safe, cur, 1.0) / np.where(safe, ref, 1.0)), 0.0)


def magnify(frames, alpha, band=None, spec=None, threads=1, amplitude=True, max_amplitude_ratio=2.0):
    """Scale motion relative to the first frame by ``alpha``.

    Each band coefficient gets phase ``phi_t + (alpha - 1) * delta_t`` where
    ``delta_t`` is the wrapped phase change from frame 0 (optionally
    bandpassed over time by ``band = (low, high)`` in cycles/frame). Without
    a bandpass this equals ``phi_0 + alpha * delta_t``.

    With ``amplitude`` the log magnitude is treated the same way, so the
    amplitude envelope moves with the phase. The gain never takes a band
    further from its current magnitude than ``max_amplitude_ratio`` or the
    observed change, whichever is larger; for ``0 <= alpha <= 1`` this is a
    plain geometric interpolation. Residuals cannot be steered, so they are
    blended toward frame 0 with weight ``clip(alpha, 0, 1)``: ``alpha = 0``
    returns frame 0 and ``alpha >= 1`` keeps each frame's own residuals.
    """
    if len(frames) < 2:
        raise UsageError("magnify needs at least two frames")
    if not np.isfinite(alpha):
        raise UsageError("alpha must be finite")
    if not max_amplitude_ratio >= 1.0:
        raise UsageError("max_amplitude_ratio must be >= 1")
    _check_same_dims(frames)
    spec = spec or PyramidSpec.for_dims(np.shape(frames[0])[:2])
    decs = _decompose_all(frames, spec, threads)
    ref = decs[0].luma
    T = len(frames)
    cap = np.log(max_amplitude_ratio)
    # shifts[s][k] and logs[s][k] have shape (T, h_s, w_s)
    shifts, logs = [], []
    for s in range(spec.scales):
        srow, lrow = [], []
        for k in range(spec.orientations):
            d = np.stack([conj_phase(ref.bands[s][k], dec.luma.bands[s][k]) for dec in decs])
            if band is not None:
                d = temporal_bandpass(d, *band)
            srow.append((alpha - 1.0) * d)
            if amplitude:
                a0 = np.abs(ref.bands[s][k])
                L = np.stack([_log_ratio(a0, np.abs(dec.luma.bands[s][k])) for dec in decs])
                bound = np.maximum(np.abs(L), cap)
                if band is not None:
                    L = temporal_bandpass(L, *band)
                lrow.append(np.exp(np.clip((alpha - 1.0) * L, -bound, bound)))
        shifts.append(srow)
        logs.append(lrow)

    def one(t):
        sh = [[shifts[s][k][t] for k in range(spec.orientations)] for s in range(spec.scales)]
        gains = None
        if amplitude:
            gains = [[logs[s][k][t] for k in range(spec.orientations)] for s in range(spec.scales)]
        w = min(max(alpha, 0.0), 1.0)
        res = None if w == 1.0 else (w, decs[0])
        return _apply_phase(decs[t], sh, gains, res)

    return pmap(one, range(T), threads)


def resample(frame, dims):
    """Bilinear resize of a 2-D or HxWxC frame to ``dims = (h, w)``."""
    frame = np.asarray(frame, dtype=np.float64)
    h, w = frame.shape[:2]
    if (h, w) == tuple(dims):
        return frame
    zoom = (dims[0] / h, dims[1] / w) + (1,) * (frame.ndim - 2)
    return ndimage.zoom(frame, zoom, order=1, mode="nearest", grid_mode=True)


def affine_warp(frame, matrix):
    """Resample ``frame`` so output pixel (x, y) reads source ``matrix @ (x, y, 1)``.

    Cubic spline, edges clamped. ``matrix`` is 2x3 in (x, y) order.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (2, 3) or not np.all(np.isfinite(m)):
        raise UsageError(f"affine matrix must be 2x3 and finite, got shape {m.shape}")
    # to (row, col) order
    lin = np.array([[m[1, 1], m[1, 0]], [m[0, 1], m[0, 0]]])
    off = np.array([m[1, 2], m[0, 2]])
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        return ndimage.affine_transform(frame, lin, off, order=3, mode="nearest")
    return np.stack([ndimage.affine_transform(frame[..., c], lin, off, order=3, mode="nearest")
                     for c in range(frame.shape[2])], axis=-1)


def _resize_nn(a, dims):
    bh, bw = a.shape
    rows = (np.arange(dims[0]) * bh) // dims[0]
    cols = (np.arange(dims[1]) * bw) // dims[1]
    return a[np.ix_(rows, cols)]


def pyramid_correlation(target, source, layer):
    """Positive part of the per-position correlation of two pyramids' amplitudes at one scale."""
    from .loss import correlation

    layer = min(int(layer), target.spec.scales - 1)
    C = np.stack([np.abs(b).ravel() for b in target.bands[layer]])
    D = np.stack([np.abs(b).ravel() for b in source.bands[layer]])
    K = correlation(C, D).reshape(target.bands[layer][0].shape)
    return np.clip(K, 0.0, 1.0)


def _gated_delta(prev, nxt, cfg, target=None):
    """Source phase change with low-amplitude positions zeroed, optionally correlation-weighted."""
    delta = phase_delta(prev, nxt)
    corr = None
    if cfg.use_correlation_weighting and target is not None:
        corr = pyramid_correlation(target, prev, cfg.correlation_layer)
    out = []
    for s, (drow, wrow) in enumerate(zip(delta.deltas, delta.weights)):
        row = []
        for d, w in zip(drow, wrow):
            amp = np.sqrt(w)
            gate = amp >= cfg.amplitude_gate * amp.max() if amp.max() > 0 else np.zeros(d.shape, bool)
            g = np.where(gate, d, 0.0)
            if corr is not None:
                g = g * _resize_nn(corr, d.shape)
            row.append(g)
        out.append(row)
    return out


_TRANSFER_LOG_RATIO = np.log(2.0)


def _source_flow(prev, nxt, cfg, target=None):
    """Source motion in full-res pixels from gated phase constraints, zero where invalid."""
    delta = phase_delta(prev, nxt)
    weights = []
    for row in delta.weights:
        wrow = []
        for w in row:
            amp = np.sqrt(w)
            wrow.append(np.where(amp >= cfg.amplitude_gate * amp.max(), w, 0.0))
        weights.append(wrow)
    f = flow_from_phase(replace(delta, weights=weights), prev, nxt)
    u, v = np.where(f.valid, f.u, 0.0), np.where(f.valid, f.v, 0.0)
    if cfg.use_correlation_weighting and target is not None:
        k = _resize(pyramid_correlation(target, prev, cfg.correlation_layer), u.shape)
        u, v = u * k, v * k
    return u, v


def _displace(dec, u, v, grads=None):
    planes = []
    for c, pyr in enumerate(dec.planes):
        g = grads[c] if grads is not None else None
        planes.append(reconstruct(_move_bands(pyr, u, v, log_r=_TRANSFER_LOG_RATIO, grads=g)))
    return np.clip(merge_channels(planes), 0.0, 1.0)


def _band_gradients(dec):
    return [[[_log_gradient(b) for b in row] for row in pyr.bands] for pyr in dec.planes]


def _smoothed_sum(steps, lam):
    """Running sum of exponentially smoothed steps (``lam = 0``: plain running sum)."""
    smooth, acc, out = None, None, []
    for step in steps:
        if smooth is None or lam == 0:
            smooth = step
        else:
            smooth = [(d + lam * p) / (1 + lam) for d, p in zip(step, smooth)]
        acc = list(smooth) if acc is None else [a + d for a, d in zip(acc, smooth)]
        out.append(acc)
    return out


def transfer_to_image(target, source, cfg=None, spec=None, threads=1):
    """Animate a still ``target`` with the phase motion of the ``source`` sequence.

    Returns ``len(source) - 1`` frames; frame ``t`` carries the accumulated
    source motion from step 0 to step ``t + 1``.
    """
    cfg = cfg or TransferConfig()
    if len(source) < 2:
        raise UsageError("transfer needs a source sequence of at least two frames")
    target = np.asarray(target, dtype=np.float64)
    dims = target.shape[:2]
    spec = spec or PyramidSpec.for_dims(dims)
    source = [resample(f, dims) for f in source]
    tgt = _Decomposed(target, spec)
    src = pmap(lambda f: decompose(split_channels(f)[0], spec), source, threads)
    if cfg.method == "advect":
        flows = pmap(lambda t: _source_flow(src[t], src[t + 1], cfg, tgt.luma), range(len(src) - 1), threads)
        grads = _band_gradients(tgt)
        moves = [(cfg.alpha * u, cfg.alpha * v) for u, v in _smoothed_sum(flows, 0.0)]
        return pmap(lambda m: _displace(tgt, *m, grads), moves, threads)
    steps = pmap(lambda t: _gated_delta(src[t], src[t + 1], cfg, tgt.luma), range(len(src) - 1), threads)
    acc = [[np.zeros(b.shape) for b in row] for row in tgt.luma.bands]
    shifts = []
    for step in steps:
        acc = [[a + d for a, d in zip(arow, drow)] for arow, drow in zip(acc, step)]
        shifts.append([[cfg.alpha * a for a in row] for row in acc])
    return pmap(lambda sh: _apply_phase(tgt, sh), shifts, threads)


def transfer_to_video(target, source, cfg=None, spec=None, threads=1):
    """Add the source sequence's phase motion (times ``alpha``) to the target sequence.

    Sequences are truncated to the shorter length; output frame 0 is the
    reconstructed first target frame.
    """
    cfg = cfg or TransferConfig()
    if len(target) < 2 or len(source) < 2:
        raise UsageError("video transfer needs at least two frames in each sequence")
    n = min(len(target), len(source))
    target = [np.asarray(f, dtype=np.float64) for f in target[:n]]
    _check_same_dims(target)
    dims = target[0].shape[:2]
    spec = spec or PyramidSpec.for_dims(dims)
    source = [resample(f, dims) for f in source[:n]]
    tgt = _decompose_all(target, spec, threads)
    src = pmap(lambda f: decompose(split_channels(f)[0], spec), source, threads)
    if cfg.method == "advect":
        flows = pmap(lambda t: _source_flow(src[t], src[t + 1], cfg, tgt[t].luma), range(n - 1), threads)
        zero = np.zeros(dims)
        moves = [(zero, zero)] + [(cfg.alpha * u, cfg.alpha * v) for u, v in _smoothed_sum(flows, cfg.lambda_t)]
        return pmap(lambda t: _displace(tgt[t], *moves[t]), range(n), threads)
    steps = pmap(lambda t: _gated_delta(src[t], src[t + 1], cfg, tgt[t].luma), range(n - 1), threads)

    lam = cfg.lambda_t
    smooth = None
    acc = [[np.zeros(b.shape) for b in row] for row in tgt[0].luma.bands]
    shifts = [[[np.zeros(b.shape) for b in row] for row in tgt[0].luma.bands]]
    for step in steps:
        if smooth is None or lam == 0:
            smooth = step
        else:
            smooth = [[(d + lam * p) / (1 + lam) for d, p in zip(drow, prow)]
                      for drow, prow in zip(step, smooth)]
        acc = [[a + d for a, d in zip(arow, drow)] for arow, drow in zip(acc, smooth)]
        shifts.append([[cfg.alpha * a for a in row] for row in acc])
    return pmap(lambda t: _apply_phase(tgt[t], shifts[t]), range(n), threads)
