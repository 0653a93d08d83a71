"""Binary pyramid/flow dumps, image and frame-directory I/O.

``PHPYR1`` layout (little endian)::

    b"PHPYR1\\0"
    u32 width, u32 height, u8 channels, u8 scales, u8 orientations, u8 precision
    per channel, scale-major / orientation-minor:
        u32 w, u32 h, w*h interleaved (re, im) samples
    per channel:
        highpass: u32 w, u32 h, w*h real samples
        lowpass:  u32 w, u32 h, w*h real samples

``precision`` 0 stores float64 and 1 stores float32. ``PHFLO1`` is
``b"PHFLO1\\0"``, u32 width, u32 height, then per pixel ``f32 u, f32 v, u8 valid``.
"""

import os
import struct

import cv2
import numpy as np

from .errors import FormatError, PhaseMotionError, StructureError, UsageError
from .motion import FlowField
from .pyramid import Pyramid, PyramidSpec, level_dims

PYR_MAGIC = b"PHPYR1\0"
FLOW_MAGIC = b"PHFLO1\0"
FRAME_EXTS = (".png", ".pgm", ".ppm", ".pnm")
_PYR_HEADER = struct.Struct("<IIBBBB")
_DIMS = struct.Struct("<II")
_FLOW_DTYPE = np.dtype([("u", "<f4"), ("v", "<f4"), ("valid", "u1")])


def _dtype(precision):
    if precision not in (0, 1):
        raise FormatError(f"precision must be 0 (f64) or 1 (f32), got {precision}")
    return np.dtype("<f8") if precision == 0 else np.dtype("<f4")


def encode_pyramids(pyramids, precision=0):
    """Serialize per-channel pyramids (a list, all from the same spec and dims)."""
    if not pyramids:
        raise StructureError("no pyramids to write")
    spec = pyramids[0].spec
    dims = tuple(pyramids[0].source_dims)
    for p in pyramids[1:]:
        if p.spec != spec or tuple(p.source_dims) != dims:
            raise StructureError("all channel pyramids must share spec and dims")
    dt = _dtype(precision)
    h, w = dims
    out = [PYR_MAGIC, _PYR_HEADER.pack(w, h, len(pyramids), spec.scales, spec.orientations, precision)]
    for p in pyramids:
        for _, _, b in p.iter_bands():
            bh, bw = b.shape
            inter = np.empty((bh, bw, 2), dtype=dt)
            inter[..., 0] = b.real
            inter[..., 1] = b.imag
            out += [_DIMS.pack(bw, bh), inter.tobytes()]
    for p in pyramids:
        for r in (p.highpass, p.lowpass):
            rh, rw = r.shape
            out += [_DIMS.pack(rw, rh), np.ascontiguousarray(r, dtype=dt).tobytes()]
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated file: wanted {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st):
        return st.unpack(self.take(st.size))


def decode_pyramids(data):
    """Inverse of :func:`encode_pyramids`; returns ``(pyramids, precision)``."""
    r = _Reader(data)
    if r.take(len(PYR_MAGIC)) != PYR_MAGIC:
        raise FormatError("not a PHPYR1 file (bad magic)")
    w, h, channels, S, K, precision = r.unpack(_PYR_HEADER)
    dt = _dtype(precision)
    if channels < 1 or S < 1 or K < 2:
        raise FormatError(f"bad header: channels={channels} scales={S} orientations={K}")
    expected = [level_dims((h, w), s) for s in range(S + 1)]
    coarsest = min(expected[S - 1])
    try:
        spec = PyramidSpec(S, K, min(16, coarsest))
    except PhaseMotionError as exc:
        raise FormatError(f"bad header: {exc}") from exc

    def block(shape, complex_):
        bw, bh = r.unpack(_DIMS)
        if (bh, bw) != shape:
            raise FormatError(f"block is {bw}x{bh}, expected {shape[1]}x{shape[0]}")
        n = bh * bw * (2 if complex_ else 1)
        a = np.frombuffer(r.take(n * dt.itemsize), dtype=dt).astype(np.float64)
        if complex_:
            a = a.reshape(bh, bw, 2)
            return a[..., 0] + 1j * a[..., 1]
        return a.reshape(bh, bw)

    all_bands = []
    for _ in range(channels):
        all_bands.append([[block(expected[s], True) for _ in range(K)] for s in range(S)])
    pyramids = []
    for c in range(channels):
        hp = block((h, w), False)
        lp = block(expected[S], False)
        pyramids.append(Pyramid(spec, all_bands[c], hp, lp, (h, w)))
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after pyramid data")
    return pyramids, precision


def write_pyramids(path, pyramids, precision=0):
    with open(path, "wb") as fh:
        fh.write(encode_pyramids(pyramids, precision))


def read_pyramids(path):
    with open(path, "rb") as fh:
        return decode_pyramids(fh.read())


def encode_flow(flow):
    h, w = flow.shape
    rec = np.empty((h, w), dtype=_FLOW_DTYPE)
    rec["u"] = np.where(flow.valid, flow.u, 0.0)
    rec["v"] = np.where(flow.valid, flow.v, 0.0)
    rec["valid"] = flow.valid
    return FLOW_MAGIC + _DIMS.pack(w, h) + rec.tobytes()


def decode_flow(data):
    r = _Reader(data)
    if r.take(len(FLOW_MAGIC)) != FLOW_MAGIC:
        raise FormatError("not a PHFLO1 file (bad magic)")
    w, h = r.unpack(_DIMS)
    rec = np.frombuffer(r.take(w * h * _FLOW_DTYPE.itemsize), dtype=_FLOW_DTYPE).reshape(h, w)
    if r.pos != len(data):
        raise FormatError("trailing bytes after flow data")
    if np.any(rec["valid"] > 1):
        raise FormatError("validity flags must be 0 or 1")
    return FlowField(rec["u"].astype(np.float64), rec["v"].astype(np.float64), rec["valid"].astype(bool))


def write_flow(path, flow):
    with open(path, "wb") as fh:
        fh.write(encode_flow(flow))


def read_flow(path):
    with open(path, "rb") as fh:
        return decode_flow(fh.read())


def read_image(path):
    """Load an 8/16-bit PNG or PGM/PPM as float64 in [0, 1] (HxW or HxWx3)."""
    if not os.path.isfile(path):
        raise UsageError(f"no such image: {path}")
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"cannot decode image {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported sample type {img.dtype} in {path}")
    img = img.astype(np.float64) / scale
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[..., :3]
        if img.shape[2] == 3:
            img = img[..., ::-1]
        elif img.shape[2] == 1:
            img = img[..., 0]
        else:
            raise FormatError(f"unsupported channel count {img.shape[2]} in {path}")
    return np.ascontiguousarray(img)


def write_image(path, frame, depth=8):
    if depth not in (8, 16):
        raise UsageError(f"output depth must be 8 or 16, got {depth}")
    frame = np.asarray(frame, dtype=np.float64)
    peak = 255 if depth == 8 else 65535
    q = np.round(np.clip(frame, 0.0, 1.0) * peak).astype(np.uint8 if depth == 8 else np.uint16)
    if q.ndim == 3:
        q = q[..., ::-1]
    if not cv2.imwrite(path, q):
        raise FormatError(f"failed to write image {path}")


def list_frames(directory):
    if not os.path.isdir(directory):
        raise UsageError(f"frame directory does not exist: {directory}")
    manifest = os.path.join(directory, "manifest.txt")
    if os.path.isfile(manifest):
        with open(manifest) as fh:
            names = [ln.strip() for ln in fh if ln.strip()]
        for n in names:
            if not os.path.isfile(os.path.join(directory, n)):
                raise FormatError(f"manifest lists missing file {n}")
    else:
        names = sorted(n for n in os.listdir(directory) if n.lower().endswith(FRAME_EXTS))
    if not names:
        raise UsageError(f"no frames found in {directory}")
    return [os.path.join(directory, n) for n in names]


def read_frames(directory):
    frames = []
    shape = None
    for path in list_frames(directory):
        f = read_image(path)
        if shape is None:
            shape = f.shape
        elif f.shape != shape:
            raise StructureError(f"{os.path.basename(path)} has shape {f.shape}, expected {shape}")
        frames.append(f)
    return frames


def write_frames(directory, frames, depth=8):
    """Write ``%06d.png`` files plus ``manifest.txt``; returns the file paths."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, f in enumerate(frames):
        name = f"{i:06d}.png"
        write_image(os.path.join(directory, name), f, depth)
        names.append(name)
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write("".join(n + "\n" for n in names))
    return [os.path.join(directory, n) for n in names]


def _color_wheel():
    # Middlebury flow colour wheel
    seg = [("RY", 15), ("YG", 6), ("GC", 4), ("CB", 11), ("BM", 13), ("MR", 6)]
    rows = []
    for name, n in seg:
        ramp = np.arange(n) / n
        up, down = ramp, 1 - ramp
        one, zero = np.ones(n), np.zeros(n)
        rows.append({
            "RY": (one, up, zero), "YG": (down, one, zero), "GC": (zero, one, up),
            "CB": (zero, down, one), "BM": (up, zero, one), "MR": (one, zero, down),
        }[name])
    return np.concatenate([np.stack(r, axis=1) for r in rows])


def flow_to_color(flow, max_magnitude=None):
    """Render flow as an RGB float image with the standard colour wheel; invalid pixels black."""
    wheel = _color_wheel()
    ncols = len(wheel)
    u = np.where(flow.valid, flow.u, 0.0)
    v = np.where(flow.valid, flow.v, 0.0)
    mag = np.hypot(u, v)
    m = max_magnitude or (mag.max() if mag.max() > 0 else 1.0)
    u, v, mag = u / m, v / m, mag / m
    a = np.arctan2(-v, -u) / np.pi
    fk = (a + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = (fk - k0)[..., None]
    col = (1 - f) * wheel[k0] + f * wheel[k1]
    r = np.clip(mag, 0, 1)[..., None]
    col = np.where(r <= 1, 1 - r * (1 - col), col * 0.75)
    return np.where(flow.valid[..., None], col, 0.0)
