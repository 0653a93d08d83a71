"""Complex steerable pyramid built in the Fourier domain.

The filter bank is polar separable: raised-cosine radial transitions in
log2 frequency times ``cos**(K-1)`` angular lobes restricted to a half
plane, so every band is analytic (complex) and the real input is recovered
as ``2 * Re`` of the band contributions plus the two real residuals.

Boundary handling is circular. Each level is downsampled by cropping its
spectrum, which is alias free because the lowpass mask vanishes outside the
kept window. Spectra are rescaled on cropping so that a sinusoid has the
same coefficient amplitude at every scale.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from .errors import DataError, FormatError, SizeError, StructureError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class PyramidSpec:
    """Pyramid geometry: ``scales`` octaves of ``orientations`` bands each.

    ``min_band`` is the smallest side length allowed for the coarsest
    oriented band.
    """

    scales: int = 4
    orientations: int = 4
    min_band: int = 16

    def __post_init__(self):
        if int(self.scales) < 1:
            raise SizeError(f"scales must be >= 1, got {self.scales}")
        if int(self.orientations) < 2:
            raise SizeError(f"orientations must be >= 2, got {self.orientations}")
        if int(self.min_band) < 1:
            raise SizeError(f"min_band must be >= 1, got {self.min_band}")

    @classmethod
    def for_dims(cls, dims, scales=4, orientations=4, min_band=16):
        """Default spec with ``scales`` reduced until the frame fits."""
        probe = cls(1, orientations, min_band)
        return cls(max(1, min(scales, probe.max_scales(dims))), orientations, min_band)

    def max_scales(self, dims):
        """Largest scale count whose coarsest band still has ``min_band`` px."""
        side = min(dims)
        s = 0
        while side // 2**s >= self.min_band:
            s += 1
        return s

    def check_dims(self, dims):
        h, w = dims
        if h < 32 or w < 32:
            raise SizeError(f"frame {w}x{h} below the 32x32 minimum")
        coarsest = min(h, w) // 2 ** (self.scales - 1)
        if coarsest < self.min_band:
            raise SizeError(
                f"frame {w}x{h} too small for {self.scales} scales: coarsest band "
                f"side {coarsest} < min_band {self.min_band}"
            )


def level_dims(dims, level):
    h, w = dims
    d = 2**level
    return (-(-h // d), -(-w // d))


def _freq_grid(dims):
    """Angular frequency grids (rad/px) in unshifted FFT order."""
    h, w = dims
    wy = 2 * np.pi * np.fft.fftfreq(h)
    wx = 2 * np.pi * np.fft.fftfreq(w)
    return np.meshgrid(wx, wy)


def _crop_index(n, m):
    """Indices of an ``n``-point FFT axis kept when cropping to ``m`` points."""
    pos = np.arange(0, (m - 1) // 2 + 1)
    neg = np.arange(n - m // 2, n)
    return np.concatenate([pos, neg])


def _mirror_index(n):
    return (-np.arange(n)) % n


def _transition(rn, start):
    """Complementary (lowpass, highpass) pair with transition over [start, 2*start].

    ``rn`` is radial frequency normalised so that 1 is Nyquist.
    """
    with np.errstate(divide="ignore"):
        t = np.clip(np.log2(np.maximum(rn, 1e-300) / start), 0.0, 1.0)
    lo = np.cos(0.5 * np.pi * t)
    hi = np.sin(0.5 * np.pi * t)
    return lo, hi


def angular_constant(k):
    """Normalizer making ``sum_k (alpha*cos^(K-1))^2`` equal 1 over orientations."""
    n = k - 1
    return np.sqrt(2.0 ** (2 * n) / (k * comb(2 * n, n)))


@dataclass(frozen=True)
class FilterBank:
    """Frequency-domain masks for one (spec, dims) pair.

    Per level ``s`` the masks live on that level's own FFT grid:
    ``band_radial[s]`` (highpass part of the level), ``lowpass[s]`` (passed to
    the next level) and ``angular[s][k]``. ``crop[s]`` holds the row/column
    indices, into the level ``s`` grid, of the level ``s + 1`` grid.
    """

    spec: PyramidSpec
    dims: tuple
    hi0: np.ndarray
    lo0: np.ndarray
    band_radial: list
    lowpass: list
    angular: list
    crop: list
    level_shapes: list

    def band_mask(self, s, k):
        return self.band_radial[s] * self.angular[s][k]

    def full_index(self, level):
        """Row and column indices of the level grid inside the full-res grid."""
        rows = np.arange(self.dims[0])
        cols = np.arange(self.dims[1])
        for j in range(level):
            rows = rows[self.crop[j][0]]
            cols = cols[self.crop[j][1]]
        return rows, cols

    def effective_mask(self, s, k=None):
        """Full-resolution mask of band ``(s, k)``; ``k=None`` gives the lowpass residual at ``s``."""
        out = np.zeros(self.dims)
        acc = self.lo0.copy()
        for j in range(s):
            acc = (acc * self.lowpass[j])[np.ix_(*self.crop[j])]
        mask = acc if k is None else acc * self.band_mask(s, k)
        rows, cols = self.full_index(s)
        out[np.ix_(rows, cols)] = mask
        return out

    def flatness(self):
        """Per-frequency energy sum of all masks, counting each band and its mirror.

        Equals 1 everywhere for a self-inverting (tight) real-input frame.
        """
        h, w = self.dims
        mr, mc = _mirror_index(h), _mirror_index(w)
        total = self.hi0**2 + self.effective_mask(self.spec.scales) ** 2
        for s in range(self.spec.scales):
            for k in range(self.spec.orientations):
                m = self.effective_mask(s, k)
                total = total + m**2 + m[np.ix_(mr, mc)] ** 2
        return total


@lru_cache(maxsize=32)
def _cached_bank(spec, dims):
    spec.check_dims(dims)
    K = spec.orientations
    alpha = angular_constant(K)
    wx, wy = _freq_grid(dims)
    rn = np.hypot(wx, wy) / np.pi
    lo0, hi0 = _transition(rn, 0.5)

    band_radial, lowpass, angular, crop, shapes = [], [], [], [], []
    shape = dims
    for s in range(spec.scales):
        shapes.append(shape)
        wx, wy = _freq_grid(shape)
        rn = np.hypot(wx, wy) / np.pi
        lo, hi = _transition(rn, 0.25)
        theta = np.arctan2(wy, wx)
        masks = []
        for k in range(K):
            c = np.cos(theta - np.pi * k / K)
            masks.append(np.where(c > 0, alpha * np.abs(c) ** (K - 1), 0.0))
        band_radial.append(hi)
        lowpass.append(lo)
        angular.append(masks)
        nxt = level_dims(dims, s + 1)
        crop.append((_crop_index(shape[0], nxt[0]), _crop_index(shape[1], nxt[1])))
        shape = nxt
    shapes.append(shape)

    arrays = [hi0, lo0, *band_radial, *lowpass, *[m for ms in angular for m in ms]]
    for a in arrays:
        a.flags.writeable = False
    return FilterBank(spec, dims, hi0, lo0, band_radial, lowpass, angular, crop, shapes)


def make_filter_bank(spec, dims):
    """Build (or fetch from cache) the frequency masks for ``dims = (height, width)``."""
    return _cached_bank(spec, (int(dims[0]), int(dims[1])))


@dataclass
class Pyramid:
    """Complex steerable decomposition of one single-channel frame.

    ``bands[s][k]`` is the complex subband at scale ``s`` (0 finest) and
    orientation ``k`` (centre angle ``pi*k/K``).
    """

    spec: PyramidSpec
    bands: list
    highpass: np.ndarray
    lowpass: np.ndarray
    source_dims: tuple
    bank: FilterBank = field(default=None, repr=False, compare=False)

    def band(self, s, k):
        return self.bands[s][k]

    def amplitude(self, s, k):
        return np.abs(self.bands[s][k])

    def phase(self, s, k):
        return np.angle(self.bands[s][k])

    def iter_bands(self):
        for s, row in enumerate(self.bands):
            for k, b in enumerate(row):
                yield s, k, b

    def with_bands(self, bands):
        """Copy sharing residuals but carrying new ``bands``."""
        return Pyramid(self.spec, bands, self.highpass, self.lowpass, self.source_dims, self.bank)

    def map_bands(self, fn):
        return self.with_bands([[fn(s, k, b) for k, b in enumerate(row)] for s, row in enumerate(self.bands)])


def _spectrum_ratio(small, big):
    return (small[0] * small[1]) / (big[0] * big[1])


def decompose(frame, spec=None):
    """Analyse a 2-D real frame into a :class:`Pyramid`."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise FormatError(f"decompose expects a single-channel 2-D frame, got shape {frame.shape}")
    spec = spec or PyramidSpec.for_dims(frame.shape)
    if not np.all(np.isfinite(frame)):
        raise DataError("frame contains non-finite samples")
    bank = make_filter_bank(spec, frame.shape)

    X = np.fft.fft2(frame)
    highpass = np.fft.ifft2(X * bank.hi0).real
    Xs = X * bank.lo0
    bands = []
    for s in range(spec.scales):
        radial = Xs * bank.band_radial[s]
        bands.append([np.fft.ifft2(radial * a) for a in bank.angular[s]])
        rows, cols = bank.crop[s]
        ratio = _spectrum_ratio(bank.level_shapes[s + 1], bank.level_shapes[s])
        Xs = (Xs * bank.lowpass[s])[np.ix_(rows, cols)] * ratio
    lowpass = np.fft.ifft2(Xs).real
    return Pyramid(spec, bands, highpass, lowpass, frame.shape, bank)


def _check_structure(pyr, bank):
    spec = pyr.spec
    if len(pyr.bands) != spec.scales:
        raise StructureError(f"pyramid has {len(pyr.bands)} scales, spec says {spec.scales}")
    for s, row in enumerate(pyr.bands):
        if len(row) != spec.orientations:
            raise StructureError(f"scale {s} has {len(row)} orientations, spec says {spec.orientations}")
        for k, b in enumerate(row):
            if b.shape != bank.level_shapes[s]:
                raise StructureError(f"band ({s},{k}) shape {b.shape} != {bank.level_shapes[s]}")
    if pyr.highpass.shape != tuple(pyr.source_dims):
        raise StructureError("highpass residual does not match source dims")
    if pyr.lowpass.shape != bank.level_shapes[spec.scales]:
        raise StructureError(f"lowpass residual shape {pyr.lowpass.shape} != {bank.level_shapes[spec.scales]}")


def reconstruct(pyr):
    """Synthesize the real frame from a (possibly edited) pyramid."""
    bank = make_filter_bank(pyr.spec, pyr.source_dims)
    _check_structure(pyr, bank)
    Y = np.fft.fft2(pyr.lowpass)
    for s in reversed(range(pyr.spec.scales)):
        shape = bank.level_shapes[s]
        rows, cols = bank.crop[s]
        up = np.zeros(shape, dtype=complex)
        ratio = _spectrum_ratio(bank.level_shapes[s + 1], shape)
        up[np.ix_(rows, cols)] = Y / ratio
        acc = np.zeros(shape, dtype=complex)
        for k in range(pyr.spec.orientations):
            acc += np.fft.fft2(pyr.bands[s][k]) * bank.angular[s][k]
        mr, mc = _mirror_index(shape[0]), _mirror_index(shape[1])
        # 2*Re(ifft(Z)) == ifft(Z + conj(Z(-w)))
        acc = acc + np.conj(acc[np.ix_(mr, mc)])
        Y = up * bank.lowpass[s] + acc * bank.band_radial[s]
    out = Y * bank.lo0 + np.fft.fft2(pyr.highpass) * bank.hi0
    return np.fft.ifft2(out).real


def split_channels(frame):
    """Return ``(luma, planes)`` where ``planes`` lists the per-channel 2-D arrays.

    3-channel frames use Rec. 601 luma; 1-channel frames are returned as is.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        return frame, [frame]
    if frame.ndim == 3 and frame.shape[2] == 1:
        return frame[..., 0], [frame[..., 0]]
    if frame.ndim == 3 and frame.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        luma = r * frame[..., 0] + g * frame[..., 1] + b * frame[..., 2]
        return luma, [frame[..., c] for c in range(3)]
    raise FormatError(f"unsupported frame shape {frame.shape}; expected 1 or 3 channels")


def merge_channels(planes):
    if len(planes) == 1:
        return planes[0]
    return np.stack(planes, axis=-1)
