"""Correlation-weighted Gram motion-style loss, content and temporal terms.

Feature maps are plain ``(channels, positions)`` float arrays. Inside the
default optimizer the "layer responses" are pyramid subbands: per scale,
one row per orientation holding wrapped phase (what gets optimized) or
amplitude (what feeds the appearance correlation). Any other feature
extractor producing ``(N, M)`` arrays can be plugged in.

The weighted Gram is ``G[i, j] = sum_k K[k] F[i, k] F[j, k]``, symmetric in
``i, j``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, StructureError, UsageError
from .pyramid import PyramidSpec, decompose, reconstruct, split_channels


def _as_map(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise StructureError(f"{name} must be a non-empty (channels, positions) array, got {x.shape}")
    return x


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise StructureError(f"{what}: shape {a.shape} != {b.shape}")


def correlation(C, D):
    """Per-position cosine similarity of two feature maps across channels.

    Columns with zero norm in either map get weight 0.
    """
    C = _as_map(C, "C")
    D = _as_map(D, "D")
    _same_shape(C, D, "correlation")
    num = np.sum(C * D, axis=0)
    den = np.sqrt(np.sum(C * C, axis=0)) * np.sqrt(np.sum(D * D, axis=0))
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, num / safe, 0.0)


def weighted_gram(F, K):
    F = _as_map(F, "F")
    K = np.asarray(K, dtype=np.float64)
    if K.shape != (F.shape[1],):
        raise StructureError(f"correlation map length {K.shape} != positions {F.shape[1]}")
    return (F * K) @ F.T


def _per_scale_K(K, n):
    if isinstance(K, (list, tuple)):
        if len(K) != n:
            raise StructureError(f"{len(K)} correlation maps for {n} scales")
        return list(K)
    return [K] * n


def _outer_weights(outer, K, N):
    if outer is None:
        return np.ones(N)
    if isinstance(outer, str):
        if outer == "none":
            return np.ones(N)
        if outer == "mean":
            return np.full(N, float(np.mean(K)))
        raise UsageError(f"unknown outer weighting {outer!r}")
    w = np.asarray(outer, dtype=np.float64)
    if w.shape != (N,):
        raise StructureError(f"outer weights length {w.shape} != channels {N}")
    return w


def style_loss(F, P, K, outer=None):
    """Motion-style loss summed over scales, with its gradient.

    ``F`` and ``P`` are lists (one per scale) of feature maps for the generated
    image and the video frame. ``K`` is one correlation map shared by all
    scales or a list with one per scale. ``outer`` selects the column weight
    ``w_j`` on the squared Gram difference: ``None`` (all ones), ``"mean"``
    (mean of K) or an explicit length-N array.

    Returns ``(loss, grads)`` where ``grads[s]`` is dL/dF[s].
    """
    if len(F) != len(P):
        raise StructureError(f"{len(F)} generated scales vs {len(P)} target scales")
    Ks = _per_scale_K(K, len(F))
    loss = 0.0
    grads = []
    for f, p, k in zip(F, P, Ks):
        f = _as_map(f, "F")
        p = _as_map(p, "P")
        _same_shape(f, p, "style_loss")
        N, M = f.shape
        k = np.asarray(k, dtype=np.float64)
        diff = weighted_gram(f, k) - weighted_gram(p, k)
        w = _outer_weights(outer, k, N)
        c = 1.0 / (N * N * M * M)
        loss += c * float(np.sum(w[None, :] * diff**2))
        E = 2 * c * diff * w[None, :]
        grads.append((E + E.T) @ (f * k))
    return loss, grads


def content_loss(F, C):
    F = _as_map(F, "F")
    C = _as_map(C, "C")
    _same_shape(F, C, "content_loss")
    n = F.size
    r = F - C
    return float(np.sum(r * r) / n), 2 * r / n


def temporal_loss(G_t, G_prev):
    """Squared change of generated features between consecutive frames."""
    G_t = _as_map(G_t, "G_t")
    G_prev = _as_map(G_prev, "G_prev")
    _same_shape(G_t, G_prev, "temporal_loss")
    n = G_t.size
    r = G_t - G_prev
    return float(np.sum(r * r) / n), 2 * r / n


def phase_features(pyr):
    """Per-scale ``(K, M_s)`` wrapped-phase feature maps of a pyramid."""
    return [np.stack([np.angle(b).ravel() for b in row]) for row in pyr.bands]


def amplitude_features(pyr):
    return [np.stack([np.abs(b).ravel() for b in row]) for row in pyr.bands]


@dataclass
class LossWeights:
    style: float = 1.0
    content: float = 1.0
    temporal: float = 0.0


@dataclass
class TransferResult:
    frame: np.ndarray
    trajectory: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "style", "content", "temporal", "total"])
            for row in self.trajectory:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


class TransferObjective:
    """Weighted sum of the three losses over per-scale phase features.

    The generated image keeps the amplitudes of ``init``; its phases are the
    optimization variables. Style and content targets come from
    ``video_frame`` (content may be overridden), the appearance correlation
    compares the amplitudes of ``init`` and ``video_frame`` per scale, and
    the temporal term (if ``previous`` is given) ties the phases to those of
    the previously generated frame.
    """

    def __init__(self, init, video_frame, weights, spec=None, content=None, previous=None,
                 use_correlation=True, outer=None):
        spec = spec or PyramidSpec.for_dims(np.shape(init)[:2])
        self.spec = spec
        self.weights = weights
        self.outer = outer
        self.pyr = decompose(split_channels(init)[0], spec)
        video = decompose(split_channels(video_frame)[0], spec)
        self.style_target = phase_features(video)
        content_pyr = video if content is None else decompose(split_channels(content)[0], spec)
        self.content_target = phase_features(content_pyr)
        self.previous = None
        if previous is not None:
            self.previous = phase_features(decompose(split_channels(previous)[0], spec))
        if use_correlation:
            A = amplitude_features(self.pyr)
            B = amplitude_features(video)
            self.K = [correlation(a, b) for a, b in zip(A, B)]
        else:
            self.K = [np.ones(f.shape[1]) for f in self.style_target]
        self.scale = [f.size for f in self.style_target]

    def initial(self):
        return phase_features(self.pyr)

    def __call__(self, F):
        wt = self.weights
        parts = {"style": 0.0, "content": 0.0, "temporal": 0.0}
        grads = [np.zeros_like(f) for f in F]
        if wt.style:
            ls, gs = style_loss(F, self.style_target, self.K, self.outer)
            parts["style"] = ls
            grads = [g + wt.style * d for g, d in zip(grads, gs)]
        if wt.content:
            for s, (f, c) in enumerate(zip(F, self.content_target)):
                lc, gc = content_loss(f, c)
                parts["content"] += lc
                grads[s] = grads[s] + wt.content * gc
        if wt.temporal and self.previous is not None:
            for s, (f, p) in enumerate(zip(F, self.previous)):
                lt, gt = temporal_loss(f, p)
                parts["temporal"] += lt
                grads[s] = grads[s] + wt.temporal * gt
        total = wt.style * parts["style"] + wt.content * parts["content"] + wt.temporal * parts["temporal"]
        return total, parts, grads

    def render(self, F):
        bands = []
        for row, f in zip(self.pyr.bands, F):
            bands.append([np.abs(b) * np.exp(1j * f[k].reshape(b.shape)) for k, b in enumerate(row)])
        return reconstruct(self.pyr.with_bands(bands))


def optimize_transfer(init, video_frame, weights=None, iters=200, step=0.25, spec=None,
                      content=None, previous=None, use_correlation=True, outer=None,
                      max_halvings=20):
    """Gradient descent on the phases of ``init`` toward the video frame's motion style.

    Each step moves along the negative gradient scaled per scale by the
    feature count (undoing the 1/(N*M) normalisation of the losses), halving
    the step until the total loss does not increase. Stops early once no
    halving helps.
    """
    if isinstance(weights, dict):
        weights = LossWeights(**weights)
    weights = weights or LossWeights()
    if iters < 0 or not np.isfinite(step) or step < 0:
        raise UsageError("iters and step must be non-negative")
    obj = TransferObjective(init, video_frame, weights, spec, content, previous, use_correlation, outer)
    F = obj.initial()
    total, parts, grads = obj(F)
    traj = [(0, parts["style"], parts["content"], parts["temporal"], total)]
    if not np.isfinite(total):
        raise DivergenceError("non-finite loss at iteration 0", 0)
    moved = False
    for it in range(1, iters + 1):
        if step == 0:
            break
        t = step
        accepted = False
        for _ in range(max_halvings + 1):
            cand = [f - t * n * g for f, n, g in zip(F, obj.scale, grads)]
            c_total, c_parts, c_grads = obj(cand)
            if not np.isfinite(c_total):
                raise DivergenceError(f"non-finite loss at iteration {it}", it)
            if c_total <= total:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        F, total, parts, grads = cand, c_total, c_parts, c_grads
        moved = True
        traj.append((it, parts["style"], parts["content"], parts["temporal"], total))
    frame = obj.render(F) if moved else reconstruct(obj.pyr)
    return TransferResult(frame, traj)
