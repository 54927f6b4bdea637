"""Accuracy metrics and the sampling machinery they share.

Sample-based metrics (AUC, KLD, JD, JSD) compare saliency at gaze points
(positives) against saliency at control points (negatives).  Map-based
metrics (NSS, PCC) look at the whole map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter1d

from .core import GroundTruthMap, _paste, check_map, gaussian_kernel, nearest_pixel
from .errors import DegenerateInputError, DimensionError, SamplingError, StructuralError

DEFAULT_BINS = 16


# ---------------------------------------------------------------- local maximum

@lru_cache(maxsize=32)
def _disk_rows(radius: float):
    """Half-widths of the integer disk ``di^2 + dj^2 <= radius^2``, one per row offset."""
    R = int(math.floor(radius))
    r2 = radius * radius
    rows = []
    for dj in range(-R, R + 1):
        w = int(math.floor(math.sqrt(max(r2 - dj * dj, 0.0))))
        while (w + 1) ** 2 + dj * dj <= r2:
            w += 1
        while w > 0 and w * w + dj * dj > r2:
            w -= 1
        rows.append((dj, w))
    return tuple(rows)


def _row_range_max(S: np.ndarray, half_widths) -> dict:
    """``{hw: max of S[:, c-hw:c+hw+1]}`` from one sparse table of power-of-two windows."""
    h, w = S.shape
    R = max(half_widths)
    P = np.full((h, w + 2 * R), -np.inf)
    P[:, R:R + w] = S
    tables = [P]
    while 2 ** len(tables) <= 2 * R + 1:
        prev, step = tables[-1], 2 ** (len(tables) - 1)
        tables.append(np.maximum(prev[:, :-step], prev[:, step:]))
    out = {}
    for hw in half_widths:
        if hw == 0:
            out[hw] = S
            continue
        j = (2 * hw + 1).bit_length() - 1
        T = tables[j]
        a, b = R - hw, R + hw - 2 ** j + 1
        out[hw] = np.maximum(T[:, a:a + w], T[:, b:b + w])
    return out


def disk_max_filter(values, radius_px: float) -> np.ndarray:
    """Maximum over the disk of radius ``radius_px`` around every pixel centre."""
    S = np.asarray(values, dtype=np.float64)
    if radius_px < 1:
        return S.copy()
    h, w = S.shape
    rows = _disk_rows(float(radius_px))
    rowmax = _row_range_max(S, sorted({hw for _, hw in rows}))
    out = np.full_like(S, -np.inf)
    for dj, hw in rows:
        if abs(dj) >= h:
            continue
        src = rowmax[hw]
        if dj >= 0:
            np.maximum(out[:h - dj], src[dj:], out=out[:h - dj])
        else:
            np.maximum(out[-dj:], src[:h + dj], out=out[-dj:])
    return out


def _disk_max_reference(values, radius_px: float) -> np.ndarray:
    # Row-wise scipy filters; kept to cross-check the sparse-table version.
    S = np.asarray(values, dtype=np.float64)
    if radius_px < 1:
        return S.copy()
    h = S.shape[0]
    out = np.full_like(S, -np.inf)
    for dj, hw in _disk_rows(float(radius_px)):
        if abs(dj) >= h:
            continue
        src = S if hw == 0 else maximum_filter1d(S, 2 * hw + 1, axis=1, mode="constant", cval=-np.inf)
        if dj >= 0:
            np.maximum(out[:h - dj], src[dj:], out=out[:h - dj])
        else:
            np.maximum(out[-dj:], src[:h + dj], out=out[-dj:])
    return out


def _check_points(points, width, height):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    bad = ~((pts[:, 0] >= 0) & (pts[:, 0] < width) & (pts[:, 1] >= 0) & (pts[:, 1] < height))
    if bad.any():
        x, y = pts[np.argmax(bad)]
        raise DimensionError(f"gaze point ({x}, {y}) outside {width}x{height} map")
    return pts


def gather_gaze_values(values, gaze, radius_px: float) -> np.ndarray:
    """Local maximum of the map around each continuous gaze point.

    The neighbourhood is every pixel whose centre is within ``radius_px`` of
    the point, plus the pixel containing the point (so ``radius_px=0`` is a
    plain lookup).
    """
    S = np.asarray(values, dtype=np.float64)
    if radius_px < 0:
        raise DimensionError("radius must be >= 0")
    h, w = S.shape
    pts = _check_points(gaze, w, h)
    near = nearest_pixel(pts, w, h)
    out = S[near[:, 1], near[:, 0]].copy()
    if radius_px == 0:
        return out
    r = float(radius_px)
    for k, (x, y) in enumerate(pts):
        c0, c1 = max(0, int(math.floor(x - r - 0.5))), min(w, int(math.ceil(x + r + 0.5)) + 1)
        r0, r1 = max(0, int(math.floor(y - r - 0.5))), min(h, int(math.ceil(y + r + 0.5)) + 1)
        dx = np.arange(c0, c1) + 0.5 - x
        dy = np.arange(r0, r1) + 0.5 - y
        inside = dy[:, None] ** 2 + dx[None, :] ** 2 <= r * r
        if inside.any():
            out[k] = max(out[k], S[r0:r1, c0:c1][inside].max())
    return out


# ---------------------------------------------------------------- AUC

def auc(positives, negatives) -> float:
    """Probability that a positive outranks a negative, ties counting one half.

    Equal to the trapezoidal area under the ROC curve over all thresholds.
    """
    pos = np.asarray(positives, dtype=np.float64).ravel()
    neg = np.sort(np.asarray(negatives, dtype=np.float64).ravel())
    if pos.size == 0 or neg.size == 0:
        raise DegenerateInputError("AUC needs nonempty positive and negative sets")
    lo = np.searchsorted(neg, pos, side="left")
    hi = np.searchsorted(neg, pos, side="right")
    wins = int(lo.sum())
    ties = int((hi - lo).sum())
    return (2 * wins + ties) / (2 * pos.size * neg.size)


def auc_batch(positives, negatives) -> np.ndarray:
    """AUC of one positive set against each row of ``negatives`` (``(B, m)``)."""
    pos = np.asarray(positives, dtype=np.float64).ravel()
    neg = np.asarray(negatives, dtype=np.float64)
    if pos.size == 0 or neg.shape[-1] == 0:
        raise DegenerateInputError("AUC needs nonempty positive and negative sets")
    wins = (pos[None, None, :] > neg[:, :, None]).sum(axis=(1, 2))
    ties = (pos[None, None, :] == neg[:, :, None]).sum(axis=(1, 2))
    return (2 * wins + ties) / (2 * pos.size * neg.shape[1])


# ---------------------------------------------------------------- histograms & divergences

@dataclass(frozen=True, eq=False)
class Histogram:
    """Probability mass over ``r`` equal bins on [0, 1]."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64).ravel()
        if m.size == 0 or (m < 0).any() or abs(m.sum() - 1.0) > 1e-12:
            raise StructuralError("histogram mass must be nonnegative and sum to 1")
        object.__setattr__(self, "mass", m)

    @property
    def r(self) -> int:
        return self.mass.size

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.r + 1)


def _mass(h):
    return h.mass if isinstance(h, Histogram) else np.asarray(h, dtype=np.float64)


def _log(x, base):
    return np.log(x) / math.log(base) if base != 2 else np.log2(x)


def kld(P, Q, b: float = 2) -> float:
    """Relative entropy ``sum P log_b(P/Q)``; ``inf`` when Q misses mass that P has."""
    p, q = _mass(P), _mass(Q)
    if p.shape != q.shape:
        raise StructuralError(f"bin mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if (q[support] == 0).any():
        return math.inf
    return float(np.sum(p[support] * _log(p[support] / q[support], b)))


def jd(P, Q, b: float = 2) -> float:
    """Symmetric (Jeffreys) divergence ``KLD(P||Q) + KLD(Q||P)``."""
    return kld(P, Q, b) + kld(Q, P, b)


def jsd(P, Q) -> float:
    """Jensen-Shannon divergence with base-2 logs, in [0, 1]."""
    p, q = _mass(P), _mass(Q)
    if p.shape != q.shape:
        raise StructuralError(f"bin mismatch: {p.shape} vs {q.shape}")
    r = (p + q) / 2
    v = (kld(p, r, 2) + kld(q, r, 2)) / 2
    return min(max(v, 0.0), 1.0)


def _bin_index(values, r):
    v = np.asarray(values, dtype=np.float64)
    if v.size and (not np.isfinite(v).all() or v.min() < 0 or v.max() > 1):
        raise StructuralError("histogram values must lie in [0, 1]; normalise the map first")
    return np.minimum(np.floor(v * r).astype(np.intp), r - 1)


def build_histograms(positives, negatives, r: int = DEFAULT_BINS):
    """Histograms of gaze and control saliency on shared bins over [0, 1].

    Bins are left-closed, the last one also contains 1.0.
    """
    pos, neg = np.ravel(positives), np.ravel(negatives)
    if pos.size == 0 or neg.size == 0:
        raise DegenerateInputError("histograms need nonempty sample sets")
    P = np.bincount(_bin_index(pos, r), minlength=r) / pos.size
    Q = np.bincount(_bin_index(neg, r), minlength=r) / neg.size
    return Histogram(P), Histogram(Q)


def histogram_batch(values, r: int = DEFAULT_BINS) -> np.ndarray:
    """Row-wise histogram masses of a ``(B, n)`` sample array."""
    v = np.asarray(values, dtype=np.float64)
    B, n = v.shape
    idx = _bin_index(v, r) + (np.arange(B) * r)[:, None]
    return np.bincount(idx.ravel(), minlength=B * r).reshape(B, r) / n


def jsd_batch(P, Q) -> np.ndarray:
    """JSD of paired rows of two ``(B, r)`` mass arrays."""
    R = (P + Q) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(P > 0, P * np.log2(np.where(P > 0, P, 1) / np.where(R > 0, R, 1)), 0.0)
        tq = np.where(Q > 0, Q * np.log2(np.where(Q > 0, Q, 1) / np.where(R > 0, R, 1)), 0.0)
    return np.clip((tp.sum(axis=1) + tq.sum(axis=1)) / 2, 0.0, 1.0)


def kld_batch(P, Q, b: float = 2) -> np.ndarray:
    out = np.empty(len(P))
    for i in range(len(P)):
        out[i] = kld(P[i], Q[i], b)
    return out


# ---------------------------------------------------------------- map-based metrics

def nss(values, gaze, radius_px: float = 0.0) -> float:
    """Mean of the z-scored map (sample SD, ``N - 1``) at the gaze points.

    Any finite map is accepted; the z-scoring absorbs offsets and scale.
    """
    S = check_map(values, nonnegative=False)
    sd = S.std(ddof=1) if S.size > 1 else 0.0
    if not sd > 0:
        raise DegenerateInputError("NSS undefined for a constant map")
    Z = (S - S.mean()) / sd
    return float(np.mean(gather_gaze_values(Z, gaze, radius_px)))


def pcc(S, G) -> float:
    """Pearson correlation between a saliency map and a ground-truth map."""
    s = np.asarray(S, dtype=np.float64)
    g = np.asarray(G.values if isinstance(G, GroundTruthMap) else G, dtype=np.float64)
    if s.shape != g.shape:
        raise DimensionError(f"shape mismatch {s.shape} vs {g.shape}")
    ds = s - s.mean()
    dg = g - g.mean()
    vs, vg = float(np.dot(ds.ravel(), ds.ravel())), float(np.dot(dg.ravel(), dg.ravel()))
    if not (vs > 0 and vg > 0):
        raise DegenerateInputError("PCC undefined for a constant map")
    r = float(np.dot(ds.ravel(), dg.ravel())) / math.sqrt(vs * vg)
    return min(max(r, -1.0), 1.0)


def build_ground_truth(points, dims, sigma_px: float) -> GroundTruthMap:
    """Unit impulses at the gaze pixels convolved with a Gaussian of ``sigma_px``."""
    w, h = int(dims[0]), int(dims[1])
    out = np.zeros((h, w))
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts):
        pts = _check_points(pts, w, h)
        k = gaussian_kernel(sigma_px)
        for col, row in nearest_pixel(pts, w, h):
            _paste(out, k, int(col), int(row), np.add)
    return GroundTruthMap(out, len(pts))


# ---------------------------------------------------------------- control sampling

class _UniformSampler:
    name = "uniform"

    def __init__(self, dims):
        self.w, self.h = int(dims[0]), int(dims[1])
        self.size = self.w * self.h

    def draw(self, rng, shape):
        return rng.integers(0, self.size, size=shape)

    def available(self, excluded) -> int:
        return self.size - len(excluded)


class _DensitySampler:
    name = "centerbias"

    def __init__(self, density):
        d = np.asarray(density, dtype=np.float64)
        self.h, self.w = d.shape
        self.size = d.size
        self.positive = d.ravel() > 0
        cdf = np.cumsum(d.ravel())
        self.cdf = cdf / cdf[-1]

    def draw(self, rng, shape):
        idx = np.searchsorted(self.cdf, rng.random(size=shape), side="right")
        return np.minimum(idx, self.size - 1)

    def available(self, excluded) -> int:
        return int(self.positive.sum()) - int(self.positive[list(excluded)].sum()) if excluded else int(self.positive.sum())


@lru_cache(maxsize=16)
def _sampler_for_model(model, dims):
    return _DensitySampler(model.density(dims))


def make_sampler(sampler, dims):
    """``"uniform"``, a center-bias model (anything with ``density(dims)``) or a density array."""
    if isinstance(sampler, (_UniformSampler, _DensitySampler)):
        return sampler
    if isinstance(sampler, str):
        if sampler != "uniform":
            raise SamplingError(f"unknown sampler {sampler!r}")
        return _UniformSampler(dims)
    if hasattr(sampler, "density"):
        return _sampler_for_model(sampler, (int(dims[0]), int(dims[1])))
    return _DensitySampler(sampler)


def sample_controls(dims, n: int, sampler="uniform", seed=0, exclusion=None, replicates=None) -> np.ndarray:
    """Draw control pixels i.i.d. from ``sampler``, redrawing any that hit an excluded pixel.

    Returns integer ``(col, row)`` pairs, shape ``(n, 2)`` or ``(replicates, n, 2)``.
    ``seed`` may be an int or anything :func:`numpy.random.default_rng` accepts.
    """
    if n < 1:
        raise SamplingError("need n >= 1 control points")
    s = make_sampler(sampler, dims)
    w = s.w
    excl = set()
    if exclusion is not None and len(exclusion):
        ex = nearest_pixel(exclusion, s.w, s.h)
        excl = set((ex[:, 1] * w + ex[:, 0]).tolist())
    if s.available(excl) < n:
        raise SamplingError(f"only {s.available(excl)} eligible pixels for {n} controls")
    rng = np.random.default_rng(seed)
    shape = (n,) if replicates is None else (int(replicates), n)
    flat = s.draw(rng, shape)
    if excl:
        ex_arr = np.fromiter(excl, dtype=np.int64)
        bad = np.isin(flat, ex_arr)
        while bad.any():
            flat[bad] = s.draw(rng, int(bad.sum()))
            bad = np.isin(flat, ex_arr)
    return np.stack([flat % w, flat // w], axis=-1)


def values_at_pixels(values, pixels) -> np.ndarray:
    """Map values at integer ``(col, row)`` pixel coordinates of any leading shape."""
    px = np.asarray(pixels)
    return np.asarray(values)[px[..., 1], px[..., 0]]


# ---------------------------------------------------------------- registry

# Taxonomy: symmetric, bounded, center-biased, applicability, input.
METRICS = {
    "auc":   dict(symmetric=True,  bounded=True,  center_biased=True,  applicability="general",  input="location"),
    "auc_p": dict(symmetric=True,  bounded=True,  center_biased=False, applicability="saliency", input="location"),
    "kld":   dict(symmetric=False, bounded=False, center_biased=True,  applicability="general",  input="distribution"),
    "jd":    dict(symmetric=True,  bounded=False, center_biased=True,  applicability="general",  input="distribution"),
    "jsd":   dict(symmetric=True,  bounded=True,  center_biased=True,  applicability="general",  input="distribution"),
    "jsd_p": dict(symmetric=True,  bounded=True,  center_biased=False, applicability="saliency", input="distribution"),
    "nss":   dict(symmetric=True,  bounded=False, center_biased=True,  applicability="saliency", input="value"),
    "nss_p": dict(symmetric=True,  bounded=False, center_biased=False, applicability="saliency", input="value"),
    "pcc":   dict(symmetric=True,  bounded=True,  center_biased=True,  applicability="general",  input="distribution"),
}

DEFAULT_METRICS = ("auc", "auc_p", "jsd", "jsd_p", "nss", "nss_p", "pcc")
