"""Saliency models: two gaze-derived benchmarks and five compressed-domain models.

Every model yields a :class:`ModelOutput` whose maps are rendered lazily,
frame by frame, at map resolution.  Compressed-domain models work on the
block grid and are upsampled with :func:`cdsal.core.upsample_block_map`.

Defaults that are this toolkit's own choices (not taken from the original
models): PMES window 3x3 blocks x 3 frames with a 0.5 px motion threshold,
GAUS-CS decay 64 px with 9 DCT coefficients, OBDL smoothing over 3 frames,
and 4 px map smoothing.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import (FrameType, Viewing, ViewingGeometry, _paste, gaussian_blob,
                   minmax_normalize, pixels_per_degree, upsample_block_map)
from .errors import ConfigError, ParameterError

DEFAULT_SMOOTH = 4.0
BOTH = frozenset({FrameType.I, FrameType.P})
P_ONLY = frozenset({FrameType.P})


@dataclass
class ModelOutput:
    """Per-frame saliency maps of one model.

    ``frame_types`` lists the type of every frame of the sequence; frames
    whose type is not in ``coverage`` are declared unscored and
    :meth:`map` returns ``None`` for them.
    """

    model_id: str
    coverage: frozenset
    frame_types: tuple
    render: Callable[[int], np.ndarray]

    def scores(self, t: int) -> bool:
        return self.frame_types[t] in self.coverage

    def map(self, t: int) -> Optional[np.ndarray]:
        if not 0 <= t < len(self.frame_types):
            raise IndexError(t)
        return self.render(t) if self.scores(t) else None

    def __getitem__(self, t: int) -> np.ndarray:
        m = self.map(t)
        if m is None:
            raise KeyError(f"{self.model_id} does not score frame {t} ({self.frame_types[t].value})")
        return m

    def __len__(self):
        return len(self.frame_types)

    @property
    def scored_frames(self) -> list:
        return [t for t in range(len(self.frame_types)) if self.scores(t)]

    def maps(self):
        for t in self.scored_frames:
            yield t, self.render(t)


@dataclass(frozen=True)
class GlobalMotion:
    """Similarity motion ``(x, y) -> (a x - b y + tx, b x + a y + ty)``.

    ``fallback`` is set when too few blocks were available and the identity
    was returned instead of a fit.
    """

    a: float = 1.0
    b: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    fallback: bool = False

    def displacement(self, x, y):
        da = self.a - 1.0
        return da * x - self.b * y + self.tx, self.b * x + da * y + self.ty

    @property
    def is_identity(self) -> bool:
        return self.a == 1.0 and self.b == 0.0 and self.tx == 0.0 and self.ty == 0.0


def _default_dims(features):
    f = features[0]
    return f.grid_w * f.block_size, f.grid_h * f.block_size


def _frame_types(features):
    return tuple(f.frame_type for f in features)


def _block_output(model_id, features, dims, coverage, blocks_fn, smooth_sigma):
    dims = _default_dims(features) if dims is None else (int(dims[0]), int(dims[1]))

    def render(t):
        f = features[t]
        return upsample_block_map(blocks_fn(t), f.block_size, dims[0], dims[1], smooth_sigma)

    return ModelOutput(model_id, coverage, _frame_types(features), render)


def _sigma(geom, scale, sigma_px):
    if sigma_px is not None:
        if not sigma_px > 0:
            raise ParameterError("sigma_px must be positive")
        return float(sigma_px)
    return pixels_per_degree(geom) * scale


# ---------------------------------------------------------------- benchmarks

def model_gauss(dims, geom: Optional[ViewingGeometry] = None, scale: float = 1.0,
                sigma_px: Optional[float] = None) -> np.ndarray:
    """Content-independent 1-degree Gaussian at the frame centre.

    ``scale`` converts display pixels to map pixels (the manifest's
    ``gaze_to_map_scale``); ``sigma_px`` overrides the geometry.
    """
    w, h = int(dims[0]), int(dims[1])
    return gaussian_blob(w, h, (w / 2.0, h / 2.0), _sigma(geom, scale, sigma_px))


def io_map(points, dims, sigma_px: float) -> np.ndarray:
    """Max-combination of one Gaussian blob per point."""
    w, h = int(dims[0]), int(dims[1])
    out = np.zeros((h, w))
    for x, y in np.asarray(points, dtype=np.float64).reshape(-1, 2):
        np.maximum(out, gaussian_blob(w, h, (x, y), sigma_px), out=out)
    return out


def model_io(gaze, dims, geom: Optional[ViewingGeometry] = None, frame_types=None,
             viewing=Viewing.counterpart, scale: float = 1.0,
             sigma_px: Optional[float] = None) -> ModelOutput:
    """Intra-observer benchmark built from the other viewing of the same observers."""
    if not gaze.has_viewing(viewing):
        raise ConfigError(f"IO model needs {Viewing(viewing).value} gaze, none present")
    sigma = _sigma(geom, scale, sigma_px)
    if frame_types is None:
        frame_types = (FrameType.P,) * (gaze.max_frame + 1)

    def render(t):
        return io_map(gaze.points(t, viewing) * scale, dims, sigma)

    return ModelOutput("io", BOTH, tuple(FrameType(f) for f in frame_types), render)


# ---------------------------------------------------------------- motion magnitude

def mvmag_blocks(frame) -> np.ndarray:
    """Per-block motion magnitude in pixels."""
    mv = frame.mv_pixels()
    return np.hypot(mv[..., 0], mv[..., 1])


def model_mvmag(features, dims=None, smooth_sigma: float = DEFAULT_SMOOTH) -> ModelOutput:
    return _block_output("mvmag", features, dims, P_ONLY,
                         lambda t: mvmag_blocks(features[t]), smooth_sigma)


# ---------------------------------------------------------------- PMES-style

def _box_sum(a: np.ndarray, size: int) -> np.ndarray:
    """Sum over a ``size x size`` window on the last two axes, clipped at the border."""
    lo, hi = size // 2, size - 1 - size // 2
    pad = [(0, 0)] * (a.ndim - 2) + [(lo + 1, hi), (lo + 1, hi)]
    c = np.pad(a, pad).cumsum(axis=-2).cumsum(axis=-1)
    H, W = a.shape[-2:]
    s = (c[..., size:size + H, size:size + W] - c[..., 0:H, size:size + W]
         - c[..., size:size + H, 0:W] + c[..., 0:H, 0:W])
    return s


def _window_frames(features, t, window_t):
    ref = features[t]
    out = []
    for u in range(max(0, t - window_t + 1), t + 1):
        f = features[u]
        if f.frame_type is FrameType.P and (f.grid_w, f.grid_h) == (ref.grid_w, ref.grid_h):
            out.append(f)
    return out


def pmes_blocks(features, t: int, window_s: int = 3, window_t: int = 3, eps: float = 0.5) -> np.ndarray:
    """Mean motion magnitude times angular incoherence over a causal spatio-temporal window.

    Incoherence is ``1 - R`` with ``R`` the mean resultant length of the unit
    vectors of MVs longer than ``eps`` pixels.  Windows without such MVs score 0.
    """
    if window_s < 1 or window_t < 1:
        raise ParameterError("window_s and window_t must be >= 1")
    frames = _window_frames(features, t, window_t)
    mv = np.stack([f.mv_pixels() for f in frames])            # (T, gh, gw, 2)
    mag = np.hypot(mv[..., 0], mv[..., 1])
    moving = mag > eps
    safe = np.where(moving, mag, 1.0)
    ux = np.where(moving, mv[..., 0] / safe, 0.0)
    uy = np.where(moving, mv[..., 1] / safe, 0.0)
    n_all = _box_sum(np.ones_like(mag), window_s).sum(axis=0)
    sum_mag = _box_sum(mag, window_s).sum(axis=0)
    n_mov = _box_sum(moving.astype(np.float64), window_s).sum(axis=0)
    sx = _box_sum(ux, window_s).sum(axis=0)
    sy = _box_sum(uy, window_s).sum(axis=0)
    has = n_mov > 0.5
    R = np.where(has, np.hypot(sx, sy) / np.where(has, n_mov, 1.0), 1.0)
    incoherence = 1.0 - R
    incoherence[incoherence < 1e-9] = 0.0
    return np.where(has, sum_mag / n_all * incoherence, 0.0)


def model_pmes_style(features, dims=None, window_s: int = 3, window_t: int = 3,
                     eps: float = 0.5, smooth_sigma: float = DEFAULT_SMOOTH) -> ModelOutput:
    if window_s < 1 or window_t < 1:
        raise ParameterError("window_s and window_t must be >= 1")
    return _block_output("pmes", features, dims, P_ONLY,
                         lambda t: pmes_blocks(features, t, window_s, window_t, eps), smooth_sigma)


# ---------------------------------------------------------------- GAUS-CS-style

@lru_cache(maxsize=8)
def _distance_weights(grid_w, grid_h, block_size, decay):
    c = np.stack(np.meshgrid((np.arange(grid_w) + 0.5) * block_size,
                             (np.arange(grid_h) + 0.5) * block_size), axis=-1).reshape(-1, 2)
    wgt = np.exp(-cdist(c, c) / decay)
    np.fill_diagonal(wgt, 0.0)
    wgt.setflags(write=False)
    return wgt


def csdct_blocks(frame, decay: float = 64.0, k: int = 9, normalize: bool = True) -> np.ndarray:
    """DCT-feature contrast of every block against all others, damped by ``exp(-d / decay)``."""
    if not decay > 0:
        raise ParameterError("decay must be positive")
    feats = frame.dct_matrix(k).reshape(-1, k)
    wgt = _distance_weights(frame.grid_w, frame.grid_h, frame.block_size, float(decay))
    sal = (cdist(feats, feats) * wgt).sum(axis=1).reshape(frame.grid_h, frame.grid_w)
    return minmax_normalize(sal) if normalize else sal


def model_csdct_style(features, dims=None, decay: float = 64.0, k: int = 9,
                      smooth_sigma: float = DEFAULT_SMOOTH) -> ModelOutput:
    if not decay > 0:
        raise ParameterError("decay must be positive")
    return _block_output("csdct", features, dims, BOTH,
                         lambda t: csdct_blocks(features[t], decay, k), smooth_sigma)


# ---------------------------------------------------------------- OBDL-style

def obdl_blocks(features, t: int, temporal_smooth: int = 3, normalize: bool = True) -> np.ndarray:
    """Bits per block (per 16x16-equivalent area), causally averaged over P-frames."""
    if temporal_smooth < 1:
        raise ParameterError("temporal_smooth must be >= 1")
    frames = _window_frames(features, t, temporal_smooth)
    acc = np.mean([f.bits * (256.0 / f.block_size ** 2) for f in frames], axis=0)
    return minmax_normalize(acc) if normalize else acc


def model_obdl_style(features, dims=None, temporal_smooth: int = 3,
                     smooth_sigma: float = DEFAULT_SMOOTH) -> ModelOutput:
    if temporal_smooth < 1:
        raise ParameterError("temporal_smooth must be >= 1")
    p_frames = [f for f in features if f.frame_type is FrameType.P]
    if p_frames and all(not f.bits.any() for f in p_frames):
        warnings.warn("OBDL-style model: every P-frame has zero bits; maps will be all zero",
                      RuntimeWarning, stacklevel=2)
    return _block_output("obdl", features, dims, P_ONLY,
                         lambda t: obdl_blocks(features, t, temporal_smooth), smooth_sigma)


# ---------------------------------------------------------------- global motion

def block_centers(grid_w: int, grid_h: int, block_size: int):
    x = (np.arange(grid_w) + 0.5) * block_size
    y = (np.arange(grid_h) + 0.5) * block_size
    return np.meshgrid(x, y)


def fit_global_motion(mvf, block_size: int = 8, passes: int = 2, min_blocks: int = 4) -> GlobalMotion:
    """Least-squares similarity fit to a block displacement field (pixels).

    ``mvf`` is ``(grid_h, grid_w, 2)``.  After the initial fit, each of
    ``passes`` refits drops blocks whose residual exceeds twice the median
    residual of the blocks kept so far.
    """
    d = np.asarray(mvf, dtype=np.float64)
    gh, gw = d.shape[:2]
    X, Y = block_centers(gw, gh, block_size)
    x, y = X.ravel(), Y.ravel()
    dx, dy = d[..., 0].ravel(), d[..., 1].ravel()
    usable = np.isfinite(dx) & np.isfinite(dy)
    if usable.sum() < min_blocks:
        return GlobalMotion(fallback=True)
    n = x.size
    A = np.zeros((2 * n, 4))
    A[:n, 0], A[:n, 1], A[:n, 2] = x, -y, 1.0
    A[n:, 0], A[n:, 1], A[n:, 3] = y, x, 1.0
    rhs = np.concatenate([dx, dy])

    def solve(keep):
        rows = np.concatenate([keep, keep])
        p, *_ = np.linalg.lstsq(A[rows], rhs[rows], rcond=None)
        return p

    keep = usable.copy()
    p = solve(keep)
    for _ in range(passes):
        pred = A @ p
        res = np.hypot(rhs[:n] - pred[:n], rhs[n:] - pred[n:])
        thresh = max(2.0 * float(np.median(res[keep])), 1e-9)
        new_keep = usable & (res <= thresh)
        if new_keep.sum() < min_blocks or np.array_equal(new_keep, keep):
            break
        keep = new_keep
        p = solve(keep)
    return GlobalMotion(1.0 + p[0], p[1], p[2], p[3])


def gmc_residual(frame, tol: float = 1e-6):
    """Motion field with the fitted global motion removed, plus the fit itself.

    Residual components below ``tol`` pixels are set to zero so a perfectly
    compensated field is exactly zero.
    """
    mv = frame.mv_pixels()
    gm = fit_global_motion(mv, frame.block_size)
    if gm.is_identity:
        return mv, gm
    X, Y = block_centers(frame.grid_w, frame.grid_h, frame.block_size)
    px, py = gm.displacement(X, Y)
    res = np.stack([mv[..., 0] - px, mv[..., 1] - py], axis=-1)
    res[np.abs(res) < tol] = 0.0
    return res, gm


def gmc_mvmag_blocks(frame) -> np.ndarray:
    res, _ = gmc_residual(frame)
    return np.hypot(res[..., 0], res[..., 1])


def model_gmc_mvmag(features, dims=None, smooth_sigma: float = DEFAULT_SMOOTH) -> ModelOutput:
    return _block_output("gmc-mvmag", features, dims, P_ONLY,
                         lambda t: gmc_mvmag_blocks(features[t]), smooth_sigma)


# ---------------------------------------------------------------- registry

def _gauss_entry(bundle, sigma_px=None):
    dims = bundle.map_size
    m = model_gauss(dims, bundle.geometry, bundle.gaze_to_map_scale, sigma_px)
    m.setflags(write=False)
    return ModelOutput("gauss", BOTH, _frame_types(bundle.frames), lambda t: m)


def _io_entry(bundle, sigma_px=None, viewing="counterpart"):
    return model_io(bundle.gaze, bundle.map_size, bundle.geometry, _frame_types(bundle.frames),
                    viewing=viewing, scale=bundle.gaze_to_map_scale, sigma_px=sigma_px)


REGISTRY = {
    "gauss": _gauss_entry,
    "io": _io_entry,
    "mvmag": lambda b, **kw: model_mvmag(b.frames, b.map_size, **kw),
    "pmes": lambda b, **kw: model_pmes_style(b.frames, b.map_size, **kw),
    "csdct": lambda b, **kw: model_csdct_style(b.frames, b.map_size, **kw),
    "obdl": lambda b, **kw: model_obdl_style(b.frames, b.map_size, **kw),
    "gmc-mvmag": lambda b, **kw: model_gmc_mvmag(b.frames, b.map_size, **kw),
}


def build_model(model_id: str, bundle, **params) -> ModelOutput:
    """Instantiate a registered model on a :class:`~cdsal.ingest.SequenceBundle`."""
    try:
        factory = REGISTRY[model_id]
    except KeyError:
        raise ConfigError(f"unknown model {model_id!r}; known: {', '.join(REGISTRY)}") from None
    try:
        out = factory(bundle, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {model_id!r}: {exc}") from None
    out.model_id = model_id
    return out
