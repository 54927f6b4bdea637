"""Domain types, viewing geometry and map-level primitives.

Coordinate convention used throughout the package: a saliency map is a
``(height, width)`` float array.  Pixel ``(i, j)`` (column ``i``, row ``j``)
covers the square ``[i, i+1) x [j, j+1)`` so its centre sits at
``(i + 0.5, j + 0.5)``.  Continuous gaze coordinates live in ``[0, w) x [0, h)``
and the nearest pixel of a point is ``(floor(x), floor(y))``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, GeometryError, ParameterError

# Gaussian support radius, in units of sigma.
TRUNCATE = 4.0


@dataclass(frozen=True)
class ViewingGeometry:
    """Physical set-up of an eye-tracking experiment.

    ``screen_diagonal`` is in inches, ``viewing_distance`` in centimetres;
    ``display_w_px``/``display_h_px`` is the screen region the video occupied.
    """

    screen_w_px: float
    screen_h_px: float
    screen_diagonal: float
    viewing_distance: float
    display_w_px: float
    display_h_px: float

    def __post_init__(self):
        for name in ("screen_w_px", "screen_h_px", "screen_diagonal",
                     "viewing_distance", "display_w_px", "display_h_px"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.integer, np.floating)) and math.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be a positive finite number, got {v!r}")
        if self.display_w_px > self.screen_w_px or self.display_h_px > self.screen_h_px:
            raise GeometryError("display region exceeds the screen")

    @property
    def pixel_pitch_cm(self) -> float:
        return self.screen_diagonal * 2.54 / math.hypot(self.screen_w_px, self.screen_h_px)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in GEOMETRY_FIELDS}


GEOMETRY_FIELDS = ("screen_w_px", "screen_h_px", "screen_diagonal",
                   "viewing_distance", "display_w_px", "display_h_px")

# SFU: CIF video shown at 2x on a 19" 1280x1024 screen from 80 cm.
SFU_GEOMETRY = ViewingGeometry(1280, 1024, 19.0, 80.0, 704, 576)


def diem_geometry(display_w_px: float, display_h_px: float) -> ViewingGeometry:
    """DIEM set-up: 21.3" 1600x1200 screen at 90 cm.  The display region varies per clip."""
    return ViewingGeometry(1600, 1200, 21.3, 90.0, display_w_px, display_h_px)


def pixels_per_degree(geom: ViewingGeometry) -> float:
    """Screen pixels spanned by one degree of visual angle at the viewing distance."""
    if not isinstance(geom, ViewingGeometry):
        raise GeometryError("expected a ViewingGeometry")
    span_cm = 2.0 * geom.viewing_distance * math.tan(math.radians(0.5))
    return span_cm / geom.pixel_pitch_cm


class FrameType(str, enum.Enum):
    I = "I"
    P = "P"


class Viewing(str, enum.Enum):
    """First/second viewing (SFU) or right/left eye (DIEM)."""

    primary = "primary"
    counterpart = "counterpart"


@dataclass(frozen=True)
class GazePoint:
    x: float
    y: float
    frame: int
    observer: str
    viewing: Viewing = Viewing.primary


@dataclass(frozen=True)
class MotionVector:
    """Block displacement in quarter-pel units."""

    dx: int
    dy: int

    @property
    def magnitude(self) -> float:
        return math.hypot(self.dx, self.dy) / 4.0


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    """Compressed-domain data of one frame on its block grid.

    ``mv`` is ``(grid_h, grid_w, 2)`` quarter-pel integers (``None`` for
    I-frames), ``dct`` is one zig-zag coefficient tuple per block in
    row-major order, ``bits`` is ``(grid_h, grid_w)``.
    """

    frame: int
    frame_type: FrameType
    block_size: int
    grid_w: int
    grid_h: int
    dct: tuple
    bits: np.ndarray
    mv: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))
        bits = np.asarray(self.bits, dtype=np.int64).reshape(self.grid_h, self.grid_w)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        if self.mv is not None:
            mv = np.asarray(self.mv, dtype=np.int64).reshape(self.grid_h, self.grid_w, 2)
            mv.setflags(write=False)
            object.__setattr__(self, "mv", mv)
        object.__setattr__(self, "dct", tuple(tuple(int(c) for c in b) for b in self.dct))
        self.validate()

    def validate(self, width: Optional[int] = None, height: Optional[int] = None) -> None:
        if self.frame < 0:
            raise ParameterError(f"negative frame index {self.frame}")
        if self.block_size not in (4, 8, 16):
            raise ParameterError(f"frame {self.frame}: block_size must be 4, 8 or 16")
        if self.grid_w < 1 or self.grid_h < 1:
            raise DimensionError(f"frame {self.frame}: empty block grid")
        if len(self.dct) != self.grid_w * self.grid_h:
            raise DimensionError(f"frame {self.frame}: expected {self.grid_w * self.grid_h} blocks, got {len(self.dct)}")
        if self.frame_type is FrameType.I and self.mv is not None:
            raise ParameterError(f"frame {self.frame}: I-frame carries motion vectors")
        if self.frame_type is FrameType.P and self.mv is None:
            raise ParameterError(f"frame {self.frame}: P-frame without motion vectors")
        if (self.bits < 0).any():
            raise ParameterError(f"frame {self.frame}: negative bit count")
        for size, n, name in ((width, self.grid_w, "width"), (height, self.grid_h, "height")):
            if size is not None and not (n * self.block_size >= size > (n - 1) * self.block_size):
                raise DimensionError(f"frame {self.frame}: grid of {n} blocks does not cover {name} {size}")

    def mv_pixels(self) -> np.ndarray:
        if self.mv is None:
            raise ParameterError(f"frame {self.frame}: I-frame has no motion vectors")
        return self.mv / 4.0

    def dct_matrix(self, k: int) -> np.ndarray:
        """First ``k`` zig-zag coefficients of every block, zero padded, shape ``(grid_h, grid_w, k)``."""
        out = np.zeros((len(self.dct), k))
        for i, coeffs in enumerate(self.dct):
            c = coeffs[:k]
            out[i, :len(c)] = c
        return out.reshape(self.grid_h, self.grid_w, k)

    def __eq__(self, other):
        if not isinstance(other, FrameFeatures):
            return NotImplemented
        same_mv = (self.mv is None and other.mv is None) or (
            self.mv is not None and other.mv is not None and np.array_equal(self.mv, other.mv))
        return (self.frame == other.frame and self.frame_type == other.frame_type
                and self.block_size == other.block_size and self.grid_w == other.grid_w
                and self.grid_h == other.grid_h and self.dct == other.dct
                and np.array_equal(self.bits, other.bits) and same_mv)


@dataclass(frozen=True, eq=False)
class GroundTruthMap:
    """Gaze impulses convolved with a Gaussian (sum-combined).

    Kept distinct from plain saliency arrays so the max-combined IO map cannot
    be passed where a convolution ground truth is expected.
    """

    values: np.ndarray
    n_points: int = 0

    @property
    def shape(self):
        return self.values.shape


def check_map(values, name: str = "map", nonnegative: bool = True) -> np.ndarray:
    """Validate a saliency map: 2-D, finite and (by default) nonnegative.  Returns a float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} has non-finite values")
    if nonnegative and (arr < 0).any():
        raise ParameterError(f"{name} has negative values")
    return arr


def nearest_pixel(points, width: int, height: int) -> np.ndarray:
    """Integer ``(col, row)`` of the pixel containing each continuous point."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    cols = np.clip(np.floor(pts[:, 0]), 0, width - 1).astype(np.intp)
    rows = np.clip(np.floor(pts[:, 1]), 0, height - 1).astype(np.intp)
    return np.stack([cols, rows], axis=1)


@lru_cache(maxsize=64)
def _disk_kernel(sigma: float) -> np.ndarray:
    r = int(math.floor(TRUNCATE * sigma))
    d = np.arange(-r, r + 1, dtype=np.float64)
    d2 = d[None, :] ** 2 + d[:, None] ** 2
    k = np.exp(-d2 / (2.0 * sigma * sigma))
    k[d2 > (TRUNCATE * sigma) ** 2] = 0.0
    k.setflags(write=False)
    return k


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Unnormalised isotropic Gaussian with peak 1, zero beyond ``4 * sigma``.

    Shape ``(2r+1, 2r+1)`` with ``r = floor(4 * sigma)``; the centre tap is the origin.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return _disk_kernel(float(sigma))


def gaussian_blob(width: int, height: int, center, sigma: float) -> np.ndarray:
    """Isotropic Gaussian around a continuous ``center``, scaled to 1 at the nearest pixel.

    Pixels whose centre lies farther than ``4 * sigma`` from ``center`` are 0.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    cx, cy = float(center[0]), float(center[1])
    out = np.zeros((height, width))
    r = TRUNCATE * sigma
    c0, c1 = max(0, int(math.floor(cx - r - 1))), min(width, int(math.ceil(cx + r + 1)))
    r0, r1 = max(0, int(math.floor(cy - r - 1))), min(height, int(math.ceil(cy + r + 1)))
    if c0 >= c1 or r0 >= r1:
        return out
    dx = np.arange(c0, c1) + 0.5 - cx
    dy = np.arange(r0, r1) + 0.5 - cy
    d2 = dy[:, None] ** 2 + dx[None, :] ** 2
    px, py = nearest_pixel([(cx, cy)], width, height)[0]
    peak2 = (px + 0.5 - cx) ** 2 + (py + 0.5 - cy) ** 2
    patch = np.exp(-(d2 - peak2) / (2.0 * sigma * sigma))
    patch[d2 > r * r] = 0.0
    out[r0:r1, c0:c1] = patch
    return out


def _paste(out: np.ndarray, kernel: np.ndarray, col: int, row: int, op) -> None:
    """Combine ``kernel`` centred on pixel ``(col, row)`` into ``out`` in place."""
    h, w = out.shape
    r = kernel.shape[0] // 2
    r0, r1 = max(0, row - r), min(h, row + r + 1)
    c0, c1 = max(0, col - r), min(w, col + r + 1)
    if r0 >= r1 or c0 >= c1:
        return
    k = kernel[r0 - row + r:r1 - row + r, c0 - col + r:c1 - col + r]
    view = out[r0:r1, c0:c1]
    op(view, k, out=view)


def _gauss_1d(sigma: float) -> np.ndarray:
    r = int(math.floor(TRUNCATE * sigma))
    d = np.arange(-r, r + 1, dtype=np.float64)
    return np.exp(-d * d / (2.0 * sigma * sigma))


def smoothing_kernel(sigma: float) -> np.ndarray:
    """Separable Gaussian (square support of half-width ``floor(4 * sigma)``) used by block upsampling."""
    g = _gauss_1d(sigma)
    return np.outer(g, g)


@lru_cache(maxsize=32)
def _block_smoother(n_out: int, n_blocks: int, block: int, sigma: float):
    # Row of the result = sum over source pixels in each block of the 1-D Gaussian.
    g = _gauss_1d(sigma)
    r = len(g) // 2
    idx = np.arange(n_out)
    diff = idx[:, None] - idx[None, :]
    full = np.where(np.abs(diff) <= r, g[np.clip(diff + r, 0, 2 * r)], 0.0)
    owner = np.minimum(idx // block, n_blocks - 1)
    gather = np.zeros((n_out, n_blocks))
    np.add.at(gather.T, owner, full.T)
    norm = full.sum(axis=1)
    gather.setflags(write=False)
    norm.setflags(write=False)
    return gather, norm


def upsample_block_map(block_values, block_size: int, out_w: int, out_h: int,
                       smooth_sigma: float = 0.0) -> np.ndarray:
    """Replicate block values to pixels, then optionally smooth.

    Smoothing is a normalised convolution with a separable Gaussian: the
    kernel weights are renormalised over in-frame pixels, so constants are
    preserved up to the frame border.
    """
    v = np.asarray(block_values, dtype=np.float64)
    if v.ndim != 2:
        raise DimensionError("block grid must be 2-D")
    gh, gw = v.shape
    for n, size, name in ((gw, out_w, "width"), (gh, out_h, "height")):
        if not (n * block_size >= size > (n - 1) * block_size):
            raise DimensionError(f"block grid of {n} x {block_size}px does not cover {name} {size}")
    if smooth_sigma < 0:
        raise ParameterError("smooth_sigma must be >= 0")
    if smooth_sigma == 0:
        return np.repeat(np.repeat(v, block_size, axis=0), block_size, axis=1)[:out_h, :out_w].copy()
    ky, ny = _block_smoother(out_h, gh, block_size, float(smooth_sigma))
    kx, nx = _block_smoother(out_w, gw, block_size, float(smooth_sigma))
    out = ky @ v @ kx.T
    out /= ny[:, None]
    out /= nx[None, :]
    np.maximum(out, 0.0, out=out)
    return out


def minmax_normalize(values) -> np.ndarray:
    """Affine rescale to [0, 1].  A constant map becomes all zeros."""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi <= lo:
        return np.zeros_like(arr)
    out = (arr - lo) / (hi - lo)
    # Guard against one-ulp overshoot so downstream [0, 1] contracts hold.
    np.clip(out, 0.0, 1.0, out=out)
    return out
