"""Synthetic sequences with a planted salient region, plus brute-force reference oracles.

The generator writes exactly what the ingest layer reads, so a synthetic
dataset exercises the full pipeline.  All randomness flows from
``SynthSpec.seed``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .core import SFU_GEOMETRY, FrameFeatures, FrameType, GazePoint, Viewing, ViewingGeometry, pixels_per_degree
from .errors import ConfigError, ParameterError
from .ingest import (GazeTable, Manifest, SequenceBundle, SequenceEntry, write_features,
                     write_gaze, write_manifest)

# High-frequency AC pattern for planted blocks (zig-zag order, DC first).
AC_TEMPLATE = (0, 9, -8, 7, -7, 6, -6, 5, -5, 4, -4, 4, -3, 3, -3)


@dataclass
class SynthSpec:
    """Parameters of one synthetic sequence.

    Geometry lengths are map pixels unless noted; the display resolution is
    ``(width, height) / gaze_to_map_scale``.  ``observer_weight`` is the
    probability that an observer looks at the planted region in a given
    frame, otherwise gaze is drawn from the center-bias Gaussian
    ``center_mean``/``center_cov`` (normalised coordinates).
    """

    sequence_id: str = "synth"
    width: int = 352
    height: int = 288
    block_size: int = 8
    frame_count: int = 300
    gop: int = 12
    geometry: ViewingGeometry = SFU_GEOMETRY
    gaze_to_map_scale: float = 0.5
    region_start: tuple = (240.0, 110.0)
    region_velocity: tuple = (0.0, 0.0)
    region_radius: float = 28.0
    region_speed: float = 2.0
    region_jitter: float = 2.0
    background: str = "none"
    pan: tuple = (0.0, 0.0)
    zoom_rate: float = 0.0
    background_noise: float = 0.1
    dct_contrast: float = 1.0
    observer_weight: float = 0.5
    gaze_noise_deg: float = 0.0
    observers: int = 15
    counterpart_noise_deg: float = 0.3
    center_mean: tuple = (0.5, 0.5)
    center_cov: tuple = ((0.012, 0.0), (0.0, 0.01))
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.observer_weight <= 1:
            raise ParameterError("observer_weight must be in [0, 1]")
        if not self.region_radius > 0:
            raise ParameterError("region_radius must be positive")
        if self.background not in ("none", "pan", "zoom"):
            raise ParameterError(f"unknown background model {self.background!r}")
        if self.frame_count < 1 or self.gop < 1 or self.observers < 0:
            raise ParameterError("frame_count and gop must be >= 1, observers >= 0")
        if self.block_size not in (4, 8, 16):
            raise ParameterError("block_size must be 4, 8 or 16")
        dw = self.width / self.gaze_to_map_scale
        dh = self.height / self.gaze_to_map_scale
        if (abs(dw - self.geometry.display_w_px) > 1e-6 or abs(dh - self.geometry.display_h_px) > 1e-6):
            raise ParameterError("map size / gaze_to_map_scale must equal the geometry's display size")
        self.region_start = tuple(float(v) for v in self.region_start)
        self.region_velocity = tuple(float(v) for v in self.region_velocity)
        self.pan = tuple(float(v) for v in self.pan)
        self.center_mean = tuple(float(v) for v in self.center_mean)
        self.center_cov = tuple(tuple(float(v) for v in r) for r in self.center_cov)
        for t in (0, self.frame_count - 1):
            cx, cy = self.region_center(t)
            r = self.region_radius
            if cx - r < 0 or cy - r < 0 or cx + r > self.width or cy + r > self.height:
                raise ParameterError(f"planted region leaves the frame at frame {t}")

    @property
    def grid(self):
        return (-(-self.width // self.block_size), -(-self.height // self.block_size))

    @property
    def pixels_per_degree_map(self) -> float:
        return pixels_per_degree(self.geometry) * self.gaze_to_map_scale

    def region_center(self, t: int):
        return (self.region_start[0] + t * self.region_velocity[0],
                self.region_start[1] + t * self.region_velocity[1])

    def frame_type(self, t: int) -> FrameType:
        return FrameType.I if t % self.gop == 0 else FrameType.P

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.to_dict()
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown synth key(s): {', '.join(sorted(extra))}")
        obj = dict(obj)
        if "geometry" in obj and isinstance(obj["geometry"], dict):
            obj["geometry"] = ViewingGeometry(**obj["geometry"])
        for k in ("region_start", "region_velocity", "pan", "center_mean"):
            if k in obj:
                obj[k] = tuple(obj[k])
        if "center_cov" in obj:
            obj["center_cov"] = tuple(tuple(r) for r in obj["center_cov"])
        return cls(**obj)


def background_motion(spec: SynthSpec, x, y):
    """Camera-induced displacement (pixels) at block centres ``x``, ``y``."""
    if spec.background == "pan":
        return np.full_like(x, spec.pan[0]), np.full_like(y, spec.pan[1])
    if spec.background == "zoom":
        return spec.zoom_rate * (x - spec.width / 2.0), spec.zoom_rate * (y - spec.height / 2.0)
    return np.zeros_like(x), np.zeros_like(y)


def planted_mask(spec: SynthSpec, t: int) -> np.ndarray:
    gw, gh = spec.grid
    bs = spec.block_size
    x = (np.arange(gw) + 0.5) * bs
    y = (np.arange(gh) + 0.5) * bs
    cx, cy = spec.region_center(t)
    return (x[None, :] - cx) ** 2 + (y[:, None] - cy) ** 2 <= spec.region_radius ** 2


def _frame(spec: SynthSpec, t: int, rng) -> FrameFeatures:
    gw, gh = spec.grid
    bs = spec.block_size
    n = gw * gh
    ftype = spec.frame_type(t)
    mask = planted_mask(spec, t).ravel()
    X, Y = np.meshgrid((np.arange(gw) + 0.5) * bs, (np.arange(gh) + 0.5) * bs)
    bx, by = background_motion(spec, X.ravel(), Y.ravel())

    intra = ftype is FrameType.I
    ac_scale = 1.0 if intra else 0.4
    noise = np.rint(rng.normal(0.0, ac_scale, size=(n, len(AC_TEMPLATE)))).astype(np.int64)
    dct = noise.copy()
    dct[:, 0] = np.rint(rng.normal(64.0 if intra else 0.0, 2.0, size=n)).astype(np.int64)
    tmpl = np.rint(np.array(AC_TEMPLATE) * spec.dct_contrast * (1.0 if intra else 0.6)).astype(np.int64)
    dct[mask, 1:] += tmpl[1:]
    ac_energy = np.abs(dct[:, 1:]).sum(axis=1)

    if intra:
        mv = None
        bits = 16 + ac_energy
    else:
        ang = rng.uniform(0.0, 2 * np.pi, size=n)
        vx = bx + rng.normal(0.0, spec.background_noise, size=n)
        vy = by + rng.normal(0.0, spec.background_noise, size=n)
        obj_x = spec.region_velocity[0] + spec.region_speed * np.cos(ang)
        obj_y = spec.region_velocity[1] + spec.region_speed * np.sin(ang)
        jx = rng.normal(0.0, spec.region_jitter, size=n)
        jy = rng.normal(0.0, spec.region_jitter, size=n)
        vx = np.where(mask, obj_x + jx, vx)
        vy = np.where(mask, obj_y + jy, vy)
        mv = np.stack([np.rint(vx * 4), np.rint(vy * 4)], axis=1).astype(np.int64)
        resid = np.hypot(mv[:, 0] / 4.0 - bx, mv[:, 1] / 4.0 - by)
        bits = 2 + np.rint(3.0 * resid).astype(np.int64) + ac_energy // 2
    return FrameFeatures(frame=t, frame_type=ftype, block_size=bs, grid_w=gw, grid_h=gh,
                         dct=[list(map(int, row)) for row in dct], bits=bits,
                         mv=None if mv is None else mv.reshape(gh, gw, 2))


def _draw_in_frame(rng, sampler, w, h, max_tries=1000):
    for _ in range(max_tries):
        x, y = sampler()
        if 0 <= x < w and 0 <= y < h:
            return x, y
    raise ParameterError("could not draw an in-frame gaze point; check the observer model")


def _gaze(spec: SynthSpec, rng):
    w, h = spec.width, spec.height
    ppd = spec.pixels_per_degree_map
    noise = spec.gaze_noise_deg * ppd
    twin = spec.counterpart_noise_deg * ppd
    cm = np.array(spec.center_mean) * [w, h]
    cc = np.array(spec.center_cov) * np.outer([w, h], [w, h])
    chol = np.linalg.cholesky(cc)
    inv = 1.0 / spec.gaze_to_map_scale
    rows = []
    for t in range(spec.frame_count):
        cx, cy = spec.region_center(t)
        for o in range(spec.observers):
            obs = f"o{o:02d}"
            if rng.random() < spec.observer_weight:
                def planted():
                    r = spec.region_radius * 0.5 * math.sqrt(rng.random())
                    a = rng.uniform(0, 2 * math.pi)
                    ex, ey = rng.normal(0, noise, size=2) if noise > 0 else (0.0, 0.0)
                    return cx + r * math.cos(a) + ex, cy + r * math.sin(a) + ey
                x, y = _draw_in_frame(rng, planted, w, h)
            else:
                x, y = _draw_in_frame(rng, lambda: tuple(cm + chol @ rng.standard_normal(2)), w, h)
            rows.append(GazePoint(x * inv, y * inv, t, obs, Viewing.primary))
            if twin > 0:
                x2, y2 = _draw_in_frame(rng, lambda: (x + rng.normal(0, twin), y + rng.normal(0, twin)), w, h)
            else:
                x2, y2 = x, y
            rows.append(GazePoint(x2 * inv, y2 * inv, t, obs, Viewing.counterpart))
    return GazeTable(rows, sequence=spec.sequence_id)


def generate(spec: SynthSpec) -> SequenceBundle:
    """Feature stream and twin-viewing gaze table for one synthetic sequence."""
    ss = np.random.SeedSequence(spec.seed)
    feat_ss, gaze_ss = ss.spawn(2)
    frng = np.random.default_rng(feat_ss)
    frames = [_frame(spec, t, frng) for t in range(spec.frame_count)]
    gaze = _gaze(spec, np.random.default_rng(gaze_ss))
    bundle = SequenceBundle(spec.sequence_id, spec.geometry, frames, gaze, spec.gaze_to_map_scale)
    bundle.validate()
    return bundle


def write_dataset(bundles, out_dir, models: Optional[dict] = None) -> Path:
    """Write feature, gaze and manifest files; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for b in bundles:
        fp = out / f"{b.sequence_id}.featjsonl"
        gp = out / f"{b.sequence_id}.csv"
        write_features(b.frames, fp)
        write_gaze(b.gaze, gp, b.sequence_id)
        entries.append(SequenceEntry(b.sequence_id, fp, gp, b.geometry, b.gaze_to_map_scale))
    mpath = out / "manifest.json"
    write_manifest(Manifest(mpath, entries, models or {}), mpath)
    return mpath


def load_synth_specs(path) -> list:
    """A synth spec file is a JSON object with ``defaults`` and a ``sequences`` list of overrides."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if isinstance(obj, list):
        obj = {"sequences": obj}
    extra = set(obj) - {"defaults", "sequences"}
    if extra:
        raise ConfigError(f"unknown synth spec key(s): {', '.join(sorted(extra))}")
    defaults = obj.get("defaults", {})
    seqs = obj.get("sequences") or [{}]
    return [SynthSpec.from_dict({**defaults, **s}) for s in seqs]


# ---------------------------------------------------------------- oracles

def oracle_auc(positives, negatives) -> float:
    """Exhaustive pair count: (wins + ties / 2) / (|P| |N|)."""
    wins = ties = 0
    for p in positives:
        for q in negatives:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (2 * wins + ties) / (2 * len(positives) * len(negatives))


def oracle_convolve(impulses, kernel, dims) -> np.ndarray:
    """Direct summation of ``weight * kernel`` centred at each ``(col, row, weight)`` impulse.

    ``kernel`` has odd side lengths and its central tap is the origin.
    Contributions falling outside the ``(width, height)`` frame are dropped.
    """
    w, h = int(dims[0]), int(dims[1])
    k = np.asarray(kernel, dtype=np.float64)
    ry, rx = k.shape[0] // 2, k.shape[1] // 2
    out = np.zeros((h, w))
    for col, row, weight in impulses:
        col, row = int(col), int(row)
        y0, y1 = max(0, row - ry), min(h, row + ry + 1)
        x0, x1 = max(0, col - rx), min(w, col + rx + 1)
        if y0 < y1 and x0 < x1:
            out[y0:y1, x0:x1] += weight * k[y0 - row + ry:y1 - row + ry, x0 - col + rx:x1 - col + rx]
    return out
