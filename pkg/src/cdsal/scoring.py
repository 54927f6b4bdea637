"""Score one saliency map against one frame's gaze with the full metric battery.

Everything that depends only on the frame (ground truth, control draws,
prior density) lives in a :class:`FrameContext` so it is computed once and
shared by every model scored on that frame.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .centerbias import CenterBiasModel, evaluate_F, weighted_moments
from .errors import ConfigError, DegenerateInputError, SaliencyError, StructuralError
from .metrics import (DEFAULT_BINS, DEFAULT_METRICS, METRICS, auc_batch, build_ground_truth,
                      disk_max_filter, gather_gaze_values, histogram_batch, jsd_batch, kld_batch,
                      pcc, sample_controls, values_at_pixels)

_SAMPLER_CODE = {"uniform": 1, "centerbias": 2}


@dataclass(frozen=True)
class MetricConfig:
    """Which metrics to compute and how.

    ``radius_deg`` is the gaze-uncertainty radius of the local-maximum
    operator; it is applied to control values as well as gaze values.
    KLD and JD are opt-in.
    """

    metrics: tuple = DEFAULT_METRICS
    bootstrap: int = 100
    bins: int = DEFAULT_BINS
    radius_deg: float = 0.5
    sigma_deg: float = 1.0
    seed: int = 0
    log_base: float = 2.0
    nss_variant: str = "printed"

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(self.metrics))
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown:
            raise ConfigError(f"unknown metric(s): {', '.join(unknown)}")
        if self.bootstrap < 1 or self.bins < 1:
            raise ConfigError("bootstrap and bins must be >= 1")
        if self.radius_deg < 0 or not self.sigma_deg > 0:
            raise ConfigError("radius_deg must be >= 0 and sigma_deg > 0")
        if self.nss_variant not in ("printed", "residual"):
            raise ConfigError(f"unknown nss_variant {self.nss_variant!r}")

    @property
    def needs_center_bias(self) -> bool:
        return any(m in self.metrics for m in ("auc_p", "jsd_p", "nss_p"))


def frame_seed(seed: int, sequence_id: str, frame: int, sampler: str) -> np.random.SeedSequence:
    """Control-point stream for one frame; independent of the model being scored."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(sequence_id.encode("utf-8")),
                                   int(frame), _SAMPLER_CODE[sampler]])


@dataclass
class FrameContext:
    """Model-independent inputs for scoring one frame at map resolution."""

    dims: tuple
    gaze: np.ndarray
    config: MetricConfig
    radius_px: float
    sigma_px: float
    center_bias: Optional[CenterBiasModel] = None
    sequence_id: str = ""
    frame: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, dims, gaze, config: MetricConfig, pixels_per_degree: float,
              center_bias: Optional[CenterBiasModel] = None, sequence_id: str = "", frame: int = 0):
        """``pixels_per_degree`` must already be in map pixels."""
        return cls((int(dims[0]), int(dims[1])), np.asarray(gaze, dtype=np.float64).reshape(-1, 2),
                   config, config.radius_deg * pixels_per_degree, config.sigma_deg * pixels_per_degree,
                   center_bias, sequence_id, frame)

    @property
    def n(self) -> int:
        return len(self.gaze)

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def ground_truth(self):
        return self._get("gt", lambda: build_ground_truth(self.gaze, self.dims, self.sigma_px))

    @property
    def prior(self) -> np.ndarray:
        if self.center_bias is None:
            raise ConfigError("center-bias corrected metrics need a center-bias model")
        return self._get("F", lambda: evaluate_F(self.center_bias, self.dims))

    def controls(self, sampler: str) -> np.ndarray:
        """``(B, n, 2)`` control pixels, gaze pixels excluded."""
        def draw():
            spec = "uniform" if sampler == "uniform" else self.center_bias
            if spec is None:
                raise ConfigError("center-bias corrected metrics need a center-bias model")
            return sample_controls(self.dims, self.n, spec,
                                   frame_seed(self.config.seed, self.sequence_id, self.frame, sampler),
                                   exclusion=self.gaze, replicates=self.config.bootstrap)
        return self._get(("controls", sampler), draw)


@dataclass
class FrameRecord:
    """Metric values of one (model, frame); ``None`` marks a metric that could not be scored."""

    scored: bool
    values: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)


def _sample_metrics(name, pos, neg, cfg):
    if name.startswith("auc"):
        return float(np.mean(auc_batch(pos, neg)))
    P = histogram_batch(pos[None, :], cfg.bins)
    Q = histogram_batch(neg, cfg.bins)
    Pb = np.broadcast_to(P, Q.shape)
    if name.startswith("jsd"):
        return float(np.mean(jsd_batch(Pb, Q)))
    kl = kld_batch(Pb, Q, cfg.log_base)
    if name == "kld":
        vals = kl
    else:
        vals = kl + kld_batch(Q, Pb, cfg.log_base)
    return math.inf if not np.isfinite(vals).all() else float(np.mean(vals))


def score_frame(values, gaze, config: MetricConfig, ctx: Optional[FrameContext] = None,
                pixels_per_degree: Optional[float] = None,
                center_bias: Optional[CenterBiasModel] = None) -> FrameRecord:
    """Compute the configured metrics for one normalised map.

    ``values`` must already lie in [0, 1].  Either pass a prepared ``ctx`` or
    ``pixels_per_degree`` (map pixels) and, for primed metrics, ``center_bias``.
    Degenerate inputs are recorded per metric instead of raised.
    """
    S = np.asarray(values, dtype=np.float64)
    if S.ndim != 2:
        raise StructuralError("saliency map must be 2-D")
    if not np.isfinite(S).all() or S.min() < 0 or S.max() > 1:
        raise StructuralError("score_frame expects a map normalised to [0, 1]")
    if ctx is None:
        if pixels_per_degree is None:
            raise ConfigError("score_frame needs a FrameContext or pixels_per_degree")
        ctx = FrameContext.build((S.shape[1], S.shape[0]), gaze, config, pixels_per_degree, center_bias)
    if ctx.n == 0:
        return FrameRecord(scored=False)
    if (S.shape[1], S.shape[0]) != ctx.dims:
        raise StructuralError(f"map {S.shape[::-1]} does not match frame {ctx.dims}")

    rec = FrameRecord(scored=True)
    pos = gather_gaze_values(S, ctx.gaze, ctx.radius_px)
    dilated = None
    for name in config.metrics:
        try:
            if name in ("auc", "jsd", "kld", "jd", "auc_p", "jsd_p"):
                if dilated is None:
                    dilated = disk_max_filter(S, ctx.radius_px)
                sampler = "centerbias" if name.endswith("_p") else "uniform"
                neg = values_at_pixels(dilated, ctx.controls(sampler))
                v = _sample_metrics(name, pos, neg, config)
            elif name == "nss":
                sd = S.std(ddof=1)
                if not sd > 0:
                    raise DegenerateInputError("NSS undefined for a constant map")
                v = float(np.mean((pos - S.mean()) / sd))
            elif name == "nss_p":
                # Same as centerbias.nss_prime, reusing the gathered gaze values.
                lo, hi = S.min(), S.max()
                if hi <= lo:
                    raise DegenerateInputError("weighted standard deviation is zero")
                Sn, pn = (S, pos) if (lo == 0 and hi == 1) else ((S - lo) / (hi - lo), (pos - lo) / (hi - lo))
                mu, sigma = weighted_moments(Sn, ctx.prior, config.nss_variant)
                if not sigma > 0:
                    raise DegenerateInputError("weighted standard deviation is zero")
                v = float(np.mean((pn - mu) / sigma))
            elif name == "pcc":
                v = pcc(S, ctx.ground_truth)
            else:  # pragma: no cover - guarded by MetricConfig
                raise ConfigError(name)
        except ConfigError:
            raise
        except SaliencyError as exc:
            rec.values[name] = None
            rec.errors[name] = str(exc)
            continue
        rec.values[name] = v
    return rec
