"""Evaluate registered models on sequence bundles, one frame at a time."""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .centerbias import CenterBiasModel, fit_center_bias
from .core import Viewing, minmax_normalize, pixels_per_degree
from .errors import ConfigError
from .models import build_model
from .scoring import FrameContext, MetricConfig, score_frame
from .stats import ScoreRecord, ScoreTable


@dataclass
class EvaluationResult:
    table: ScoreTable
    center_bias: Optional[CenterBiasModel]
    degenerate: Counter = field(default_factory=Counter)   # (model, metric) -> count
    frames_without_gaze: int = 0


def normalize_models(models) -> list:
    """``["gauss", ("mvmag", {...})]`` or ``{"gauss": {}}`` -> sorted ``[(id, params)]``."""
    if isinstance(models, dict):
        items = list(models.items())
    else:
        items = [(m, {}) if isinstance(m, str) else (m[0], dict(m[1])) for m in models]
    ids = [m for m, _ in items]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate model id in model list")
    if not items:
        raise ConfigError("no models to evaluate")
    return sorted((m, dict(p or {})) for m, p in items)


def fit_bias_from_bundles(bundles, viewing=Viewing.primary) -> CenterBiasModel:
    """Fit the center-bias prior to every gaze point of every bundle."""
    samples = []
    for b in bundles:
        pts = [b.gaze.points(t, viewing) for t in range(b.frame_count)]
        w, h = b.geometry.display_w_px, b.geometry.display_h_px
        samples.extend((p, (w, h)) for p in pts if len(p))
    return fit_center_bias(samples)


def evaluate_sequence(bundle, models, config: MetricConfig,
                      center_bias: Optional[CenterBiasModel] = None):
    """Score every model on every frame of one bundle.

    Returns ``(records, degenerate_counter, frames_without_gaze)``.  Frames
    without gaze are skipped; maps are min-max normalised before scoring.
    """
    models = normalize_models(models)
    outputs = [(mid, build_model(mid, bundle, **params)) for mid, params in models]
    scale = bundle.gaze_to_map_scale
    ppd_map = pixels_per_degree(bundle.geometry) * scale
    dims = bundle.map_size
    records, degenerate, empty = [], Counter(), 0
    for t, f in enumerate(bundle.frames):
        gaze = bundle.gaze.points(t, Viewing.primary) * scale
        if len(gaze) == 0:
            empty += 1
            continue
        ctx = FrameContext.build(dims, gaze, config, ppd_map, center_bias, bundle.sequence_id, t)
        for mid, out in outputs:
            raw = out.map(t)
            if raw is None:
                continue
            rec = score_frame(minmax_normalize(raw), gaze, config, ctx)
            for metric in config.metrics:
                v = rec.values.get(metric)
                if v is not None and not math.isfinite(v):
                    v = None
                if v is None:
                    degenerate[(mid, metric)] += 1
                records.append(ScoreRecord(mid, bundle.sequence_id, t, f.frame_type.value, metric, v))
    return records, degenerate, empty


def _worker(args):
    return evaluate_sequence(*args)


def evaluate(bundles, models, config: MetricConfig, center_bias: Optional[CenterBiasModel] = None,
             workers: int = 1) -> EvaluationResult:
    """Score ``models`` on ``bundles``; sequences run in parallel when ``workers > 1``.

    When the configuration needs a center-bias prior and none is given, it
    is fitted to the primary-viewing gaze of all bundles.  Output order is
    canonical, so results do not depend on ``workers``.
    """
    bundles = list(bundles)
    if not bundles:
        raise ConfigError("no sequences to evaluate")
    models = normalize_models(models)
    if config.needs_center_bias and center_bias is None:
        center_bias = fit_bias_from_bundles(bundles)
    jobs = [(b, models, config, center_bias) for b in bundles]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_worker, jobs))
    else:
        parts = [_worker(j) for j in jobs]
    table, degenerate, empty = ScoreTable(), Counter(), 0
    for records, deg, e in parts:
        for r in records:
            table.add(r)
        degenerate.update(deg)
        empty += e
    return EvaluationResult(table, center_bias, degenerate, empty)
