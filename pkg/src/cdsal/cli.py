"""Batch command line: ``evaluate``, ``synth``, ``fit-bias``, ``rank`` and ``top``.

Exit codes: 0 ok, 2 configuration error, 3 ingest error, 4 internal failure.
Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .centerbias import CenterBiasModel
from .errors import ConfigError, FitError, ParseError, SaliencyError
from .ingest import load_bundles, load_manifest
from .metrics import DEFAULT_METRICS
from .models import REGISTRY
from .pipeline import evaluate, fit_bias_from_bundles, normalize_models
from .plots import write_plots
from .scoring import MetricConfig
from .stats import ALL, Summary, aggregate, rank_sequences, sequence_means, top_performers
from .synth import generate, load_synth_specs, write_dataset

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_INTERNAL = 0, 2, 3, 4
_STOCHASTIC = frozenset({"auc", "auc_p", "jsd", "jsd_p", "kld", "jd"})
_RUN_KEYS = {"manifest", "models", "metrics", "center_bias", "out", "report", "workers"}
_METRIC_KEYS = {"ids", "bootstrap", "bins", "radius_deg", "sigma_deg", "seed", "log_base", "nss_variant"}
_REPORT_KEYS = {"split", "plots", "rank_exclude", "top_exclude"}


@dataclass
class RunConfig:
    """Everything ``evaluate`` needs.  ``center_bias`` is a model path or ``"fit"``."""

    manifest: Optional[str] = None
    models: dict = field(default_factory=dict)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    center_bias: str = "fit"
    out: Optional[str] = None
    split: bool = True
    plots: bool = True
    rank_exclude: tuple = ("io", "gauss")
    top_exclude: tuple = ("io",)
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["metrics"] = asdict(self.metrics)
        d["metrics"]["metrics"] = list(self.metrics.metrics)
        return d


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path} line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return obj


def _check_keys(obj, allowed, what):
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown {what} key(s): {', '.join(sorted(extra))}")


def build_run_config(args) -> RunConfig:
    """Merge ``--config`` with command-line overrides and validate."""
    obj = _read_json(args.config) if args.config else {}
    _check_keys(obj, _RUN_KEYS, "config")
    base = Path(args.config).parent if args.config else Path(".")
    mobj = obj.get("metrics", {})
    _check_keys(mobj, _METRIC_KEYS, "metrics")
    robj = obj.get("report", {})
    _check_keys(robj, _REPORT_KEYS, "report")

    manifest = args.manifest or (str(base / obj["manifest"]) if "manifest" in obj else None)
    if manifest is None:
        raise ConfigError("no manifest given (--manifest or config 'manifest')")
    out = args.out or (str(base / obj["out"]) if "out" in obj else None)
    if out is None:
        raise ConfigError("no output directory given (--out or config 'out')")

    ids = tuple(mobj.get("ids", DEFAULT_METRICS))
    seed = args.seed if args.seed is not None else mobj.get("seed")
    if seed is None and _STOCHASTIC.intersection(ids):
        raise ConfigError("a seed is required when sampled metrics are enabled (--seed or metrics.seed)")
    try:
        metrics = MetricConfig(metrics=ids, seed=int(seed or 0),
                               **{k: mobj[k] for k in _METRIC_KEYS - {"ids", "seed"} if k in mobj})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None

    models = obj.get("models")
    if models is None:
        models = load_manifest(manifest, args.strict).models or {m: {} for m in REGISTRY}
    if isinstance(models, list):
        models = {m: {} for m in models}
    unknown = [m for m in models if m not in REGISTRY]
    if unknown:
        raise ConfigError(f"unknown model(s): {', '.join(unknown)}")

    cb = obj.get("center_bias", "fit")
    if cb != "fit":
        cb = str(base / cb)
    workers = args.workers if args.workers is not None else int(obj.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return RunConfig(manifest, dict(sorted(models.items())), metrics, cb, out,
                     bool(robj.get("split", True)), bool(robj.get("plots", True)),
                     tuple(robj.get("rank_exclude", ("io", "gauss"))),
                     tuple(robj.get("top_exclude", ("io",))), workers)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_ranking(summary: Summary, metrics, exclude, path) -> None:
    rows = []
    for metric in metrics:
        if not any(k[2] == metric for k in summary):
            continue
        means = sequence_means(summary, metric, exclude)
        for rank, s in enumerate(rank_sequences(summary, metric, exclude), start=1):
            rows.append([metric, rank, s, repr(means[s])])
    _write_rows(path, ("metric", "rank", "sequence", "mean"), rows)


def write_top(summary: Summary, metrics, exclude, path) -> None:
    rows = []
    for metric in metrics:
        if not any(k[2] == metric for k in summary):
            continue
        for model, count in top_performers(summary, metric, exclude).items():
            rows.append([metric, model, count])
    _write_rows(path, ("metric", "model", "count"), rows)


def cmd_evaluate(args) -> int:
    cfg = build_run_config(args)
    bundles = load_bundles(cfg.manifest, args.strict)
    if not bundles:
        raise ConfigError("manifest lists no sequences")
    cb = None
    if cfg.metrics.needs_center_bias and cfg.center_bias != "fit":
        cb = CenterBiasModel.load(cfg.center_bias)
    result = evaluate(bundles, cfg.models, cfg.metrics, cb, cfg.workers)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    result.table.write_csv(out / "scores.csv")
    summary = aggregate(result.table, split_frame_types=cfg.split)
    summary.write_csv(out / "summary.csv", ALL)
    if cfg.split:
        summary.write_split_csv(out / "summary_by_frame_type.csv")
    write_ranking(summary, cfg.metrics.metrics, cfg.rank_exclude, out / "ranking.csv")
    write_top(summary, cfg.metrics.metrics, cfg.top_exclude, out / "top_performers.csv")
    if cfg.plots:
        write_plots(summary, out / "plots")
    if result.center_bias is not None:
        result.center_bias.save(out / "center_bias.json")
    meta = {
        "toolkit_version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.metrics.seed,
        "center_bias": None if result.center_bias is None else result.center_bias.to_dict(),
        "center_bias_source": cfg.center_bias if cb is not None else ("fit" if result.center_bias else None),
        "sequences": [b.sequence_id for b in bundles],
        "score_records": len(result.table),
        "degenerate": {f"{m}/{k}": n for (m, k), n in sorted(result.degenerate.items())},
        "frames_without_gaze": result.frames_without_gaze,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    with open(out / "run.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    if not args.config:
        raise ConfigError("synth needs --config pointing to a synth spec file")
    if not args.out:
        raise ConfigError("synth needs --out")
    try:
        specs = load_synth_specs(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read synth spec: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in synth spec line {exc.lineno}: {exc.msg}") from exc
    if args.seed is not None:
        for k, s in enumerate(specs):
            s.seed = int(args.seed) + k
    ids = [s.sequence_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ConfigError("synth sequence ids must be unique")
    models = None
    if args.models:
        models = {m: {} for m in args.models.split(",")}
        normalize_models(models)
    write_dataset([generate(s) for s in specs], args.out, models)
    return EXIT_OK


def cmd_fit_bias(args) -> int:
    if not args.manifest or not args.out:
        raise ConfigError("fit-bias needs --manifest and --out")
    bundles = load_bundles(args.manifest, args.strict)
    if not bundles:
        raise ConfigError("manifest lists no sequences")
    model = fit_bias_from_bundles(bundles)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    model.save(out)
    return EXIT_OK


def _summary_arg(args) -> Summary:
    if not args.summary:
        raise ConfigError("--summary is required")
    return Summary.read_csv(args.summary)


def cmd_rank(args) -> int:
    summary = _summary_arg(args)
    exclude = tuple(x for x in args.exclude.split(",") if x) if args.exclude is not None else ("io", "gauss")
    metrics = [args.metric] if args.metric else summary.metrics
    for m in metrics:
        if m not in summary.metrics:
            raise ConfigError(f"metric {m!r} not in summary")
    if args.out:
        write_ranking(summary, metrics, exclude, args.out)
    else:
        for m in metrics:
            for rank, s in enumerate(rank_sequences(summary, m, exclude), start=1):
                print(f"{m}\t{rank}\t{s}")
    return EXIT_OK


def cmd_top(args) -> int:
    summary = _summary_arg(args)
    exclude = tuple(x for x in args.exclude.split(",") if x) if args.exclude is not None else ("io",)
    metrics = [args.metric] if args.metric else summary.metrics
    for m in metrics:
        if m not in summary.metrics:
            raise ConfigError(f"metric {m!r} not in summary")
    if args.out:
        write_top(summary, metrics, exclude, args.out)
    else:
        for m in metrics:
            for model, count in top_performers(summary, m, exclude).items():
                print(f"{m}\t{model}\t{count}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="dataset manifest (JSON)")
    common.add_argument("--config", help="run config (evaluate) or synth spec (synth), JSON")
    common.add_argument("--out", help="output directory or file")
    common.add_argument("--seed", type=int, help="seed for control sampling / synthesis")
    common.add_argument("--workers", type=int, help="sequences scored in parallel")
    g = common.add_mutually_exclusive_group()
    g.add_argument("--strict-parse", dest="strict", action="store_true", default=True,
                   help="reject unknown keys in input files (default)")
    g.add_argument("--lenient-parse", dest="strict", action="store_false",
                   help="warn about unknown keys instead of failing")

    p = argparse.ArgumentParser(prog="cdsal", description="Compressed-domain saliency evaluation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("evaluate", parents=[common], help="score models and write reports").set_defaults(fn=cmd_evaluate)
    sp = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    sp.add_argument("--models", help="comma-separated model ids to record in the manifest")
    sp.set_defaults(fn=cmd_synth)
    sub.add_parser("fit-bias", parents=[common], help="fit the center-bias prior").set_defaults(fn=cmd_fit_bias)
    for name, fn, default in (("rank", cmd_rank, "io,gauss"), ("top", cmd_top, "io")):
        q = sub.add_parser(name, parents=[common], help=f"{name} from a summary CSV")
        q.add_argument("--summary", help="summary.csv written by evaluate")
        q.add_argument("--metric", help="metric id (default: all in the summary)")
        q.add_argument("--exclude", help=f"comma-separated model ids to exclude (default {default})")
        q.set_defaults(fn=fn)
    return p


def _report(code: int, exc: BaseException) -> int:
    print(json.dumps({"status": "error", "exit_code": code, "error": type(exc).__name__,
                      "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        return _report(EXIT_CONFIG, exc)
    except (ParseError, FitError) as exc:
        return _report(EXIT_INGEST, exc)
    except SaliencyError as exc:
        # Parameter/geometry errors raised while reading a config-driven spec.
        return _report(EXIT_CONFIG, exc)
    except Exception as exc:  # noqa: BLE001 - fatal, reported as an internal failure
        return _report(EXIT_INTERNAL, exc)


if __name__ == "__main__":
    sys.exit(main())
