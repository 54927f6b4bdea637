"""Score tables, mean/SEM summaries, sequence ranking and top-performer counts."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ConfigError, ParseError

SCORE_HEADER = ("model", "sequence", "frame", "frame_type", "metric", "value")
SUMMARY_HEADER = ("model", "sequence", "metric", "mean", "sem", "ci_low", "ci_high", "n")
SPLIT_HEADER = ("model", "sequence", "frame_type", "metric", "mean", "sem", "ci_low", "ci_high", "n")
UNSCORED = "unscored"
ALL = "all"        # pooled frame types
ANY = "*"          # marginal over sequences
Z95 = 1.96


@dataclass(frozen=True)
class ScoreRecord:
    model: str
    sequence: str
    frame: int
    frame_type: str
    metric: str
    value: Optional[float]

    @property
    def key(self):
        return (self.model, self.sequence, self.frame, self.metric)


def _fmt(v: Optional[float]) -> str:
    if v is None:
        return UNSCORED
    return repr(float(v))


class ScoreTable:
    """Frame-level scores, at most one per ``(model, sequence, frame, metric)``."""

    def __init__(self, records: Iterable[ScoreRecord] = ()):
        self._records = {}
        for r in records:
            self.add(r)

    def add(self, r: ScoreRecord) -> None:
        if r.key in self._records:
            raise ValueError(f"duplicate score record {r.key}")
        if r.value is not None and math.isnan(r.value):
            raise ValueError(f"NaN score for {r.key}")
        self._records[r.key] = r

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self.records())

    def records(self) -> list:
        """Records in canonical (model, sequence, frame, metric) order."""
        return [self._records[k] for k in sorted(self._records)]

    @property
    def models(self):
        return sorted({r.model for r in self._records.values()})

    @property
    def sequences(self):
        return sorted({r.sequence for r in self._records.values()})

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCORE_HEADER)
            for r in self.records():
                w.writerow([r.model, r.sequence, r.frame, r.frame_type, r.metric, _fmt(r.value)])

    @classmethod
    def read_csv(cls, path) -> "ScoreTable":
        table = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != SCORE_HEADER:
                raise ParseError(f"expected header {','.join(SCORE_HEADER)}", path, 1)
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(SCORE_HEADER):
                    raise ParseError("wrong field count", path, lineno)
                try:
                    value = None if row[5] == UNSCORED else float(row[5])
                    table.add(ScoreRecord(row[0], row[1], int(row[2]), row[3], row[4], value))
                except ValueError as exc:
                    raise ParseError(str(exc), path, lineno) from None
        return table


@dataclass(frozen=True)
class Cell:
    """Mean, SEM and normal-approximation 95% CI of one group of scores.

    ``n`` counts finite scores only; ``skipped`` counts unscored or infinite
    values.  An empty cell has ``n == 0`` and ``mean is None``.
    """

    mean: Optional[float]
    sem: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    n: int
    skipped: int = 0

    @property
    def empty(self) -> bool:
        return self.n == 0


def describe(values, skipped: int = 0) -> Cell:
    vals = [float(v) for v in values]
    n = len(vals)
    if n == 0:
        return Cell(None, None, None, None, 0, skipped)
    mean = math.fsum(vals) / n
    if n > 1:
        sd = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1))
        sem = sd / math.sqrt(n)
    else:
        sem = 0.0
    return Cell(mean, sem, mean - Z95 * sem, mean + Z95 * sem, n, skipped)


class Summary(dict):
    """``{(model, sequence, metric, frame_type): Cell}``.

    ``sequence == "*"`` rows are marginals over sequences, ``frame_type ==
    "all"`` rows pool every frame a model scored.
    """

    def cell(self, model, sequence, metric, frame_type=ALL) -> Cell:
        return self[(model, sequence, metric, frame_type)]

    @property
    def models(self):
        return sorted({k[0] for k in self})

    @property
    def sequences(self):
        return sorted({k[1] for k in self if k[1] != ANY})

    @property
    def metrics(self):
        return sorted({k[2] for k in self})

    def write_csv(self, path, frame_type: str = ALL) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            for (m, s, metric, ft), c in sorted(self.items()):
                if ft == frame_type:
                    w.writerow([m, s, metric, _fmt(c.mean), _fmt(c.sem), _fmt(c.ci_low), _fmt(c.ci_high), c.n])

    def write_split_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SPLIT_HEADER)
            for (m, s, metric, ft), c in sorted(self.items()):
                w.writerow([m, s, ft, metric, _fmt(c.mean), _fmt(c.sem), _fmt(c.ci_low), _fmt(c.ci_high), c.n])

    @classmethod
    def read_csv(cls, path) -> "Summary":
        out = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            split = header == SPLIT_HEADER
            if not split and header != SUMMARY_HEADER:
                raise ParseError("unrecognised summary header", path, 1)
            for lineno, row in enumerate(reader, start=2):
                try:
                    if split:
                        m, s, ft, metric, *nums = row
                    else:
                        (m, s, metric, *nums), ft = row, ALL
                    mean, sem, lo, hi = (None if v == UNSCORED else float(v) for v in nums[:4])
                    out[(m, s, metric, ft)] = Cell(mean, sem, lo, hi, int(nums[4]))
                except ValueError as exc:
                    raise ParseError(str(exc), path, lineno) from None
        return out


def aggregate(table, split_frame_types: bool = True) -> Summary:
    """Per (model, sequence, metric) cells plus sequence marginals.

    Pooled (``frame_type="all"``) cells are always produced; per-type cells
    are added when ``split_frame_types`` is true.  Unscored and infinite
    values are excluded from ``n`` and counted in ``skipped``.
    """
    records = table.records() if isinstance(table, ScoreTable) else list(table)
    if not records:
        raise ValueError("cannot aggregate an empty score table")
    groups = defaultdict(list)
    skipped = defaultdict(int)
    for r in records:
        fts = (ALL, r.frame_type) if split_frame_types else (ALL,)
        for seq in (r.sequence, ANY):
            for ft in fts:
                key = (r.model, seq, r.metric, ft)
                if r.value is None or not math.isfinite(r.value):
                    skipped[key] += 1
                    groups.setdefault(key, [])
                else:
                    groups[key].append(r.value)
    return Summary({k: describe(sorted(v), skipped.get(k, 0)) for k, v in groups.items()})


def _cells(summary: Summary, metric: str, frame_type: str = ALL):
    cells = {(k[0], k[1]): c for k, c in summary.items()
             if k[2] == metric and k[3] == frame_type and k[1] != ANY}
    if not cells:
        raise ConfigError(f"metric {metric!r} not present in summary")
    return cells


def sequence_means(summary: Summary, metric: str, exclude=(), frame_type: str = ALL) -> dict:
    """Average over included models of each model's mean score, per sequence."""
    per_seq = defaultdict(list)
    for (model, seq), c in _cells(summary, metric, frame_type).items():
        if model in exclude or c.empty:
            continue
        per_seq[seq].append(c.mean)
    return {s: math.fsum(v) / len(v) for s, v in per_seq.items() if v}


def rank_sequences(summary: Summary, metric: str, exclude=("io", "gauss"), frame_type: str = ALL) -> list:
    """Sequences by decreasing average score; ties broken by sequence id."""
    means = sequence_means(summary, metric, exclude, frame_type)
    return sorted(means, key=lambda s: (-means[s], s))


def overlaps(a: Cell, b: Cell) -> bool:
    return a.ci_low <= b.ci_high and b.ci_low <= a.ci_high


def top_performers(summary: Summary, metric: str, exclude=("io",), frame_type: str = ALL) -> dict:
    """Count, per model, the sequences on which it is a top performer.

    On each sequence the best model has the highest mean (ties: smallest
    id); every model whose 95% CI overlaps the best one's is a top performer.
    """
    by_seq = defaultdict(dict)
    for (model, seq), c in _cells(summary, metric, frame_type).items():
        if model in exclude:
            continue
        by_seq[seq][model] = c
    counts = {m: 0 for seq in by_seq.values() for m in seq}
    for seq, cells in by_seq.items():
        live = {m: c for m, c in cells.items() if not c.empty}
        if not live:
            continue
        best = min(live, key=lambda m: (-live[m].mean, m))
        for m, c in live.items():
            if overlaps(c, live[best]):
                counts[m] += 1
    return dict(sorted(counts.items()))
