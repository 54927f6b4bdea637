"""Readers and writers for feature streams, gaze tables and manifests.

File formats
------------
``*.featjsonl``
    One JSON object per line and frame::

        {"frame":0,"type":"I","block_size":8,"grid_w":44,"grid_h":36,
         "blocks":[{"dct":[...],"bits":12}, ...]}

    P-frame blocks additionally carry ``"mv":[dx,dy]`` in quarter-pel units.
    Blocks are listed in row-major order.  Integers only.

gaze ``*.csv``
    Header ``sequence,frame,observer,viewing,x,y``; ``viewing`` is
    ``primary`` or ``counterpart``; ``x``/``y`` are display pixels.

manifest (JSON)
    ``{"sequences": [{"id", "features", "gaze", "geometry", "gaze_to_map_scale"}],
    "models": {...}}``.  Relative paths resolve against the manifest directory.

Every reader rejects unknown keys unless ``strict=False``, in which case
they are reported through :mod:`warnings` and ignored.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .core import (GEOMETRY_FIELDS, FrameFeatures, FrameType, GazePoint,
                   Viewing, ViewingGeometry)
from .errors import GeometryError, ParseError, SaliencyError

GAZE_HEADER = ("sequence", "frame", "observer", "viewing", "x", "y")
_FRAME_KEYS = ("frame", "type", "block_size", "grid_w", "grid_h", "blocks")
_BLOCK_KEYS = ("mv", "dct", "bits")
_SEQUENCE_KEYS = ("id", "features", "gaze", "geometry", "gaze_to_map_scale")
_MANIFEST_KEYS = ("sequences", "models")


def _unknown(keys, allowed, strict, what, path, line=None):
    extra = sorted(set(keys) - set(allowed))
    if not extra:
        return
    msg = f"unknown {what} key(s): {', '.join(extra)}"
    if strict:
        raise ParseError(msg, path, line)
    warnings.warn(f"{path}: {msg}" + (f" (line {line})" if line else ""), stacklevel=3)


def _int(value, what, path, line):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{what} must be an integer, got {value!r}", path, line)
    return value


# ---------------------------------------------------------------- features

def parse_frame(obj, path=None, line=None, strict=True) -> FrameFeatures:
    if not isinstance(obj, dict):
        raise ParseError("frame record must be a JSON object", path, line)
    _unknown(obj.keys(), _FRAME_KEYS, strict, "frame", path, line)
    missing = [k for k in _FRAME_KEYS if k not in obj]
    if missing:
        raise ParseError(f"missing key(s): {', '.join(missing)}", path, line)
    frame = _int(obj["frame"], "frame", path, line)
    if obj["type"] not in ("I", "P"):
        raise ParseError(f"type must be 'I' or 'P', got {obj['type']!r}", path, line, frame)
    ftype = FrameType(obj["type"])
    block_size = _int(obj["block_size"], "block_size", path, line)
    gw = _int(obj["grid_w"], "grid_w", path, line)
    gh = _int(obj["grid_h"], "grid_h", path, line)
    blocks = obj["blocks"]
    if not isinstance(blocks, list) or len(blocks) != gw * gh:
        raise ParseError(f"expected {gw * gh} blocks", path, line, frame)
    dct, bits, mvs = [], [], []
    for b in blocks:
        if not isinstance(b, dict):
            raise ParseError("block must be a JSON object", path, line, frame)
        _unknown(b.keys(), _BLOCK_KEYS, strict, "block", path, line)
        if "dct" not in b or "bits" not in b:
            raise ParseError("block needs 'dct' and 'bits'", path, line, frame)
        if not isinstance(b["dct"], list):
            raise ParseError("dct must be a list", path, line, frame)
        dct.append([_int(c, "dct coefficient", path, line) for c in b["dct"]])
        bits.append(_int(b["bits"], "bits", path, line))
        if "mv" in b:
            if ftype is FrameType.I:
                raise ParseError("I-frame block carries a motion vector", path, line, frame)
            mv = b["mv"]
            if not isinstance(mv, list) or len(mv) != 2:
                raise ParseError("mv must be [dx, dy]", path, line, frame)
            mvs.append([_int(c, "mv component", path, line) for c in mv])
        elif ftype is FrameType.P:
            raise ParseError("P-frame block without a motion vector", path, line, frame)
    try:
        return FrameFeatures(frame=frame, frame_type=ftype, block_size=block_size,
                             grid_w=gw, grid_h=gh, dct=dct, bits=bits,
                             mv=mvs if ftype is FrameType.P else None)
    except SaliencyError as exc:
        raise ParseError(str(exc), path, line, frame) from exc


def frame_to_json(f: FrameFeatures) -> str:
    """Canonical single-line encoding of one frame."""
    blocks = []
    bits = f.bits.ravel()
    mv = None if f.mv is None else f.mv.reshape(-1, 2)
    for i, coeffs in enumerate(f.dct):
        b = {}
        if mv is not None:
            b["mv"] = [int(mv[i, 0]), int(mv[i, 1])]
        b["dct"] = list(coeffs)
        b["bits"] = int(bits[i])
        blocks.append(b)
    obj = {"frame": f.frame, "type": f.frame_type.value, "block_size": f.block_size,
           "grid_w": f.grid_w, "grid_h": f.grid_h, "blocks": blocks}
    return json.dumps(obj, separators=(",", ":"))


def load_features(path, strict: bool = True) -> list:
    """Read a ``.featjsonl`` file into a list of :class:`FrameFeatures` ordered by frame."""
    path = Path(path)
    frames = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from exc
            frames.append(parse_frame(obj, path, lineno, strict))
    frames.sort(key=lambda f: f.frame)
    for expected, f in enumerate(frames):
        if f.frame != expected:
            raise ParseError(f"frames not contiguous from 0 (expected {expected})", path, frame=f.frame)
    return frames


def write_features(frames: Iterable[FrameFeatures], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in frames:
            fh.write(frame_to_json(f))
            fh.write("\n")


# ---------------------------------------------------------------- gaze

class GazeTable:
    """Gaze points keyed by ``(observer, viewing, frame)``.

    Coordinates are stored as float arrays; :meth:`points` is the fast path
    used by models and metrics.
    """

    def __init__(self, rows: Iterable[GazePoint], sequence: str = ""):
        rows = list(rows)
        self.sequence = sequence
        self.frame = np.array([r.frame for r in rows], dtype=np.int64)
        self.x = np.array([r.x for r in rows], dtype=np.float64)
        self.y = np.array([r.y for r in rows], dtype=np.float64)
        self.observer = [r.observer for r in rows]
        self.viewing = [Viewing(r.viewing) for r in rows]
        self._key = {}
        for i, r in enumerate(rows):
            k = (r.observer, Viewing(r.viewing), r.frame)
            if k in self._key:
                raise ParseError(f"duplicate gaze key {k[0]}/{k[1].value}/frame {k[2]}")
            self._key[k] = i
        self._by_frame = {}
        for i, r in enumerate(rows):
            self._by_frame.setdefault((Viewing(r.viewing), r.frame), []).append(i)
        self._by_frame = {k: np.array(v, dtype=np.intp) for k, v in self._by_frame.items()}

    def __len__(self):
        return len(self.frame)

    def __iter__(self):
        for i in range(len(self)):
            yield self.row(i)

    def row(self, i: int) -> GazePoint:
        return GazePoint(float(self.x[i]), float(self.y[i]), int(self.frame[i]),
                         self.observer[i], self.viewing[i])

    def lookup(self, observer: str, viewing, frame: int) -> GazePoint:
        return self.row(self._key[(observer, Viewing(viewing), frame)])

    def points(self, frame: int, viewing=Viewing.primary) -> np.ndarray:
        """``(n, 2)`` array of ``(x, y)`` display coordinates for one frame and viewing."""
        idx = self._by_frame.get((Viewing(viewing), frame))
        if idx is None:
            return np.empty((0, 2))
        return np.stack([self.x[idx], self.y[idx]], axis=1)

    def has_viewing(self, viewing) -> bool:
        v = Viewing(viewing)
        return any(k[0] is v for k in self._by_frame)

    @property
    def observers(self) -> list:
        return sorted(set(self.observer))

    @property
    def max_frame(self) -> int:
        return int(self.frame.max()) if len(self) else -1


def _check_bounds(p: GazePoint, geom: ViewingGeometry, path, line):
    if not (0 <= p.x < geom.display_w_px and 0 <= p.y < geom.display_h_px):
        raise ParseError(f"gaze ({p.x}, {p.y}) outside display "
                         f"{geom.display_w_px}x{geom.display_h_px}", path, line, p.frame)


def load_gaze(path, geometry: Optional[ViewingGeometry] = None, sequence: Optional[str] = None,
              strict: bool = True) -> GazeTable:
    """Read a gaze CSV.  With ``geometry`` given, coordinates must lie in the display region."""
    path = Path(path)
    rows = []
    seen = {}
    seq_name = sequence
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty gaze file", path, 1) from None
        header = [h.strip() for h in header]
        missing = [h for h in GAZE_HEADER if h not in header]
        if missing:
            raise ParseError(f"gaze header lacks {', '.join(missing)}", path, 1)
        _unknown(header, GAZE_HEADER, strict, "gaze column", path, 1)
        col = {h: header.index(h) for h in GAZE_HEADER}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", path, lineno)
            get = lambda k: rec[col[k]].strip()  # noqa: E731
            try:
                frame = int(get("frame"))
                x, y = float(get("x")), float(get("y"))
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", path, lineno) from None
            if frame < 0:
                raise ParseError("negative frame index", path, lineno)
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError("non-finite coordinate", path, lineno, frame)
            if get("viewing") not in ("primary", "counterpart"):
                raise ParseError(f"unknown viewing label {get('viewing')!r}", path, lineno, frame)
            seq = get("sequence")
            if seq_name is None:
                seq_name = seq
            elif seq != seq_name:
                raise ParseError(f"row belongs to sequence {seq!r}, expected {seq_name!r}", path, lineno)
            p = GazePoint(x, y, frame, get("observer"), Viewing(get("viewing")))
            if geometry is not None:
                _check_bounds(p, geometry, path, lineno)
            key = (p.observer, p.viewing, p.frame)
            if key in seen:
                raise ParseError(f"duplicate key observer={p.observer} viewing={p.viewing.value} "
                                 f"frame={p.frame} (first on line {seen[key]})", path, lineno, frame)
            seen[key] = lineno
            rows.append(p)
    return GazeTable(rows, sequence=seq_name or "")


def write_gaze(table: GazeTable, path, sequence: Optional[str] = None) -> None:
    seq = table.sequence if sequence is None else sequence
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GAZE_HEADER)
        for p in table:
            w.writerow([seq, p.frame, p.observer, p.viewing.value, repr(p.x), repr(p.y)])


# ---------------------------------------------------------------- manifest / bundles

@dataclass(frozen=True)
class SequenceEntry:
    id: str
    features: Path
    gaze: Path
    geometry: ViewingGeometry
    gaze_to_map_scale: float = 1.0


@dataclass
class Manifest:
    path: Optional[Path]
    sequences: list
    models: dict = field(default_factory=dict)


@dataclass
class SequenceBundle:
    sequence_id: str
    geometry: ViewingGeometry
    frames: list
    gaze: GazeTable
    gaze_to_map_scale: float = 1.0

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def map_size(self) -> tuple:
        """``(width, height)`` of saliency maps for this sequence."""
        return (int(round(self.geometry.display_w_px * self.gaze_to_map_scale)),
                int(round(self.geometry.display_h_px * self.gaze_to_map_scale)))

    def validate(self) -> None:
        for expected, f in enumerate(self.frames):
            if f.frame != expected:
                raise ParseError(f"frames not contiguous from 0 (expected {expected})",
                                 self.sequence_id, frame=f.frame)
        if len(self.gaze) and self.gaze.max_frame >= self.frame_count:
            raise ParseError(f"gaze references frame {self.gaze.max_frame} of a "
                             f"{self.frame_count}-frame sequence", self.sequence_id)
        w, h = self.map_size
        for f in self.frames:
            try:
                f.validate(w, h)
            except SaliencyError as exc:
                raise ParseError(str(exc), self.sequence_id, frame=f.frame) from exc
        for i in range(len(self.gaze)):
            p = self.gaze.row(i)
            if not (0 <= p.x < self.geometry.display_w_px and 0 <= p.y < self.geometry.display_h_px):
                raise ParseError(f"gaze ({p.x}, {p.y}) outside display", self.sequence_id, frame=p.frame)


def parse_geometry(obj, path=None, strict=True) -> ViewingGeometry:
    if not isinstance(obj, dict):
        raise ParseError("geometry must be an object", path)
    _unknown(obj.keys(), GEOMETRY_FIELDS, strict, "geometry", path)
    missing = [k for k in GEOMETRY_FIELDS if k not in obj]
    if missing:
        raise ParseError(f"geometry lacks {', '.join(missing)}", path)
    try:
        return ViewingGeometry(**{k: obj[k] for k in GEOMETRY_FIELDS})
    except GeometryError as exc:
        raise ParseError(str(exc), path) from exc


def load_manifest(path, strict: bool = True) -> Manifest:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
    except OSError as exc:
        raise ParseError(f"cannot read manifest: {exc.strerror}", path) from exc
    if not isinstance(obj, dict) or "sequences" not in obj:
        raise ParseError("manifest needs a 'sequences' list", path)
    _unknown(obj.keys(), _MANIFEST_KEYS, strict, "manifest", path)
    seqs = obj["sequences"]
    if not isinstance(seqs, list):
        raise ParseError("'sequences' must be a list", path)
    base = path.parent
    entries, ids = [], set()
    for s in seqs:
        if not isinstance(s, dict):
            raise ParseError("sequence entry must be an object", path)
        _unknown(s.keys(), _SEQUENCE_KEYS, strict, "sequence", path)
        missing = [k for k in _SEQUENCE_KEYS[:4] if k not in s]
        if missing:
            raise ParseError(f"sequence entry lacks {', '.join(missing)}", path)
        sid = str(s["id"])
        if sid in ids:
            raise ParseError(f"duplicate sequence id {sid!r}", path)
        ids.add(sid)
        scale = s.get("gaze_to_map_scale", 1.0)
        if isinstance(scale, bool) or not isinstance(scale, (int, float)) or not scale > 0:
            raise ParseError(f"{sid}: gaze_to_map_scale must be a positive number", path)
        entries.append(SequenceEntry(sid, base / s["features"], base / s["gaze"],
                                     parse_geometry(s["geometry"], path, strict), float(scale)))
    models = obj.get("models", {})
    if not isinstance(models, dict):
        raise ParseError("'models' must be an object", path)
    return Manifest(path, entries, models)


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        p = Path(p).resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return str(p)

    obj = {"sequences": [
        {"id": e.id, "features": rel(e.features), "gaze": rel(e.gaze),
         "geometry": e.geometry.to_dict(), "gaze_to_map_scale": e.gaze_to_map_scale}
        for e in manifest.sequences]}
    if manifest.models:
        obj["models"] = manifest.models
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_entry(entry: SequenceEntry, strict: bool = True) -> SequenceBundle:
    for p in (entry.features, entry.gaze):
        if not Path(p).is_file():
            raise ParseError(f"dangling file reference {p}", entry.id)
    frames = load_features(entry.features, strict)
    gaze = load_gaze(entry.gaze, entry.geometry, sequence=entry.id, strict=strict)
    bundle = SequenceBundle(entry.id, entry.geometry, frames, gaze, entry.gaze_to_map_scale)
    bundle.validate()
    return bundle


def load_bundles(manifest_path, strict: bool = True) -> list:
    """Every sequence of a manifest, cross-validated, in manifest order."""
    m = load_manifest(manifest_path, strict)
    return [load_entry(e, strict) for e in m.sequences]


def load_bundle(manifest_path, sequence_id: Optional[str] = None, strict: bool = True) -> SequenceBundle:
    m = load_manifest(manifest_path, strict)
    entries = m.sequences
    if sequence_id is not None:
        entries = [e for e in entries if e.id == sequence_id]
    if len(entries) != 1:
        raise ParseError(f"expected exactly one matching sequence, found {len(entries)}", manifest_path)
    return load_entry(entries[0], strict)
