"""JSON-lines storage for sub-action datasets and pseudo-composites.

One sequence per line::

    {"id": "...", "class_id": 3, "fps": 20.0, "joints": [[[x, y, z] x 24] x T]}

Composite files add ``"lambda"``, ``"sources"`` (two ids), ``"source_classes"``
and ``"mixed_label"`` (class weights) and set ``class_id`` to -1.  An optional
``labels.json`` next to the data maps class ids to names.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .coupling import PseudoComposite
from .skeleton import NUM_JOINTS, ActionLabel, MixedLabel, MotionSequence

PathLike = Union[str, Path]
LABELS_FILE = "labels.json"


class DatasetError(ValueError):
    """A dataset line failed parsing or validation."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def _dump_line(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def _sequence_record(seq: MotionSequence, class_id: int) -> dict:
    return {"id": seq.id, "class_id": class_id, "fps": seq.fps, "joints": seq.joints.tolist()}


def _write_lines(lines: Sequence[str], path: PathLike) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset {path}: {exc.strerror or exc}") from exc


def save_dataset(sequences: Sequence[MotionSequence], path: PathLike, label_names: Optional[Sequence[str]] = None) -> None:
    lines = []
    for seq in sequences:
        if not isinstance(seq.label, ActionLabel):
            raise ValueError(f"sequence {seq.id!r} has a mixed label; use save_composites")
        lines.append(_dump_line(_sequence_record(seq, seq.label.class_id)))
    _write_lines(lines, path)
    if label_names is not None:
        save_label_names(label_names, Path(path).parent / LABELS_FILE)


def save_label_names(names: Sequence[str], path: PathLike) -> None:
    Path(path).write_text(json.dumps({str(i): n for i, n in enumerate(names)}, indent=2) + "\n")


def load_label_names(path: PathLike) -> Dict[int, str]:
    return {int(k): v for k, v in json.loads(Path(path).read_text()).items()}


def _require(record: dict, key: str, kind, path, line):
    if key not in record:
        raise DatasetError(f"missing field {key!r}", path, line)
    value = record[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise DatasetError(f"field {key!r} must be an integer", path, line)
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise DatasetError(f"field {key!r} must be a number", path, line)
    if kind is str and not isinstance(value, str):
        raise DatasetError(f"field {key!r} must be a string", path, line)
    return value


def _parse_joints(raw, path, line) -> np.ndarray:
    if not isinstance(raw, list):
        raise DatasetError("field 'joints' must be a list of frames", path, line)
    for t, frame in enumerate(raw):
        if not isinstance(frame, list) or len(frame) != NUM_JOINTS:
            n = len(frame) if isinstance(frame, list) else "non-list"
            raise DatasetError(f"frame {t} has {n} joints, expected {NUM_JOINTS}", path, line)
        for n, point in enumerate(frame):
            if not isinstance(point, list) or len(point) != 3:
                raise DatasetError(f"frame {t} joint {n} is not an [x, y, z] triple", path, line)
    try:
        arr = np.array(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise DatasetError("field 'joints' holds non-numeric coordinates", path, line) from None
    return arr


def _read_records(path: PathLike):
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(record, dict):
                raise DatasetError("line is not a JSON object", path, lineno)
            yield lineno, record


def _build_sequence(record, label, path, lineno) -> MotionSequence:
    joints = _parse_joints(record["joints"], path, lineno) if "joints" in record else None
    if joints is None:
        raise DatasetError("missing field 'joints'", path, lineno)
    try:
        return MotionSequence(joints, label, float(_require(record, "fps", float, path, lineno)), record["id"])
    except ValueError as exc:
        if isinstance(exc, DatasetError):
            raise
        raise DatasetError(str(exc), path, lineno) from None


def load_dataset(path: PathLike, num_classes: Optional[int] = None) -> List[MotionSequence]:
    """Load sub-action sequences.

    ``num_classes`` defaults to the size of a sibling ``labels.json`` if one
    exists, otherwise to one more than the largest class id in the file.
    """
    path = Path(path)
    raw = []
    for lineno, record in _read_records(path):
        _require(record, "id", str, path, lineno)
        cid = _require(record, "class_id", int, path, lineno)
        if cid < 0:
            raise DatasetError(f"class_id must be non-negative, got {cid}", path, lineno)
        raw.append((lineno, record, cid))
    if num_classes is None:
        labels = path.parent / LABELS_FILE
        if labels.exists():
            num_classes = len(load_label_names(labels))
        else:
            num_classes = max((cid for _, _, cid in raw), default=-1) + 1
    out = []
    for lineno, record, cid in raw:
        if cid >= num_classes:
            raise DatasetError(f"class_id {cid} outside [0, {num_classes})", path, lineno)
        out.append(_build_sequence(record, ActionLabel(cid, num_classes), path, lineno))
    return out


def save_composites(composites: Sequence[PseudoComposite], path: PathLike) -> None:
    lines = []
    for comp in composites:
        record = _sequence_record(comp.sequence, -1)
        record["lambda"] = comp.lam
        record["sources"] = list(comp.source_ids)
        record["source_classes"] = list(comp.source_classes)
        record["mixed_label"] = comp.mixed_label.weights.tolist()
        lines.append(_dump_line(record))
    _write_lines(lines, path)


def load_composites(path: PathLike) -> List[PseudoComposite]:
    path = Path(path)
    out = []
    for lineno, record in _read_records(path):
        _require(record, "id", str, path, lineno)
        lam = float(_require(record, "lambda", float, path, lineno))
        sources = record.get("sources")
        classes = record.get("source_classes")
        weights = record.get("mixed_label")
        if not (isinstance(sources, list) and len(sources) == 2 and all(isinstance(s, str) for s in sources)):
            raise DatasetError("field 'sources' must hold two sequence ids", path, lineno)
        if not (isinstance(classes, list) and len(classes) == 2 and all(isinstance(c, int) for c in classes)):
            raise DatasetError("field 'source_classes' must hold two class ids", path, lineno)
        if not isinstance(weights, list):
            raise DatasetError("field 'mixed_label' must be a list of weights", path, lineno)
        try:
            label = MixedLabel(np.array(weights, dtype=np.float64))
            seq = _build_sequence(record, label, path, lineno)
            out.append(PseudoComposite(seq, lam, tuple(sources), tuple(classes)))
        except DatasetError:
            raise
        except (TypeError, ValueError) as exc:
            raise DatasetError(str(exc), path, lineno) from None
    return out
