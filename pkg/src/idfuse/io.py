"""File formats: crop manifests (CSV), embeddings and face observations (JSONL)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Sequence

from .errors import ParseError, ValidationError
from .types import (
    CropManifest,
    CropRecord,
    EmbeddingRecord,
    EmbeddingSet,
    FaceObservation,
    FaceObservationSet,
    MODALITIES,
)

MANIFEST_COLUMNS = [
    "label",
    "im_name",
    "frame_num",
    "x1",
    "y1",
    "x2",
    "y2",
    "conf",
    "vid_name",
    "track_id",
    "crop_id",
    "invalid",
]


def _fmt_num(value: float) -> str:
    """Canonical decimal text: integral floats drop the trailing `.0`."""
    f = float(value)
    if f.is_integer() and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _parse_int(raw: str, field: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"field {field!r}: {raw!r} is not an integer") from None


def _parse_float(raw: str, field: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"field {field!r}: {raw!r} is not a number") from None


def _parse_bool(raw: str, field: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ParseError(f"field {field!r}: {raw!r} is not 'true'/'false'")


def load_crop_manifest(path: str | Path) -> CropManifest:
    """Parse and validate a crop manifest.

    Errors name the offending line: malformed cells raise ParseError,
    invariant violations (bad boxes, duplicate im_names) raise
    ValidationError.
    """
    path = Path(path)
    records: list[CropRecord] = []
    seen_names: dict[str, int] = {}
    seen_keys: dict[tuple[str, int, int], int] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}:1: empty manifest, expected header row") from None
        if header != MANIFEST_COLUMNS:
            raise ParseError(
                f"{path}:1: header {header!r} does not match expected columns "
                f"{MANIFEST_COLUMNS!r}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ParseError(
                    f"{path}:{line}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}"
                )
            cells = dict(zip(MANIFEST_COLUMNS, row))
            try:
                record = CropRecord(
                    label=cells["label"] or None,
                    im_name=cells["im_name"],
                    frame_num=_parse_int(cells["frame_num"], "frame_num"),
                    x1=_parse_float(cells["x1"], "x1"),
                    y1=_parse_float(cells["y1"], "y1"),
                    x2=_parse_float(cells["x2"], "x2"),
                    y2=_parse_float(cells["y2"], "y2"),
                    conf=_parse_float(cells["conf"], "conf"),
                    vid_name=cells["vid_name"],
                    track_id=_parse_int(cells["track_id"], "track_id"),
                    crop_id=_parse_int(cells["crop_id"], "crop_id"),
                    invalid=_parse_bool(cells["invalid"], "invalid"),
                )
            except ParseError as exc:
                raise ParseError(f"{path}:{line}: {exc}") from None
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from None
            if record.im_name in seen_names:
                raise ValidationError(
                    f"{path}:{line}: duplicate im_name {record.im_name!r} "
                    f"(first seen at line {seen_names[record.im_name]})"
                )
            key = (record.vid_name, record.track_id, record.crop_id)
            if key in seen_keys:
                raise ValidationError(
                    f"{path}:{line}: duplicate (vid_name, track_id, crop_id) {key!r} "
                    f"(first seen at line {seen_keys[key]})"
                )
            seen_names[record.im_name] = line
            seen_keys[key] = line
            records.append(record)
    return CropManifest(records=tuple(records))


def dump_crop_manifest(manifest: CropManifest | Sequence[CropRecord], path: str | Path) -> None:
    """Write a manifest in canonical form; dump(load(dump(x))) is byte-stable."""
    records = manifest.records if isinstance(manifest, CropManifest) else tuple(manifest)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.label or "",
                    rec.im_name,
                    str(rec.frame_num),
                    _fmt_num(rec.x1),
                    _fmt_num(rec.y1),
                    _fmt_num(rec.x2),
                    _fmt_num(rec.y2),
                    _fmt_num(rec.conf),
                    rec.vid_name,
                    str(rec.track_id),
                    str(rec.crop_id),
                    "true" if rec.invalid else "false",
                ]
            )


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) for each non-empty line of a JSONL file."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_num}: invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{line_num}: expected an object")
            yield line_num, obj


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _require(obj: dict, key: str, path: Path, line: int) -> Any:
    if key not in obj:
        raise ParseError(f"{path}:{line}: missing field {key!r}")
    return obj[key]


def load_embeddings(path: str | Path, expected_modality: str) -> EmbeddingSet:
    """Load a line-delimited embedding file and re-normalize every vector.

    All records must share the expected modality and one dimensionality;
    zero vectors and duplicate sample ids are rejected.
    """
    if expected_modality not in MODALITIES:
        raise ValidationError(f"unknown modality {expected_modality!r}")
    path = Path(path)
    records: list[EmbeddingRecord] = []
    dim: Optional[int] = None
    for line, obj in read_jsonl(path):
        sample_id = _require(obj, "sample_id", path, line)
        modality = _require(obj, "modality", path, line)
        declared_dim = _require(obj, "dim", path, line)
        vector = _require(obj, "vector", path, line)
        if modality != expected_modality:
            raise ValidationError(
                f"{path}:{line}: modality {modality!r}, expected {expected_modality!r}"
            )
        if not isinstance(vector, list) or not all(
            isinstance(v, (int, float)) for v in vector
        ):
            raise ParseError(f"{path}:{line}: vector must be a list of numbers")
        if declared_dim != len(vector):
            raise ValidationError(
                f"{path}:{line}: declared dim {declared_dim} != vector length {len(vector)}"
            )
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise ValidationError(
                f"{path}:{line}: dim {len(vector)} differs from set dim {dim}"
            )
        try:
            records.append(
                EmbeddingRecord(sample_id=sample_id, modality=modality, vector=vector)
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
    try:
        return EmbeddingSet(modality=expected_modality, dim=dim or 0, records=tuple(records))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def dump_embeddings(records: Iterable[EmbeddingRecord], path: str | Path) -> None:
    rows = (
        {
            "sample_id": rec.sample_id,
            "modality": rec.modality,
            "dim": rec.dim,
            "vector": [float(v) for v in rec.vector],
        }
        for rec in records
    )
    write_jsonl(rows, path)


def _parse_point(value: Any, field: str, path: Path, line: int) -> Optional[tuple[float, float]]:
    if value is None:
        return None
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise ParseError(f"{path}:{line}: field {field!r} must be [x, y] or null")
    return (float(value[0]), float(value[1]))


def load_face_observations(
    path: str | Path, face_embeddings: Optional[EmbeddingSet] = None
) -> FaceObservationSet:
    """Load face observations, grouped by sample id in file order.

    When `face_embeddings` is given, each observation's has_face_embedding
    flag records whether a face vector exists for its crop.
    """
    path = Path(path)
    grouped: dict[str, list[FaceObservation]] = {}
    for line, obj in read_jsonl(path):
        sample_id = _require(obj, "sample_id", path, line)
        box = _require(obj, "box", path, line)
        det_conf = _require(obj, "det_conf", path, line)
        if (
            not isinstance(box, list)
            or len(box) != 4
            or not all(isinstance(v, (int, float)) for v in box)
        ):
            raise ParseError(f"{path}:{line}: box must be [x1, y1, x2, y2]")
        try:
            obs = FaceObservation(
                sample_id=sample_id,
                box=(float(box[0]), float(box[1]), float(box[2]), float(box[3])),
                det_conf=float(det_conf),
                left_eye=_parse_point(obj.get("left_eye"), "left_eye", path, line),
                right_eye=_parse_point(obj.get("right_eye"), "right_eye", path, line),
                nose=_parse_point(obj.get("nose"), "nose", path, line),
                has_face_embedding=(
                    face_embeddings is not None and sample_id in face_embeddings
                ),
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
        grouped.setdefault(sample_id, []).append(obs)
    return FaceObservationSet(by_sample={k: tuple(v) for k, v in grouped.items()})


def dump_face_observations(
    observations: Iterable[FaceObservation], path: str | Path
) -> None:
    def point(p: Optional[tuple[float, float]]) -> Optional[list[float]]:
        return None if p is None else [float(p[0]), float(p[1])]

    rows = (
        {
            "sample_id": obs.sample_id,
            "box": [float(v) for v in obs.box],
            "det_conf": float(obs.det_conf),
            "left_eye": point(obs.left_eye),
            "right_eye": point(obs.right_eye),
            "nose": point(obs.nose),
        }
        for obs in observations
    )
    write_jsonl(rows, path)


def jsonable_float(value: float) -> Optional[float]:
    """Map non-finite floats to None for strict-JSON emission."""
    return None if math.isinf(value) or math.isnan(value) else float(value)
