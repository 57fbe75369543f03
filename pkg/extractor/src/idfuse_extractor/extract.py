"""Run the models over crops and emit the engine's input files.

The emitted files are the whole contract with the engine: a JSONL
embedding file per modality and a JSONL face-observation file, all keyed
by the crop's im_name. Nothing here scores, labels, or ranks anything.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .config import ExtractorConfig
from .errors import ExtractorError, ManifestError
from .models import FaceDetection, load_face_model, load_reid_model

logger = logging.getLogger("idfuse_extractor")

# Column order of the crop manifest format; im_name is the sample key.
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

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp"}


@dataclass(frozen=True)
class ExtractReport:
    """What a run produced, for logs and tests."""

    n_crops: int
    n_reid: int
    n_observations: int
    n_face_embeddings: int
    skipped: tuple[str, ...]


def manifest_im_names(path: Path) -> list[str]:
    """Read the im_name column of a crop manifest in file order."""
    names: list[str] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}:1: empty manifest, expected header row") from None
        if header != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}:1: header {header!r} does not match expected columns "
                f"{MANIFEST_COLUMNS!r}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"{path}:{line}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}"
                )
            im_name = row[MANIFEST_COLUMNS.index("im_name")]
            if not im_name:
                raise ManifestError(f"{path}:{line}: empty im_name")
            if im_name in seen:
                raise ManifestError(
                    f"{path}:{line}: duplicate im_name {im_name!r} "
                    f"(first seen at line {seen[im_name]})"
                )
            seen[im_name] = line
            names.append(im_name)
    return names


def _crop_names(config: ExtractorConfig) -> list[str]:
    if config.manifest is not None:
        return manifest_im_names(config.manifest)
    if not config.crop_dir.is_dir():
        raise ExtractorError(f"crop directory {config.crop_dir} does not exist")
    return sorted(
        p.name for p in config.crop_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )


def _batches(names: Sequence[str], size: int) -> Iterator[Sequence[str]]:
    for start in range(0, len(names), size):
        yield names[start : start + size]


def _load_image(path: Path) -> Optional[np.ndarray]:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        logger.warning("skipping unreadable crop %s: %s", path.name, exc)
        return None


def _write_jsonl(rows: Iterable[dict], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _embedding_row(sample_id: str, modality: str, vector: np.ndarray, dim: int) -> dict:
    if vector.shape != (dim,):
        raise ExtractorError(
            f"{modality} vector for {sample_id!r} has shape {vector.shape}, "
            f"model dim is {dim}"
        )
    return {
        "sample_id": sample_id,
        "modality": modality,
        "dim": dim,
        "vector": [float(v) for v in vector],
    }


def _observation_row(sample_id: str, det: FaceDetection) -> dict:
    return {
        "sample_id": sample_id,
        "box": [float(v) for v in det.box],
        "det_conf": float(det.det_conf),
        "left_eye": [float(det.left_eye[0]), float(det.left_eye[1])],
        "right_eye": [float(det.right_eye[0]), float(det.right_eye[1])],
        "nose": [float(det.nose[0]), float(det.nose[1])],
    }


def extract(config: ExtractorConfig) -> ExtractReport:
    """Run both models over every crop and write the three output files.

    Unreadable images are logged and skipped; they appear in no output.
    Every readable crop yields one body embedding; crops with a detected
    face add one observation and, when the patch has signal, one face
    embedding. Inference is batched, each file is written once at the end.
    """
    reid_model = load_reid_model(config.reid_model)
    face_model = load_face_model(config.face_model)
    names = _crop_names(config)

    reid_rows: list[dict] = []
    face_rows: list[dict] = []
    obs_rows: list[dict] = []
    skipped: list[str] = []

    for batch in _batches(names, config.batch_size):
        images: list[np.ndarray] = []
        kept: list[str] = []
        for name in batch:
            image = _load_image(config.crop_dir / name)
            if image is None:
                skipped.append(name)
                continue
            images.append(image)
            kept.append(name)
        if not kept:
            continue
        vectors = reid_model.embed_batch(images)
        for name, vector, image in zip(kept, vectors, images):
            reid_rows.append(_embedding_row(name, "reid", vector, reid_model.dim))
            for det in face_model.detect(image):
                obs_rows.append(_observation_row(name, det))
                if det.embedding is not None:
                    face_rows.append(
                        _embedding_row(name, "face", det.embedding, face_model.dim)
                    )

    _write_jsonl(reid_rows, config.reid_out)
    _write_jsonl(face_rows, config.face_out)
    _write_jsonl(obs_rows, config.observations_out)
    return ExtractReport(
        n_crops=len(names),
        n_reid=len(reid_rows),
        n_observations=len(obs_rows),
        n_face_embeddings=len(face_rows),
        skipped=tuple(skipped),
    )
