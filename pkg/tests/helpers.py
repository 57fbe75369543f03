"""Shared builders for tests: compact constructors for domain objects."""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from idfuse.types import (
    CropRecord,
    EmbeddingRecord,
    EmbeddingSet,
    FaceObservation,
    FaceObservationSet,
    Gallery,
    ORIGINAL_LABELED,
)

# Keypoints sit inside this box, so verification passes by default.
DEFAULT_BOX = (10.0, 10.0, 50.0, 50.0)
DEFAULT_KEYPOINTS = {
    "left_eye": (20.0, 20.0),
    "right_eye": (40.0, 20.0),
    "nose": (30.0, 30.0),
}


def runit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def make_crop(
    im_name: str,
    label: Optional[str] = None,
    vid_name: str = "vid",
    track_id: int = 0,
    crop_id: int = 0,
    invalid: bool = False,
    frame_num: Optional[int] = None,
) -> CropRecord:
    return CropRecord(
        label=label,
        im_name=im_name,
        frame_num=crop_id if frame_num is None else frame_num,
        x1=0.0,
        y1=0.0,
        x2=64.0,
        y2=128.0,
        conf=0.9,
        vid_name=vid_name,
        track_id=track_id,
        crop_id=crop_id,
        invalid=invalid,
    )


def make_obs(
    sample_id: str,
    det_conf: float = 0.95,
    box: tuple[float, float, float, float] = DEFAULT_BOX,
    with_keypoints: bool = True,
    has_face_embedding: bool = False,
) -> FaceObservation:
    keypoints = DEFAULT_KEYPOINTS if with_keypoints else {
        "left_eye": None, "right_eye": None, "nose": None
    }
    return FaceObservation(
        sample_id=sample_id,
        box=box,
        det_conf=det_conf,
        has_face_embedding=has_face_embedding,
        **keypoints,
    )


def obs_set(observations: Sequence[FaceObservation]) -> FaceObservationSet:
    grouped: dict[str, list[FaceObservation]] = {}
    for obs in observations:
        grouped.setdefault(obs.sample_id, []).append(obs)
    return FaceObservationSet(by_sample={k: tuple(v) for k, v in grouped.items()})


def embedding_set(modality: str, vectors: Mapping[str, np.ndarray]) -> EmbeddingSet:
    records = tuple(
        EmbeddingRecord(sample_id=sid, modality=modality, vector=vec)
        for sid, vec in vectors.items()
    )
    dim = records[0].dim if records else 0
    return EmbeddingSet(modality=modality, dim=dim, records=records)


def gallery_from_dict(
    modality: str,
    by_label: Mapping[str, Sequence[tuple[str, np.ndarray]]],
    provenance: str = ORIGINAL_LABELED,
) -> Gallery:
    items = []
    for label, entries in by_label.items():
        for sample_id, vector in entries:
            items.append(
                (
                    label,
                    EmbeddingRecord(sample_id=sample_id, modality=modality, vector=vector),
                    provenance,
                )
            )
    return Gallery.from_items(modality, items)
