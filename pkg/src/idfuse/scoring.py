"""Per-identity confidence vectors for tracks and their weighted fusion.

A track is scored independently per modality: appearance vectors are
matched against the enriched gallery, verified face vectors against the
face gallery. Each modality yields one confidence per identity (mean over
usable crops of the max similarity to that identity's gallery vectors),
and the two vectors are blended with a single weight before the argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .facematch import select_main_face
from .tracks import Track
from .types import EmbeddingSet, FaceObservationSet, Gallery

DEFAULT_ALPHA = 0.75
DEFAULT_DET_INFERENCE = 0.7

SOURCE_REID = "reid"
SOURCE_FACE = "face"
SOURCE_FUSED = "fused"
SOURCES = (SOURCE_REID, SOURCE_FACE, SOURCE_FUSED)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """One confidence per identity; keys are stored sorted."""

    scores: Mapping[str, float]
    source: str

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValidationError(f"unknown score source {self.source!r}")
        ordered: dict[str, float] = {}
        for label in sorted(self.scores):
            value = float(self.scores[label])
            if not np.isfinite(value):
                raise ValidationError(f"score for {label!r} is not finite")
            if not -1.0 <= value <= 1.0:
                raise ValidationError(
                    f"score for {label!r} is {value}, outside [-1, 1]"
                )
            ordered[label] = value
        object.__setattr__(self, "scores", ordered)

    def __getitem__(self, label: str) -> float:
        return self.scores[label]

    def get(self, label: str, default: float = 0.0) -> float:
        return self.scores.get(label, default)

    def __len__(self) -> int:
        return len(self.scores)

    def items(self):
        return self.scores.items()


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"dim mismatch: {u.shape} vs {v.shape}")
    return float(np.clip(u @ v, -1.0, 1.0))


def identity_confidence(query: np.ndarray, gallery: Gallery, identity: str) -> float:
    """Max similarity between the query and the identity's gallery vectors.

    An identity with no gallery entries scores 0.
    """
    if identity not in gallery:
        return 0.0
    sims = gallery.vectors(identity) @ np.asarray(query, dtype=np.float64)
    return float(np.clip(sims.max(), -1.0, 1.0))


def track_score_vector(images: Sequence[np.ndarray], gallery: Gallery) -> ScoreVector:
    """Mean over images of each identity's max-similarity confidence."""
    if len(images) == 0:
        raise ValidationError("cannot score an empty image list")
    matrix, labels, starts = gallery.stacked
    if not labels:
        return ScoreVector(scores={}, source=gallery.modality)
    queries = np.stack([np.asarray(img, dtype=np.float64) for img in images])
    if queries.shape[1] != matrix.shape[1]:
        raise ValidationError(
            f"query dim {queries.shape[1]} != gallery dim {matrix.shape[1]}"
        )
    sims = queries @ matrix.T
    np.clip(sims, -1.0, 1.0, out=sims)
    per_identity_max = np.maximum.reduceat(sims, starts, axis=1)
    means = per_identity_max.mean(axis=0)
    return ScoreVector(
        scores={label: float(s) for label, s in zip(labels, means)},
        source=gallery.modality,
    )


def fuse(v_reid: ScoreVector, v_face: ScoreVector, alpha: float = DEFAULT_ALPHA) -> ScoreVector:
    """Blend two score vectors: alpha * reid + (1 - alpha) * face.

    Identities present in only one vector score 0 in the other.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    labels = set(v_reid.scores) | set(v_face.scores)
    fused = {
        label: alpha * v_reid.get(label) + (1.0 - alpha) * v_face.get(label)
        for label in labels
    }
    return ScoreVector(scores=fused, source=SOURCE_FUSED)


def predict_identity(v_pred: ScoreVector) -> str:
    """Label with the highest score; ties go to the smallest label."""
    if len(v_pred) == 0:
        raise ValidationError("cannot take argmax of an empty score vector")
    best = max(v_pred.scores.values())
    return min(label for label, score in v_pred.items() if score == best)


@dataclass(frozen=True, eq=False)
class Prediction:
    label: str
    fused_scores: ScoreVector
    n_images: int
    n_faces: int
    reid_scores: Optional[ScoreVector] = field(default=None, repr=False)
    face_scores: Optional[ScoreVector] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.label != predict_identity(self.fused_scores):
            raise ValidationError(
                f"label {self.label!r} is not the argmax of the fused scores"
            )
        if self.n_images <= 0:
            raise ValidationError("n_images must be positive")
        if not 0 <= self.n_faces <= self.n_images:
            raise ValidationError("n_faces must be in [0, n_images]")


def predict_track(
    track: Track,
    reid_embeddings: EmbeddingSet,
    face_embeddings: Optional[EmbeddingSet],
    face_obs: FaceObservationSet,
    g_enriched: Gallery,
    g_face: Gallery,
    alpha: float = DEFAULT_ALPHA,
    det_inference: float = DEFAULT_DET_INFERENCE,
) -> Prediction:
    """Score one track against both galleries and fuse.

    Every crop must have an appearance embedding. A crop contributes a
    face vector only when its main face is verified by pose keypoints,
    detected at or above `det_inference`, and has an embedding. With no
    usable faces the face vector is all-zero.
    """
    reid_vectors = [reid_embeddings.vector(name) for name in track.crop_names()]
    v_reid = track_score_vector(reid_vectors, g_enriched)

    face_vectors: list[np.ndarray] = []
    for name in track.crop_names():
        observations = face_obs.get(name)
        if not observations:
            continue
        match = select_main_face(observations)
        if not match.matched:
            continue
        chosen = observations[match.chosen_face_index]
        if chosen.det_conf < det_inference:
            continue
        if face_embeddings is None or name not in face_embeddings:
            continue
        face_vectors.append(face_embeddings.vector(name))

    if face_vectors:
        v_face = track_score_vector(face_vectors, g_face)
    else:
        v_face = ScoreVector(
            scores={label: 0.0 for label in g_face.labels}, source=SOURCE_FACE
        )

    fused = fuse(v_reid, v_face, alpha)
    return Prediction(
        label=predict_identity(fused),
        fused_scores=fused,
        n_images=len(reid_vectors),
        n_faces=len(face_vectors),
        reid_scores=v_reid,
        face_scores=v_face,
    )
