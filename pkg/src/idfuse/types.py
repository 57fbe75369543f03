"""Core domain types: identity labels, embedding records, crops, galleries."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np

from .errors import ValidationError

# Sentinel label for out-of-gallery identities in the open-set setting.
# Never a member of the people-of-interest set.
UNKNOWN_LABEL = "Unknown"

REID = "reid"
FACE = "face"
MODALITIES = (REID, FACE)

ORIGINAL_LABELED = "original_labeled"
ENRICHED_FROM_QUERY = "enriched_from_query"
PROVENANCES = (ORIGINAL_LABELED, ENRICHED_FROM_QUERY)

UNIT_NORM_TOL = 1e-6

Point = tuple[float, float]


def unit_vector(values: Iterable[float] | np.ndarray, *, context: str = "vector") -> np.ndarray:
    """Return `values` as a read-only float64 unit vector.

    Raises ValidationError for zero-norm input; `context` names the offender.
    """
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValidationError(f"{context}: empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{context}: non-finite component")
    norm = float(np.linalg.norm(arr))
    if norm < 1e-12:
        raise ValidationError(f"{context}: zero-norm vector cannot be normalized")
    out = arr / norm
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """One feature vector of a single modality, keyed by sample id.

    The vector is re-normalized to unit L2 norm at construction time so that
    cosine similarity reduces to a plain dot product downstream.
    """

    sample_id: str
    modality: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        if not self.sample_id:
            raise ValidationError("embedding record with empty sample_id")
        if self.modality not in MODALITIES:
            raise ValidationError(
                f"embedding {self.sample_id!r}: unknown modality {self.modality!r}"
            )
        object.__setattr__(
            self, "vector", unit_vector(self.vector, context=f"embedding {self.sample_id!r}")
        )

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """All embeddings of one modality and one dimensionality, keyed by sample id."""

    modality: str
    dim: int
    records: tuple[EmbeddingRecord, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.modality != self.modality:
                raise ValidationError(
                    f"embedding {rec.sample_id!r}: modality {rec.modality!r} "
                    f"in a {self.modality!r} set"
                )
            if rec.dim != self.dim:
                raise ValidationError(
                    f"embedding {rec.sample_id!r}: dim {rec.dim} differs from set dim {self.dim}"
                )
            if rec.sample_id in seen:
                raise ValidationError(f"duplicate embedding sample_id {rec.sample_id!r}")
            seen.add(rec.sample_id)

    @cached_property
    def _by_id(self) -> dict[str, EmbeddingRecord]:
        return {rec.sample_id: rec for rec in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        return iter(self.records)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._by_id

    def get(self, sample_id: str) -> Optional[EmbeddingRecord]:
        return self._by_id.get(sample_id)

    def vector(self, sample_id: str) -> np.ndarray:
        return self.require(sample_id).vector

    def require(self, sample_id: str) -> EmbeddingRecord:
        rec = self._by_id.get(sample_id)
        if rec is None:
            raise ValidationError(
                f"no {self.modality} embedding for sample {sample_id!r}"
            )
        return rec


def empty_embedding_set(modality: str, dim: int = 0) -> EmbeddingSet:
    return EmbeddingSet(modality=modality, dim=dim, records=())


@dataclass(frozen=True)
class CropRecord:
    """One person crop: spatial and temporal metadata plus optional label.

    `label` is ground truth where known; empty means unlabeled. Crops flagged
    invalid do not present a clear person and are excluded from all scoring
    and metrics.
    """

    label: Optional[str]
    im_name: str
    frame_num: int
    x1: float
    y1: float
    x2: float
    y2: float
    conf: float
    vid_name: str
    track_id: int
    crop_id: int
    invalid: bool

    def __post_init__(self) -> None:
        if not self.im_name:
            raise ValidationError("crop with empty im_name")
        if self.label is not None and self.label == "":
            object.__setattr__(self, "label", None)
        if self.frame_num < 0:
            raise ValidationError(f"crop {self.im_name!r}: negative frame_num")
        if not self.x1 < self.x2:
            raise ValidationError(f"crop {self.im_name!r}: x1 must be < x2")
        if not self.y1 < self.y2:
            raise ValidationError(f"crop {self.im_name!r}: y1 must be < y2")
        if not 0.0 <= self.conf <= 1.0:
            raise ValidationError(f"crop {self.im_name!r}: conf outside [0, 1]")

    @property
    def track_key(self) -> tuple[str, int]:
        return (self.vid_name, self.track_id)


@dataclass(frozen=True, eq=False)
class CropManifest:
    """Validated collection of crop records with unique im_names."""

    records: tuple[CropRecord, ...]

    def __post_init__(self) -> None:
        names: set[str] = set()
        keys: set[tuple[str, int, int]] = set()
        for rec in self.records:
            if rec.im_name in names:
                raise ValidationError(f"duplicate im_name {rec.im_name!r}")
            names.add(rec.im_name)
            key = (rec.vid_name, rec.track_id, rec.crop_id)
            if key in keys:
                raise ValidationError(
                    f"duplicate (vid_name, track_id, crop_id) {key!r}"
                )
            keys.add(key)

    @cached_property
    def _by_name(self) -> dict[str, CropRecord]:
        return {rec.im_name: rec for rec in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CropRecord]:
        return iter(self.records)

    def get(self, im_name: str) -> Optional[CropRecord]:
        return self._by_name.get(im_name)

    def labeled_valid(self) -> list[CropRecord]:
        """Valid crops carrying a ground-truth label, in file order."""
        return [r for r in self.records if not r.invalid and r.label is not None]

    def valid(self) -> list[CropRecord]:
        return [r for r in self.records if not r.invalid]


@dataclass(frozen=True)
class FaceObservation:
    """One detected face in a crop, plus the crop's main-person pose keypoints.

    The box comes from a face detector in crop-local pixels; the eye and nose
    points come from a pose estimator and may be absent when estimation
    failed. `has_face_embedding` records whether a face feature vector exists
    for the crop; it is filled in when observation and embedding files are
    joined.
    """

    sample_id: str
    box: tuple[float, float, float, float]
    det_conf: float
    left_eye: Optional[Point] = None
    right_eye: Optional[Point] = None
    nose: Optional[Point] = None
    has_face_embedding: bool = False

    def __post_init__(self) -> None:
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise ValidationError(
                f"face observation {self.sample_id!r}: box not well-ordered"
            )
        if not 0.0 <= self.det_conf <= 1.0:
            raise ValidationError(
                f"face observation {self.sample_id!r}: det_conf outside [0, 1]"
            )

    @property
    def keypoints(self) -> Optional[tuple[Point, Point, Point]]:
        """(left_eye, right_eye, nose) when all three are present, else None."""
        if self.left_eye is None or self.right_eye is None or self.nose is None:
            return None
        return (self.left_eye, self.right_eye, self.nose)


@dataclass(frozen=True, eq=False)
class FaceObservationSet:
    """Face observations grouped by sample id, preserving file order."""

    by_sample: Mapping[str, tuple[FaceObservation, ...]]

    def get(self, sample_id: str) -> tuple[FaceObservation, ...]:
        return self.by_sample.get(sample_id, ())

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.by_sample

    def __len__(self) -> int:
        return len(self.by_sample)

    def sample_ids(self) -> list[str]:
        return list(self.by_sample.keys())


def empty_face_observations() -> FaceObservationSet:
    return FaceObservationSet(by_sample={})


@dataclass(frozen=True, eq=False)
class GalleryEntry:
    """One gallery embedding together with how it got there."""

    record: EmbeddingRecord
    provenance: str

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True, eq=False)
class Gallery:
    """Identity-keyed embedding store for one modality.

    Immutable after construction; safe to share read-only across workers.
    """

    modality: str
    entries: Mapping[str, tuple[GalleryEntry, ...]]

    def __post_init__(self) -> None:
        if self.modality not in MODALITIES:
            raise ValidationError(f"unknown gallery modality {self.modality!r}")
        for label, items in self.entries.items():
            if not label:
                raise ValidationError("gallery entry with empty identity label")
            if not items:
                raise ValidationError(f"gallery identity {label!r} has no embeddings")
            for item in items:
                if item.record.modality != self.modality:
                    raise ValidationError(
                        f"gallery identity {label!r}: {item.record.modality!r} "
                        f"embedding in a {self.modality!r} gallery"
                    )

    @classmethod
    def from_items(
        cls, modality: str, items: Iterable[tuple[str, EmbeddingRecord, str]]
    ) -> "Gallery":
        """Build a gallery from (label, record, provenance) triples, keeping order."""
        entries: dict[str, list[GalleryEntry]] = {}
        for label, record, provenance in items:
            entries.setdefault(label, []).append(
                GalleryEntry(record=record, provenance=provenance)
            )
        return cls(modality=modality, entries={k: tuple(v) for k, v in entries.items()})

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.entries.keys())

    def __contains__(self, label: str) -> bool:
        return label in self.entries

    def __len__(self) -> int:
        """Total number of stored embeddings across identities."""
        return sum(len(v) for v in self.entries.values())

    def n_identities(self) -> int:
        return len(self.entries)

    def vectors(self, label: str) -> np.ndarray:
        """Stacked (n, dim) matrix of one identity's embeddings."""
        items = self.entries.get(label, ())
        if not items:
            raise ValidationError(f"identity {label!r} not in gallery")
        return np.stack([item.record.vector for item in items])

    @cached_property
    def stacked(self) -> tuple[np.ndarray, tuple[str, ...], np.ndarray]:
        """All vectors stacked for batch search.

        Returns (matrix, labels, starts): matrix rows are grouped by identity
        in sorted-label order, `starts[i]` is the first row of `labels[i]`.
        """
        labels = tuple(sorted(self.entries.keys()))
        blocks = [self.vectors(label) for label in labels]
        starts = np.cumsum([0] + [b.shape[0] for b in blocks[:-1]])
        matrix = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, 0))
        return matrix, labels, starts.astype(np.intp)

    @property
    def dim(self) -> int:
        for items in self.entries.values():
            return items[0].record.dim
        return 0
