"""Gallery enrichment: label query samples by face similarity.

The face gallery is built from labeled samples whose faces pass pose
verification at high detection confidence. Each query sample with a
usable face is then labeled, declared Unknown (open-set only), or
skipped, and accepted samples contribute their appearance embeddings to
the enriched gallery alongside the original labeled ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EnrichmentError, ValidationError
from .facematch import select_main_face
from .types import (
    CropRecord,
    EmbeddingSet,
    ENRICHED_FROM_QUERY,
    FACE,
    FaceObservationSet,
    Gallery,
    ORIGINAL_LABELED,
    REID,
    UNKNOWN_LABEL,
)

OUTCOME_LABELED = "labeled"
OUTCOME_UNKNOWN = "unknown"
OUTCOME_SKIPPED = "skipped"
OUTCOMES = (OUTCOME_LABELED, OUTCOME_UNKNOWN, OUTCOME_SKIPPED)

# Skip reasons, in pipeline order: the first missing prerequisite wins.
REASON_NO_FACE = "no_face"
REASON_POSE_MISMATCH = "pose_mismatch"
REASON_NO_EMBEDDING = "no_embedding"
REASON_LOW_DETECTION = "low_detection"
REASON_LOW_SIMILARITY = "low_similarity"
REASON_AMBIGUOUS = "ambiguous"
SKIP_REASONS = (
    REASON_NO_FACE,
    REASON_POSE_MISMATCH,
    REASON_NO_EMBEDDING,
    REASON_LOW_DETECTION,
    REASON_LOW_SIMILARITY,
    REASON_AMBIGUOUS,
)


@dataclass(frozen=True)
class EnrichmentThresholds:
    """Decision thresholds for face-based query labeling.

    det_enrich gates which faces may label samples during enrichment;
    det_inference gates which faces contribute at prediction time.
    """

    det_enrich: float = 0.8
    det_inference: float = 0.7
    sim_min: float = 0.4
    rank_diff_min: float = 0.1
    unknown_sim_max: float = 0.3
    open_set: bool = False

    def __post_init__(self) -> None:
        for name in ("det_enrich", "det_inference"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value}")
        for name in ("sim_min", "unknown_sim_max"):
            value = getattr(self, name)
            if not -1.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [-1, 1], got {value}")
        if self.rank_diff_min < 0.0:
            raise ValidationError(
                f"rank_diff_min must be >= 0, got {self.rank_diff_min}"
            )
        if self.unknown_sim_max > self.sim_min:
            raise ValidationError(
                "unknown_sim_max must not exceed sim_min "
                f"({self.unknown_sim_max} > {self.sim_min})"
            )


DEFAULT_THRESHOLDS = EnrichmentThresholds()

# Per-benchmark (detection, similarity) operating points; other fields default.
THRESHOLD_PRESETS: dict[str, EnrichmentThresholds] = {
    "ccvid": EnrichmentThresholds(det_enrich=0.5, sim_min=0.75),
    "ltcc": EnrichmentThresholds(det_enrich=0.8, sim_min=0.5),
    "prcc": EnrichmentThresholds(det_enrich=0.7, sim_min=0.65),
    "last": EnrichmentThresholds(det_enrich=0.7, sim_min=0.45),
}


@dataclass(frozen=True)
class EnrichmentDecision:
    """Audit record for one query sample's enrichment outcome."""

    sample_id: str
    outcome: str
    label: Optional[str]
    reason: Optional[str]
    best_sim: float
    rank_gap: float
    det_conf: float

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValidationError(f"unknown outcome {self.outcome!r}")
        if self.outcome == OUTCOME_LABELED and not self.label:
            raise ValidationError("labeled decision requires a label")
        if self.outcome == OUTCOME_UNKNOWN and self.label != UNKNOWN_LABEL:
            raise ValidationError("unknown decision must carry the Unknown label")
        if self.outcome == OUTCOME_SKIPPED:
            if self.label is not None:
                raise ValidationError("skipped decision must not carry a label")
            if self.reason not in SKIP_REASONS:
                raise ValidationError(f"unknown skip reason {self.reason!r}")
        elif self.reason is not None:
            raise ValidationError("reason is only valid for skipped decisions")


def _skip(
    sample_id: str, reason: str, det_conf: float = 0.0
) -> EnrichmentDecision:
    return EnrichmentDecision(
        sample_id=sample_id,
        outcome=OUTCOME_SKIPPED,
        label=None,
        reason=reason,
        best_sim=0.0,
        rank_gap=0.0,
        det_conf=det_conf,
    )


def build_face_gallery(
    labeled_samples: Sequence[CropRecord],
    face_embeddings: EmbeddingSet,
    face_obs: FaceObservationSet,
    thresholds: EnrichmentThresholds = DEFAULT_THRESHOLDS,
    *,
    allow_empty: bool = False,
) -> Gallery:
    """Face gallery from labeled samples with verified, confident faces.

    A sample contributes iff its main face passes pose verification, was
    detected at or above det_enrich, and has a face embedding.
    """
    items = []
    for sample in labeled_samples:
        if sample.label is None:
            raise ValidationError(
                f"sample {sample.im_name!r} has no label; only labeled samples "
                "may seed the face gallery"
            )
        if sample.label == UNKNOWN_LABEL:
            raise ValidationError(
                f"sample {sample.im_name!r} is labeled {UNKNOWN_LABEL!r}, which "
                "is reserved for open-set decisions"
            )
        observations = face_obs.get(sample.im_name)
        if not observations:
            continue
        match = select_main_face(observations)
        if not match.matched:
            continue
        chosen = observations[match.chosen_face_index]
        if chosen.det_conf < thresholds.det_enrich:
            continue
        record = face_embeddings.get(sample.im_name)
        if record is None:
            continue
        items.append((sample.label, record, ORIGINAL_LABELED))
    gallery = Gallery.from_items(FACE, items)
    if len(gallery) == 0 and not allow_empty:
        raise EnrichmentError(
            "face gallery is empty: no labeled sample has a verified face at "
            f"det_conf >= {thresholds.det_enrich} with a face embedding"
        )
    return gallery


def face_similarity_profile(
    query_face: np.ndarray, g_face: Gallery
) -> tuple[float, float, str]:
    """(best_sim, rank_gap, best_label) of a face vector against the gallery.

    rank_gap is +inf when the gallery holds a single identity.
    """
    matrix, labels, starts = g_face.stacked
    if not labels:
        raise EnrichmentError("cannot score a face against an empty gallery")
    sims = matrix @ np.asarray(query_face, dtype=np.float64)
    np.clip(sims, -1.0, 1.0, out=sims)
    per_identity = np.maximum.reduceat(sims, starts)
    order = np.argsort(per_identity)[::-1]
    best_sim = float(per_identity[order[0]])
    # argsort is not stable under reversal; resolve ties toward the smallest
    # label explicitly.
    best_label = min(
        labels[i] for i in range(len(labels)) if per_identity[i] == best_sim
    )
    rank_gap = (
        float(best_sim - per_identity[order[1]]) if len(labels) > 1 else math.inf
    )
    return best_sim, rank_gap, best_label


def decide_query_label(
    query_face: np.ndarray,
    det_conf: float,
    g_face: Gallery,
    thresholds: EnrichmentThresholds = DEFAULT_THRESHOLDS,
    *,
    sample_id: str = "",
) -> EnrichmentDecision:
    """Label / Unknown / skip decision for one query face vector.

    Cascade: low detection skips first; then, open-set only, a best
    similarity under unknown_sim_max declares Unknown; then low best
    similarity or a thin rank-1/rank-2 gap skips; otherwise the argmax
    identity is assigned.
    """
    best_sim, rank_gap, best_label = face_similarity_profile(query_face, g_face)
    if det_conf < thresholds.det_enrich:
        outcome, label, reason = OUTCOME_SKIPPED, None, REASON_LOW_DETECTION
    elif thresholds.open_set and best_sim < thresholds.unknown_sim_max:
        outcome, label, reason = OUTCOME_UNKNOWN, UNKNOWN_LABEL, None
    elif best_sim < thresholds.sim_min:
        outcome, label, reason = OUTCOME_SKIPPED, None, REASON_LOW_SIMILARITY
    elif rank_gap < thresholds.rank_diff_min:
        outcome, label, reason = OUTCOME_SKIPPED, None, REASON_AMBIGUOUS
    else:
        outcome, label, reason = OUTCOME_LABELED, best_label, None
    return EnrichmentDecision(
        sample_id=sample_id,
        outcome=outcome,
        label=label,
        reason=reason,
        best_sim=best_sim,
        rank_gap=rank_gap,
        det_conf=det_conf,
    )


def select_enrichment_pool(
    query_samples: Sequence[CropRecord], fraction: float, seed: int
) -> list[CropRecord]:
    """Seeded nested subsample of the query pool.

    Uses a prefix of one fixed permutation, so the pool at fraction f is
    a subset of the pool at any f' >= f for the same seed.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"enrichment_fraction must be in [0, 1], got {fraction}")
    ordered = sorted(query_samples, key=lambda s: s.im_name)
    k = math.floor(fraction * len(ordered) + 1e-9)
    if k >= len(ordered):
        return ordered
    rng = np.random.default_rng(seed)
    permutation = rng.permutation(len(ordered))
    chosen = sorted(int(i) for i in permutation[:k])
    return [ordered[i] for i in chosen]


def enrich_gallery(
    labeled_samples: Sequence[CropRecord],
    query_samples: Sequence[CropRecord],
    reid_embeddings: EmbeddingSet,
    face_embeddings: EmbeddingSet,
    face_obs: FaceObservationSet,
    thresholds: EnrichmentThresholds = DEFAULT_THRESHOLDS,
    enrichment_fraction: float = 1.0,
    seed: int = 0,
    g_face: Optional[Gallery] = None,
) -> tuple[Gallery, list[EnrichmentDecision]]:
    """Build the enriched appearance gallery and the per-sample decision log.

    The gallery holds every labeled sample's appearance embedding plus the
    embeddings of query samples whose decision was labeled or Unknown.
    Decisions are logged for each subsampled query sample in sample-id
    order; query samples' own labels are never consulted.
    """
    if g_face is None:
        g_face = build_face_gallery(
            labeled_samples, face_embeddings, face_obs, thresholds
        )
    items = []
    for sample in labeled_samples:
        if sample.label is None:
            raise ValidationError(
                f"sample {sample.im_name!r} has no label; it cannot join the "
                "gallery as an original labeled sample"
            )
        if sample.label == UNKNOWN_LABEL:
            raise ValidationError(
                f"sample {sample.im_name!r} is labeled {UNKNOWN_LABEL!r}, which "
                "is reserved for open-set decisions"
            )
        items.append(
            (sample.label, reid_embeddings.require(sample.im_name), ORIGINAL_LABELED)
        )

    decisions: list[EnrichmentDecision] = []
    for sample in select_enrichment_pool(query_samples, enrichment_fraction, seed):
        name = sample.im_name
        observations = face_obs.get(name)
        if not observations:
            decisions.append(_skip(name, REASON_NO_FACE))
            continue
        match = select_main_face(observations)
        if not match.matched:
            decisions.append(_skip(name, REASON_POSE_MISMATCH))
            continue
        chosen = observations[match.chosen_face_index]
        face_record = face_embeddings.get(name)
        if face_record is None:
            decisions.append(_skip(name, REASON_NO_EMBEDDING, chosen.det_conf))
            continue
        decision = decide_query_label(
            face_record.vector,
            chosen.det_conf,
            g_face,
            thresholds,
            sample_id=name,
        )
        decisions.append(decision)
        if decision.outcome in (OUTCOME_LABELED, OUTCOME_UNKNOWN):
            items.append(
                (decision.label, reid_embeddings.require(name), ENRICHED_FROM_QUERY)
            )
    return Gallery.from_items(REID, items), decisions


def decision_counts(decisions: Iterable[EnrichmentDecision]) -> dict[str, int]:
    """Outcome and skip-reason tallies, with stable keys."""
    counts = {outcome: 0 for outcome in OUTCOMES}
    counts.update({f"skipped_{reason}": 0 for reason in SKIP_REASONS})
    for decision in decisions:
        counts[decision.outcome] += 1
        if decision.outcome == OUTCOME_SKIPPED:
            counts[f"skipped_{decision.reason}"] += 1
    return counts
