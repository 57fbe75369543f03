"""Retrieval metrics, clothes-aware settings, and the threshold sweep.

Ranking metrics (top-1, mAP) evaluate raw embedding retrieval under the
general / same-clothes / clothes-changing gallery filters. Classification
metrics (per-image, per-track accuracy) evaluate engine predictions under
open or closed set rules. The sweep grades enrichment threshold pairs on
held-out labeled data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .enrichment import EnrichmentThresholds, DEFAULT_THRESHOLDS
from .facematch import select_main_face
from .scoring import ScoreVector
from .types import (
    CropRecord,
    EmbeddingSet,
    FaceObservationSet,
    UNKNOWN_LABEL,
)

GENERAL = "general"
SAME_CLOTHES = "same_clothes"
CLOTHES_CHANGING = "clothes_changing"
CLOTHES_MODES = (GENERAL, SAME_CLOTHES, CLOTHES_CHANGING)

OPEN_SET = "open"
CLOSED_SET = "closed"
SET_MODES = (OPEN_SET, CLOSED_SET)

DEFAULT_MIN_TRACK_LEN = 10


@dataclass(frozen=True)
class EvalSetting:
    clothes_mode: str = GENERAL
    set_mode: str = CLOSED_SET
    min_track_len: int = DEFAULT_MIN_TRACK_LEN

    def __post_init__(self) -> None:
        if self.clothes_mode not in CLOTHES_MODES:
            raise ValidationError(f"unknown clothes_mode {self.clothes_mode!r}")
        if self.set_mode not in SET_MODES:
            raise ValidationError(f"unknown set_mode {self.set_mode!r}")
        if self.min_track_len < 1:
            raise ValidationError(
                f"min_track_len must be >= 1, got {self.min_track_len}"
            )


@dataclass(frozen=True, eq=False)
class EvalSample:
    """One retrieval unit: an identity-labeled vector plus clothes metadata."""

    sample_id: str
    identity: str
    vector: np.ndarray
    clothes_id: Optional[str] = None
    camera_id: Optional[str] = None


@dataclass(frozen=True)
class AccuracyResult:
    accuracy: float
    n_evaluated: int
    n_excluded: int


@dataclass(frozen=True)
class MetricsReport:
    top1: float
    map: Optional[float]
    per_image_acc: Optional[float]
    per_track_acc: Optional[float]
    n_queries_evaluated: int
    n_queries_excluded: int

    def __post_init__(self) -> None:
        for name in ("top1", "map", "per_image_acc", "per_track_acc"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value}")
        if self.n_queries_evaluated < 0 or self.n_queries_excluded < 0:
            raise ValidationError("query counts must be non-negative")

    def to_dict(self) -> dict:
        return {
            "top1": self.top1,
            "map": self.map,
            "per_image_acc": self.per_image_acc,
            "per_track_acc": self.per_track_acc,
            "n_queries_evaluated": self.n_queries_evaluated,
            "n_queries_excluded": self.n_queries_excluded,
        }


def apply_setting_filter(
    query: EvalSample, gallery: Sequence[EvalSample], setting: EvalSetting
) -> list[EvalSample]:
    """Drop gallery samples per the clothes mode.

    Same-clothes keeps only the query's clothes among its own identity;
    clothes-changing drops exactly those. Other identities always stay.
    """
    if setting.clothes_mode == GENERAL:
        return list(gallery)
    if query.clothes_id is None:
        raise ValidationError(
            f"query {query.sample_id!r} lacks clothes_id in "
            f"{setting.clothes_mode} mode"
        )
    kept = []
    for sample in gallery:
        if sample.clothes_id is None:
            raise ValidationError(
                f"gallery sample {sample.sample_id!r} lacks clothes_id in "
                f"{setting.clothes_mode} mode"
            )
        if sample.identity == query.identity:
            same_clothes = sample.clothes_id == query.clothes_id
            if setting.clothes_mode == SAME_CLOTHES and not same_clothes:
                continue
            if setting.clothes_mode == CLOTHES_CHANGING and same_clothes:
                continue
        kept.append(sample)
    return kept


def rank_metrics(
    query: EvalSample, gallery: Sequence[EvalSample], setting: EvalSetting
) -> Optional[tuple[bool, float]]:
    """(top1_hit, average precision) for one query, or None if excluded.

    The filtered gallery is ranked by descending similarity (ties keep
    gallery order). A query whose identity is absent from the filtered
    gallery is excluded, not an error.
    """
    filtered = apply_setting_filter(query, gallery, setting)
    relevant_mask = np.array(
        [sample.identity == query.identity for sample in filtered], dtype=bool
    )
    if not relevant_mask.any():
        return None
    matrix = np.stack([sample.vector for sample in filtered])
    sims = np.clip(matrix @ query.vector, -1.0, 1.0)
    order = np.argsort(-sims, kind="stable")
    ranked_relevant = relevant_mask[order]
    top1_hit = bool(ranked_relevant[0])
    relevant_ranks = np.flatnonzero(ranked_relevant) + 1
    hits = np.arange(1, len(relevant_ranks) + 1)
    average_precision = float((hits / relevant_ranks).mean())
    return top1_hit, average_precision


def ranking_report(
    queries: Sequence[EvalSample],
    gallery: Sequence[EvalSample],
    setting: EvalSetting,
) -> MetricsReport:
    """Top-1 and mAP over all non-excluded queries."""
    hits = 0
    aps: list[float] = []
    excluded = 0
    for query in queries:
        outcome = rank_metrics(query, gallery, setting)
        if outcome is None:
            excluded += 1
            continue
        top1_hit, ap = outcome
        hits += int(top1_hit)
        aps.append(ap)
    evaluated = len(aps)
    return MetricsReport(
        top1=hits / evaluated if evaluated else 0.0,
        map=float(np.mean(aps)) if aps else None,
        per_image_acc=None,
        per_track_acc=None,
        n_queries_evaluated=evaluated,
        n_queries_excluded=excluded,
    )


def weighted_general_report(
    same_clothes: MetricsReport, clothes_changing: MetricsReport
) -> MetricsReport:
    """General figures as the query-count-weighted mean of SC and CC runs."""
    total = same_clothes.n_queries_evaluated + clothes_changing.n_queries_evaluated
    if total == 0:
        return MetricsReport(
            top1=0.0,
            map=None,
            per_image_acc=None,
            per_track_acc=None,
            n_queries_evaluated=0,
            n_queries_excluded=same_clothes.n_queries_excluded
            + clothes_changing.n_queries_excluded,
        )

    def weighted(a: Optional[float], b: Optional[float]) -> Optional[float]:
        if a is None or b is None:
            return None
        return (
            a * same_clothes.n_queries_evaluated
            + b * clothes_changing.n_queries_evaluated
        ) / total

    return MetricsReport(
        top1=weighted(same_clothes.top1, clothes_changing.top1) or 0.0,
        map=weighted(same_clothes.map, clothes_changing.map),
        per_image_acc=None,
        per_track_acc=None,
        n_queries_evaluated=total,
        n_queries_excluded=same_clothes.n_queries_excluded
        + clothes_changing.n_queries_excluded,
    )


def _expected_label(
    truth: str, known_identities: frozenset[str] | set[str], set_mode: str
) -> Optional[str]:
    """What a correct prediction looks like; None means excluded (closed set)."""
    if truth in known_identities:
        return truth
    if set_mode == OPEN_SET:
        return UNKNOWN_LABEL
    return None


def per_image_accuracy(
    predictions: Mapping[str, str],
    ground_truth: Mapping[str, str],
    known_identities: set[str] | frozenset[str],
    setting: EvalSetting,
) -> AccuracyResult:
    """Fraction of evaluated crops whose predicted label is correct.

    Closed set excludes crops whose true identity is out of gallery; open
    set keeps them and expects the Unknown label.
    """
    correct = 0
    evaluated = 0
    excluded = 0
    for sample_id in sorted(predictions):
        if sample_id not in ground_truth:
            raise ValidationError(
                f"prediction for unknown sample {sample_id!r}"
            )
        expected = _expected_label(
            ground_truth[sample_id], known_identities, setting.set_mode
        )
        if expected is None:
            excluded += 1
            continue
        evaluated += 1
        correct += int(predictions[sample_id] == expected)
    return AccuracyResult(
        accuracy=correct / evaluated if evaluated else 0.0,
        n_evaluated=evaluated,
        n_excluded=excluded,
    )


def per_track_accuracy(
    track_predictions: Mapping[tuple[str, int], str],
    track_ground_truth: Mapping[tuple[str, int], str],
    track_lengths: Mapping[tuple[str, int], int],
    known_identities: set[str] | frozenset[str],
    setting: EvalSetting,
) -> AccuracyResult:
    """Fraction of long-enough tracks labeled correctly.

    Tracks shorter than min_track_len never enter the denominator.
    """
    correct = 0
    evaluated = 0
    excluded = 0
    for key in sorted(track_predictions):
        if key not in track_ground_truth:
            raise ValidationError(f"prediction for unknown track {key!r}")
        if track_lengths[key] < setting.min_track_len:
            excluded += 1
            continue
        expected = _expected_label(
            track_ground_truth[key], known_identities, setting.set_mode
        )
        if expected is None:
            excluded += 1
            continue
        evaluated += 1
        correct += int(track_predictions[key] == expected)
    return AccuracyResult(
        accuracy=correct / evaluated if evaluated else 0.0,
        n_evaluated=evaluated,
        n_excluded=excluded,
    )


def max_score_vector(score_vectors: Sequence[ScoreVector]) -> ScoreVector:
    """Per-identity max across per-image score vectors."""
    if not score_vectors:
        raise ValidationError("need at least one score vector")
    merged: dict[str, float] = {}
    for vector in score_vectors:
        for label, score in vector.items():
            if label not in merged or score > merged[label]:
                merged[label] = score
    return ScoreVector(scores=merged, source=score_vectors[0].source)


def image_model_track_vote(score_vectors: Sequence[ScoreVector]) -> str:
    """Track label = identity of the single most confident image score."""
    merged = max_score_vector(score_vectors)
    best = max(merged.scores.values())
    return min(label for label, score in merged.items() if score == best)


@dataclass(frozen=True)
class SweepPoint:
    det: float
    sim: float
    accuracy: Optional[float]
    unique_identities: int
    n_decisions: int

    def to_dict(self) -> dict:
        return {
            "det": self.det,
            "sim": self.sim,
            "accuracy": self.accuracy,
            "unique_identities": self.unique_identities,
            "n_decisions": self.n_decisions,
        }


@dataclass(frozen=True, eq=False)
class SweepReport:
    points: tuple[SweepPoint, ...]
    n_pool: int

    def best(self) -> SweepPoint:
        if not self.points:
            raise ValidationError("empty sweep report")
        return self.points[0]


@dataclass(frozen=True, eq=False)
class _SweepProfile:
    """Per-sample quantities that do not depend on the grid point."""

    sample_id: str
    true_label: str
    det_conf: float
    best_sim: float
    rank_gap: float
    predicted: str


def _sweep_profiles(
    labeled_samples: Sequence[CropRecord],
    face_embeddings: EmbeddingSet,
    face_obs: FaceObservationSet,
    thresholds: EnrichmentThresholds,
) -> list[_SweepProfile]:
    """Leave-one-out similarity profile of every usable labeled sample.

    The face gallery is assembled once from all labeled samples at the
    base thresholds; each sample is then scored against the gallery minus
    its own entry, so grid points only move the det/sim cutoffs.
    """
    entries: list[tuple[str, str, np.ndarray]] = []  # (label, sample_id, vec)
    pool: list[tuple[CropRecord, float, np.ndarray]] = []
    for sample in labeled_samples:
        if sample.label is None:
            raise ValidationError(
                f"sweep sample {sample.im_name!r} has no label"
            )
        observations = face_obs.get(sample.im_name)
        if not observations:
            continue
        match = select_main_face(observations)
        if not match.matched:
            continue
        chosen = observations[match.chosen_face_index]
        record = face_embeddings.get(sample.im_name)
        if record is None:
            continue
        if chosen.det_conf >= thresholds.det_enrich:
            entries.append((sample.label, sample.im_name, record.vector))
        pool.append((sample, chosen.det_conf, record.vector))
    if not entries:
        raise ValidationError(
            "sweep gallery is empty: no labeled sample passes the base "
            "detection threshold"
        )

    order = sorted(range(len(entries)), key=lambda i: (entries[i][0], entries[i][1]))
    labels = sorted({entries[i][0] for i in order})
    label_index = {label: i for i, label in enumerate(labels)}
    entry_matrix = np.stack([entries[i][2] for i in order])
    entry_ids = [entries[i][1] for i in order]
    entry_label_idx = np.array(
        [label_index[entries[i][0]] for i in order], dtype=np.intp
    )

    profiles: list[_SweepProfile] = []
    for sample, det_conf, vector in pool:
        sims = np.clip(entry_matrix @ vector, -1.0, 1.0)
        own = np.array([eid == sample.im_name for eid in entry_ids], dtype=bool)
        sims = np.where(own, -2.0, sims)  # sentinel below any cosine
        per_identity = np.full(len(labels), -2.0)
        np.maximum.at(per_identity, entry_label_idx, sims)
        # An identity whose only entry was the sample itself scores 0, the
        # same default as an absent identity.
        per_identity = np.where(per_identity <= -1.5, 0.0, per_identity)
        best_sim = float(per_identity.max())
        predicted = min(
            labels[i] for i in range(len(labels)) if per_identity[i] == best_sim
        )
        if len(labels) > 1:
            rank_gap = float(best_sim - np.partition(per_identity, -2)[-2])
        else:
            rank_gap = math.inf
        profiles.append(
            _SweepProfile(
                sample_id=sample.im_name,
                true_label=sample.label,
                det_conf=det_conf,
                best_sim=best_sim,
                rank_gap=rank_gap,
                predicted=predicted,
            )
        )
    return profiles


def threshold_sweep(
    labeled_samples: Sequence[CropRecord],
    face_embeddings: EmbeddingSet,
    face_obs: FaceObservationSet,
    grid: Sequence[tuple[float, float]],
    thresholds: EnrichmentThresholds = DEFAULT_THRESHOLDS,
) -> SweepReport:
    """Grade (detection, similarity) threshold pairs on labeled data.

    Each grid point replays the labeling decision for every usable sample
    with its true label withheld, then scores prediction accuracy and the
    number of unique identities that received at least one label. Points
    are sorted by accuracy, then unique identities, both descending.
    """
    if not grid:
        raise ValidationError("sweep grid must not be empty")
    profiles = _sweep_profiles(
        labeled_samples, face_embeddings, face_obs, thresholds
    )
    points: list[SweepPoint] = []
    for det, sim in grid:
        decided = [
            p
            for p in profiles
            if p.det_conf >= det
            and p.best_sim >= sim
            and p.rank_gap >= thresholds.rank_diff_min
        ]
        n_decisions = len(decided)
        correct = sum(p.predicted == p.true_label for p in decided)
        points.append(
            SweepPoint(
                det=float(det),
                sim=float(sim),
                accuracy=correct / n_decisions if n_decisions else None,
                unique_identities=len({p.predicted for p in decided}),
                n_decisions=n_decisions,
            )
        )
    points.sort(
        key=lambda p: (
            -(p.accuracy if p.accuracy is not None else -1.0),
            -p.unique_identities,
            p.det,
            p.sim,
        )
    )
    return SweepReport(points=tuple(points), n_pool=len(profiles))
