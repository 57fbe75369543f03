"""End-to-end runs: enrich, predict, evaluate, sweep, cluster.

All stages consume the file formats from `io` and produce line-delimited
or JSON outputs with fixed key order, so identical inputs and seeds give
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .clustering import cluster_face_features
from .config import RunConfig
from .enrichment import (
    EnrichmentDecision,
    build_face_gallery,
    decision_counts,
    enrich_gallery,
)
from .errors import ValidationError
from .evaluation import (
    EvalSample,
    EvalSetting,
    GENERAL,
    CLOTHES_CHANGING,
    SAME_CLOTHES,
    MetricsReport,
    SweepReport,
    max_score_vector,
    per_image_accuracy,
    per_track_accuracy,
    ranking_report,
    threshold_sweep,
    weighted_general_report,
)
from .io import (
    jsonable_float,
    load_crop_manifest,
    load_embeddings,
    load_face_observations,
    write_jsonl,
)
from .scoring import Prediction, predict_track
from .tracks import Track, TrackSet, build_tracks
from .types import (
    CropManifest,
    EmbeddingSet,
    FACE,
    FaceObservationSet,
    Gallery,
    REID,
    empty_embedding_set,
    empty_face_observations,
)


@dataclass(frozen=True, eq=False)
class PipelineData:
    gallery_manifest: CropManifest
    query_manifest: CropManifest
    reid: EmbeddingSet
    face: EmbeddingSet
    face_obs: FaceObservationSet


def load_inputs(config: RunConfig) -> PipelineData:
    """Load and validate every input file the config names."""
    config.require_paths("gallery_manifest", "query_manifest", "reid_embeddings")
    if config.face_embeddings is not None:
        config.require_paths("face_embeddings")
    if config.face_observations is not None:
        config.require_paths("face_observations")
    face = (
        load_embeddings(config.face_embeddings, FACE)
        if config.face_embeddings is not None
        else empty_embedding_set(FACE)
    )
    face_obs = (
        load_face_observations(config.face_observations, face)
        if config.face_observations is not None
        else empty_face_observations()
    )
    return PipelineData(
        gallery_manifest=load_crop_manifest(config.gallery_manifest),
        query_manifest=load_crop_manifest(config.query_manifest),
        reid=load_embeddings(config.reid_embeddings, REID),
        face=face,
        face_obs=face_obs,
    )


def enrichment_stage(
    config: RunConfig, data: PipelineData
) -> tuple[Gallery, Gallery, list[EnrichmentDecision]]:
    """Build both galleries. An unusable face gallery disables enrichment
    and face fusion (everything still runs on appearance alone)."""
    labeled = data.gallery_manifest.labeled_valid()
    if not labeled:
        raise ValidationError("gallery manifest has no labeled valid samples")
    g_face = build_face_gallery(
        labeled, data.face, data.face_obs, config.thresholds, allow_empty=True
    )
    fraction = config.enrichment_fraction if len(g_face) > 0 else 0.0
    g_enriched, decisions = enrich_gallery(
        labeled,
        data.query_manifest.valid(),
        data.reid,
        data.face,
        data.face_obs,
        config.thresholds,
        enrichment_fraction=fraction,
        seed=config.seed,
        g_face=g_face,
    )
    return g_face, g_enriched, decisions


@dataclass(frozen=True, eq=False)
class AnnotateResult:
    granularity: str
    track_rows: list[dict]
    crop_rows: list[dict]
    decisions: list[EnrichmentDecision]
    g_face: Gallery
    g_enriched: Gallery
    track_labels: dict[tuple[str, int], str]
    crop_labels: dict[str, str]
    track_lengths: dict[tuple[str, int], int]
    query_tracks: TrackSet


def _predict_one_track(
    track: Track,
    config: RunConfig,
    data: PipelineData,
    g_enriched: Gallery,
    g_face: Gallery,
) -> Prediction:
    return predict_track(
        track,
        data.reid,
        data.face,
        data.face_obs,
        g_enriched,
        g_face,
        alpha=config.alpha,
        det_inference=config.thresholds.det_inference,
    )


def annotate_run(config: RunConfig, granularity: str = "track") -> AnnotateResult:
    """Predict a label for every query track and crop.

    Track granularity scores whole tracks; image granularity predicts
    each crop separately and votes the track label from the single most
    confident crop.
    """
    if granularity not in ("track", "image"):
        raise ValidationError(f"unknown granularity {granularity!r}")
    data = load_inputs(config)
    g_face, g_enriched, decisions = enrichment_stage(config, data)
    tracks = build_tracks(data.query_manifest)

    track_rows: list[dict] = []
    crop_rows: list[dict] = []
    track_labels: dict[tuple[str, int], str] = {}
    crop_labels: dict[str, str] = {}
    track_lengths: dict[tuple[str, int], int] = {}
    for track in tracks.tracks:
        if granularity == "track":
            prediction = _predict_one_track(track, config, data, g_enriched, g_face)
            label = prediction.label
            scores = prediction.fused_scores
            n_faces = prediction.n_faces
            for name in track.crop_names():
                crop_labels[name] = label
        else:
            per_crop: list[Prediction] = []
            for crop in track.crops:
                single = Track(
                    vid_name=track.vid_name,
                    track_id=track.track_id,
                    crops=(crop,),
                    ground_truth=track.ground_truth,
                )
                crop_prediction = _predict_one_track(
                    single, config, data, g_enriched, g_face
                )
                per_crop.append(crop_prediction)
                crop_labels[crop.im_name] = crop_prediction.label
            scores = max_score_vector([p.fused_scores for p in per_crop])
            best = max(scores.scores.values())
            label = min(k for k, v in scores.items() if v == best)
            n_faces = sum(p.n_faces for p in per_crop)
        track_labels[track.key] = label
        track_lengths[track.key] = len(track)
        track_rows.append(
            {
                "vid_name": track.vid_name,
                "track_id": track.track_id,
                "label": label,
                "score_vector": {k: v for k, v in scores.items()},
                "n_images": len(track),
                "n_faces": n_faces,
            }
        )
    for name in sorted(crop_labels):
        crop_rows.append({"im_name": name, "label": crop_labels[name]})
    return AnnotateResult(
        granularity=granularity,
        track_rows=track_rows,
        crop_rows=crop_rows,
        decisions=decisions,
        g_face=g_face,
        g_enriched=g_enriched,
        track_labels=track_labels,
        crop_labels=crop_labels,
        track_lengths=track_lengths,
        query_tracks=tracks,
    )


def decision_rows(decisions: Sequence[EnrichmentDecision]) -> list[dict]:
    return [
        {
            "sample_id": d.sample_id,
            "outcome": d.outcome,
            "label": d.label,
            "reason": d.reason,
            "best_sim": d.best_sim,
            "rank_gap": jsonable_float(d.rank_gap),
            "det_conf": d.det_conf,
        }
        for d in decisions
    ]


def gallery_rows(gallery: Gallery) -> list[dict]:
    rows = []
    for label in sorted(gallery.labels):
        for entry in gallery.entries[label]:
            rows.append(
                {
                    "label": label,
                    "sample_id": entry.record.sample_id,
                    "provenance": entry.provenance,
                }
            )
    rows.sort(key=lambda r: (r["label"], r["sample_id"]))
    return rows


def write_annotation_outputs(
    result: AnnotateResult, out_dir: str | Path, config: RunConfig
) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "track_predictions": out_dir / "track_predictions.jsonl",
        "crop_predictions": out_dir / "crop_predictions.jsonl",
        "decisions": out_dir / "decisions.jsonl",
        "enriched_gallery": out_dir / "enriched_gallery.jsonl",
        "run_config": out_dir / "run_config.json",
    }
    write_jsonl(result.track_rows, paths["track_predictions"])
    write_jsonl(result.crop_rows, paths["crop_predictions"])
    write_jsonl(decision_rows(result.decisions), paths["decisions"])
    write_jsonl(gallery_rows(result.g_enriched), paths["enriched_gallery"])
    snapshot = config.to_dict()
    snapshot["granularity"] = result.granularity
    paths["run_config"].write_text(
        json.dumps(snapshot, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths


def _eval_samples(
    manifest: CropManifest, reid: EmbeddingSet, *, require_labels: bool
) -> list[EvalSample]:
    samples = []
    for crop in manifest.valid():
        if crop.label is None:
            if require_labels:
                raise ValidationError(
                    f"sample {crop.im_name!r} has no ground-truth label"
                )
            continue
        samples.append(
            EvalSample(
                sample_id=crop.im_name,
                identity=crop.label,
                vector=reid.vector(crop.im_name),
                clothes_id=crop.vid_name,
            )
        )
    return samples


def rank_reports(config: RunConfig, data: PipelineData) -> dict[str, MetricsReport]:
    """Retrieval metrics on raw appearance embeddings.

    Gallery clothes identity defaults to the source video: one video is
    assumed to hold one clothing state per person.
    """
    gallery = _eval_samples(data.gallery_manifest, data.reid, require_labels=False)
    if not gallery:
        raise ValidationError("gallery manifest has no labeled valid samples")
    queries = _eval_samples(data.query_manifest, data.reid, require_labels=True)
    setting = config.eval_setting
    reports = {setting.clothes_mode: ranking_report(queries, gallery, setting)}
    if setting.clothes_mode == GENERAL:
        sc = ranking_report(
            queries, gallery, EvalSetting(SAME_CLOTHES, setting.set_mode, setting.min_track_len)
        )
        cc = ranking_report(
            queries, gallery, EvalSetting(CLOTHES_CHANGING, setting.set_mode, setting.min_track_len)
        )
        reports[SAME_CLOTHES] = sc
        reports[CLOTHES_CHANGING] = cc
        reports["general_weighted"] = weighted_general_report(sc, cc)
    return reports


def classification_report(
    config: RunConfig, result: AnnotateResult, data: PipelineData
) -> dict:
    """Per-image and per-track accuracy of the engine's predictions."""
    known = {
        crop.label
        for crop in data.gallery_manifest.labeled_valid()
        if crop.label is not None
    }
    crop_truth: dict[str, str] = {}
    for crop in data.query_manifest.valid():
        if crop.label is None:
            raise ValidationError(
                f"query sample {crop.im_name!r} has no ground-truth label"
            )
        crop_truth[crop.im_name] = crop.label
    track_truth: dict[tuple[str, int], str] = {}
    for track in result.query_tracks.tracks:
        if track.ground_truth is None:
            raise ValidationError(
                f"query track {track.key!r} has no ground-truth label"
            )
        track_truth[track.key] = track.ground_truth
    image_acc = per_image_accuracy(
        result.crop_labels, crop_truth, known, config.eval_setting
    )
    track_acc = per_track_accuracy(
        result.track_labels,
        track_truth,
        result.track_lengths,
        known,
        config.eval_setting,
    )
    return {
        "granularity": result.granularity,
        "per_image": {
            "accuracy": image_acc.accuracy,
            "n_evaluated": image_acc.n_evaluated,
            "n_excluded": image_acc.n_excluded,
        },
        "per_track": {
            "accuracy": track_acc.accuracy,
            "n_evaluated": track_acc.n_evaluated,
            "n_excluded": track_acc.n_excluded,
        },
        "decision_counts": decision_counts(result.decisions),
    }


def evaluate_run(
    config: RunConfig, granularity: str = "track", mode: str = "full"
) -> dict:
    """One evaluation object: ranking metrics, classification metrics, or both.

    Track-level fused predictions do not rank the whole gallery, so mAP
    is only reported for the ranking mode.
    """
    if mode not in ("rank", "classify", "full"):
        raise ValidationError(f"unknown evaluate mode {mode!r}")
    data = load_inputs(config)
    output: dict = {
        "setting": {
            "clothes_mode": config.eval_setting.clothes_mode,
            "set_mode": config.eval_setting.set_mode,
            "min_track_len": config.eval_setting.min_track_len,
        }
    }
    rank: Optional[dict[str, MetricsReport]] = None
    classify: Optional[dict] = None
    if mode in ("rank", "full"):
        rank = rank_reports(config, data)
        output["rank"] = {name: rep.to_dict() for name, rep in rank.items()}
    if mode in ("classify", "full"):
        result = annotate_run(config, granularity)
        classify = classification_report(config, result, data)
        output["classify"] = classify

    primary = rank.get(config.eval_setting.clothes_mode) if rank else None
    summary = MetricsReport(
        top1=primary.top1 if primary else 0.0,
        map=primary.map if primary else None,
        per_image_acc=classify["per_image"]["accuracy"] if classify else None,
        per_track_acc=classify["per_track"]["accuracy"] if classify else None,
        n_queries_evaluated=primary.n_queries_evaluated if primary else 0,
        n_queries_excluded=primary.n_queries_excluded if primary else 0,
    )
    output["summary"] = summary.to_dict()
    return output


def sweep_run(config: RunConfig, grid: Sequence[tuple[float, float]]) -> SweepReport:
    """Threshold sweep over the labeled gallery pool."""
    data = load_inputs(config)
    labeled = data.gallery_manifest.labeled_valid()
    if not labeled:
        raise ValidationError("gallery manifest has no labeled valid samples")
    return threshold_sweep(
        labeled, data.face, data.face_obs, grid, config.thresholds
    )


def cluster_run(config: RunConfig, k: int) -> list[dict]:
    """Cluster all face vectors for offline labeling; rows sorted by
    cluster, then distance to centroid."""
    config.require_paths("face_embeddings")
    face = load_embeddings(config.face_embeddings, FACE)
    if len(face) == 0:
        raise ValidationError("face embedding file is empty")
    records = sorted(face, key=lambda r: r.sample_id)
    report = cluster_face_features(
        [r.vector for r in records], k, config.seed
    )
    rows = []
    for cluster_id, members in enumerate(report.members):
        for index, distance in members:
            rows.append(
                {
                    "cluster_id": cluster_id,
                    "sample_id": records[index].sample_id,
                    "distance": distance,
                }
            )
    return rows
