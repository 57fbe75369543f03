"""Identity fusion engine over precomputed embeddings.

Labels person tracks by blending appearance similarity against a
face-enriched gallery with direct face similarity, with open-set
Unknown handling, evaluation protocols, a threshold sweep, and a
clustering bootstrap for unlabeled corpora.
"""

from .clustering import ClusterReport, cluster_face_features
from .config import RunConfig, build_config, load_config
from .enrichment import (
    DEFAULT_THRESHOLDS,
    THRESHOLD_PRESETS,
    EnrichmentDecision,
    EnrichmentThresholds,
    build_face_gallery,
    decide_query_label,
    enrich_gallery,
)
from .errors import (
    ConfigError,
    EnrichmentError,
    IdfuseError,
    IntegrityError,
    ParseError,
    ValidationError,
)
from .evaluation import (
    AccuracyResult,
    EvalSample,
    EvalSetting,
    MetricsReport,
    SweepPoint,
    SweepReport,
    apply_setting_filter,
    image_model_track_vote,
    per_image_accuracy,
    per_track_accuracy,
    rank_metrics,
    ranking_report,
    threshold_sweep,
    weighted_general_report,
)
from .facematch import FaceMatchResult, face_inside_check, select_main_face
from .io import (
    dump_crop_manifest,
    dump_embeddings,
    dump_face_observations,
    load_crop_manifest,
    load_embeddings,
    load_face_observations,
)
from .scoring import (
    DEFAULT_ALPHA,
    Prediction,
    ScoreVector,
    cosine_similarity,
    fuse,
    identity_confidence,
    predict_identity,
    predict_track,
    track_score_vector,
)
from .synth import SyntheticSpec, generate_synthetic
from .tracks import Track, TrackSet, build_tracks
from .types import (
    UNKNOWN_LABEL,
    CropManifest,
    CropRecord,
    EmbeddingRecord,
    EmbeddingSet,
    FaceObservation,
    FaceObservationSet,
    Gallery,
    GalleryEntry,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyResult",
    "ClusterReport",
    "ConfigError",
    "CropManifest",
    "CropRecord",
    "DEFAULT_ALPHA",
    "DEFAULT_THRESHOLDS",
    "EmbeddingRecord",
    "EmbeddingSet",
    "EnrichmentDecision",
    "EnrichmentError",
    "EnrichmentThresholds",
    "EvalSample",
    "EvalSetting",
    "FaceMatchResult",
    "FaceObservation",
    "FaceObservationSet",
    "Gallery",
    "GalleryEntry",
    "IdfuseError",
    "IntegrityError",
    "MetricsReport",
    "ParseError",
    "Prediction",
    "RunConfig",
    "ScoreVector",
    "SweepPoint",
    "SweepReport",
    "SyntheticSpec",
    "THRESHOLD_PRESETS",
    "Track",
    "TrackSet",
    "UNKNOWN_LABEL",
    "ValidationError",
    "apply_setting_filter",
    "build_config",
    "build_face_gallery",
    "build_tracks",
    "cluster_face_features",
    "cosine_similarity",
    "decide_query_label",
    "dump_crop_manifest",
    "dump_embeddings",
    "dump_face_observations",
    "enrich_gallery",
    "face_inside_check",
    "fuse",
    "generate_synthetic",
    "identity_confidence",
    "image_model_track_vote",
    "load_config",
    "load_crop_manifest",
    "load_embeddings",
    "load_face_observations",
    "per_image_accuracy",
    "per_track_accuracy",
    "predict_identity",
    "predict_track",
    "rank_metrics",
    "ranking_report",
    "select_main_face",
    "threshold_sweep",
    "track_score_vector",
    "weighted_general_report",
]
