"""Synthetic dataset generator with known ground truth.

Builds a desk-scale corpus in the engine's file formats. Each identity
is a unit vector; appearance embeddings mix the identity with a
per-clothes-round vector plus noise, so a high clothes weight makes
appearance matching fail across rounds while faces stay informative.
Unknown identities appear only in query tracks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .io import dump_crop_manifest, dump_embeddings, dump_face_observations
from .types import CropRecord, EmbeddingRecord, FaceObservation, FACE, REID

GALLERY_VID = "vid_g"
# Face boxes and keypoints are fixed per crop; keypoints sit inside the box
# so pose verification passes for every generated face.
_CROP_BOX = (0.0, 0.0, 64.0, 128.0)
_FACE_BOX = (16.0, 8.0, 48.0, 40.0)
_KEYPOINTS = {"left_eye": (24.0, 20.0), "right_eye": (40.0, 20.0), "nose": (32.0, 28.0)}


@dataclass(frozen=True)
class SyntheticSpec:
    n_identities: int = 5
    n_unknown_identities: int = 0
    n_clothes_per_identity: int = 2
    dim: int = 32
    face_noise_sigma: float = 0.05
    reid_clothes_weight: float = 0.9
    face_visibility_rate: float = 0.8
    crops_per_track: int = 12
    tracks_per_identity: int = 2
    seed: int = 0
    gallery_samples_per_identity: int = 4
    noisy_face_rate: float = 0.0
    reid_noise_sigma: float = 0.05
    identity_separation: float = 0.25
    same_clothes_tracks_per_identity: int = 0

    def __post_init__(self) -> None:
        for name in (
            "n_identities",
            "n_clothes_per_identity",
            "crops_per_track",
            "tracks_per_identity",
            "gallery_samples_per_identity",
        ):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        for name in ("n_unknown_identities", "same_clothes_tracks_per_identity"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.dim < 2:
            raise ValidationError("dim must be at least 2")
        for name in (
            "reid_clothes_weight",
            "face_visibility_rate",
            "noisy_face_rate",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value}")
        for name in ("face_noise_sigma", "reid_noise_sigma"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be non-negative")
        if not 0.0 < self.identity_separation <= 1.0:
            raise ValidationError("identity_separation must be in (0, 1]")


@dataclass(frozen=True)
class SyntheticDataset:
    """Paths and ground truth of one generated corpus."""

    out_dir: Path
    gallery_manifest: Path
    query_manifest: Path
    reid_embeddings: Path
    face_embeddings: Path
    face_observations: Path
    config: Path
    known_identities: tuple[str, ...]
    unknown_identities: tuple[str, ...]


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    vector = rng.standard_normal(dim)
    return vector / np.linalg.norm(vector)


def _separated_units(
    rng: np.random.Generator, count: int, dim: int, max_cos: float
) -> list[np.ndarray]:
    """Unit vectors with pairwise |cosine| at most max_cos, by rejection."""
    vectors: list[np.ndarray] = []
    attempts = 0
    while len(vectors) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValidationError(
                f"cannot place {count} identity vectors at separation "
                f"{max_cos} in dimension {dim}"
            )
        candidate = _unit(rng, dim)
        if all(abs(candidate @ other) <= max_cos for other in vectors):
            vectors.append(candidate)
    return vectors


@dataclass
class _Builder:
    spec: SyntheticSpec
    rng: np.random.Generator
    crops: list[CropRecord] = field(default_factory=list)
    reid: list[EmbeddingRecord] = field(default_factory=list)
    faces: list[EmbeddingRecord] = field(default_factory=list)
    observations: list[FaceObservation] = field(default_factory=list)

    def add_crop(
        self,
        label: str,
        identity_vec: np.ndarray,
        clothes_vec: np.ndarray,
        vid_name: str,
        track_id: int,
        crop_id: int,
        with_face: bool,
    ) -> None:
        spec = self.spec
        im_name = f"{vid_name}_t{track_id:03d}_c{crop_id:03d}.jpg"
        self.crops.append(
            CropRecord(
                label=label,
                im_name=im_name,
                frame_num=crop_id,
                x1=_CROP_BOX[0],
                y1=_CROP_BOX[1],
                x2=_CROP_BOX[2],
                y2=_CROP_BOX[3],
                conf=0.99,
                vid_name=vid_name,
                track_id=track_id,
                crop_id=crop_id,
                invalid=False,
            )
        )
        w = spec.reid_clothes_weight
        reid_vec = (
            (1.0 - w) * identity_vec
            + w * clothes_vec
            + spec.reid_noise_sigma * self.rng.standard_normal(spec.dim)
        )
        self.reid.append(
            EmbeddingRecord(sample_id=im_name, modality=REID, vector=reid_vec)
        )
        if not with_face:
            return
        face_vec = identity_vec + spec.face_noise_sigma * self.rng.standard_normal(
            spec.dim
        )
        self.faces.append(
            EmbeddingRecord(sample_id=im_name, modality=FACE, vector=face_vec)
        )
        if spec.noisy_face_rate > 0 and self.rng.random() < spec.noisy_face_rate:
            det_conf = float(self.rng.uniform(0.3, 0.7))
        else:
            det_conf = float(self.rng.uniform(0.8, 1.0))
        self.observations.append(
            FaceObservation(
                sample_id=im_name,
                box=_FACE_BOX,
                det_conf=det_conf,
                **_KEYPOINTS,
            )
        )


def generate_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> SyntheticDataset:
    """Write one synthetic corpus; identical spec and seed give identical bytes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    known = [f"person{i:02d}" for i in range(spec.n_identities)]
    unknown = [f"novel{i:02d}" for i in range(spec.n_unknown_identities)]
    identity_vecs = dict(
        zip(
            known + unknown,
            _separated_units(
                rng,
                len(known) + len(unknown),
                spec.dim,
                spec.identity_separation,
            ),
        )
    )
    clothes_vecs = {
        (label, round_idx): _unit(rng, spec.dim)
        for label in known + unknown
        for round_idx in range(spec.n_clothes_per_identity)
    }

    builder = _Builder(spec=spec, rng=rng)

    gallery_rows: list[CropRecord] = []
    track_id = 0
    for label in known:
        for crop_id in range(spec.gallery_samples_per_identity):
            builder.add_crop(
                label=label,
                identity_vec=identity_vecs[label],
                clothes_vec=clothes_vecs[(label, 0)],
                vid_name=GALLERY_VID,
                track_id=track_id,
                crop_id=crop_id,
                with_face=True,
            )
        track_id += 1
    gallery_rows = list(builder.crops)

    # Query tracks cycle through clothes rounds 1.. so appearance changes
    # from the gallery; optional extra tracks reuse round 0.
    query_start = len(builder.crops)
    for label in known + unknown:
        rounds = []
        for t in range(spec.tracks_per_identity):
            if spec.n_clothes_per_identity > 1:
                rounds.append(1 + t % (spec.n_clothes_per_identity - 1))
            else:
                rounds.append(0)
        rounds.extend([0] * spec.same_clothes_tracks_per_identity)
        for round_idx in rounds:
            vid_name = f"vid_q{round_idx}"
            for crop_id in range(spec.crops_per_track):
                with_face = bool(rng.random() < spec.face_visibility_rate)
                builder.add_crop(
                    label=label,
                    identity_vec=identity_vecs[label],
                    clothes_vec=clothes_vecs[(label, round_idx)],
                    vid_name=vid_name,
                    track_id=track_id,
                    crop_id=crop_id,
                    with_face=with_face,
                )
            track_id += 1
    query_rows = builder.crops[query_start:]

    paths = SyntheticDataset(
        out_dir=out_dir,
        gallery_manifest=out_dir / "gallery_manifest.csv",
        query_manifest=out_dir / "query_manifest.csv",
        reid_embeddings=out_dir / "reid_embeddings.jsonl",
        face_embeddings=out_dir / "face_embeddings.jsonl",
        face_observations=out_dir / "face_observations.jsonl",
        config=out_dir / "config.json",
        known_identities=tuple(known),
        unknown_identities=tuple(unknown),
    )
    dump_crop_manifest(gallery_rows, paths.gallery_manifest)
    dump_crop_manifest(query_rows, paths.query_manifest)
    dump_embeddings(builder.reid, paths.reid_embeddings)
    dump_embeddings(builder.faces, paths.face_embeddings)
    dump_face_observations(builder.observations, paths.face_observations)

    config = {
        "gallery_manifest": "gallery_manifest.csv",
        "query_manifest": "query_manifest.csv",
        "reid_embeddings": "reid_embeddings.jsonl",
        "face_embeddings": "face_embeddings.jsonl",
        "face_observations": "face_observations.jsonl",
        "alpha": 0.75,
        "seed": spec.seed,
        "enrichment_fraction": 1.0,
        "thresholds": {"open_set": spec.n_unknown_identities > 0},
        "eval": {
            "clothes_mode": "general",
            "set_mode": "open" if spec.n_unknown_identities > 0 else "closed",
            "min_track_len": 1,
        },
    }
    paths.config.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return paths
