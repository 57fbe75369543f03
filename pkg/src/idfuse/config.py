"""Run configuration: JSON file plus flag overrides, then validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from .enrichment import DEFAULT_THRESHOLDS, EnrichmentThresholds, THRESHOLD_PRESETS
from .errors import ConfigError
from .evaluation import EvalSetting
from .scoring import DEFAULT_ALPHA

_PATH_KEYS = (
    "gallery_manifest",
    "query_manifest",
    "reid_embeddings",
    "face_embeddings",
    "face_observations",
)
_SCALAR_KEYS = ("alpha", "seed", "enrichment_fraction", "preset")
_NESTED_KEYS = ("thresholds", "eval")


@dataclass(frozen=True)
class RunConfig:
    gallery_manifest: Optional[Path] = None
    query_manifest: Optional[Path] = None
    reid_embeddings: Optional[Path] = None
    face_embeddings: Optional[Path] = None
    face_observations: Optional[Path] = None
    alpha: float = DEFAULT_ALPHA
    thresholds: EnrichmentThresholds = DEFAULT_THRESHOLDS
    eval_setting: EvalSetting = EvalSetting()
    seed: int = 0
    enrichment_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.enrichment_fraction <= 1.0:
            raise ConfigError(
                f"enrichment_fraction must be in [0, 1], got {self.enrichment_fraction}"
            )

    def require_paths(self, *names: str) -> None:
        """Fail fast when a command needs inputs the config does not name."""
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ConfigError(f"missing required input paths: {', '.join(missing)}")
        for name in names:
            path: Path = getattr(self, name)
            if not path.exists():
                raise ConfigError(f"{name} file does not exist: {path}")

    def to_dict(self) -> dict:
        """JSON-ready snapshot with stable keys."""
        return {
            "gallery_manifest": _path_str(self.gallery_manifest),
            "query_manifest": _path_str(self.query_manifest),
            "reid_embeddings": _path_str(self.reid_embeddings),
            "face_embeddings": _path_str(self.face_embeddings),
            "face_observations": _path_str(self.face_observations),
            "alpha": self.alpha,
            "thresholds": dataclasses.asdict(self.thresholds),
            "eval": {
                "clothes_mode": self.eval_setting.clothes_mode,
                "set_mode": self.eval_setting.set_mode,
                "min_track_len": self.eval_setting.min_track_len,
            },
            "seed": self.seed,
            "enrichment_fraction": self.enrichment_fraction,
        }


def _path_str(path: Optional[Path]) -> Optional[str]:
    return None if path is None else str(path)


def _check_keys(data: Mapping[str, Any], allowed: tuple[str, ...], where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def _resolve(base_dir: Optional[Path], value: Any, key: str) -> Optional[Path]:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a path string")
    path = Path(value)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return path


def build_config(data: Mapping[str, Any], base_dir: Optional[Path] = None) -> RunConfig:
    """RunConfig from a plain mapping; relative paths resolve against base_dir.

    A `preset` names a benchmark threshold set; explicit `thresholds`
    fields override it field by field.
    """
    _check_keys(data, _PATH_KEYS + _SCALAR_KEYS + _NESTED_KEYS, "config")

    preset = data.get("preset")
    if preset is None:
        thresholds = DEFAULT_THRESHOLDS
    else:
        if preset not in THRESHOLD_PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; choose from "
                f"{', '.join(sorted(THRESHOLD_PRESETS))}"
            )
        thresholds = THRESHOLD_PRESETS[preset]
    threshold_data = data.get("thresholds") or {}
    threshold_fields = tuple(f.name for f in dataclasses.fields(EnrichmentThresholds))
    _check_keys(threshold_data, threshold_fields, "thresholds")
    if threshold_data:
        thresholds = dataclasses.replace(thresholds, **threshold_data)

    eval_data = data.get("eval") or {}
    _check_keys(eval_data, ("clothes_mode", "set_mode", "min_track_len"), "eval")
    eval_setting = EvalSetting(**eval_data)

    return RunConfig(
        gallery_manifest=_resolve(base_dir, data.get("gallery_manifest"), "gallery_manifest"),
        query_manifest=_resolve(base_dir, data.get("query_manifest"), "query_manifest"),
        reid_embeddings=_resolve(base_dir, data.get("reid_embeddings"), "reid_embeddings"),
        face_embeddings=_resolve(base_dir, data.get("face_embeddings"), "face_embeddings"),
        face_observations=_resolve(base_dir, data.get("face_observations"), "face_observations"),
        alpha=float(data.get("alpha", DEFAULT_ALPHA)),
        thresholds=thresholds,
        eval_setting=eval_setting,
        seed=int(data.get("seed", 0)),
        enrichment_fraction=float(data.get("enrichment_fraction", 1.0)),
    )


def load_config_data(path: str | Path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return build_config(load_config_data(path), base_dir=path.parent)
