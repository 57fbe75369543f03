"""Extraction run configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ExtractorError


@dataclass(frozen=True)
class ExtractorConfig:
    """Where crops come from, which models to run, where files go.

    When `manifest` is set, its im_name column drives the run and each
    im_name is resolved as a filename under `crop_dir`; otherwise every
    image file found directly in `crop_dir` is processed in sorted order.
    """

    crop_dir: Path
    reid_out: Path
    face_out: Path
    observations_out: Path
    manifest: Optional[Path] = None
    reid_model: str = "stripe-hist"
    face_model: str = "grid-face"
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ExtractorError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("crop_dir", "reid_out", "face_out", "observations_out", "manifest"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                object.__setattr__(self, name, Path(value))
