"""Track construction from crop manifests."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

from .errors import IntegrityError, ValidationError
from .types import CropManifest, CropRecord


@dataclass(frozen=True, eq=False)
class Track:
    """Ordered crops of one tracked person within one video.

    Image-based datasets are represented as tracks of length 1. The ground
    truth label is set only when every labeled crop in the track agrees.
    """

    vid_name: str
    track_id: int
    crops: tuple[CropRecord, ...]
    ground_truth: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.crops:
            raise ValidationError(f"track {self.key!r} has no crops")
        last = None
        for crop in self.crops:
            if crop.track_key != self.key:
                raise ValidationError(
                    f"track {self.key!r} contains crop {crop.im_name!r} "
                    f"from track {crop.track_key!r}"
                )
            if crop.invalid:
                raise ValidationError(
                    f"track {self.key!r} contains invalid crop {crop.im_name!r}"
                )
            if last is not None and crop.crop_id <= last:
                raise ValidationError(f"track {self.key!r}: crop_ids not ascending")
            last = crop.crop_id

    @property
    def key(self) -> tuple[str, int]:
        return (self.vid_name, self.track_id)

    def __len__(self) -> int:
        return len(self.crops)

    def crop_names(self) -> list[str]:
        return [c.im_name for c in self.crops]


@dataclass(frozen=True, eq=False)
class TrackSet:
    """Tracks in (vid_name, track_id) order."""

    tracks: tuple[Track, ...]

    @cached_property
    def _by_key(self) -> dict[tuple[str, int], Track]:
        return {t.key: t for t in self.tracks}

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self) -> Iterator[Track]:
        return iter(self.tracks)

    def get(self, vid_name: str, track_id: int) -> Optional[Track]:
        return self._by_key.get((vid_name, track_id))


def build_tracks(manifest: CropManifest) -> TrackSet:
    """Group valid crops into tracks.

    Crops flagged invalid are dropped; tracks left empty are omitted. Crops
    are ordered by ascending crop_id within each track. Raises IntegrityError
    when labeled crops within one track disagree, which usually indicates a
    tracker identity switch in the source data.
    """
    groups: dict[tuple[str, int], list[CropRecord]] = {}
    for rec in manifest:
        if rec.invalid:
            continue
        groups.setdefault(rec.track_key, []).append(rec)

    tracks: list[Track] = []
    for key in sorted(groups.keys()):
        crops = sorted(groups[key], key=lambda c: c.crop_id)
        labels = {c.label for c in crops if c.label is not None}
        if len(labels) > 1:
            raise IntegrityError(
                f"track {key!r} has conflicting ground-truth labels "
                f"{sorted(labels)!r}"
            )
        ground_truth = labels.pop() if labels else None
        tracks.append(
            Track(vid_name=key[0], track_id=key[1], crops=tuple(crops), ground_truth=ground_truth)
        )
    return TrackSet(tracks=tuple(tracks))
