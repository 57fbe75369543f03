"""Match detected faces to the crop's main person via pose keypoints.

A crop may contain bystanders whose faces were detected alongside the
main subject's. A detected face is attributed to the main person only
when the pose estimator's eye and nose keypoints fall inside that face's
bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ValidationError
from .types import FaceObservation, Point

Keypoints = tuple[Point, Point, Point]  # (left_eye, right_eye, nose)


@dataclass(frozen=True)
class FaceMatchResult:
    matched: bool
    chosen_face_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.matched != (self.chosen_face_index is not None):
            raise ValidationError(
                "chosen_face_index must be set exactly when matched is true"
            )


NO_MATCH = FaceMatchResult(matched=False)


def face_inside_check(
    box: tuple[float, float, float, float],
    left_eye: Point,
    right_eye: Point,
    nose: Point,
) -> bool:
    """True iff all three keypoints lie inside the box, boundary inclusive."""
    x1, y1, x2, y2 = box
    return all(
        x1 <= px <= x2 and y1 <= py <= y2 for px, py in (left_eye, right_eye, nose)
    )


def crop_keypoints(faces: Sequence[FaceObservation]) -> Optional[Keypoints]:
    """The crop's main-person keypoint triple, if any observation carries one.

    All observations of a crop share one pose estimate, so the first
    complete triple wins.
    """
    for obs in faces:
        kp = obs.keypoints
        if kp is not None:
            return kp
    return None


def select_main_face(
    faces: Sequence[FaceObservation],
    keypoints: Optional[Keypoints] = None,
) -> FaceMatchResult:
    """Pick the detected face that belongs to the crop's main person.

    Among faces whose box contains all three keypoints, the one with the
    highest det_conf wins (lowest index on ties). No faces, no keypoints,
    or no containing box all yield matched=false.
    """
    if keypoints is None:
        keypoints = crop_keypoints(faces)
    if keypoints is None:
        return NO_MATCH
    left_eye, right_eye, nose = keypoints
    best_index: Optional[int] = None
    best_conf = -1.0
    for index, obs in enumerate(faces):
        if not face_inside_check(obs.box, left_eye, right_eye, nose):
            continue
        if obs.det_conf > best_conf:
            best_conf = obs.det_conf
            best_index = index
    if best_index is None:
        return NO_MATCH
    return FaceMatchResult(matched=True, chosen_face_index=best_index)
