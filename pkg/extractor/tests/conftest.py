"""Shared fixtures: synthetic person-crop images and manifest files."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

SKIN = (224, 172, 140)
EYE = (40, 28, 24)
CLOTHES = [(60, 90, 200), (40, 160, 80), (120, 120, 130), (200, 200, 60)]

MANIFEST_COLUMNS = [
    "label",
    "im_name",
    "frame_num",
    "x1",
    "y1",
    "x2",
    "y2",
    "conf",
    "vid_name",
    "track_id",
    "crop_id",
    "invalid",
]


def draw_crop(
    path: Path,
    clothes: tuple[int, int, int],
    with_face: bool = True,
    with_features: bool = True,
    size: tuple[int, int] = (64, 128),
    rng: np.random.Generator | None = None,
) -> None:
    """Paint a person-shaped crop: clothes canvas, optional skin face.

    The face is an ellipse in the top quarter; `with_features` adds eye
    and nose dots so the face patch carries texture.
    """
    width, height = size
    image = np.zeros((height, width, 3), dtype=np.float64)
    image[:] = clothes
    if with_face:
        cy, cx = height * 0.17, width * 0.5
        ry, rx = height * 0.11, width * 0.22
        yy, xx = np.mgrid[0:height, 0:width]
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        image[inside] = SKIN
        if with_features:
            for dx, dy in ((-0.4 * rx, -0.2 * ry), (0.4 * rx, -0.2 * ry), (0.0, 0.35 * ry)):
                yy0, xx0 = int(cy + dy), int(cx + dx)
                image[yy0 - 1 : yy0 + 2, xx0 - 1 : xx0 + 2] = EYE
    if rng is not None:
        image = image + rng.uniform(-8.0, 8.0, size=image.shape)
    array = np.clip(image, 0, 255).astype(np.uint8)
    Image.fromarray(array).save(path)


def write_manifest(path: Path, im_names: list[str], labels: list[str] | None = None) -> None:
    labels = labels if labels is not None else ["" for _ in im_names]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for i, (name, label) in enumerate(zip(im_names, labels)):
            writer.writerow(
                [
                    label,
                    name,
                    str(i),
                    "0.0",
                    "0.0",
                    "64.0",
                    "128.0",
                    "0.95",
                    "vid_a",
                    str(i // 10),
                    str(i % 10),
                    "false",
                ]
            )
