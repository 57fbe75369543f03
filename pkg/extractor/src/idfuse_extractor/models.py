"""Deterministic local feature models behind a small registry.

The adapter is plumbing: it runs whatever the registry returns for a model
name and writes the results. The built-in models are handcrafted
descriptors that need no downloads and produce identical output for
identical pixels, which is what the file-format contract exercises. A
deployment with pretrained networks registers them under new names; the
emission pipeline does not change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import ExtractorError

# Rule-based skin classifier margins (RGB space).
_SKIN_MIN_R = 95
_SKIN_MIN_G = 40
_SKIN_MIN_B = 20
_SKIN_SPREAD = 15

# An axis-aligned box around an ellipse is ~pi/4 filled; used as the
# density prior when turning skin coverage into a confidence.
_ELLIPSE_FILL = np.pi / 4.0


@dataclass(frozen=True)
class FaceDetection:
    """One detected face: box, confidence, landmarks, optional embedding."""

    box: tuple[float, float, float, float]
    det_conf: float
    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    nose: tuple[float, float]
    embedding: Optional[np.ndarray]


class StripeHistogram:
    """Whole-body descriptor: stacked per-stripe RGB histograms.

    Crops are resized to a fixed canvas, split into horizontal stripes,
    and each stripe contributes an L1-normalized 4x4x4 color histogram.
    The concatenation is L2-normalized. Batch input is processed with a
    single offset bincount per stripe.
    """

    name = "stripe-hist"
    width = 64
    height = 128
    stripes = 6
    bins_per_channel = 4

    @property
    def dim(self) -> int:
        return self.stripes * self.bins_per_channel ** 3

    def embed_batch(self, images: Sequence[np.ndarray]) -> np.ndarray:
        n_cells = self.bins_per_channel ** 3
        if not images:
            return np.zeros((0, self.dim), dtype=np.float64)
        resized = np.stack(
            [
                np.asarray(
                    Image.fromarray(im).resize((self.width, self.height), Image.BILINEAR)
                )
                for im in images
            ]
        )
        step = 256 // self.bins_per_channel
        quantized = (resized // step).astype(np.int64)
        combined = (
            quantized[..., 0] * self.bins_per_channel ** 2
            + quantized[..., 1] * self.bins_per_channel
            + quantized[..., 2]
        )
        bounds = np.linspace(0, self.height, self.stripes + 1, dtype=int)
        offsets = np.arange(len(images), dtype=np.int64)[:, None] * n_cells
        blocks = []
        for s in range(self.stripes):
            segment = combined[:, bounds[s] : bounds[s + 1], :].reshape(len(images), -1)
            counts = np.bincount(
                (segment + offsets).ravel(), minlength=len(images) * n_cells
            )
            hist = counts.reshape(len(images), n_cells).astype(np.float64)
            hist /= np.maximum(hist.sum(axis=1, keepdims=True), 1.0)
            blocks.append(hist)
        features = np.concatenate(blocks, axis=1)
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        return features / np.maximum(norms, 1e-12)


class GridFace:
    """Rule-based face finder plus grayscale patch embedding.

    Skin-colored pixels in the upper part of the crop vote for a face; the
    tight bounding box around them becomes the detection. Confidence is
    skin coverage inside the box relative to the elliptical fill prior.
    Landmarks sit at canonical fractions of the detected box, the way
    cheap alignment heads emit them. The embedding is the mean-centered
    16x16 grayscale patch; a flat patch carries no signal and yields none.
    """

    name = "grid-face"
    patch_side = 16
    min_pixels = 30
    search_fraction = 0.6

    @property
    def dim(self) -> int:
        return self.patch_side ** 2

    def detect(self, image: np.ndarray) -> list[FaceDetection]:
        height = image.shape[0]
        region = image[: max(1, int(height * self.search_fraction))]
        mask = self._skin_mask(region)
        if int(mask.sum()) < self.min_pixels:
            return []
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        y1, y2 = float(rows[0]), float(rows[-1] + 1)
        x1, x2 = float(cols[0]), float(cols[-1] + 1)
        box_mask = mask[int(y1) : int(y2), int(x1) : int(x2)]
        density = float(box_mask.mean())
        det_conf = float(min(1.0, density / _ELLIPSE_FILL))
        w, h = x2 - x1, y2 - y1
        detection = FaceDetection(
            box=(x1, y1, x2, y2),
            det_conf=det_conf,
            left_eye=(x1 + 0.30 * w, y1 + 0.35 * h),
            right_eye=(x1 + 0.70 * w, y1 + 0.35 * h),
            nose=(x1 + 0.50 * w, y1 + 0.60 * h),
            embedding=self._embed_patch(image[int(y1) : int(y2), int(x1) : int(x2)]),
        )
        return [detection]

    @staticmethod
    def _skin_mask(region: np.ndarray) -> np.ndarray:
        r = region[..., 0].astype(np.int64)
        g = region[..., 1].astype(np.int64)
        b = region[..., 2].astype(np.int64)
        return (
            (r > _SKIN_MIN_R)
            & (g > _SKIN_MIN_G)
            & (b > _SKIN_MIN_B)
            & (r > g)
            & (r > b)
            & ((r - np.minimum(g, b)) > _SKIN_SPREAD)
        )

    def _embed_patch(self, patch: np.ndarray) -> Optional[np.ndarray]:
        gray = np.asarray(
            Image.fromarray(patch)
            .convert("L")
            .resize((self.patch_side, self.patch_side), Image.BILINEAR),
            dtype=np.float64,
        )
        flat = gray.ravel() - gray.mean()
        norm = float(np.linalg.norm(flat))
        if norm < 1e-9:
            return None
        return flat / norm


_REID_MODELS = {StripeHistogram.name: StripeHistogram}
_FACE_MODELS = {GridFace.name: GridFace}


def load_reid_model(name: str) -> StripeHistogram:
    try:
        return _REID_MODELS[name]()
    except KeyError:
        raise ExtractorError(
            f"unknown reid model {name!r}, available: {sorted(_REID_MODELS)}"
        ) from None


def load_face_model(name: str) -> GridFace:
    try:
        return _FACE_MODELS[name]()
    except KeyError:
        raise ExtractorError(
            f"unknown face model {name!r}, available: {sorted(_FACE_MODELS)}"
        ) from None
