"""idfuse-extractor: crop images in, engine-format feature files out."""

from .config import ExtractorConfig
from .errors import ExtractorError, ManifestError
from .extract import ExtractReport, extract, manifest_im_names
from .models import (
    FaceDetection,
    GridFace,
    StripeHistogram,
    load_face_model,
    load_reid_model,
)

__all__ = [
    "ExtractorConfig",
    "ExtractorError",
    "ManifestError",
    "ExtractReport",
    "extract",
    "manifest_im_names",
    "FaceDetection",
    "GridFace",
    "StripeHistogram",
    "load_face_model",
    "load_reid_model",
]
