"""Error types for the extractor adapter."""

from __future__ import annotations


class ExtractorError(Exception):
    """Base error: bad configuration, unknown model, malformed manifest."""


class ManifestError(ExtractorError):
    """A crop manifest could not be parsed or violates its format."""
