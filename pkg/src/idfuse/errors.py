"""Exception types shared across the package."""

from __future__ import annotations


class IdfuseError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(IdfuseError):
    """A file could not be parsed. Message carries path and line number."""


class ValidationError(IdfuseError):
    """Parsed data violates an invariant (ranges, duplicates, dimensions)."""


class IntegrityError(ValidationError):
    """Cross-record inconsistency, e.g. conflicting labels within one track."""


class EnrichmentError(IdfuseError):
    """Gallery enrichment cannot proceed, e.g. no usable labeled faces."""


class ConfigError(IdfuseError):
    """A run configuration is incomplete or references missing files."""
