"""Error types for the export tool."""


class ExportError(Exception):
    """Any failure while reading inputs or encoding."""


class ManifestError(ExportError):
    """Malformed or inconsistent manifest CSV."""
