"""File formats and report emission."""
