"""Utility modules for dccal."""

from .logging import setup_logging

__all__ = ["setup_logging"]
