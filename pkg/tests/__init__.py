"""Tests for dccal."""
