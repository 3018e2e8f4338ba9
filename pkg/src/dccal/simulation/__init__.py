"""Synthetic datasets and tracking sequences."""
