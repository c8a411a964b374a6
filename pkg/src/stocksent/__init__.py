"""Microblog sentiment features and same-day stock movement models."""

__version__ = "0.1.0"
