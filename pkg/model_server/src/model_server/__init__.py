"""Inference sidecar serving generation, scoring, and embedding over HTTP."""

from .app import create_app
from .config import ServeConfig

__all__ = ["ServeConfig", "create_app"]
