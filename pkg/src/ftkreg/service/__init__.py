"""FastAPI service wrapping the estimation, inference and simulation core."""

from .app import create_app

__all__ = ["create_app"]
