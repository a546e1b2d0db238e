"""HTTP service exposing the training, unlearning and post-processing pipeline."""

from .app import app, create_app

__all__ = ["app", "create_app"]
