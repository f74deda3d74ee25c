"""Hierarchical abductive explanations for neuro-symbolic pipelines."""

__version__ = "0.1.0"
