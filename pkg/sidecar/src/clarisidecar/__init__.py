"""Inference sidecar for the clarisearch backend wire protocol."""

__version__ = "0.1.0"
