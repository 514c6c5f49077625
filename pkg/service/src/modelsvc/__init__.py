"""Model service: relation classification, target generation and token-level
scoring over HTTP, with a deterministic graph-backed stub mode."""

__version__ = "0.1.0"
