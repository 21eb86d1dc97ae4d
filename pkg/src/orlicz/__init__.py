"""Orlicz sequence spaces: norms, indices, explicit coarse/uniform embeddings."""

__version__ = "0.1.0"
