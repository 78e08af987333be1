"""Bilingual sentence embeddings: training, similarity scoring, and the
alignment-recovery / corpus-filtering pipelines built on top of them."""

__version__ = "0.1.0"
