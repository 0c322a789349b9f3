"""Value-function knowledge storage and transfer with a growing self-organizing map."""

from somxfer.core import argmax_similarity, cosine_similarity

__version__ = "0.1.0"

__all__ = ["argmax_similarity", "cosine_similarity", "__version__"]
