"""Dense weight vectors and the cosine similarity used for storage and transfer."""

from __future__ import annotations

from typing import Sequence

import numpy as np

NORM_FLOOR = 1e-12


class EmptyKnowledgeBase(ValueError):
    """Raised when a similarity query is made against no candidates."""

    def __init__(self) -> None:
        super().__init__("no knowledge base: candidate set is empty")


def as_weight_vector(values, *, copy: bool = True) -> np.ndarray:
    """Validate ``values`` as a non-empty, finite, 1-D float64 vector."""
    vec = np.array(values, dtype=np.float64, copy=copy)
    if vec.ndim != 1:
        raise ValueError(f"weight vector must be 1-D, got shape {vec.shape}")
    if vec.size == 0:
        raise ValueError("weight vector must have length > 0")
    if not np.all(np.isfinite(vec)):
        raise ValueError("weight vector contains non-finite entries")
    return vec


def is_degenerate(a: np.ndarray, floor: float = NORM_FLOOR) -> bool:
    """True when ``a`` is too close to zero for a meaningful direction."""
    return float(np.linalg.norm(a)) < floor


def cosine_similarity(a, b, floor: float = NORM_FLOOR) -> float:
    """Cosine of the angle between ``a`` and ``b``.

    A vector whose norm is below ``floor`` has no direction; the similarity
    is then 0 (see :func:`is_degenerate`). This keeps freshly initialised,
    all-zero value functions usable as queries.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < floor or nb < floor:
        return 0.0
    c = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, c))


def cosine_to_many(query, matrix, floor: float = NORM_FLOOR) -> np.ndarray:
    """Similarities between ``query`` and every row of ``matrix``."""
    q = np.asarray(query, dtype=np.float64)
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != q.shape[0]:
        raise ValueError(f"shape mismatch: query {q.shape}, candidates {m.shape}")
    nq = float(np.linalg.norm(q))
    norms = np.linalg.norm(m, axis=1)
    out = np.zeros(m.shape[0])
    if nq < floor:
        return out
    ok = norms >= floor
    out[ok] = (m[ok] @ q) / (norms[ok] * nq)
    return np.clip(out, -1.0, 1.0)


def argmax_similarity(query, candidates: Sequence | np.ndarray, floor: float = NORM_FLOOR) -> int:
    """Index of the candidate most similar to ``query``; ties go to the lowest index."""
    if len(candidates) == 0:
        raise EmptyKnowledgeBase()
    sims = cosine_to_many(query, np.asarray(candidates, dtype=np.float64), floor)
    # np.argmax returns the first maximum
    return int(np.argmax(sims))
