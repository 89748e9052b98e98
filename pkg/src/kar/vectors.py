"""Vector primitives shared by keyword selection and the retrieval baseline."""

from __future__ import annotations

import math
from typing import Sequence


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity in [-1, 1]. Errors on dimension mismatch or zero norm."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("empty vector")
    dot = 0.0
    norm_a = 0.0
    norm_b = 0.0
    for x, y in zip(a, b):
        dot += x * y
        norm_a += x * x
        norm_b += y * y
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("zero-norm vector")
    return dot / (math.sqrt(norm_a) * math.sqrt(norm_b))
