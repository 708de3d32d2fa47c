"""Fixed-length chunking of raw profiles and soft voting over chunk predictions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, TooShortError, WidthMismatchError

DROP = "drop"
PAD_EDGE = "pad_edge"


@dataclass(frozen=True)
class ChunkSpec:
    chunk_len: int = 32
    remainder: str = DROP

    def __post_init__(self):
        if self.chunk_len < 2:
            raise DataError("chunk_len must be at least 2")
        if self.remainder not in (DROP, PAD_EDGE):
            raise DataError(f"unknown remainder policy {self.remainder!r}")


def chunk(values, spec: ChunkSpec = ChunkSpec()) -> np.ndarray:
    """Split a signal into consecutive non-overlapping windows of ``chunk_len``.

    With ``drop`` a trailing partial window is discarded and signals shorter
    than one window are an error; with ``pad_edge`` the trailing partial
    window is completed by repeating the last value.
    """
    x = np.asarray(getattr(values, "values", values), dtype=float).reshape(-1)
    if len(x) < 2:
        raise TooShortError("need at least two values to chunk")
    L = spec.chunk_len
    full = len(x) // L
    rem = len(x) - full * L
    if spec.remainder == DROP:
        if full == 0:
            raise TooShortError(f"signal of length {len(x)} is shorter than chunk_len {L}")
        return x[:full * L].reshape(full, L)
    if rem:
        x = np.concatenate([x, np.full(L - rem, x[-1])])
    return x.reshape(-1, L)


def soft_vote(distributions):
    """Sum per-chunk class distributions; return ``(label index, renormalized sum)``."""
    rows = [np.asarray(d, dtype=float).reshape(-1) for d in distributions]
    if not rows or len({len(r) for r in rows}) != 1:
        raise WidthMismatchError("soft_vote needs a non-empty set of equal-width distributions")
    P = np.vstack(rows)
    if P.shape[1] == 0:
        raise WidthMismatchError("soft_vote needs a non-empty 2-D array of equal-width distributions")
    total = P.sum(axis=0)
    return int(np.argmax(total)), total / total.sum()
