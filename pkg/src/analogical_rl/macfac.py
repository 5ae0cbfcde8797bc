"""Cheap featural pre-filter in front of structural similarity.

Each board or schema maps to a 27-dim one-hot vector over (cell, object
type); wildcard cells contribute nothing.  An exemplar's retrieval score is
its attention raised to ``p`` times the cosine between feature vectors, and
only the ``top_n`` best-scoring exemplars take part in value estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_TYPES = 3


@dataclass(frozen=True)
class MacParams:
    p: float = 1.0
    top_n: int = 50

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


def features(cells) -> np.ndarray:
    """One-hot features, shape ``(..., 27)``; index ``3 * cell + type``."""
    c = np.asarray(cells, dtype=np.int8)
    out = np.zeros(c.shape + (N_TYPES,))
    for t in range(N_TYPES):
        out[..., t] = c == t
    return out.reshape(c.shape[:-1] + (9 * N_TYPES,))


def cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cosine matrix between ``(C, F)`` and ``(N, F)``; zero norms give 0."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na[:, None] * nb[None, :]
    dots = a @ b.T
    out = np.zeros_like(dots)
    np.divide(dots, denom, out=out, where=denom > 0)
    return out


def mac_score(candidate: np.ndarray, exemplar: np.ndarray, u: float, params: MacParams = MacParams()) -> float:
    """Score of one exemplar feature vector with attention ``u``."""
    if u < 0:
        raise ValueError("attention must be nonnegative")
    return float(u ** params.p * cosine(candidate, exemplar)[0, 0])


def mac_scores(pool, cands: np.ndarray, params: MacParams) -> np.ndarray:
    """``(C, N)`` scores of every pool member for each candidate board."""
    f_c = features(np.asarray(cands).reshape(-1, 9))
    f_e = features(pool.cells)
    return np.power(np.maximum(pool.u, 0.0), params.p)[None, :] * cosine(f_c, f_e)


def _top_indices(scores: np.ndarray, top_n: int) -> np.ndarray:
    # stable sort keeps lower ids (= lower indices) first among ties
    return np.argsort(-scores, kind="stable")[:top_n]


def retrieval_mask(pool, cands: np.ndarray, params: MacParams) -> np.ndarray:
    """1.0 for exemplars retrieved for each candidate, else 0.0."""
    n = len(pool)
    cands = np.asarray(cands).reshape(-1, 9)
    mask = np.zeros((cands.shape[0], n))
    if n == 0:
        return mask
    scores = mac_scores(pool, cands, params)
    for row in range(cands.shape[0]):
        mask[row, _top_indices(scores[row], params.top_n)] = 1.0
    return mask


def retrieve_top_n(pool, candidate, params: MacParams = MacParams()) -> list[int]:
    """Ids of the retrieved exemplars, best first."""
    if len(pool) == 0:
        raise ValueError("cannot retrieve from an empty pool")
    if hasattr(candidate, "cells") and callable(candidate.cells):
        candidate = candidate.cells()
    scores = mac_scores(pool, np.asarray(candidate).reshape(1, 9), params)[0]
    return [int(pool.ids[i]) for i in _top_indices(scores, params.top_n)]
