"""Permutation-invariant distances and Wasserstein distances of empirical measures.

Sequences are ``(d, n)`` arrays, one column per vector.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

EXHAUSTIVE_MAX_N = 9


def _check_pair(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape != Y.shape:
        raise ValueError(f"sequence shapes differ: {X.shape} vs {Y.shape}")
    if X.shape[1] < 1:
        raise ValueError("sequences must have at least one column")
    return X, Y


def ground_distances(X, Y, ground: str = "l2") -> np.ndarray:
    """Matrix of column distances ``||X[:, i] - Y[:, j]||``."""
    diff = X[:, :, None] - Y[:, None, :]
    if ground == "l2":
        return np.sqrt((diff * diff).sum(axis=0))
    if ground == "linf":
        return np.abs(diff).max(axis=0)
    raise ValueError(f"unknown ground norm {ground!r}")


def _exhaustive(D: np.ndarray, q: float) -> float:
    n = D.shape[0]
    rows = np.arange(n)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        d = D[rows, perm]
        val = d.max() if math.isinf(q) else (d ** q).sum()
        best = min(best, val)
    return best if math.isinf(q) else best ** (1.0 / q)


def _has_perfect_matching(mask: np.ndarray) -> bool:
    match = maximum_bipartite_matching(csr_matrix(mask.astype(np.int8)), perm_type="column")
    return bool((match >= 0).all())


def _bottleneck(D: np.ndarray) -> float:
    # smallest threshold t such that edges with D <= t admit a perfect matching
    levels = np.unique(D)
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(D <= levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


def perm_distance(X, Y, q: float = 2.0, ground: str = "l2", method: str = "auto") -> float:
    """``min over permutations pi of (sum_i ||x_i - y_pi(i)||^q)^(1/q)``.

    ``q = inf`` gives the bottleneck distance. ``method`` is ``'exhaustive'``
    (n <= 9), ``'assignment'`` or ``'auto'`` (exhaustive for n <= 6).
    """
    X, Y = _check_pair(X, Y)
    q = float(q)
    if not q >= 1:
        raise ValueError("q must be >= 1")
    n = X.shape[1]
    D = ground_distances(X, Y, ground)
    if method == "auto":
        method = "exhaustive" if n <= 6 else "assignment"
    if method == "exhaustive":
        if n > EXHAUSTIVE_MAX_N:
            raise ValueError(f"exhaustive mode needs n <= {EXHAUSTIVE_MAX_N}")
        return float(_exhaustive(D, q))
    if method != "assignment":
        raise ValueError(f"unknown method {method!r}")
    if math.isinf(q):
        return _bottleneck(D)
    cost = D ** q
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() ** (1.0 / q))


def wasserstein_empirical(X, Y, q: float = 2.0, ground: str = "l2", method: str = "auto") -> float:
    """W_q between the uniform empirical measures of two equal-length sequences."""
    d = perm_distance(X, Y, q, ground, method)
    n = np.atleast_2d(np.asarray(X)).shape[1]
    return d if math.isinf(float(q)) else d * n ** (-1.0 / float(q))
