"""Elementary-operation bounds on empirical count vectors.

A prompt over ``D`` distinguishable values is summarised by its count
vector ``x`` in N^D; duplicating or removing a token is a +-1 edit on a
nonzero coordinate. Count vectors that are rational multiples of each other
are indistinguishable, so each class is represented by ``x / gcd(x)``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import _core

EXCEEDS_BUDGET = "exceeds budget"


def _as_counts(x) -> tuple:
    x = tuple(int(v) for v in np.ravel(x))
    if not x:
        raise ValueError("count vector must have length >= 1")
    if any(v < 0 for v in x):
        raise ValueError("count vector entries must be nonnegative")
    if not any(x):
        raise ValueError("count vector must have a positive entry")
    return x


def canonicalize(x) -> tuple:
    """Smallest integer representative of the class of ``x``."""
    x = _as_counts(x)
    g = reduce(math.gcd, x)
    return tuple(v // g for v in x)


def eo_distance(x, y, budget: int, allow_create: bool = False):
    """Fewest +-1 edits turning ``x`` into ``y``, or ``EXCEEDS_BUDGET``.

    Edits only touch nonzero coordinates unless ``allow_create`` is set; the
    all-zero vector is never visited.
    """
    x, y = _as_counts(x), _as_counts(y)
    if len(x) != len(y):
        raise ValueError("count vectors must have equal length")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if x == y:
        return 0
    if sum(abs(a - b) for a, b in zip(x, y)) > budget:
        return EXCEEDS_BUDGET
    if not allow_create and any(b > 0 and a == 0 for a, b in zip(x, y)):
        return EXCEEDS_BUDGET
    seen = {x}
    frontier = deque([(x, 0)])
    while frontier:
        cur, dist = frontier.popleft()
        if dist == budget:
            continue
        for i, v in enumerate(cur):
            if v == 0 and not allow_create:
                continue
            for step in (1, -1):
                nv = v + step
                if nv < 0:
                    continue
                nxt = cur[:i] + (nv,) + cur[i + 1:]
                if nxt in seen or not any(nxt):
                    continue
                if nxt == y:
                    return dist + 1
                seen.add(nxt)
                frontier.append((nxt, dist + 1))
    return EXCEEDS_BUDGET


def basis_radius(p: int, D: int, variant: str = "improved") -> int:
    """Basis radius ``b``: coarse ``ceil(pD/2)`` or improved ``2p``.

    The coarse bound divides by ``b - 2`` and is rejected for ``b <= 2``.
    """
    if p < 1 or D < 1:
        raise ValueError("p and D must be >= 1")
    if variant == "coarse":
        b = -(-p * D // 2)
        if b <= 2:
            raise ValueError(f"coarse basis radius b={b} <= 2 makes the density bound vacuous (p={p}, D={D})")
        return b
    if variant == "improved":
        return 2 * p
    raise ValueError(f"unknown variant {variant!r}")


def log_basis_size(p: int, D: int, variant: str = "improved") -> float:
    """ln |B| = D ln b."""
    return D * math.log(basis_radius(p, D, variant))


def basis_classes(b: int, D: int) -> np.ndarray:
    """Canonical representatives of every nonzero class in ``{x : max x < b}``."""
    classes = {canonicalize(x) for x in itertools.product(range(b), repeat=D) if any(x)}
    return np.array(sorted(classes), dtype=np.int64).reshape(-1, D)


def _compositions(total_max: int, D: int, lead: int):
    # all x in N^D with x[0] == lead and sum(x) <= total_max
    rest = total_max - lead
    for tail in itertools.product(range(rest + 1), repeat=D - 1):
        if sum(tail) <= rest:
            yield (lead,) + tail


@dataclass
class DensityReport:
    p: int
    D: int
    variant: str
    b: int
    max_l1: int
    n_vectors: int = 0
    max_ratio: float = 0.0
    violations: list = field(default_factory=list)
    strict_max_ratio: float = 0.0
    strict_violations: list = field(default_factory=list)
    strict_unreachable: int = 0
    n_classes: int = 0
    log_basis_size: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "p": self.p, "D": self.D, "variant": self.variant, "b": self.b,
            "max_l1": self.max_l1, "n_vectors": self.n_vectors,
            "max_ratio": self.max_ratio, "violations": [list(v) for v in self.violations],
            "strict_max_ratio": self.strict_max_ratio,
            "strict_violations": [list(v) for v in self.strict_violations],
            "strict_unreachable": self.strict_unreachable,
            "n_classes": self.n_classes, "log_basis_size": self.log_basis_size,
            "log_class_count": math.log(self.n_classes) if self.n_classes else float("-inf"),
        }


def verify_density(p: int, D: int, variant: str = "improved", max_l1: int = 30) -> DensityReport:
    """Exhaustively check the density lemma for every ``x`` with ``|x|_1 <= max_l1``.

    For each ``x`` the nearest scaled class representative ``k*c`` (in l1) is
    found and ``|x - kc|_1`` is compared with ``D|x|_1 / (2(b-2))`` (coarse)
    or ``2|x|_1 / b`` (improved). The strict figures only allow classes whose
    support lies inside the support of ``x``, i.e. targets reachable without
    creating new coordinates.
    """
    if D > 4 or max_l1 > 40:
        raise ValueError("exhaustive verification needs D <= 4 and max_l1 <= 40")
    b = basis_radius(p, D, variant)
    # bound holds iff dist * num <= |x|_1 * den
    num, den = (2 * (b - 2), D) if variant == "coarse" else (b, 2)
    C = basis_classes(b, D)
    rep = DensityReport(p, D, variant, b, max_l1, n_classes=len(C),
                        log_basis_size=D * math.log(b))
    for lead in range(max_l1 + 1):  # one shard per leading coordinate
        X = np.array([x for x in _compositions(max_l1, D, lead) if any(x)], dtype=np.int64)
        if len(X) == 0:
            continue
        dist, _, _, dstrict, _, _ = _core.nearest_class_search(X, C, max_l1)
        dist, dstrict = np.asarray(dist), np.asarray(dstrict)
        l1 = X.sum(axis=1)
        rep.n_vectors += len(X)
        rep.max_ratio = max(rep.max_ratio, float((dist * num / (l1 * den)).max()))
        for i in np.nonzero(dist * num > l1 * den)[0]:
            rep.violations.append(tuple(int(v) for v in X[i]))
        ok = dstrict >= 0
        rep.strict_unreachable += int((~ok).sum())
        if ok.any():
            rep.strict_max_ratio = max(rep.strict_max_ratio,
                                       float((dstrict[ok] * num / (l1[ok] * den)).max()))
        for i in np.nonzero(ok & (dstrict * num > l1 * den))[0]:
            rep.strict_violations.append(tuple(int(v) for v in X[i]))
    return rep
