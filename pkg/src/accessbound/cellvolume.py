"""Decoder-cell volume distribution and its n-fold products.

``D`` is the distribution of ``|E_t| / |E|`` for a token ``t`` drawn
uniformly among tokens with nonzero estimated mass. A length-n sequence is
modelled as a product of n independent draws; everything is done on logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

EXACT_BUDGET = 1_000_000
Z99 = 2.5758293035489004  # standard normal 0.995 quantile
_CDF_TOL = 1e-12


class ThresholdCapError(RuntimeError):
    pass


@dataclass
class CellVolumeDistribution:
    tokens: np.ndarray          # token ids with nonzero mass
    log_fractions: np.ndarray   # ln(|E_t| / |E|) for those tokens
    zero_mass_tokens: int
    sample_count: int           # 0 for analytic distributions

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.log_fractions = np.asarray(self.log_fractions, dtype=np.float64)
        if len(self.tokens) != len(self.log_fractions) or len(self.tokens) == 0:
            raise ValueError("need one log fraction per token and at least one token")
        if (self.log_fractions > 1e-12).any():
            raise ValueError("cell fractions must lie in (0, 1]")

    def atoms(self):
        """Distinct log values with token-uniform weights."""
        vals, counts = np.unique(self.log_fractions, return_counts=True)
        return vals, counts / counts.sum()

    def ranked_fractions(self) -> np.ndarray:
        """Fractions sorted largest first (zero-mass tokens excluded)."""
        return np.sort(np.exp(self.log_fractions))[::-1]

    def top_cells(self, k: int = 10) -> list:
        order = np.lexsort((self.tokens, -self.log_fractions))[:k]
        return [(int(self.tokens[i]), float(np.exp(self.log_fractions[i]))) for i in order]


def dirac(vocab_size: int) -> CellVolumeDistribution:
    """Every token owns exactly ``1/|V|`` of the support."""
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    return CellVolumeDistribution(np.arange(vocab_size), np.full(vocab_size, -math.log(vocab_size)),
                                  0, 0)


def from_counts(counts) -> CellVolumeDistribution:
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total <= 0:
        raise ValueError("no samples tallied")
    hit = np.nonzero(counts)[0]
    return CellVolumeDistribution(hit, np.log(counts[hit]) - math.log(total),
                                  int(len(counts) - len(hit)), total)


def estimate_cells(F, mins, maxs, count: int, seed: int = 0, shards: int = 1,
                   chunk: int = 100_000) -> CellVolumeDistribution:
    """Tally greedy tokens of points drawn uniformly in the box ``[mins, maxs]``."""
    F = np.asarray(F, dtype=np.float64)
    lo = np.asarray(mins, dtype=np.float64)
    hi = np.asarray(maxs, dtype=np.float64)
    if count < 1:
        raise ValueError("count must be >= 1")
    tally = np.zeros(F.shape[0], dtype=np.int64)
    children = np.random.SeedSequence(seed).spawn(shards)
    per = [count // shards + (i < count % shards) for i in range(shards)]
    for ss, n in zip(children, per):
        rng = np.random.default_rng(ss)
        while n > 0:
            k = min(n, chunk)
            Y = lo + (hi - lo) * rng.random((k, len(lo)))
            tally += np.bincount(np.argmax(Y @ F.T, axis=1), minlength=F.shape[0])
            n -= k
    return from_counts(tally)


@dataclass
class MedianResult:
    log_median: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    method: str = "exact"


def _lower_median(values: np.ndarray, weights: np.ndarray) -> float:
    # smallest v with P(X <= v) >= 1/2
    order = np.argsort(values, kind="stable")
    cdf = np.cumsum(weights[order])
    i = int(np.searchsorted(cdf, 0.5 - _CDF_TOL))
    return float(values[order][min(i, len(order) - 1)])


def _exact_sum_distribution(vals, w, n):
    sv, sw = np.zeros(1), np.ones(1)
    for _ in range(n):
        sv = (sv[:, None] + vals[None, :]).ravel()
        sw = (sw[:, None] * w[None, :]).ravel()
    return sv, sw


def convolve_median(D: CellVolumeDistribution, n: int, method: str = "exact",
                    samples: int = 100_000, seed: int = 0) -> MedianResult:
    """Median of ln(X_1 ... X_n) for i.i.d. ``X_i ~ D``.

    ``exact`` enumerates all outcomes (refuses above 10^6 of them, except for
    a single atom where the answer is ``n*v``); ``mc`` draws ``samples``
    sums and adds a 99% order-statistic confidence interval.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    vals, w = D.atoms()
    if method == "exact":
        if len(vals) == 1:
            return MedianResult(n * float(vals[0]))
        if len(vals) ** n > EXACT_BUDGET:
            raise ValueError(f"exact enumeration needs {len(vals)}^{n} outcomes (budget {EXACT_BUDGET})")
        sv, sw = _exact_sum_distribution(vals, w, n)
        return MedianResult(_lower_median(sv, sw))
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    sums = np.zeros(samples)
    for _ in range(n):
        sums += vals[rng.choice(len(vals), size=samples, p=w)]
    return _mc_median(np.sort(sums))


def _mc_median(sorted_sums: np.ndarray) -> MedianResult:
    S = len(sorted_sums)
    med = float(sorted_sums[(S + 1) // 2 - 1])
    half = Z99 * math.sqrt(S) / 2.0
    lo = int(max(0, math.floor(S / 2.0 - half) - 1))
    hi = int(min(S - 1, math.ceil(S / 2.0 + half)))
    return MedianResult(med, float(sorted_sums[lo]), float(sorted_sums[hi]), "mc")


def inaccessibility_threshold(D: CellVolumeDistribution, log_packing: float,
                              method: str = "auto", samples: int = 100_000, seed: int = 0,
                              cap: int = 100_000) -> int:
    """Smallest n with ``Med(D^n) <= exp(-log_packing)``.

    A single-atom distribution is solved in closed form, which reproduces the
    integer ceiling of the finite-prompt threshold. Otherwise sums are grown
    one factor at a time (exact enumeration while affordable, then
    Monte-Carlo); the median is nonincreasing because every atom is <= 1.
    """
    if not log_packing > 0:
        raise ValueError("log_packing must be positive")
    vals, w = D.atoms()
    if len(vals) == 1 and method in ("auto", "exact"):
        v = float(vals[0])
        if v >= 0.0:
            raise ThresholdCapError("a cell holding the whole support never becomes inaccessible")
        n = math.ceil(log_packing / -v)
        return max(1, int(n))
    if method == "auto":
        method = "mc"
    target = -log_packing
    if method == "exact":
        for n in range(1, cap + 1):
            if convolve_median(D, n, "exact").log_median <= target:
                return n
        raise ThresholdCapError(f"no threshold found up to n={cap}")
    rng = np.random.default_rng(seed)
    sums = np.zeros(samples)
    for n in range(1, cap + 1):
        sums += vals[rng.choice(len(vals), size=samples, p=w)]
        if _mc_median(np.sort(sums)).log_median <= target:
            return n
    raise ThresholdCapError(f"no threshold found up to n={cap} (is there an atom at 1?)")


def median_curve(D: CellVolumeDistribution, ns, method: str = "mc", samples: int = 100_000,
                 seed: int = 0) -> list:
    """``(n, MedianResult)`` for every n, sharing one running Monte-Carlo stream."""
    ns = sorted(int(n) for n in ns)
    vals, w = D.atoms()
    if method == "exact":
        return [(n, convolve_median(D, n, "exact")) for n in ns]
    rng = np.random.default_rng(seed)
    sums = np.zeros(samples)
    out, cur = [], 0
    for n in ns:
        while cur < n:
            sums += vals[rng.choice(len(vals), size=samples, p=w)]
            cur += 1
        out.append((n, _mc_median(np.sort(sums))))
    return out
