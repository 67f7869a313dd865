"""Monte-Carlo estimates of where last-token embeddings live.

Three enclosures are fitted to a cloud of final-layer vectors: an l_inf
ball (max coordinate magnitude), a cone (widest pairwise angle) and an
axis-aligned box (coordinate ranges). Each is turned into a slope bound.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bounds

MAX_EXACT_PAIRS = 10_000_000


@dataclass
class EmbeddingSample:
    vectors: np.ndarray     # (N, d)
    max_len: int
    seed: Optional[int]
    source: str = "toy-model"

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if self.vectors.shape[0] == 0:
            raise ValueError("embedding sample is empty")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class ConeEstimate:
    angle: float
    pairs: int
    subsampled: bool    # True means the angle is a lower-bound estimate


def sample_embeddings(model, count: int, max_len: int, seed: int = 0,
                      fixed_length: bool = False, causal: bool = True) -> EmbeddingSample:
    """Last-column final-layer vectors for uniformly random token prompts.

    Prompt lengths are uniform on ``[1, max_len]`` (or exactly ``max_len``
    with ``fixed_length``).
    """
    if count < 1 or max_len < 1:
        raise ValueError("count and max_len must be >= 1")
    rng = np.random.default_rng(seed)
    if fixed_length:
        lengths = np.full(count, max_len)
    else:
        lengths = rng.integers(1, max_len + 1, size=count)
    out = np.empty((count, model.dim))
    for i, n in enumerate(lengths):
        toks = rng.integers(0, model.vocab_size, size=int(n))
        out[i] = np.asarray(model.run(model.embed(toks), causal)["Hs"])[-1, -1]
    return EmbeddingSample(out, max_len, seed)


def load_embeddings_csv(path) -> EmbeddingSample:
    """One vector per row; ``#`` lines and a non-numeric header are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(line for line in fh if not line.startswith("#")):
            if not rec:
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise
    return EmbeddingSample(np.array(rows), max_len=0, seed=None, source="external")


def estimate_ball(sample: EmbeddingSample) -> float:
    return float(np.abs(sample.vectors).max())


def estimate_box(sample: EmbeddingSample):
    V = sample.vectors
    return V.min(axis=0), V.max(axis=0)


def estimate_cone(sample: EmbeddingSample, max_pairs: int = MAX_EXACT_PAIRS, seed: int = 0,
                  chunk: int = 2048) -> ConeEstimate:
    """``arccos`` of the smallest pairwise cosine similarity.

    All pairs are scanned when there are at most ``max_pairs`` of them;
    otherwise ``max_pairs`` random pairs are drawn and the estimate is
    flagged as subsampled.
    """
    V = sample.vectors
    norms = np.sqrt((V * V).sum(axis=1))
    U = V[norms > 0] / norms[norms > 0, None]
    n = len(U)
    if n < 2:
        raise ValueError("cone estimate needs at least two nonzero vectors")
    total = n * (n - 1) // 2
    if total <= max_pairs:
        cmin = 1.0
        for a in range(0, n, chunk):
            G = U[a:a + chunk] @ U[a:].T
            # keep only pairs (i, j) with i < j
            iu = np.arange(G.shape[0])[:, None] >= np.arange(G.shape[1])[None, :]
            G[iu] = np.inf
            cmin = min(cmin, float(G.min()))
        return ConeEstimate(math.acos(max(-1.0, min(1.0, cmin))), total, False)
    rng = np.random.default_rng(seed)
    cmin = 1.0
    left = max_pairs
    while left > 0:
        k = min(left, 1_000_000)
        i = rng.integers(0, n, size=k)
        j = rng.integers(0, n - 1, size=k)
        j = j + (j >= i)  # distinct partner
        cmin = min(cmin, float(np.einsum("ij,ij->i", U[i], U[j]).min()))
        left -= k
    return ConeEstimate(math.acos(max(-1.0, min(1.0, cmin))), max_pairs, True)


def slopes_for_sample(sample: EmbeddingSample, vocab_size: int,
                      precision: bounds.PrecisionModel = bounds.FP16,
                      max_pairs: int = MAX_EXACT_PAIRS, seed: int = 0) -> list:
    """``(shape, params, SlopeBound)`` for the ball, cone and box enclosures."""
    from .geometry import Ball, Cone

    d = sample.dim
    eps = bounds.machine_epsilon(precision)
    lnv = math.log(vocab_size)
    rows = []
    r = estimate_ball(sample)
    ball = bounds.slope_ball(bounds.ModelGeometry(d, vocab_size, Ball(d, max(r, 1e-300), "linf"),
                                                  precision))
    rows.append(("ball", {"radius": r}, ball))
    cone = estimate_cone(sample, max_pairs, seed)
    # the cone formula needs an l2 radius
    r2 = float(np.sqrt((sample.vectors ** 2).sum(axis=1)).max())
    cparams = {"angle": cone.angle, "radius": r2, "subsampled": cone.subsampled}
    if 0.0 < cone.angle < math.pi:
        cs = bounds.slope_cone(bounds.ModelGeometry(d, vocab_size, Cone(d, r2, cone.angle), precision))
    else:
        # degenerate opening: fall back to the enclosing ball
        lp = d * math.log1p(2.0 * r2 / eps)
        cs = bounds.SlopeBound(lp / lnv, "cone", lp)
        cparams["fallback"] = "ball"
    rows.append(("cone", cparams, cs))
    lo, hi = estimate_box(sample)
    lp = bounds.log_packing_ranges(hi - lo, eps)
    rows.append(("ellipsoid", {"mean_range": float((hi - lo).mean())},
                 bounds.SlopeBound(lp / lnv, "ellipsoid", lp)))
    return rows


def stability_curve(model, lengths, count: int = 10_000, seed: int = 0,
                    precision: bounds.PrecisionModel = bounds.FP16,
                    max_pairs: int = MAX_EXACT_PAIRS) -> list:
    """Slope bounds per maximum prompt length; rows are ``(ell, shape, params, slope)``."""
    out = []
    for ell in lengths:
        sample = sample_embeddings(model, count, int(ell), seed)
        for shape, params, sb in slopes_for_sample(sample, model.vocab_size, precision,
                                                   max_pairs, seed):
            out.append((int(ell), shape, params, sb.slope))
    return out


def format_params(params: dict) -> str:
    parts = []
    for k in sorted(params):
        v = params[k]
        parts.append(f"{k}={v:.10g}" if isinstance(v, float) else f"{k}={v}")
    return ";".join(parts)


def curve_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ell", "shape", "params", "slope"])
    for ell, shape, params, s in rows:
        w.writerow([ell, shape, format_params(params), f"{s:.10g}"])
    return buf.getvalue()
