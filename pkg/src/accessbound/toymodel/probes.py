"""Geometric probes of the embedding space: next-token regions, plane cuts, radii."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..plotting import palette, raster_svg


def next_token_region(model, x) -> int:
    """Token whose decoder row scores highest at ``x`` (lowest index on ties)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.isfinite(x).all():
        raise ValueError("x contains non-finite values")
    return int(np.argmax(model.params["F"] @ x))


@dataclass
class PlaneCut:
    grid: np.ndarray        # (rows, cols) token labels; row 0 is the top (largest t)
    s: np.ndarray           # plane coordinate of each column
    t: np.ndarray           # plane coordinate of each row
    anchor_pixels: list     # (row, col) for anchors 0, 1, 2
    anchor_tokens: list

    def color_key(self) -> list:
        toks = sorted(set(int(v) for v in np.unique(self.grid)))
        cols = palette(max(toks) + 1 if toks else 1)
        area = {t: int((self.grid == t).sum()) for t in toks}
        return [(t, cols[t], area[t]) for t in toks]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "token"])
        for (r, c), tok in np.ndenumerate(self.grid):
            w.writerow([r, c, int(tok)])
        return buf.getvalue()

    def key_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["token", "color", "pixels"])
        for row in self.color_key():
            w.writerow(row)
        return buf.getvalue()

    def to_svg(self, cell: int = 4) -> str:
        colors = {t: c for t, c, _ in self.color_key()}
        markers = [(r, c, f"a{i}") for i, (r, c) in enumerate(self.anchor_pixels)]
        return raster_svg(self.grid.tolist(), colors, markers, cell=cell)


def plane_cut_map(model, anchors, resolution: int = 64, margin: float = 0.5) -> PlaneCut:
    """Rasterize next-token regions over the plane through three anchors.

    A point is ``a0 + s (a1 - a0) + t (a2 - a0)``. The grid step is
    ``1/resolution`` in both ``s`` and ``t``, with a whole number of pixels of
    margin, so the anchors land exactly on pixels at (s, t) = (0,0), (1,0),
    (0,1).
    """
    A = np.asarray(anchors, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != 3:
        raise ValueError("anchors must be three vectors")
    if A.shape[1] != model.dim:
        raise ValueError(f"anchors must have dimension {model.dim}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    a0, u, v = A[0], A[1] - A[0], A[2] - A[0]
    scale = max(np.abs(A).max(), 1.0)
    if np.linalg.matrix_rank(np.stack([u, v]), tol=1e-12 * scale) < 2:
        raise ValueError("anchors are affinely dependent; they do not span a plane")
    pad = int(round(margin * resolution))
    idx = np.arange(-pad, resolution + pad + 1)
    s = idx / resolution
    t = idx[::-1] / resolution
    S, Tm = np.meshgrid(s, t)
    pts = a0[None, None, :] + S[..., None] * u + Tm[..., None] * v
    grid = np.argmax(pts @ model.params["F"].T, axis=-1)
    n = len(idx)
    anchor_pixels = [(n - 1 - pad, pad), (n - 1 - pad, pad + resolution),
                     (n - 1 - pad - resolution, pad)]
    anchor_tokens = [next_token_region(model, a) for a in A]
    return PlaneCut(grid, s, t, anchor_pixels, anchor_tokens)


def radius_profile(model, lengths, samples: int = 64, seed: int = 0,
                   causal: bool = True) -> np.ndarray:
    """Max l_inf norm over layers (input included) and positions, per prompt length.

    Prompts are i.i.d. uniform token sequences.
    """
    rng = np.random.default_rng(seed)
    out = []
    for length in lengths:
        if length < 1:
            raise ValueError("lengths must be >= 1")
        best = 0.0
        for _ in range(samples):
            toks = rng.integers(0, model.vocab_size, size=int(length))
            Hs = np.asarray(model.run(model.embed(toks), causal)["Hs"])
            best = max(best, float(np.abs(Hs).max()))
        out.append(best)
    return np.array(out)
