"""Soft-prompt cramming: can ``m`` free vectors make a frozen model emit a target?

``Y`` (``d x m``) is optimised with Adam on the teacher-forced cross-entropy
of the target. A run succeeds when every teacher-forced argmax equals its
target, which under causal attention is the same event as greedy decoding
reproducing the target; successes are re-checked with a real greedy decode.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .fitting import LinearFit, SigmoidFit, sigmoid_fit, slope_fit


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.01
    weight_decay: float = 0.01
    max_steps: int = 3000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class CramResult:
    success: bool
    final_loss: float
    steps: int
    Y: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class CramConfig:
    ms: tuple = (1, 2, 3, 4)
    ns: tuple = tuple(range(1, 25))
    targets_per_cell: int = 10
    optimizer: OptimizerConfig = OptimizerConfig()
    target_source: str = "random"
    seed: int = 0

    def __post_init__(self):
        if self.targets_per_cell < 1:
            raise ValueError("targets_per_cell must be >= 1")
        if self.optimizer.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if min(self.ms) < 1 or min(self.ns) < 1:
            raise ValueError("m and n values must be >= 1")
        if self.target_source not in ("random", "structured"):
            raise ValueError("target_source must be 'random' or 'structured'")


def init_prompt(model, m: int, rng) -> np.ndarray:
    """I.i.d. normal entries at the scale of the token embeddings."""
    return rng.normal(0.0, float(np.std(model.params["E"])), size=(model.dim, m))


def cram_one(model, targets, m: int, opt: OptimizerConfig = OptimizerConfig(), seed=0,
             Y0: Optional[np.ndarray] = None) -> CramResult:
    """Optimise a length-``m`` soft prompt so that ``model`` emits ``targets``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    targets = np.asarray(targets, dtype=np.int64)
    n = len(targets)
    if n < 1:
        raise ValueError("need at least one target token")
    rng = np.random.default_rng(seed)
    Y = init_prompt(model, m, rng) if Y0 is None else np.array(Y0, dtype=np.float64)
    tail = model.embed(targets[:-1])
    positions = np.arange(m - 1, m - 1 + n)
    mom = np.zeros_like(Y)
    vel = np.zeros_like(Y)
    b1, b2 = opt.beta1, opt.beta2
    loss = math.inf
    for step in range(opt.max_steps + 1):
        seq = np.concatenate([Y, tail], axis=1)
        loss, gseq, _, correct = model.sequence_loss(seq, positions, targets, causal=True,
                                                     want_params=False)
        if correct.all():
            if model.greedy_decode(Y, n) != targets.tolist():
                raise AssertionError("teacher-forced success disagrees with greedy decoding")
            return CramResult(True, loss, step, Y)
        if step == opt.max_steps:
            break
        # Adam with L2 weight decay folded into the gradient
        g = gseq[:, :m] + opt.weight_decay * Y
        mom = b1 * mom + (1.0 - b1) * g
        vel = b2 * vel + (1.0 - b2) * g * g
        t = step + 1
        mhat = mom / (1.0 - b1 ** t)
        vhat = vel / (1.0 - b2 ** t)
        Y = Y - opt.lr * mhat / (np.sqrt(vhat) + opt.eps)
    return CramResult(False, loss, opt.max_steps, Y)


def make_targets(vocab_size: int, n: int, source: str, rng) -> np.ndarray:
    """Random tokens, or a low-entropy periodic string for ``structured``."""
    if source == "random":
        return rng.integers(0, vocab_size, size=n)
    alphabet = rng.choice(vocab_size, size=min(4, vocab_size), replace=False)
    period = int(rng.integers(1, 4))
    motif = alphabet[rng.integers(0, len(alphabet), size=period)]
    return np.resize(motif, n)


def _target_seed(seed: int, n: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, 0, n, k])


def _prompt_seed(seed: int, n: int, k: int, m: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, 1, n, k, m])


@dataclass
class AccessibilityGrid:
    ms: list
    ns: list
    successes: np.ndarray   # (len(ns), len(ms)) counts
    trials: int
    steps: np.ndarray = None  # (len(ns), len(ms)) total optimiser steps

    @property
    def rates(self) -> np.ndarray:
        return self.successes / self.trials

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "m", "rate", "trials"])
        for i, n in enumerate(self.ns):
            for j, m in enumerate(self.ms):
                w.writerow([n, m, f"{self.rates[i, j]:.6g}", self.trials])
        return buf.getvalue()


def _cell_job(args):
    model, n, k, ms, cfg = args
    targets = make_targets(model.vocab_size, n, cfg.target_source,
                           np.random.default_rng(_target_seed(cfg.seed, n, k)))
    out = []
    for m in ms:
        r = cram_one(model, targets, m, cfg.optimizer, _prompt_seed(cfg.seed, n, k, m))
        out.append((r.success, r.steps))
    return out


def accessibility_grid(model, cfg: CramConfig, jobs: int = 1) -> AccessibilityGrid:
    """Success counts over ``(n, m)``; targets depend on ``(n, k)`` only and are shared across m."""
    ms, ns = list(cfg.ms), list(cfg.ns)
    work = [(model, n, k, ms, cfg) for n in ns for k in range(cfg.targets_per_cell)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, work, chunksize=1))
    else:
        results = [_cell_job(w) for w in work]
    succ = np.zeros((len(ns), len(ms)), dtype=np.int64)
    steps = np.zeros((len(ns), len(ms)), dtype=np.int64)
    for (_, n, k, _, _), res in zip(work, results):
        i = ns.index(n)
        for j, (ok, st) in enumerate(res):
            succ[i, j] += int(ok)
            steps[i, j] += st
    return AccessibilityGrid(ms, ns, succ, cfg.targets_per_cell, steps)


@dataclass
class GridFit:
    sigmoids: dict          # m -> SigmoidFit
    linear: Optional[LinearFit]
    n50: dict               # m -> n50

    def to_dict(self) -> dict:
        return {"sigmoids": {str(m): f.to_dict() for m, f in self.sigmoids.items()},
                "n50": {str(m): (v if math.isfinite(v) else None) for m, v in self.n50.items()},
                "linear": asdict(self.linear) if self.linear else None,
                "median_r2": float(np.median([f.r2 for f in self.sigmoids.values()]))}


def fit_grid(grid: AccessibilityGrid) -> GridFit:
    sig, n50 = {}, {}
    for j, m in enumerate(grid.ms):
        f = sigmoid_fit(grid.ns, grid.rates[:, j])
        sig[m] = f
        n50[m] = f.n50
    good = [m for m in grid.ms if math.isfinite(n50[m])]
    lin = slope_fit(good, [n50[m] for m in good]) if len(good) >= 2 else None
    return GridFit(sig, lin, n50)
