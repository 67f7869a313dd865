"""Copying-length generalization at toy scale.

Strings ``x`` over ``S`` symbols are formatted as ``x | x`` with a separator
token ``S``. The model sees ``x |`` and must emit ``x``; training uses
teacher forcing with the loss restricted to the copy region. Because the
causal model predicts each copy token from the correct prefix, all copy
positions having the right argmax is the same event as greedy decoding
producing the exact copy; evaluation uses that shortcut and spot-checks it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..toymodel import ToyTransformer
from .fitting import SigmoidFit, sigmoid_fit


@dataclass(frozen=True)
class CopyConfig:
    symbols: int = 16
    dim: int = 16
    layers: int = 2
    heads: int = 4
    head_dim: int = 16
    mlp_dim: int = 64
    train_max_len: int = 12
    eval_max_len: int = 30
    batch: int = 16
    lr: float = 3e-3
    weight_decay: float = 0.0
    max_steps: int = 5000
    eval_every: int = 100
    eval_trials: int = 64
    seed: int = 0

    @property
    def separator(self) -> int:
        return self.symbols

    @property
    def context(self) -> int:
        return 2 * self.eval_max_len + 1


@dataclass
class TrainLog:
    steps: int
    stopped_early: bool
    losses: list = field(default_factory=list)      # mean loss per step
    checks: list = field(default_factory=list)      # (step, accuracy at train_max_len)


def build_copy_model(cfg: CopyConfig) -> ToyTransformer:
    return ToyTransformer.init_random(cfg.symbols + 1, cfg.dim, cfg.layers, cfg.heads, cfg.head_dim,
                                      cfg.mlp_dim, norm="linf", positional="absolute",
                                      max_len=cfg.context, seed=cfg.seed, embed_scale=1.0)


def copy_example(x, sep: int):
    """Input tokens, predicting positions and targets for ``x | x``."""
    x = np.asarray(x, dtype=np.int64)
    n = len(x)
    tokens = np.concatenate([x, [sep], x[:-1]])
    positions = np.arange(n, 2 * n)
    return tokens, positions, x


def _example_grads(model, x, sep):
    tokens, positions, targets = copy_example(x, sep)
    loss, gX, grads, correct = model.sequence_loss(model.embed(tokens), positions, targets,
                                                   causal=True, want_params=True)
    gE = np.zeros_like(model.params["E"])
    np.add.at(gE.T, tokens, gX.T)
    grads["E"] = gE
    return loss, grads, bool(correct.all())


def copy_correct(model, x, sep: int) -> bool:
    tokens, positions, targets = copy_example(x, sep)
    _, _, _, correct = model.sequence_loss(model.embed(tokens), positions, targets, causal=True,
                                           want_params=False, want_input=False)
    return bool(correct.all())


def _accuracy(model, strings, sep) -> float:
    return float(np.mean([copy_correct(model, x, sep) for x in strings]))


def copy_finetune(model: ToyTransformer, cfg: CopyConfig):
    """Train every parameter with Adam until the held-out check at ``train_max_len`` is perfect."""
    if model.positional != "absolute":
        raise ValueError("copying needs absolute positions")
    sep = cfg.separator
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 10]))
    check_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    check = [check_rng.integers(0, cfg.symbols, size=cfg.train_max_len)
             for _ in range(cfg.eval_trials)]
    names = sorted(model.params)
    mom = {k: np.zeros_like(model.params[k]) for k in names}
    vel = {k: np.zeros_like(model.params[k]) for k in names}
    b1, b2, eps = 0.9, 0.999, 1e-8
    log = TrainLog(0, False)
    for step in range(cfg.max_steps + 1):
        if step % cfg.eval_every == 0 or step == cfg.max_steps:
            acc = _accuracy(model, check, sep)
            log.checks.append((step, acc))
            if acc == 1.0:
                log.steps, log.stopped_early = step, True
                return model, log
        if step == cfg.max_steps:
            break
        lengths = rng.integers(1, cfg.train_max_len + 1, size=cfg.batch)
        total = {k: np.zeros_like(model.params[k]) for k in names}
        loss_sum, count = 0.0, 0
        for n in lengths:
            x = rng.integers(0, cfg.symbols, size=int(n))
            loss, grads, _ = _example_grads(model, x, sep)
            loss_sum += loss
            count += int(n)
            for k in names:
                total[k] += grads[k]
        log.losses.append(loss_sum / count)
        t = step + 1
        for k in names:
            g = total[k] / count + cfg.weight_decay * model.params[k]
            mom[k] = b1 * mom[k] + (1 - b1) * g
            vel[k] = b2 * vel[k] + (1 - b2) * g * g
            model.params[k] -= cfg.lr * (mom[k] / (1 - b1 ** t)) / (np.sqrt(vel[k] / (1 - b2 ** t)) + eps)
    log.steps = cfg.max_steps
    return model, log


@dataclass
class CopyEval:
    lengths: list
    accuracy: list
    trials: int
    fit: SigmoidFit

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "accuracy", "trials"])
        for n, a in zip(self.lengths, self.accuracy):
            w.writerow([n, f"{a:.6g}", self.trials])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"lengths": list(self.lengths), "accuracy": list(self.accuracy),
                "trials": self.trials, "fit": self.fit.to_dict(),
                "transition_length": self.fit.n50 if math.isfinite(self.fit.n50) else None}


def copy_eval(model: ToyTransformer, lengths, trials: int, seed: int, symbols: int,
              verify_greedy: int = 2) -> CopyEval:
    """Exact-match copy accuracy per length plus a sigmoid fit over length.

    ``verify_greedy`` strings per length are also decoded greedily and must
    agree with the teacher-forced verdict.
    """
    sep = symbols
    acc = []
    for n in lengths:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 20, int(n)]))
        hits = 0
        for t in range(trials):
            x = rng.integers(0, symbols, size=int(n))
            ok = copy_correct(model, x, sep)
            if t < verify_greedy:
                out = model.greedy_decode(model.embed(np.append(x, sep)), int(n))
                if (out == x.tolist()) != ok:
                    raise AssertionError("teacher-forced verdict disagrees with greedy decoding")
            hits += ok
        acc.append(hits / trials)
    return CopyEval(list(lengths), acc, trials, sigmoid_fit(lengths, acc))


def run_copy(cfg: CopyConfig):
    model = build_copy_model(cfg)
    model, log = copy_finetune(model, cfg)
    return model, log


def config_dict(cfg: CopyConfig) -> dict:
    return asdict(cfg)
