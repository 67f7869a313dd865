"""A small decoder-only transformer with exact gradients.

Public arrays follow the column convention: a sequence is ``(d, m)`` with one
column per position, ``E`` is ``(d, |V|)`` and ``F`` is ``(|V|, d)``. The
kernels in ``accessbound._core`` work on rows, so everything is transposed
at the boundary.

Layer ``i`` computes::

    A  = Norm(H)
    H' = H + sum_heads Wo softmax((Wq A)^T (Wk A)) (Wv A)
    H''= H' + W2 relu(W1 Norm(H') + b1) + b2

Norm rescales every column whose l_inf norm exceeds ``norm_bound``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import _core

LAYER_PARAMS = ("Wq", "Wk", "Wv", "Wo", "W1", "b1", "W2", "b2")
NORMS = ("linf", "rms", "none")


@dataclass
class ForwardTrace:
    hidden: np.ndarray      # (l+1, d, m): input followed by each layer output
    attention: np.ndarray   # (l, h, m, m): rows are queries
    final: np.ndarray       # (d,)
    logits: np.ndarray      # (|V|,)
    probs: np.ndarray       # (|V|,)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


class ToyTransformer:
    """Parameters live in ``self.params``; treat a model as immutable unless training it."""

    def __init__(self, params: dict, norm: str = "linf", norm_bound: float = 1.0,
                 seed: Optional[int] = None):
        if norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        self.params = {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in params.items()
                       if v is not None}
        self.norm = norm
        self.norm_bound = float(norm_bound)
        self.seed = seed
        self._check()

    # -- construction -------------------------------------------------------

    @classmethod
    def init_random(cls, vocab_size: int, dim: int, layers: int = 1, heads: int = 2,
                    head_dim: int = 4, mlp_dim: int = 32, value_dim: Optional[int] = None,
                    norm: str = "linf", norm_bound: float = 1.0, positional: str = "none",
                    max_len: int = 0, seed: int = 0, embed_scale: float = 1.0,
                    weight_scale: float = 1.0,
                    unembed_scale: Optional[float] = None) -> "ToyTransformer":
        """Gaussian init with fan-in scaling.

        ``embed_scale`` is the std of E (and P), ``unembed_scale`` that of F
        (defaults to ``embed_scale``), ``weight_scale`` multiplies the fan-in
        std of every layer matrix.
        """
        rng = np.random.default_rng(seed)
        sv = head_dim if value_dim is None else value_dim
        L, h, d, f = layers, heads, dim, mlp_dim
        w = weight_scale
        p = {
            "E": rng.normal(0.0, embed_scale, (d, vocab_size)),
            "F": rng.normal(0.0, embed_scale if unembed_scale is None else unembed_scale,
                            (vocab_size, d)),
            "Wq": rng.normal(0.0, w / np.sqrt(d), (L, h, head_dim, d)),
            # the 1/sqrt(s) attention scale is folded into Wk
            "Wk": rng.normal(0.0, w / np.sqrt(d * head_dim), (L, h, head_dim, d)),
            "Wv": rng.normal(0.0, w / np.sqrt(d), (L, h, sv, d)),
            "Wo": rng.normal(0.0, w / np.sqrt(h * sv), (L, h, d, sv)),
            "W1": rng.normal(0.0, w / np.sqrt(d), (L, f, d)),
            "b1": np.zeros((L, f)),
            "W2": rng.normal(0.0, w / np.sqrt(f), (L, d, f)),
            "b2": np.zeros((L, d)),
        }
        if positional == "absolute":
            if max_len < 1:
                raise ValueError("absolute positions need max_len >= 1")
            p["P"] = rng.normal(0.0, embed_scale, (d, max_len))
        elif positional != "none":
            raise ValueError("positional must be 'none' or 'absolute'")
        return cls(p, norm=norm, norm_bound=norm_bound, seed=seed)

    @classmethod
    def zeros(cls, vocab_size, dim, layers=1, heads=1, head_dim=2, mlp_dim=4, **kw):
        m = cls.init_random(vocab_size, dim, layers, heads, head_dim, mlp_dim, **kw)
        for v in m.params.values():
            v[...] = 0.0
        return m

    def _check(self):
        p = self.params
        d, V = p["E"].shape
        if V < 2 or d < 2:
            raise ValueError("need |V| >= 2 and d >= 2")
        if p["F"].shape != (V, d):
            raise ValueError("F must be (|V|, d)")
        L, h, s, d_ = p["Wq"].shape
        sv = p["Wv"].shape[2]
        f = p["W1"].shape[1]
        want = {"Wq": (L, h, s, d), "Wk": (L, h, s, d), "Wv": (L, h, sv, d),
                "Wo": (L, h, d, sv), "W1": (L, f, d), "b1": (L, f), "W2": (L, d, f),
                "b2": (L, d)}
        for k, shape in want.items():
            if p[k].shape != shape:
                raise ValueError(f"{k} has shape {p[k].shape}, expected {shape}")
        if "P" in p and p["P"].shape[0] != d:
            raise ValueError("P must be (d, max_len)")

    # -- properties ---------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return self.params["E"].shape[1]

    @property
    def dim(self) -> int:
        return self.params["E"].shape[0]

    @property
    def layers(self) -> int:
        return self.params["Wq"].shape[0]

    @property
    def heads(self) -> int:
        return self.params["Wq"].shape[1]

    @property
    def positional(self) -> str:
        return "absolute" if "P" in self.params else "none"

    @property
    def max_len(self) -> Optional[int]:
        return self.params["P"].shape[1] if "P" in self.params else None

    @property
    def norm_kind(self) -> int:
        return _core.NORM_KINDS[self.norm]

    def hyperparams(self) -> dict:
        p = self.params
        return {"vocab_size": self.vocab_size, "dim": self.dim, "layers": self.layers,
                "heads": self.heads, "head_dim": p["Wq"].shape[2], "value_dim": p["Wv"].shape[2],
                "mlp_dim": p["W1"].shape[1], "norm": self.norm, "norm_bound": self.norm_bound,
                "positional": self.positional, "max_len": self.max_len}

    def copy(self) -> "ToyTransformer":
        return ToyTransformer({k: v.copy() for k, v in self.params.items()},
                              self.norm, self.norm_bound, self.seed)

    # -- evaluation ---------------------------------------------------------

    def _layer_args(self):
        p = self.params
        return tuple(p[k] for k in LAYER_PARAMS)

    def embed(self, tokens) -> np.ndarray:
        return self.params["E"][:, np.asarray(tokens, dtype=np.int64)]

    def _input_rows(self, X: np.ndarray) -> np.ndarray:
        H0 = np.array(X.T, dtype=np.float64, order="C")
        if "P" in self.params:
            T = H0.shape[0]
            if T > self.max_len:
                raise ValueError(f"sequence length {T} exceeds max_len {self.max_len}")
            H0 += self.params["P"][:, :T].T
        return H0

    def run(self, X, causal: bool = False) -> dict:
        """Kernel cache for a ``(d, m)`` input (positions are added here)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.dim or X.shape[1] < 1:
            raise ValueError(f"input must be ({self.dim}, m) with m >= 1")
        if not np.isfinite(X).all():
            raise ValueError("input contains non-finite values")
        H0 = self._input_rows(X)
        return _core.transformer_forward(H0, *self._layer_args(), self.norm_kind,
                                         self.norm_bound, bool(causal))

    def forward(self, X, causal: bool = False) -> ForwardTrace:
        cache = self.run(X, causal)
        Hs = np.asarray(cache["Hs"])
        final = Hs[-1, -1].copy()
        logits = self.params["F"] @ final
        return ForwardTrace(hidden=Hs.transpose(0, 2, 1).copy(), attention=np.asarray(cache["P"]),
                            final=final, logits=logits, probs=softmax(logits))

    def last_hidden(self, X, causal: bool = True) -> np.ndarray:
        """Final-layer columns ``(d, m)``."""
        return np.asarray(self.run(X, causal)["Hs"])[-1].T.copy()

    def greedy_decode(self, X, n: int) -> list:
        """Append argmax tokens one at a time (causal attention, lowest-index ties)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        X = np.asarray(X, dtype=np.float64)
        out = []
        seq = X
        for _ in range(n):
            h = np.asarray(self.run(seq, causal=True)["Hs"])[-1, -1]
            tok = int(np.argmax(self.params["F"] @ h))
            out.append(tok)
            seq = np.concatenate([seq, self.embed([tok])], axis=1)
        return out

    # -- gradients ----------------------------------------------------------

    def sequence_loss(self, X, positions, targets, causal: bool = True,
                      want_params: bool = True, want_input: bool = True):
        """Cross-entropy of ``targets`` predicted from the columns at ``positions``.

        Returns ``(loss, gX, grads, correct)``: ``gX`` is the gradient w.r.t.
        the ``(d, T)`` input (before positions are added), ``grads`` maps
        layer parameter names plus ``F`` and ``P`` to gradients, and
        ``correct`` flags whether each prediction's argmax hits its target.
        """
        positions = np.asarray(positions, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        cache = self.run(X, causal)
        Hs = np.asarray(cache["Hs"])
        Hl = Hs[-1][positions]
        F = self.params["F"]
        logits = Hl @ F.T
        logp = log_softmax(logits, axis=1)
        k = np.arange(len(targets))
        loss = float(-logp[k, targets].sum())
        correct = logits.argmax(axis=1) == targets
        if not (want_params or want_input):
            return loss, None, None, correct
        gl = np.exp(logp)
        gl[k, targets] -= 1.0
        G = np.zeros_like(Hs[-1])
        np.add.at(G, positions, gl @ F)
        G0, lg = _core.transformer_backward(cache, *self._layer_args(), self.norm_kind,
                                            self.norm_bound, bool(causal), G, bool(want_params))
        G0 = np.asarray(G0)
        grads = None
        if want_params:
            grads = {name: np.asarray(g) for name, g in zip(LAYER_PARAMS, lg)}
            grads["F"] = gl.T @ Hl
            if "P" in self.params:
                gP = np.zeros_like(self.params["P"])
                gP[:, :G0.shape[0]] = G0.T
                grads["P"] = gP
        return loss, G0.T.copy(), grads, correct

    def backward(self, X, targets, want_params: bool = True):
        """Teacher-forced loss ``-sum_i log p(x_i | [X, x_<i])`` and its gradients.

        Returns ``(loss, gX, grads)``; ``grads`` covers every parameter,
        including ``E`` through the teacher-forced target embeddings.
        """
        X = np.asarray(X, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.int64)
        if targets.size and (targets.min() < 0 or targets.max() >= self.vocab_size):
            raise ValueError("target token out of range")
        m, n = X.shape[1], len(targets)
        seq = np.concatenate([X, self.embed(targets[:-1])], axis=1)
        positions = np.arange(m - 1, m - 1 + n)
        loss, gseq, grads, _ = self.sequence_loss(seq, positions, targets, True, want_params)
        gX = gseq[:, :m].copy()
        if want_params:
            gE = np.zeros_like(self.params["E"])
            np.add.at(gE.T, targets[:-1], gseq[:, m:].T)
            grads["E"] = gE
        return loss, gX, grads
