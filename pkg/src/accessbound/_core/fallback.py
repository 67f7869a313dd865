"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` one-to-one and are used whenever the compiled
extension is unavailable (or ``ACCESSBOUND_PURE_PYTHON=1`` is set).

Sequences use the row convention here: ``H`` has shape ``(T, d)``, one row
per position. The public toy-model API transposes to the column convention.
"""

import numpy as np

NORM_NONE = 0
NORM_LINF = 1
NORM_RMS = 2
RMS_EPS = 1e-8


def _norm_forward(H, kind, bound):
    if kind == NORM_NONE:
        return H.copy()
    if kind == NORM_LINF:
        m = np.abs(H).max(axis=1, keepdims=True)
        scale = np.where(m > bound, bound / np.where(m > 0, m, 1.0), 1.0)
        return H * scale
    r = np.sqrt((H * H).mean(axis=1, keepdims=True) + RMS_EPS)
    return H / r


def _norm_backward(H, G, kind, bound):
    if kind == NORM_NONE:
        return G.copy()
    if kind == NORM_LINF:
        out = G.copy()
        absH = np.abs(H)
        k = absH.argmax(axis=1)
        rows = np.arange(H.shape[0])
        m = absH[rows, k]
        for t in np.nonzero(m > bound)[0]:
            mt = m[t]
            kt = k[t]
            dot = H[t] @ G[t]
            out[t] = (bound / mt) * G[t]
            out[t, kt] -= bound * np.sign(H[t, kt]) * dot / (mt * mt)
        return out
    d = H.shape[1]
    r = np.sqrt((H * H).mean(axis=1, keepdims=True) + RMS_EPS)
    A = H / r
    return (G - A * (A * G).sum(axis=1, keepdims=True) / d) / r


def transformer_forward(H0, Wq, Wk, Wv, Wo, W1, b1, W2, b2,
                        norm_kind, norm_bound, causal):
    """Run all layers and return the activation cache as a dict."""
    H0 = np.ascontiguousarray(H0, dtype=np.float64)
    T, d = H0.shape
    L, nh = Wq.shape[0], Wq.shape[1]
    mask = None
    if causal:
        mask = np.triu(np.ones((T, T), dtype=bool), k=1)

    Hs = np.empty((L + 1, T, d))
    Hs[0] = H0
    A = np.empty((L, T, d))
    Q = np.empty((L, nh, T, Wq.shape[2]))
    K = np.empty_like(Q)
    V = np.empty((L, nh, T, Wv.shape[2]))
    P = np.empty((L, nh, T, T))
    O = np.empty_like(V)
    Hm = np.empty((L, T, d))
    B = np.empty((L, T, d))
    Z = np.empty((L, T, W1.shape[1]))

    H = H0
    for i in range(L):
        A[i] = _norm_forward(H, norm_kind, norm_bound)
        Q[i] = A[i] @ Wq[i].transpose(0, 2, 1)
        K[i] = A[i] @ Wk[i].transpose(0, 2, 1)
        V[i] = A[i] @ Wv[i].transpose(0, 2, 1)
        S = Q[i] @ K[i].transpose(0, 2, 1)
        if mask is not None:
            S = np.where(mask, -np.inf, S)
        S = S - S.max(axis=2, keepdims=True)
        e = np.exp(S)
        P[i] = e / e.sum(axis=2, keepdims=True)
        O[i] = P[i] @ V[i]
        attn = np.einsum("htv,hdv->td", O[i], Wo[i])
        Hm[i] = H + attn
        B[i] = _norm_forward(Hm[i], norm_kind, norm_bound)
        Z[i] = B[i] @ W1[i].T + b1[i]
        H = Hm[i] + np.maximum(Z[i], 0.0) @ W2[i].T + b2[i]
        Hs[i + 1] = H
    return {"Hs": Hs, "A": A, "Q": Q, "K": K, "V": V, "P": P, "O": O,
            "Hm": Hm, "B": B, "Z": Z}


def transformer_backward(cache, Wq, Wk, Wv, Wo, W1, b1, W2, b2,
                         norm_kind, norm_bound, causal, G_out, want_params):
    """Backpropagate ``G_out`` (gradient w.r.t. the final layer output).

    Returns ``(G_in, grads)`` where ``grads`` is a tuple matching the
    parameter order, or ``None`` when ``want_params`` is false.
    """
    L = Wq.shape[0]
    G = np.array(G_out, dtype=np.float64, copy=True)
    if want_params:
        gWq, gWk, gWv, gWo = (np.zeros_like(w) for w in (Wq, Wk, Wv, Wo))
        gW1, gb1, gW2, gb2 = (np.zeros_like(w) for w in (W1, b1, W2, b2))
    Hs, A, Q, K, V, P, O = (cache[k] for k in ("Hs", "A", "Q", "K", "V", "P", "O"))
    Hm, B, Z = cache["Hm"], cache["B"], cache["Z"]

    for i in range(L - 1, -1, -1):
        R = np.maximum(Z[i], 0.0)
        gZ = (G @ W2[i]) * (Z[i] > 0)
        if want_params:
            gW2[i] = G.T @ R
            gb2[i] = G.sum(axis=0)
            gW1[i] = gZ.T @ B[i]
            gb1[i] = gZ.sum(axis=0)
        gB = gZ @ W1[i]
        G = G + _norm_backward(Hm[i], gB, norm_kind, norm_bound)

        gO = np.einsum("td,hdv->htv", G, Wo[i])
        gP = gO @ V[i].transpose(0, 2, 1)
        gV = P[i].transpose(0, 2, 1) @ gO
        gS = P[i] * (gP - (gP * P[i]).sum(axis=2, keepdims=True))
        gQ = gS @ K[i]
        gK = gS.transpose(0, 2, 1) @ Q[i]
        if want_params:
            gWo[i] = np.einsum("td,htv->hdv", G, O[i])
            gWq[i] = gQ.transpose(0, 2, 1) @ A[i]
            gWk[i] = gK.transpose(0, 2, 1) @ A[i]
            gWv[i] = gV.transpose(0, 2, 1) @ A[i]
        gA = (np.einsum("hts,hsd->td", gQ, Wq[i])
              + np.einsum("hts,hsd->td", gK, Wk[i])
              + np.einsum("htv,hvd->td", gV, Wv[i]))
        G = G + _norm_backward(Hs[i], gA, norm_kind, norm_bound)

    grads = (gWq, gWk, gWv, gWo, gW1, gb1, gW2, gb2) if want_params else None
    return G, grads


def nearest_class_search(X, C, max_l1):
    """Nearest scaled basis representative for every count vector.

    For each row ``x`` of ``X`` and every canonical class ``c`` (row of
    ``C``), scans integer multiples ``k*c`` with ``k*max(c) <= max_l1 +
    |x|_1`` and keeps the smallest l1 distance. A second, strict answer only
    considers classes whose support lies inside the support of ``x``.

    Returns ``(dist, cls, k, dist_strict, cls_strict, k_strict)``; strict
    entries are -1 when no class qualifies.
    """
    X = np.asarray(X, dtype=np.int64)
    C = np.asarray(C, dtype=np.int64)
    nx = X.shape[0]
    out = [np.full(nx, -1, dtype=np.int64) for _ in range(6)]
    cmax = C.max(axis=1)
    for j in range(nx):
        x = X[j]
        l1 = int(x.sum())
        kmax = (max_l1 + l1) // cmax
        ks = np.arange(1, kmax.max() + 1)
        # (k, class, coord) distance tensor; invalid k masked to a sentinel
        diff = np.abs(x[None, None, :] - ks[:, None, None] * C[None, :, :]).sum(axis=2)
        valid = ks[:, None] <= kmax[None, :]
        big = np.iinfo(np.int64).max
        diff = np.where(valid, diff, big)
        flat = diff.T.argmin()  # class-major order: first class, then smallest k
        ci, ki = divmod(int(flat), diff.shape[0])
        out[0][j], out[1][j], out[2][j] = diff[ki, ci], ci, ki + 1
        inside = ~((C > 0) & (x[None, :] == 0)).any(axis=1)
        if inside.any():
            ds = np.where(inside[None, :], diff, big)
            flat = ds.T.argmin()
            ci, ki = divmod(int(flat), ds.shape[0])
            out[3][j], out[4][j], out[5][j] = ds[ki, ci], ci, ki + 1
    return tuple(out)
