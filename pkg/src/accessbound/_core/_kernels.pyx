# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: toy-transformer forward/backward and the nearest-class
search used by the elementary-operation density check.

Semantics match ``fallback.py`` exactly (same loop order for reductions is
not guaranteed, so results agree to rounding, not bit-for-bit).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs

cnp.import_array()

from libc.stdint cimport int64_t

cdef enum:
    NORM_NONE = 0
    NORM_LINF = 1
    NORM_RMS = 2

cdef double RMS_EPS = 1e-8


cdef void _norm_fwd(double[:, ::1] H, double[:, ::1] out, int kind, double bound) noexcept nogil:
    cdef Py_ssize_t T = H.shape[0], d = H.shape[1], t, j
    cdef double m, a, scale
    for t in range(T):
        if kind == NORM_NONE:
            scale = 1.0
        elif kind == NORM_LINF:
            m = 0.0
            for j in range(d):
                a = fabs(H[t, j])
                if a > m:
                    m = a
            scale = bound / m if m > bound else 1.0
        else:
            m = 0.0
            for j in range(d):
                m += H[t, j] * H[t, j]
            scale = 1.0 / sqrt(m / d + RMS_EPS)
        for j in range(d):
            out[t, j] = H[t, j] * scale


cdef void _norm_bwd(double[:, ::1] H, double[:, ::1] G, double[:, ::1] out,
                    int kind, double bound) noexcept nogil:
    """out += d Norm(H)^T G (accumulating)."""
    cdef Py_ssize_t T = H.shape[0], d = H.shape[1], t, j, k
    cdef double m, a, dot, r, s
    for t in range(T):
        if kind == NORM_NONE:
            for j in range(d):
                out[t, j] += G[t, j]
        elif kind == NORM_LINF:
            m = 0.0
            k = 0
            for j in range(d):
                a = fabs(H[t, j])
                if a > m:
                    m = a
                    k = j
            if m > bound:
                dot = 0.0
                for j in range(d):
                    dot += H[t, j] * G[t, j]
                for j in range(d):
                    out[t, j] += (bound / m) * G[t, j]
                s = 1.0 if H[t, k] > 0 else -1.0
                out[t, k] -= bound * s * dot / (m * m)
            else:
                for j in range(d):
                    out[t, j] += G[t, j]
        else:
            m = 0.0
            for j in range(d):
                m += H[t, j] * H[t, j]
            r = sqrt(m / d + RMS_EPS)
            dot = 0.0
            for j in range(d):
                dot += (H[t, j] / r) * G[t, j]
            for j in range(d):
                out[t, j] += (G[t, j] - (H[t, j] / r) * dot / d) / r


def transformer_forward(H0, Wq_, Wk_, Wv_, Wo_, W1_, b1_, W2_, b2_,
                        int norm_kind, double norm_bound, bint causal):
    cdef double[:, ::1] h0 = np.ascontiguousarray(H0, dtype=np.float64)
    cdef double[:, :, :, ::1] Wq = np.ascontiguousarray(Wq_, dtype=np.float64)
    cdef double[:, :, :, ::1] Wk = np.ascontiguousarray(Wk_, dtype=np.float64)
    cdef double[:, :, :, ::1] Wv = np.ascontiguousarray(Wv_, dtype=np.float64)
    cdef double[:, :, :, ::1] Wo = np.ascontiguousarray(Wo_, dtype=np.float64)
    cdef double[:, :, ::1] W1 = np.ascontiguousarray(W1_, dtype=np.float64)
    cdef double[:, ::1] b1 = np.ascontiguousarray(b1_, dtype=np.float64)
    cdef double[:, :, ::1] W2 = np.ascontiguousarray(W2_, dtype=np.float64)
    cdef double[:, ::1] b2 = np.ascontiguousarray(b2_, dtype=np.float64)

    cdef Py_ssize_t T = h0.shape[0], d = h0.shape[1]
    cdef Py_ssize_t L = Wq.shape[0], nh = Wq.shape[1], s = Wq.shape[2]
    cdef Py_ssize_t sv = Wv.shape[2], f = W1.shape[1]
    cdef Py_ssize_t i, h, t, u, j, c, umax
    cdef double acc, mx, tot, z

    Hs_a = np.empty((L + 1, T, d))
    A_a = np.empty((L, T, d))
    Q_a = np.empty((L, nh, T, s))
    K_a = np.empty((L, nh, T, s))
    V_a = np.empty((L, nh, T, sv))
    P_a = np.zeros((L, nh, T, T))
    O_a = np.empty((L, nh, T, sv))
    Hm_a = np.empty((L, T, d))
    B_a = np.empty((L, T, d))
    Z_a = np.empty((L, T, f))
    cdef double[:, :, ::1] Hs = Hs_a
    cdef double[:, :, ::1] A = A_a
    cdef double[:, :, :, ::1] Q = Q_a
    cdef double[:, :, :, ::1] K = K_a
    cdef double[:, :, :, ::1] V = V_a
    cdef double[:, :, :, ::1] P = P_a
    cdef double[:, :, :, ::1] O = O_a
    cdef double[:, :, ::1] Hm = Hm_a
    cdef double[:, :, ::1] B = B_a
    cdef double[:, :, ::1] Z = Z_a

    with nogil:
        for t in range(T):
            for j in range(d):
                Hs[0, t, j] = h0[t, j]
        for i in range(L):
            _norm_fwd(Hs[i], A[i], norm_kind, norm_bound)
            for t in range(T):
                for j in range(d):
                    Hm[i, t, j] = Hs[i, t, j]
            for h in range(nh):
                for t in range(T):
                    for c in range(s):
                        acc = 0.0
                        for j in range(d):
                            acc = acc + A[i, t, j] * Wq[i, h, c, j]
                        Q[i, h, t, c] = acc
                        acc = 0.0
                        for j in range(d):
                            acc = acc + A[i, t, j] * Wk[i, h, c, j]
                        K[i, h, t, c] = acc
                    for c in range(sv):
                        acc = 0.0
                        for j in range(d):
                            acc = acc + A[i, t, j] * Wv[i, h, c, j]
                        V[i, h, t, c] = acc
                for t in range(T):
                    umax = t + 1 if causal else T
                    mx = -1e308
                    for u in range(umax):
                        acc = 0.0
                        for c in range(s):
                            acc = acc + Q[i, h, t, c] * K[i, h, u, c]
                        P[i, h, t, u] = acc
                        if acc > mx:
                            mx = acc
                    tot = 0.0
                    for u in range(umax):
                        z = exp(P[i, h, t, u] - mx)
                        P[i, h, t, u] = z
                        tot = tot + z
                    for u in range(umax):
                        P[i, h, t, u] = P[i, h, t, u] / tot
                    for c in range(sv):
                        acc = 0.0
                        for u in range(umax):
                            acc = acc + P[i, h, t, u] * V[i, h, u, c]
                        O[i, h, t, c] = acc
                    for j in range(d):
                        acc = 0.0
                        for c in range(sv):
                            acc = acc + O[i, h, t, c] * Wo[i, h, j, c]
                        Hm[i, t, j] += acc
            _norm_fwd(Hm[i], B[i], norm_kind, norm_bound)
            for t in range(T):
                for c in range(f):
                    acc = b1[i, c]
                    for j in range(d):
                        acc = acc + B[i, t, j] * W1[i, c, j]
                    Z[i, t, c] = acc
                for j in range(d):
                    acc = b2[i, j]
                    for c in range(f):
                        z = Z[i, t, c]
                        if z > 0:
                            acc = acc + z * W2[i, j, c]
                    Hs[i + 1, t, j] = Hm[i, t, j] + acc
    return {"Hs": Hs_a, "A": A_a, "Q": Q_a, "K": K_a, "V": V_a, "P": P_a,
            "O": O_a, "Hm": Hm_a, "B": B_a, "Z": Z_a}


def transformer_backward(cache, Wq_, Wk_, Wv_, Wo_, W1_, b1_, W2_, b2_,
                         int norm_kind, double norm_bound, bint causal, G_out,
                         bint want_params):
    cdef double[:, :, :, ::1] Wq = np.ascontiguousarray(Wq_, dtype=np.float64)
    cdef double[:, :, :, ::1] Wk = np.ascontiguousarray(Wk_, dtype=np.float64)
    cdef double[:, :, :, ::1] Wv = np.ascontiguousarray(Wv_, dtype=np.float64)
    cdef double[:, :, :, ::1] Wo = np.ascontiguousarray(Wo_, dtype=np.float64)
    cdef double[:, :, ::1] W1 = np.ascontiguousarray(W1_, dtype=np.float64)
    cdef double[:, :, ::1] W2 = np.ascontiguousarray(W2_, dtype=np.float64)
    cdef double[:, :, ::1] Hs = cache["Hs"]
    cdef double[:, :, ::1] A = cache["A"]
    cdef double[:, :, :, ::1] Q = cache["Q"]
    cdef double[:, :, :, ::1] K = cache["K"]
    cdef double[:, :, :, ::1] V = cache["V"]
    cdef double[:, :, :, ::1] P = cache["P"]
    cdef double[:, :, :, ::1] O = cache["O"]
    cdef double[:, :, ::1] Hm = cache["Hm"]
    cdef double[:, :, ::1] B = cache["B"]
    cdef double[:, :, ::1] Z = cache["Z"]

    cdef Py_ssize_t L = Wq.shape[0], nh = Wq.shape[1], s = Wq.shape[2]
    cdef Py_ssize_t sv = Wv.shape[2], f = W1.shape[1]
    cdef Py_ssize_t T = Hs.shape[1], d = Hs.shape[2]
    cdef Py_ssize_t i, h, t, u, j, c, umax
    cdef double acc, g

    G_a = np.array(G_out, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] G = G_a
    gB_a = np.empty((T, d))
    gA_a = np.empty((T, d))
    gZ_a = np.empty((T, f))
    gO_a = np.empty((T, sv))
    gP_a = np.empty((T, T))
    gQ_a = np.empty((T, s))
    gK_a = np.empty((T, s))
    gV_a = np.empty((T, sv))
    cdef double[:, ::1] gB = gB_a
    cdef double[:, ::1] gA = gA_a
    cdef double[:, ::1] gZ = gZ_a
    cdef double[:, ::1] gO = gO_a
    cdef double[:, ::1] gP = gP_a
    cdef double[:, ::1] gQ = gQ_a
    cdef double[:, ::1] gK = gK_a
    cdef double[:, ::1] gV = gV_a

    gWq_a = np.zeros_like(Wq_, dtype=np.float64)
    gWk_a = np.zeros_like(Wk_, dtype=np.float64)
    gWv_a = np.zeros_like(Wv_, dtype=np.float64)
    gWo_a = np.zeros_like(Wo_, dtype=np.float64)
    gW1_a = np.zeros_like(W1_, dtype=np.float64)
    gb1_a = np.zeros_like(b1_, dtype=np.float64)
    gW2_a = np.zeros_like(W2_, dtype=np.float64)
    gb2_a = np.zeros_like(b2_, dtype=np.float64)
    cdef double[:, :, :, ::1] gWq = gWq_a
    cdef double[:, :, :, ::1] gWk = gWk_a
    cdef double[:, :, :, ::1] gWv = gWv_a
    cdef double[:, :, :, ::1] gWo = gWo_a
    cdef double[:, :, ::1] gW1 = gW1_a
    cdef double[:, ::1] gb1 = gb1_a
    cdef double[:, :, ::1] gW2 = gW2_a
    cdef double[:, ::1] gb2 = gb2_a

    with nogil:
        for i in range(L - 1, -1, -1):
            # MLP block: H_out = Hm + W2 relu(Z) + b2, Z = W1 Norm(Hm) + b1
            for t in range(T):
                for c in range(f):
                    if Z[i, t, c] > 0:
                        acc = 0.0
                        for j in range(d):
                            acc = acc + G[t, j] * W2[i, j, c]
                        gZ[t, c] = acc
                    else:
                        gZ[t, c] = 0.0
                for j in range(d):
                    acc = 0.0
                    for c in range(f):
                        acc = acc + gZ[t, c] * W1[i, c, j]
                    gB[t, j] = acc
            if want_params:
                for t in range(T):
                    for j in range(d):
                        g = G[t, j]
                        gb2[i, j] += g
                        for c in range(f):
                            if Z[i, t, c] > 0:
                                gW2[i, j, c] += g * Z[i, t, c]
                    for c in range(f):
                        g = gZ[t, c]
                        gb1[i, c] += g
                        if g != 0.0:
                            for j in range(d):
                                gW1[i, c, j] += g * B[i, t, j]
            _norm_bwd(Hm[i], gB, G, norm_kind, norm_bound)

            # attention block: Hm = H + sum_h Wo_h (P_h V_h)
            for t in range(T):
                for j in range(d):
                    gA[t, j] = 0.0
            for h in range(nh):
                for t in range(T):
                    for c in range(sv):
                        acc = 0.0
                        for j in range(d):
                            acc = acc + G[t, j] * Wo[i, h, j, c]
                        gO[t, c] = acc
                        gV[t, c] = 0.0
                    for c in range(s):
                        gQ[t, c] = 0.0
                        gK[t, c] = 0.0
                for t in range(T):
                    umax = t + 1 if causal else T
                    acc = 0.0
                    for u in range(umax):
                        g = 0.0
                        for c in range(sv):
                            g = g + gO[t, c] * V[i, h, u, c]
                        gP[t, u] = g
                        acc = acc + g * P[i, h, t, u]
                    for u in range(umax):
                        g = P[i, h, t, u] * (gP[t, u] - acc)
                        # g is dS[t, u]
                        for c in range(s):
                            gQ[t, c] += g * K[i, h, u, c]
                            gK[u, c] += g * Q[i, h, t, c]
                        for c in range(sv):
                            gV[u, c] += P[i, h, t, u] * gO[t, c]
                for t in range(T):
                    for j in range(d):
                        acc = 0.0
                        for c in range(s):
                            acc = acc + gQ[t, c] * Wq[i, h, c, j] + gK[t, c] * Wk[i, h, c, j]
                        for c in range(sv):
                            acc = acc + gV[t, c] * Wv[i, h, c, j]
                        gA[t, j] += acc
                if want_params:
                    for t in range(T):
                        for j in range(d):
                            g = G[t, j]
                            for c in range(sv):
                                gWo[i, h, j, c] += g * O[i, h, t, c]
                        for c in range(s):
                            for j in range(d):
                                gWq[i, h, c, j] += gQ[t, c] * A[i, t, j]
                                gWk[i, h, c, j] += gK[t, c] * A[i, t, j]
                        for c in range(sv):
                            for j in range(d):
                                gWv[i, h, c, j] += gV[t, c] * A[i, t, j]
            _norm_bwd(Hs[i], gA, G, norm_kind, norm_bound)

    grads = None
    if want_params:
        grads = (gWq_a, gWk_a, gWv_a, gWo_a, gW1_a, gb1_a, gW2_a, gb2_a)
    return G_a, grads


def nearest_class_search(X_, C_, int64_t max_l1):
    cdef int64_t[:, ::1] X = np.ascontiguousarray(X_, dtype=np.int64)
    cdef int64_t[:, ::1] C = np.ascontiguousarray(C_, dtype=np.int64)
    cdef Py_ssize_t nx = X.shape[0], nc = C.shape[0], D = X.shape[1]
    out = [np.full(nx, -1, dtype=np.int64) for _ in range(6)]
    cdef int64_t[::1] dist = out[0], cls = out[1], kk = out[2]
    cdef int64_t[::1] dist_s = out[3], cls_s = out[4], kk_s = out[5]
    cdef Py_ssize_t a, b, j
    cdef int64_t l1, cmax, kmax, k, dsum, v, best, best_s
    cdef bint inside
    with nogil:
        for a in range(nx):
            l1 = 0
            for j in range(D):
                l1 += X[a, j]
            best = -1
            best_s = -1
            for b in range(nc):
                cmax = 0
                inside = True
                for j in range(D):
                    if C[b, j] > cmax:
                        cmax = C[b, j]
                    if C[b, j] > 0 and X[a, j] == 0:
                        inside = False
                kmax = (max_l1 + l1) // cmax
                for k in range(1, kmax + 1):
                    dsum = 0
                    for j in range(D):
                        v = X[a, j] - k * C[b, j]
                        dsum += v if v >= 0 else -v
                    if best < 0 or dsum < best:
                        best = dsum
                        dist[a] = dsum
                        cls[a] = b
                        kk[a] = k
                    if inside and (best_s < 0 or dsum < best_s):
                        best_s = dsum
                        dist_s[a] = dsum
                        cls_s[a] = b
                        kk_s[a] = k
    return tuple(out)
