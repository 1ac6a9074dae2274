# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled compute kernels: MLP forward/backprop and SVGD pairwise terms.

Twin of ``_core_py``; the dense layers here are small (desk scale), so the
win comes from fusing the per-layer loops and skipping temporary arrays.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


cdef void _dense_forward(double[:, ::1] H, double[:, ::1] W,
                         double[::1] b, double[:, ::1] out,
                         bint relu) noexcept:
    cdef Py_ssize_t n = H.shape[0], din = H.shape[1], dout = W.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(dout):
            acc = b[j]
            for k in range(din):
                acc += H[i, k] * W[j, k]
            if relu and acc < 0.0:
                acc = 0.0
            out[i, j] = acc


def mlp_forward(list weights, list biases, cnp.ndarray[double, ndim=2] X):
    """ReLU-hidden forward pass. Returns raw logits, shape (n, C)."""
    cdef Py_ssize_t L = len(weights)
    cdef Py_ssize_t li
    cdef cnp.ndarray[double, ndim=2] h = np.ascontiguousarray(X)
    cdef cnp.ndarray[double, ndim=2] out
    for li in range(L):
        out = np.empty((h.shape[0], (<cnp.ndarray> weights[li]).shape[0]))
        _dense_forward(h, weights[li], biases[li], out, li < L - 1)
        h = out
    return h


def mlp_loss_grads(list weights, list biases,
                   cnp.ndarray[double, ndim=2] X,
                   cnp.ndarray[cnp.int64_t, ndim=1] y):
    """Mean softmax cross-entropy with exact backprop.

    Returns (loss, [dW...], [db...], dX), matching ``_core_py``.
    """
    cdef Py_ssize_t L = len(weights)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t li, i, j, k

    acts = [np.ascontiguousarray(X)]
    cdef cnp.ndarray[double, ndim=2] h = acts[0]
    cdef cnp.ndarray[double, ndim=2] out
    for li in range(L):
        out = np.empty((n, (<cnp.ndarray> weights[li]).shape[0]))
        _dense_forward(h, weights[li], biases[li], out, li < L - 1)
        h = out
        if li < L - 1:
            acts.append(h)

    cdef double[:, ::1] logits = h
    cdef Py_ssize_t C = logits.shape[1]
    cdef cnp.ndarray[double, ndim=2] delta_arr = np.empty((n, C))
    cdef double[:, ::1] delta = delta_arr
    cdef double mx, s, loss = 0.0
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, C):
            if logits[i, j] > mx:
                mx = logits[i, j]
        s = 0.0
        for j in range(C):
            delta[i, j] = exp(logits[i, j] - mx)
            s += delta[i, j]
        loss += log(s) - (logits[i, y[i]] - mx)
        for j in range(C):
            delta[i, j] /= s
        delta[i, y[i]] -= 1.0
        for j in range(C):
            delta[i, j] /= n
    loss /= n

    dWs = [None] * L
    dbs = [None] * L
    cdef cnp.ndarray[double, ndim=2] dW, back, dX
    cdef cnp.ndarray[double, ndim=1] db
    cdef double[:, ::1] act_v, W_v, dW_v, back_v
    cdef double[::1] db_v
    cdef double acc
    cdef Py_ssize_t din
    for li in range(L - 1, -1, -1):
        act_v = acts[li]
        W_v = weights[li]
        din = W_v.shape[1]
        dW = np.empty((delta.shape[1], din))
        db = np.empty(delta.shape[1])
        dW_v = dW
        db_v = db
        for j in range(delta.shape[1]):
            acc = 0.0
            for i in range(n):
                acc += delta[i, j]
            db_v[j] = acc
            for k in range(din):
                acc = 0.0
                for i in range(n):
                    acc += delta[i, j] * act_v[i, k]
                dW_v[j, k] = acc
        dWs[li] = dW
        dbs[li] = db
        back = np.empty((n, din))
        back_v = back
        for i in range(n):
            for k in range(din):
                acc = 0.0
                for j in range(delta.shape[1]):
                    acc += delta[i, j] * W_v[j, k]
                if li > 0 and act_v[i, k] <= 0.0:
                    acc = 0.0
                back_v[i, k] = acc
        if li > 0:
            delta_arr = back
            delta = delta_arr
        else:
            dX = back
    return loss, dWs, dbs, dX


def mlp_input_grads(list weights, list biases,
                    cnp.ndarray[double, ndim=2] X,
                    cnp.ndarray[cnp.int64_t, ndim=1] y):
    """Input gradient of the mean loss only; the dX of ``mlp_loss_grads``.

    Same loop structure as the full backprop minus the parameter-gradient
    accumulations, so the result is bit-identical.
    """
    cdef Py_ssize_t L = len(weights)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t li, i, j, k

    acts = [np.ascontiguousarray(X)]
    cdef cnp.ndarray[double, ndim=2] h = acts[0]
    cdef cnp.ndarray[double, ndim=2] out
    for li in range(L):
        out = np.empty((n, (<cnp.ndarray> weights[li]).shape[0]))
        _dense_forward(h, weights[li], biases[li], out, li < L - 1)
        h = out
        if li < L - 1:
            acts.append(h)

    cdef double[:, ::1] logits = h
    cdef Py_ssize_t C = logits.shape[1]
    cdef cnp.ndarray[double, ndim=2] delta_arr = np.empty((n, C))
    cdef double[:, ::1] delta = delta_arr
    cdef double mx, s
    for i in range(n):
        mx = logits[i, 0]
        for j in range(1, C):
            if logits[i, j] > mx:
                mx = logits[i, j]
        s = 0.0
        for j in range(C):
            delta[i, j] = exp(logits[i, j] - mx)
            s += delta[i, j]
        for j in range(C):
            delta[i, j] /= s
        delta[i, y[i]] -= 1.0
        for j in range(C):
            delta[i, j] /= n

    cdef cnp.ndarray[double, ndim=2] back
    cdef double[:, ::1] act_v, W_v, back_v
    cdef double acc
    cdef Py_ssize_t din
    for li in range(L - 1, -1, -1):
        act_v = acts[li]
        W_v = weights[li]
        din = W_v.shape[1]
        back = np.empty((n, din))
        back_v = back
        for i in range(n):
            for k in range(din):
                acc = 0.0
                for j in range(delta.shape[1]):
                    acc += delta[i, j] * W_v[j, k]
                if li > 0 and act_v[i, k] <= 0.0:
                    acc = 0.0
                back_v[i, k] = acc
        if li > 0:
            delta_arr = back
            delta = delta_arr
        else:
            return back


def svgd_direction(cnp.ndarray[double, ndim=2] X,
                   cnp.ndarray[double, ndim=2] G,
                   double sigma):
    """Kernel-smoothed drift minus kernel repulsion, averaged over particles.

    S[i] = (1/N) sum_j k(xi,xj) * (G[j] - (xi-xj)/sigma^2).
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double sq, kij, inv2s2 = 1.0 / (2.0 * sigma * sigma)
    cdef double invs2 = 1.0 / (sigma * sigma)
    cdef cnp.ndarray[double, ndim=2] S = np.zeros((n, d))
    cdef double[:, ::1] Sv = S
    cdef double[:, ::1] Xv = np.ascontiguousarray(X)
    cdef double[:, ::1] Gv = np.ascontiguousarray(G)
    for i in range(n):
        for j in range(n):
            sq = 0.0
            for k in range(d):
                sq += (Xv[i, k] - Xv[j, k]) * (Xv[i, k] - Xv[j, k])
            kij = exp(-sq * inv2s2)
            for k in range(d):
                Sv[i, k] += kij * (Gv[j, k] - (Xv[i, k] - Xv[j, k]) * invs2)
    for i in range(n):
        for k in range(d):
            Sv[i, k] /= n
    return S


def median_sqdist(cnp.ndarray[double, ndim=2] X):
    """Median of pairwise squared distances over i < j. Zero when n < 2."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    if n < 2:
        return 0.0
    cdef Py_ssize_t i, j, k, m = 0
    cdef double sq
    cdef cnp.ndarray[double, ndim=1] pair = np.empty(n * (n - 1) // 2)
    cdef double[::1] pv = pair
    cdef double[:, ::1] Xv = np.ascontiguousarray(X)
    for i in range(n):
        for j in range(i + 1, n):
            sq = 0.0
            for k in range(d):
                sq += (Xv[i, k] - Xv[j, k]) * (Xv[i, k] - Xv[j, k])
            pv[m] = sq
            m += 1
    return float(np.median(pair))
