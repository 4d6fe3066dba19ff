# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; see ``ttsa._fallback`` for the reference semantics."""

import numpy as np

from libc.math cimport isfinite, sqrt


def advance_affine(const double[:, ::1] A, const double[:, ::1] B, const double[::1] c,
                   const double[:, ::1] C, const double[:, ::1] D, const double[::1] e,
                   double[:, ::1] x, double[:, ::1] y, double[:, ::1] U, double[:, ::1] z,
                   const double[:, :, :, ::1] Wf, const double[:, :, :, ::1] Ws,
                   const double[::1] alphas, const double[::1] betas,
                   const Py_ssize_t[::1] rec_steps, Py_ssize_t rec_row0,
                   double[:, :, ::1] out_x, double[:, :, ::1] out_y,
                   double[:, :, ::1] out_U, double[:, :, ::1] out_z):
    cdef Py_ssize_t T = x.shape[0], d1 = x.shape[1], d2 = y.shape[1]
    cdef Py_ssize_t n = alphas.shape[0], pf = Wf.shape[3], ps = Ws.shape[3]
    cdef Py_ssize_t nrec = rec_steps.shape[0]
    cdef Py_ssize_t t, s, i, j, r
    cdef double a, b, acc, m, nrm, yold
    cdef Py_ssize_t bad_t = -1, bad_s = -1
    cdef double bad_norm = 0.0
    cdef double[::1] w = np.empty(1 + d1 + d2)
    cdef double[::1] fx = np.empty(d1)
    cdef double[::1] mf = np.empty(d1)
    cdef double[::1] gy = np.empty(d2)
    cdef double[::1] ms = np.empty(d2)

    with nogil:
        for t in range(T):
            r = 0
            for s in range(n):
                a = alphas[s]
                b = betas[s]
                w[0] = 1.0
                for i in range(d1):
                    w[1 + i] = x[t, i]
                for i in range(d2):
                    w[1 + d1 + i] = y[t, i]
                for i in range(d1):
                    acc = 0.0
                    for j in range(d1):
                        acc = acc + A[i, j] * w[1 + j]
                    for j in range(d2):
                        acc = acc + B[i, j] * w[1 + d1 + j]
                    fx[i] = acc + c[i]
                    m = 0.0
                    for j in range(pf):
                        m = m + Wf[t, s, i, j] * w[j]
                    mf[i] = m
                for i in range(d2):
                    acc = 0.0
                    for j in range(d1):
                        acc = acc + C[i, j] * w[1 + j]
                    for j in range(d2):
                        acc = acc + D[i, j] * w[1 + d1 + j]
                    gy[i] = acc + e[i]
                    m = 0.0
                    for j in range(ps):
                        m = m + Ws[t, s, i, j] * w[j]
                    ms[i] = m
                nrm = 0.0
                for i in range(d1):
                    x[t, i] = w[1 + i] + a * (fx[i] - w[1 + i] + mf[i])
                    nrm = nrm + x[t, i] * x[t, i]
                for i in range(d2):
                    yold = w[1 + d1 + i]
                    y[t, i] = yold + b * (gy[i] - yold + ms[i])
                    U[t, i] = (1.0 - b) * U[t, i] + b * ms[i]
                    z[t, i] = (1.0 - b) * z[t, i] + b * gy[i]
                    nrm = nrm + y[t, i] * y[t, i]
                if not isfinite(nrm):
                    bad_t = t
                    bad_s = s
                    bad_norm = sqrt(nrm)
                    break
                if r < nrec and rec_steps[r] == s:
                    for i in range(d1):
                        out_x[t, rec_row0 + r, i] = x[t, i]
                    for i in range(d2):
                        out_y[t, rec_row0 + r, i] = y[t, i]
                        out_U[t, rec_row0 + r, i] = U[t, i]
                        out_z[t, rec_row0 + r, i] = z[t, i]
                    r = r + 1
            if bad_t >= 0:
                break
    if bad_t >= 0:
        return bad_t, bad_s, bad_norm
    return None


def aux_recursion(const double[::1] decay, const double[::1] eps):
    """``s[0] = 0``, ``s[k+1] = decay[k] * s[k] + eps[k]``."""
    cdef Py_ssize_t n = decay.shape[0], k
    out = np.empty(n + 1)
    cdef double[::1] s = out
    s[0] = 0.0
    with nogil:
        for k in range(n):
            s[k + 1] = decay[k] * s[k] + eps[k]
    return out
