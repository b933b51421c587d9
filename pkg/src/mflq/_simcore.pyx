# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler-Maruyama path kernel (see _simpy for the contract)."""

import numpy as np

cimport cython
from libc.math cimport isfinite


def run_block(double[:, ::1] AT, double[:, ::1] CT, double[:, ::1] s,
              double[:, ::1] dW, double h, Py_ssize_t tail_start,
              double[:, ::1] g_det, double[:, :, ::1] c, double[:, :, ::1] G,
              bint want_states):
    cdef Py_ssize_t B = dW.shape[0]
    cdef Py_ssize_t K = dW.shape[1]
    cdef Py_ssize_t n = AT.shape[0]
    cdef Py_ssize_t P = g_det.shape[0]

    costs_arr = np.zeros((B, P))
    tail_arr = np.zeros((B, P))
    YT_arr = np.zeros((B, n))
    sumY_arr = np.zeros((K + 1, n))
    sumYsq_arr = np.zeros((K + 1, n))
    states_arr = np.zeros((B, K + 1, n)) if want_states else None

    cdef double[:, ::1] costs = costs_arr
    cdef double[:, ::1] tail = tail_arr
    cdef double[:, ::1] YT = YT_arr
    cdef double[:, ::1] sumY = sumY_arr
    cdef double[:, ::1] sumYsq = sumYsq_arr
    cdef double[:, :, ::1] states
    if want_states:
        states = states_arr

    y_arr = np.zeros(n)
    ynew_arr = np.zeros(n)
    cdef double[::1] y = y_arr
    cdef double[::1] ynew = ynew_arr

    cdef Py_ssize_t p, k, i, a, b
    cdef Py_ssize_t first_bad = -1
    cdef double w, wt, g, acc, dw, quad, drift, diff
    cdef bint dead

    for p in range(B):
        for a in range(n):
            y[a] = 0.0
        dead = False
        for k in range(K + 1):
            w = 0.5 * h if (k == 0 or k == K) else h
            if k >= tail_start:
                wt = 0.5 * h if (k == tail_start or k == K) else h
            else:
                wt = 0.0
            for i in range(P):
                g = g_det[i, k]
                for a in range(n):
                    g += c[i, k, a] * y[a]
                quad = 0.0
                for a in range(n):
                    acc = 0.0
                    for b in range(n):
                        acc += G[i, a, b] * y[b]
                    quad += y[a] * acc
                g += quad
                costs[p, i] += w * g
                if wt != 0.0:
                    tail[p, i] += wt * g
            for a in range(n):
                sumY[k, a] += y[a]
                sumYsq[k, a] += y[a] * y[a]
            if want_states:
                for a in range(n):
                    states[p, k, a] = y[a]
            if k < K:
                dw = dW[p, k]
                for a in range(n):
                    drift = 0.0
                    diff = s[k, a]
                    for b in range(n):
                        drift += y[b] * AT[b, a]
                        diff += y[b] * CT[b, a]
                    ynew[a] = y[a] + h * drift + diff * dw
                for a in range(n):
                    y[a] = ynew[a]
                    if not isfinite(y[a]):
                        dead = True
                if dead:
                    if first_bad < 0 or k + 1 < first_bad:
                        first_bad = k + 1
                    break
        for a in range(n):
            YT[p, a] = y[a]
        if dead:
            break

    return costs_arr, tail_arr, YT_arr, sumY_arr, sumYsq_arr, states_arr, first_bad
