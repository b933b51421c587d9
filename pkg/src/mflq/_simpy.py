"""Vectorized numpy fallback for the Euler-Maruyama path kernel.

Same contract as the compiled kernel in ``_simcore``: one block of paths
is advanced through the whole grid and per-path trapezoid cost
accumulators are produced.  The per-player integrand has been reduced
outside the kernel to

    g_i(k, Y) = g_det[i, k] + c_i[k] . Y + Y^T G_i Y

where Y is the deviation of the path from the deterministic mean, with

    Y_{k+1} = Y_k + h A_theta Y_k + (C_theta Y_k + s_k) dW_k.
"""

from __future__ import annotations

import numpy as np


def run_block(AT, CT, s, dW, h, tail_start, g_det, c, G, want_states):
    """Advance one block of paths and accumulate costs.

    Parameters
    ----------
    AT : (n, n)  transpose of the drift gain A_theta
    CT : (n, n)  transpose of the diffusion gain C_theta
    s : (K, n)   deterministic diffusion offsets at nodes 0..K-1
    dW : (B, K)  Brownian increments
    h : float    grid step
    tail_start : int  index of the first node of the tail window
    g_det : (P, K+1)  deterministic integrand values
    c : (P, K+1, n)   linear integrand coefficients
    G : (P, n, n)     quadratic integrand coefficients
    want_states : bool

    Returns
    -------
    costs (B, P), tail (B, P), YT (B, n), sumY (K+1, n), sumYsq (K+1, n),
    states (B, K+1, n) or None, first_bad (int node index, -1 if none)
    """
    B, K = dW.shape
    n = AT.shape[0]
    P = g_det.shape[0]
    Y = np.zeros((B, n))
    costs = np.zeros((B, P))
    tail = np.zeros((B, P))
    sumY = np.zeros((K + 1, n))
    sumYsq = np.zeros((K + 1, n))
    states = np.zeros((B, K + 1, n)) if want_states else None
    first_bad = -1
    for k in range(K + 1):
        w = 0.5 * h if (k == 0 or k == K) else h
        if k >= tail_start:
            wt = 0.5 * h if (k == tail_start or k == K) else h
        else:
            wt = 0.0
        for i in range(P):
            g = g_det[i, k] + Y @ c[i, k] + np.einsum("bi,ij,bj->b", Y, G[i], Y)
            costs[:, i] += w * g
            if wt:
                tail[:, i] += wt * g
        sumY[k] = Y.sum(axis=0)
        sumYsq[k] = (Y * Y).sum(axis=0)
        if want_states:
            states[:, k, :] = Y
        if k < K:
            Y = Y + h * (Y @ AT) + (Y @ CT + s[k]) * dW[:, k:k + 1]
            if not np.all(np.isfinite(Y)):
                first_bad = k + 1
                break
    return costs, tail, Y, sumY, sumYsq, states, first_bad
