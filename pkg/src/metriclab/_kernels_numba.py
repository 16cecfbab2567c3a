"""Numba-jitted kernels for the per-anchor loss accumulations.

Import of this module requires numba; backend selection in
metriclab.backend decides whether it gets imported at all. Contracts
mirror _kernels_numpy exactly — serial loops here, masks there — and the
two are cross-checked in the test suite.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def pos_terms(X, labels, eps):
    N, d = X.shape
    values = np.zeros(N)
    grad = np.zeros((N, d))
    for a in range(N):
        s = 0.0
        for i in range(N):
            if i == a or labels[i] != labels[a]:
                continue
            for k in range(d):
                diff = X[a, k] - X[i, k]
                s += diff * diff
        v = np.sqrt(s)
        values[a] = v
        if v < eps:
            continue
        w = 1.0 / v
        for i in range(N):
            if i == a or labels[i] != labels[a]:
                continue
            for k in range(d):
                g = w * (X[a, k] - X[i, k])
                grad[a, k] += g
                grad[i, k] -= g
    return values, grad


@njit(cache=True)
def neg_terms(D, labels, m_neg):
    N = D.shape[0]
    values = np.zeros(N)
    grad_D = np.zeros((N, N))
    active_count = 0
    total_count = 0
    for a in range(N):
        best = -np.inf
        best_j = -1
        n_neg = 0
        for i in range(N):
            if i == a:
                continue
            if labels[i] == labels[a]:
                if D[a, i] > best:
                    best = D[a, i]
                    best_j = i
            else:
                n_neg += 1
        if best_j < 0 or n_neg == 0:
            continue
        total_count += n_neg
        inv = 1.0 / n_neg
        acc = 0.0
        n_active = 0
        for i in range(N):
            if i == a or labels[i] == labels[a]:
                continue
            h = m_neg - (D[a, i] - best)
            if h > 0.0:
                acc += h
                n_active += 1
                grad_D[a, i] -= inv
        values[a] = acc * inv
        grad_D[a, best_j] += n_active * inv
        active_count += n_active
    return values, grad_D, active_count, total_count


@njit(cache=True)
def triplet_terms(X, labels, margin, eps):
    N, d = X.shape
    values = np.zeros(N)
    grad = np.zeros((N, d))
    for a in range(N):
        dp = -np.inf
        p_star = -1
        dn = np.inf
        n_star = -1
        for i in range(N):
            if i == a:
                continue
            s = 0.0
            for k in range(d):
                diff = X[a, k] - X[i, k]
                s += diff * diff
            dist = np.sqrt(s)
            if labels[i] == labels[a]:
                if dist > dp:
                    dp = dist
                    p_star = i
            else:
                if dist < dn:
                    dn = dist
                    n_star = i
        if p_star < 0 or n_star < 0:
            continue
        h = margin + dp - dn
        if h <= 0.0:
            continue
        values[a] = h
        if dp > eps:
            for k in range(d):
                u = (X[a, k] - X[p_star, k]) / dp
                grad[a, k] += u
                grad[p_star, k] -= u
        if dn > eps:
            for k in range(d):
                v = (X[a, k] - X[n_star, k]) / dn
                grad[a, k] -= v
                grad[n_star, k] += v
    return values, grad
