"""Pure-numpy fallbacks for the per-anchor loss accumulations.

Same contracts as _kernels_numba; vectorized with label masks instead of
explicit loops. All functions return per-anchor values and raw gradient
sums — batch averaging is the caller's job.
"""

import numpy as np


def pos_terms(X, labels, eps):
    """Per-anchor positive pull: sqrt of the summed squared distances
    from each anchor to all of its same-label rows.

    Returns (values[N], grad[N, d]); the gradient of sum(values) is zero
    for anchors whose value sits below eps (sqrt singularity guard).
    """
    N = X.shape[0]
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)

    diffs = X[:, None, :] - X[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diffs, diffs)
    values = np.sqrt(np.sum(np.where(same, sq, 0.0), axis=1))

    w = np.where(values >= eps, 1.0 / np.maximum(values, eps), 0.0)
    deg = same.sum(axis=1)
    # anchor role: w_a * (deg_a * X_a - sum_{i in pos} X_i)
    grad = w[:, None] * (deg[:, None] * X - same @ X)
    # positive role: sum over anchors a with i positive of w_a * (X_i - X_a)
    grad += (same @ w)[:, None] * X - same @ (w[:, None] * X)
    return values, grad


def neg_terms(D, labels, m_neg):
    """Per-anchor hinge over negatives in angular-difference space.

    For each anchor with at least one positive, penalizes negatives whose
    D-gap over the hardest (max-D) positive falls short of m_neg, averaged
    over that anchor's negative count. Boundary hits contribute nothing.

    Returns (values[N], grad_D[N, N], active_hinges, total_hinge_terms).
    """
    N = D.shape[0]
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    diff = labels[:, None] != labels[None, :]

    has_pos = same.any(axis=1)
    masked = np.where(same, D, -np.inf)
    best_j = np.argmax(masked, axis=1)          # first index among ties
    best = masked[np.arange(N), best_j]

    n_neg = diff.sum(axis=1)
    counted = has_pos & (n_neg > 0)
    inv = np.where(counted, 1.0 / np.maximum(n_neg, 1), 0.0)

    h = m_neg - (D - np.where(counted, best, 0.0)[:, None])
    active = diff & (h > 0.0) & counted[:, None]

    values = np.sum(np.where(active, h, 0.0), axis=1) * inv
    grad_D = np.where(active, -inv[:, None], 0.0)
    counts = active.sum(axis=1)
    np.add.at(grad_D, (np.arange(N), best_j), counts * inv)

    total = int(n_neg[counted].sum())
    return values, grad_D, int(counts.sum()), total


def triplet_terms(X, labels, margin, eps):
    """Per-anchor batch-hard triplet hinge on Euclidean distances.

    value_a = max(0, margin + max_pos_dist - min_neg_dist); gradients use
    the first index among argmax/argmin ties and skip any side whose
    distance sits below eps.

    Returns (values[N], grad[N, d]).
    """
    N = X.shape[0]
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    diff = labels[:, None] != labels[None, :]

    diffs = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))

    pos_masked = np.where(same, dist, -np.inf)
    p_star = np.argmax(pos_masked, axis=1)
    neg_masked = np.where(diff, dist, np.inf)
    n_star = np.argmin(neg_masked, axis=1)

    valid = same.any(axis=1) & diff.any(axis=1)
    idx = np.arange(N)
    h = margin + dist[idx, p_star] - dist[idx, n_star]
    act = valid & (h > 0.0)

    values = np.where(act, h, 0.0)
    grad = np.zeros_like(X)
    for a in np.nonzero(act)[0]:
        p, n = p_star[a], n_star[a]
        dp, dn = dist[a, p], dist[a, n]
        if dp > eps:
            u = diffs[a, p] / dp
            grad[a] += u
            grad[p] -= u
        if dn > eps:
            v = diffs[a, n] / dn
            grad[a] -= v
            grad[n] += v
    return values, grad
