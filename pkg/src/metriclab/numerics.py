"""Shared numerical primitives: row normalization, pairwise geometry,
stable softmax, and the clamped arccos used by the angular losses.

Conventions used throughout the package:

* rows are samples, columns are feature dimensions;
* every primitive with a nontrivial derivative ships a matching
  ``*_backward`` so losses can chain them without autodiff;
* clamps and guards kill the gradient exactly where they are active, so
  finite-difference checks in smooth regions see the true derivative.
"""

import numpy as np

from .errors import DegenerateVector, NonFiniteEvaluation

# Guard below which a row norm counts as degenerate (raise, don't divide).
EPS_NORM = 1e-12
# Guard below which the sqrt in the positive pull is treated as flat.
EPS_POS = 1e-8
# Margin kept from the exact endpoints when clamping cosines for arccos.
COS_CLAMP = 1e-7


def l2_normalize(v, eps=EPS_NORM):
    """Scale a single vector to unit length; DegenerateVector below eps."""
    v = np.asarray(v, dtype=float)
    n = np.sqrt(np.sum(v * v))
    if n <= eps:
        raise DegenerateVector("cannot normalize vector with norm %g" % n)
    return v / n


def cosine_similarity(a, b):
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    return float(np.clip(np.dot(l2_normalize(a), l2_normalize(b)), -1.0, 1.0))


def normalize_rows(X, eps=EPS_NORM):
    """Return (X_hat, norms) with each row of X scaled to unit length.

    Raises DegenerateVector if any row norm falls below eps.
    """
    norms = np.sqrt(np.sum(X * X, axis=1))
    bad = np.nonzero(norms < eps)[0]
    if bad.size:
        raise DegenerateVector(
            "cannot normalize row(s) %s with norm below %g" % (bad.tolist(), eps)
        )
    return X / norms[:, None], norms


def normalize_rows_backward(X_hat, norms, grad_out):
    """Backprop through normalize_rows.

    Projects the incoming gradient onto the tangent space of the unit
    sphere at each row and rescales by the stored norm.
    """
    dots = np.sum(grad_out * X_hat, axis=1, keepdims=True)
    return (grad_out - dots * X_hat) / norms[:, None]


def pairwise_sq_euclidean(X):
    """All-pairs squared Euclidean distances via the Gram identity.

    Negative round-off is clamped to zero and the diagonal is forced to
    exactly zero.
    """
    sq = np.sum(X * X, axis=1)
    E = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.clip(E, 0.0, None, out=E)
    np.fill_diagonal(E, 0.0)
    return E


def pairwise_cosine(X_hat):
    """Gram matrix of unit rows: cosines of all pairwise angles."""
    return X_hat @ X_hat.T


def pairwise_angular_D(X):
    """Angular difference matrix: exp(2 - 2*cos) - 1 for every row pair.

    Rows are normalized internally (once for the whole batch), so the
    result depends only on directions: zero for a pair pointing the same
    way, exp(4) - 1 for an antipodal pair. The diagonal is forced to
    exactly zero. Raises DegenerateVector on any zero-norm row.
    """
    X_hat, _ = normalize_rows(X)
    D = np.expm1(2.0 - 2.0 * (X_hat @ X_hat.T))
    np.fill_diagonal(D, 0.0)
    return D


def pairwise_angular_D_backward(X_hat, D, grad_D):
    """Backprop through pairwise_angular_D to the unit rows.

    grad_D's diagonal is ignored (the forward pins it to zero).
    """
    A = -2.0 * grad_D * (D + 1.0)
    np.fill_diagonal(A, 0.0)
    return (A + A.T) @ X_hat


def clamped_arccos(c):
    """arccos after clamping cosines away from the exact endpoints.

    Returns (theta, dtheta_dc) where dtheta_dc is the derivative of the
    clamped composition: -1/sqrt(1 - c~^2) in the interior and exactly 0
    wherever the clamp is active.
    """
    lo, hi = -1.0 + COS_CLAMP, 1.0 - COS_CLAMP
    ct = np.clip(c, lo, hi)
    theta = np.arccos(ct)
    dtheta = -1.0 / np.sqrt(1.0 - ct * ct)
    dtheta = np.where((c > lo) & (c < hi), dtheta, 0.0)
    return theta, dtheta


def softmax(logits):
    """Row-wise softmax, shifted by the row max for stability."""
    z = logits - np.max(logits, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


def log_softmax(logits):
    """Row-wise log-softmax via the shifted log-sum-exp."""
    z = logits - np.max(logits, axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


def softmax_xent(logits, labels):
    """Mean cross-entropy over rows plus its gradient w.r.t. the logits.

    Returns (loss, dlogits) with dlogits = (softmax - onehot) / N.
    """
    N = logits.shape[0]
    ls = log_softmax(logits)
    loss = -np.mean(ls[np.arange(N), labels])
    dlogits = softmax(logits)
    dlogits[np.arange(N), labels] -= 1.0
    dlogits /= N
    return loss, dlogits


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient estimate of a scalar function.

    Probes f at x +/- h along every coordinate; raises
    NonFiniteEvaluation if any probe comes back NaN/Inf. This is the
    oracle every analytic gradient in the package is tested against.
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.copy().reshape(-1)
    for k in range(xf.size):
        orig = xf[k]
        xf[k] = orig + h
        hi = f(xf.reshape(x.shape))
        xf[k] = orig - h
        lo = f(xf.reshape(x.shape))
        xf[k] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NonFiniteEvaluation(
                "probe at coordinate %d returned a non-finite value" % k
            )
        flat[k] = (hi - lo) / (2.0 * h)
    return grad
