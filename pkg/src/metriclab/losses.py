"""Loss functions with analytic gradients.

Everything here is plain numpy double precision, values paired with exact
gradients — no autodiff anywhere. The heavy per-anchor accumulations go
through metriclab.kernels (numba or numpy, picked at import); chains
through normalization and the angular-difference matrix reuse the
primitives in metriclab.numerics.

Gradient conventions shared by every loss:

* hinge terms use the strict interior (h > 0) for gradient flow; a term
  sitting exactly on its boundary contributes zero value and zero
  subgradient;
* ties in a max/min reduction send gradient to the first index in
  ascending order;
* guards (sqrt near zero, cosine clamp) zero the gradient where active,
  except the diagnostic angular pull, which keeps its saturated slope on
  purpose — its exploding gradient is the thing being demonstrated.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, numerics
from .errors import (
    DegenerateVector,
    DimensionMismatch,
    EmptyPositiveSet,
    InvalidBatchShape,
    LabelOutOfRange,
    PartitionMismatch,
)

# ---------------------------------------------------------------------------
# configuration / result containers


@dataclass
class ClassifierWeights:
    """Linear classifier parameters: one weight row per class.

    The bias participates only in the plain softmax loss; the normalized
    and angular-margin losses ignore it.
    """

    W: np.ndarray
    bias: np.ndarray = None

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] < 2:
            raise DimensionMismatch("classifier needs a 2-D W with >= 2 rows")
        if self.bias is None:
            self.bias = np.zeros(self.W.shape[0])
        else:
            self.bias = np.asarray(self.bias, dtype=float)
            if self.bias.shape != (self.W.shape[0],):
                raise DimensionMismatch("bias length must match class count")

    @property
    def n_classes(self):
        return self.W.shape[0]


@dataclass
class AngularMarginConfig:
    """Scale and the three margin knobs of the angular-margin logit.

    (m1, m2, m3) = (1, 0, 0) is plain normalized softmax at scale s.
    """

    s: float = 64.0
    m1: float = 1.0
    m2: float = 0.5
    m3: float = 0.0

    def __post_init__(self):
        if not (self.s > 0 and self.m1 >= 1 and self.m2 >= 0 and self.m3 >= 0):
            raise ValueError("need s > 0, m1 >= 1, m2 >= 0, m3 >= 0")


#: preset used throughout the package as the angular-margin default
ARCFACE = AngularMarginConfig(s=64.0, m1=1.0, m2=0.5, m3=0.0)

_D_MAX = np.expm1(4.0)  # upper end of the angular-difference range


@dataclass
class DsamConfig:
    """Margin and mixing weights for the distance-shrinking loss.

    ``lam`` is the weight of the whole term inside a combined loss; it is
    spelled without the trailing letters because of the Python keyword.
    """

    m_neg: float = 0.9
    gamma: float = 0.8
    lam: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.m_neg < _D_MAX):
            raise ValueError("m_neg must lie in (0, expm1(4))")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lam must be nonnegative")


@dataclass
class AnchorPartition:
    """One anchor's view of a batch: its positives and its negatives."""

    anchor: int
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        self.positives = np.asarray(self.positives, dtype=np.int64)
        self.negatives = np.asarray(self.negatives, dtype=np.int64)

    def check_against(self, n_rows):
        """Raise PartitionMismatch unless this is a disjoint cover of
        range(n_rows) with the anchor excluded from both sides."""
        a = self.anchor
        if not 0 <= a < n_rows:
            raise PartitionMismatch("anchor %d outside batch of %d" % (a, n_rows))
        combined = np.concatenate(([a], self.positives, self.negatives))
        if combined.size != n_rows or np.unique(combined).size != n_rows:
            raise PartitionMismatch("partition is not a disjoint cover of the batch")
        if combined.min() < 0 or combined.max() >= n_rows:
            raise PartitionMismatch("partition indices out of range")


def anchor_partition(anchor, labels):
    """Build the AnchorPartition of one index from a batch label vector."""
    labels = np.asarray(labels)
    idx = np.arange(labels.shape[0])
    same = (labels == labels[anchor]) & (idx != anchor)
    return AnchorPartition(
        anchor=int(anchor),
        positives=idx[same],
        negatives=idx[labels != labels[anchor]],
    )


@dataclass
class LossResult:
    """Value plus analytic gradients for whichever parameters the loss
    actually touches; diagnostics is a flat name->scalar map."""

    value: float
    grad_features: np.ndarray
    grad_weights: np.ndarray = None
    grad_bias: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# validation helpers


def _check_labels(labels, n_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionMismatch("labels must be a 1-D vector")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelOutOfRange(
            "labels must lie in [0, %d), got range [%d, %d]"
            % (n_classes, labels.min(), labels.max())
        )
    return labels.astype(np.int64)


def _check_pk_batch(X, batch):
    """Validate that X rows line up with a PK-structured batch."""
    labels = np.asarray(batch.labels, dtype=np.int64)
    P, Q = int(batch.P), int(batch.Q)
    if Q < 2:
        raise InvalidBatchShape("PK losses need Q >= 2, got Q=%d" % Q)
    if X.shape[0] != labels.shape[0] or labels.shape[0] != P * Q:
        raise InvalidBatchShape(
            "feature rows (%d) must match the P*Q=%d batch" % (X.shape[0], P * Q)
        )
    uniq, counts = np.unique(labels, return_counts=True)
    if uniq.size != P or not np.all(counts == Q):
        raise InvalidBatchShape(
            "labels are not %d classes x %d samples each" % (P, Q)
        )
    return labels


# ---------------------------------------------------------------------------
# softmax family


def softmax_ce(X, weights, labels):
    """Plain linear-classifier cross-entropy with bias.

    Returns a LossResult with gradients for features, W, and bias;
    diagnostics carry the mean predicted probability of the true class.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != weights.W.shape[1]:
        raise DimensionMismatch(
            "features are %r but classifier expects width %d"
            % (X.shape, weights.W.shape[1])
        )
    labels = _check_labels(labels, weights.n_classes)
    N = X.shape[0]

    logits = X @ weights.W.T + weights.bias
    value, dlogits = numerics.softmax_xent(logits, labels)
    probs = numerics.softmax(logits)
    return LossResult(
        value=float(value),
        grad_features=dlogits @ weights.W,
        grad_weights=dlogits.T @ X,
        grad_bias=dlogits.sum(axis=0),
        diagnostics={
            "mean_target_prob": float(np.mean(probs[np.arange(N), labels])),
        },
    )


def saturation_probability(n, f_j, z):
    """True-class softmax probability when the target score is z times the
    common off-class score f_j: 1 / (1 + (n-1) * exp((1-z) * f_j)).

    Diagnostic only, no gradients.
    """
    if n < 2:
        raise ValueError("need at least 2 classes")
    if z < 1:
        raise ValueError("score ratio z must be >= 1")
    return 1.0 / (1.0 + (n - 1) * np.exp((1.0 - z) * f_j))


def _angular_forward(X, weights, labels, cfg):
    """Shared forward pass for the angular-margin losses.

    Normalizes features and weight rows, applies the margined logit to
    the target class, and keeps every intermediate the backward pass
    needs.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != weights.W.shape[1]:
        raise DimensionMismatch(
            "features are %r but classifier expects width %d"
            % (X.shape, weights.W.shape[1])
        )
    labels = _check_labels(labels, weights.n_classes)
    N = X.shape[0]

    X_hat, x_norms = numerics.normalize_rows(X)
    W_hat, w_norms = numerics.normalize_rows(weights.W)
    C = X_hat @ W_hat.T

    rows = np.arange(N)
    c_t = C[rows, labels]
    theta, dtheta_dc = numerics.clamped_arccos(c_t)
    inner = cfg.m1 * theta + cfg.m2
    target = cfg.s * np.cos(inner) + cfg.m3
    # d(target)/d(cosine) through the clamped arccos
    dtarget_dc = -cfg.s * cfg.m1 * np.sin(inner) * dtheta_dc

    logits = cfg.s * C
    logits[rows, labels] = target
    return X, labels, X_hat, x_norms, W_hat, w_norms, logits, theta, dtarget_dc


def angular_margin_logits(X, weights, labels, cfg):
    """Per-sample logits with the margin applied to each true class."""
    return _angular_forward(X, weights, labels, cfg)[6]


def angular_margin_ce(X, weights, labels, cfg):
    """Cross-entropy over margined logits on the unit hypersphere.

    The gradient chains through the logit construction, the clamped
    arccos, and both row normalizations. The bias is never used, so
    grad_bias stays None.
    """
    (X, labels, X_hat, x_norms, W_hat, w_norms, logits, theta, dtarget_dc
     ) = _angular_forward(X, weights, labels, cfg)
    N = X.shape[0]
    rows = np.arange(N)

    value, dlogits = numerics.softmax_xent(logits, labels)
    probs = numerics.softmax(logits)

    dC = cfg.s * dlogits
    dC[rows, labels] = dlogits[rows, labels] * dtarget_dc
    grad_X = numerics.normalize_rows_backward(X_hat, x_norms, dC @ W_hat)
    grad_W = numerics.normalize_rows_backward(W_hat, w_norms, dC.T @ X_hat)
    return LossResult(
        value=float(value),
        grad_features=grad_X,
        grad_weights=grad_W,
        grad_bias=None,
        diagnostics={
            "mean_target_angle": float(np.mean(theta)),
            "mean_target_prob": float(np.mean(probs[rows, labels])),
        },
    )


# ---------------------------------------------------------------------------
# distance-shrinking terms


def dsam_pos(partition, X):
    """One anchor's positive pull: sqrt of its summed squared distances
    to every positive. Empty positive set gives 0 with zero gradient.

    Returns (value, grad) with grad shaped like X.
    """
    X = np.asarray(X, dtype=float)
    partition.check_against(X.shape[0])
    grad = np.zeros_like(X)
    pos = partition.positives
    if pos.size == 0:
        return 0.0, grad
    diffs = X[partition.anchor] - X[pos]
    value = float(np.sqrt(np.sum(diffs * diffs)))
    if value >= numerics.EPS_POS:
        g = diffs / value
        grad[partition.anchor] = g.sum(axis=0)
        grad[pos] = -g
    return value, grad


def dsam_neg(partition, D, cfg):
    """One anchor's hinge over negatives in angular-difference space.

    Each negative is pushed until its D exceeds the hardest positive's D
    by at least cfg.m_neg; the mean over the anchor's negatives is
    returned along with the gradient w.r.t. the D entries. Boundary hits
    contribute nothing.
    """
    D = np.asarray(D, dtype=float)
    partition.check_against(D.shape[0])
    if partition.positives.size == 0:
        raise EmptyPositiveSet(
            "anchor %d has no positive; hardest-positive max undefined"
            % partition.anchor
        )
    a = partition.anchor
    pos = np.sort(partition.positives)
    neg = partition.negatives
    grad_D = np.zeros_like(D)
    if neg.size == 0:
        return 0.0, grad_D

    j_star = pos[np.argmax(D[a, pos])]  # first index among tied maxima
    h = cfg.m_neg - (D[a, neg] - D[a, j_star])
    active = h > 0.0
    inv = 1.0 / neg.size
    grad_D[a, neg[active]] = -inv
    grad_D[a, j_star] += active.sum() * inv
    return float(h[active].sum() * inv), grad_D


def dsam_loss(X, batch, cfg):
    """Full distance-shrinking loss over a PK batch.

    Positive pulls run on the raw feature rows; the negative hinge runs
    on the angular-difference matrix of the normalized rows, and its
    gradient is chained back through both. Value is the batch mean of
    (pull + gamma * hinge) per anchor.
    """
    X = np.asarray(X, dtype=float)
    labels = _check_pk_batch(X, batch)
    N = X.shape[0]

    pos_values, pos_grad = kernels.pos_terms(X, labels, numerics.EPS_POS)

    X_hat, norms = numerics.normalize_rows(X)
    D = numerics.pairwise_angular_D(X_hat)
    neg_values, grad_D, n_active, n_total = kernels.neg_terms(
        D, labels, cfg.m_neg
    )

    value = float(np.mean(pos_values + cfg.gamma * neg_values))
    grad_hat = numerics.pairwise_angular_D_backward(
        X_hat, D, (cfg.gamma / N) * grad_D
    )
    grad = pos_grad / N + numerics.normalize_rows_backward(X_hat, norms, grad_hat)
    return LossResult(
        value=value,
        grad_features=grad,
        diagnostics={
            "mean_pos": float(np.mean(pos_values)),
            "mean_neg": float(np.mean(neg_values)),
            "active_hinge_fraction": float(n_active) / n_total if n_total else 0.0,
        },
    )


_BASE_LOSSES = ("softmax", "normalized-softmax", "angular-margin")


def combined_loss(X, weights, labels, batch, base, ang_cfg=None, dsam_cfg=None):
    """Base classification loss plus lam times the distance-shrinking
    loss, gradients combined linearly.

    base is one of "softmax", "normalized-softmax" (angular margins
    forced to the no-margin setting), or "angular-margin". Diagnostics of
    the two parts are merged under base_/dsam_ prefixes.
    """
    if base not in _BASE_LOSSES:
        raise ValueError("base must be one of %r, got %r" % (_BASE_LOSSES, base))
    if dsam_cfg is None:
        dsam_cfg = DsamConfig()
    if base == "softmax":
        base_res = softmax_ce(X, weights, labels)
    else:
        cfg = ang_cfg if ang_cfg is not None else ARCFACE
        if base == "normalized-softmax":
            cfg = AngularMarginConfig(s=cfg.s, m1=1.0, m2=0.0, m3=0.0)
        base_res = angular_margin_ce(X, weights, labels, cfg)

    dsam_res = dsam_loss(X, batch, dsam_cfg)
    diag = {"base_value": base_res.value, "dsam_value": dsam_res.value}
    diag.update(("base_" + k, v) for k, v in base_res.diagnostics.items())
    diag.update(("dsam_" + k, v) for k, v in dsam_res.diagnostics.items())
    return LossResult(
        value=base_res.value + dsam_cfg.lam * dsam_res.value,
        grad_features=base_res.grad_features
        + dsam_cfg.lam * dsam_res.grad_features,
        grad_weights=base_res.grad_weights,
        grad_bias=base_res.grad_bias,
        diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# baselines / diagnostics


def triplet_batch_hard(X, batch, margin):
    """Batch-hard triplet baseline on plain Euclidean distances.

    Per anchor: hinge of margin + (distance to farthest positive) -
    (distance to nearest negative), averaged over the batch.
    """
    X = np.asarray(X, dtype=float)
    labels = _check_pk_batch(X, batch)
    values, grad = kernels.triplet_terms(X, labels, margin, numerics.EPS_POS)
    return LossResult(
        value=float(np.mean(values)),
        grad_features=grad / X.shape[0],
        diagnostics={"active_fraction": float(np.mean(values > 0.0))},
    )


def ang_pos_loss(partition, X):
    """Diagnostic angular pull: sum of arccos(anchor . positive) over
    unit-expected rows.

    Unlike everything else here, the cosine clamp keeps its saturated
    slope, so the gradient magnitude genuinely grows like 1/sin(angle)
    as positives align with the anchor. Never used by the trainer — it
    exists to be measured against the bounded pull of dsam_pos.
    """
    X = np.asarray(X, dtype=float)
    partition.check_against(X.shape[0])
    rows = np.concatenate(([partition.anchor], partition.positives))
    if np.any(np.sqrt(np.sum(X[rows] * X[rows], axis=1)) < numerics.EPS_NORM):
        raise DegenerateVector("angular pull needs nonzero rows")
    grad = np.zeros_like(X)
    pos = partition.positives
    if pos.size == 0:
        return 0.0, grad
    a = partition.anchor
    c = np.clip(X[pos] @ X[a], -1.0 + numerics.COS_CLAMP, 1.0 - numerics.COS_CLAMP)
    value = float(np.sum(np.arccos(c)))
    slope = -1.0 / np.sqrt(1.0 - c * c)
    grad[a] = slope @ X[pos]
    grad[pos] = slope[:, None] * X[a]
    return value, grad
