"""Finite-difference verification suites for every analytic gradient.

Each check draws seeded random instances, rejects any that sit within a
small margin of a nonsmooth point (hinge boundary, argmax/argmin tie,
arccos endpoint, rectifier kink), compares the analytic gradient against
the central-difference oracle, and reports the worst relative error
seen. The CLI surfaces these as a pass/fail table; the test suite calls
them directly.
"""

import numpy as np

from . import model as model_mod, numerics
from .losses import (
    ARCFACE,
    AngularMarginConfig,
    ClassifierWeights,
    DsamConfig,
    ang_pos_loss,
    anchor_partition,
    angular_margin_ce,
    combined_loss,
    dsam_loss,
    dsam_neg,
    dsam_pos,
    softmax_ce,
    triplet_batch_hard,
)
from .sampling import SampledBatch

# Instance geometry shared by all suites: P classes x Q samples in d dims,
# n classifier classes.
P, Q, DIM, N_CLASSES = 4, 3, 8, 5
REJECT_MARGIN = 1e-3  # distance from a nonsmooth point that forces a resample
FD_STEP = 1e-5
ERROR_FLOOR = 1e-8


def relative_error(a, b, floor=ERROR_FLOOR):
    """||a - b|| / max(||a||, ||b||, floor) over flattened arrays."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / max(na, nb, floor))


def _pk_labels():
    return np.repeat(np.arange(P), Q)


def _pk_batch():
    labels = _pk_labels()
    return SampledBatch(indices=np.arange(labels.size), labels=labels, P=P, Q=Q)


def _sample_until(rng, draw, ok, max_tries=500):
    for _ in range(max_tries):
        cand = draw()
        if ok(cand):
            return cand
    raise RuntimeError("no smooth-region instance found in %d tries" % max_tries)


def _top_gap(values):
    """Gap between the largest and second-largest entries (inf if < 2)."""
    if values.size < 2:
        return np.inf
    top = np.partition(values, values.size - 2)
    return top[-1] - top[-2]


def _dsam_hinges_smooth(X, labels, m_neg):
    """True when no anchor sits near a hinge boundary or a positive-max tie."""
    D = numerics.pairwise_angular_D(X)
    for a in range(labels.size):
        pos = np.nonzero((labels == labels[a]) & (np.arange(labels.size) != a))[0]
        neg = np.nonzero(labels != labels[a])[0]
        if _top_gap(D[a, pos]) <= REJECT_MARGIN:
            return False
        h = m_neg - (D[a, neg] - D[a, pos].max())
        if np.min(np.abs(h)) <= REJECT_MARGIN:
            return False
    return True


def _triplet_smooth(X, labels, margin):
    dists = np.sqrt(numerics.pairwise_sq_euclidean(X))
    for a in range(labels.size):
        pos = np.nonzero((labels == labels[a]) & (np.arange(labels.size) != a))[0]
        neg = np.nonzero(labels != labels[a])[0]
        if _top_gap(dists[a, pos]) <= REJECT_MARGIN:
            return False
        if _top_gap(-dists[a, neg]) <= REJECT_MARGIN:
            return False
        h = margin + dists[a, pos].max() - dists[a, neg].min()
        if abs(h) <= REJECT_MARGIN:
            return False
    return True


def _angular_smooth(X, W, labels, cfg):
    """Target cosines away from the arccos endpoints and from the folded
    angle m1*theta + m2 = pi."""
    X_hat, _ = numerics.normalize_rows(X)
    W_hat, _ = numerics.normalize_rows(W)
    c = (X_hat @ W_hat.T)[np.arange(labels.size), labels]
    if np.any(np.abs(c) >= 1.0 - REJECT_MARGIN):
        return False
    inner = cfg.m1 * np.arccos(c) + cfg.m2
    return bool(np.all(np.abs(inner - np.pi) > REJECT_MARGIN))


def check_softmax_ce(rng, n_instances, tol):
    labels = _pk_labels()
    worst = 0.0
    for _ in range(n_instances):
        X = rng.standard_normal((labels.size, DIM))
        cls = ClassifierWeights(
            W=rng.standard_normal((N_CLASSES, DIM)),
            bias=rng.standard_normal(N_CLASSES),
        )
        res = softmax_ce(X, cls, labels)
        fd_X = numerics.finite_difference_gradient(
            lambda A: softmax_ce(A, cls, labels).value, X, FD_STEP)
        fd_W = numerics.finite_difference_gradient(
            lambda W: softmax_ce(X, ClassifierWeights(W, cls.bias), labels).value,
            cls.W, FD_STEP)
        fd_b = numerics.finite_difference_gradient(
            lambda b: softmax_ce(X, ClassifierWeights(cls.W, b), labels).value,
            cls.bias, FD_STEP)
        worst = max(worst,
                    relative_error(res.grad_features, fd_X),
                    relative_error(res.grad_weights, fd_W),
                    relative_error(res.grad_bias, fd_b))
    return worst


def check_angular_margin_ce(rng, n_instances, tol, cfg=ARCFACE):
    labels = _pk_labels()
    worst = 0.0
    for _ in range(n_instances):
        X, W = _sample_until(
            rng,
            lambda: (rng.standard_normal((labels.size, DIM)),
                     rng.standard_normal((N_CLASSES, DIM))),
            lambda xw: _angular_smooth(xw[0], xw[1], labels, cfg),
        )
        cls = ClassifierWeights(W=W)
        res = angular_margin_ce(X, cls, labels, cfg)
        fd_X = numerics.finite_difference_gradient(
            lambda A: angular_margin_ce(A, cls, labels, cfg).value, X, FD_STEP)
        fd_W = numerics.finite_difference_gradient(
            lambda Wp: angular_margin_ce(
                X, ClassifierWeights(W=Wp), labels, cfg).value,
            cls.W, FD_STEP)
        worst = max(worst,
                    relative_error(res.grad_features, fd_X),
                    relative_error(res.grad_weights, fd_W))
    return worst


def check_dsam_pos(rng, n_instances, tol):
    labels = _pk_labels()
    worst = 0.0
    for _ in range(n_instances):
        X = _sample_until(
            rng,
            lambda: rng.standard_normal((labels.size, DIM)),
            lambda A: all(
                dsam_pos(anchor_partition(a, labels), A)[0] > REJECT_MARGIN
                for a in range(labels.size)
            ),
        )
        a = int(rng.integers(labels.size))
        part = anchor_partition(a, labels)
        _, grad = dsam_pos(part, X)
        fd = numerics.finite_difference_gradient(
            lambda A: dsam_pos(part, A)[0], X, FD_STEP)
        worst = max(worst, relative_error(grad, fd))
    return worst


def check_dsam_neg_chain(rng, n_instances, tol, cfg=None):
    """dsam_neg composed with the angular-difference matrix, checked
    against finite differences on the raw feature rows."""
    if cfg is None:
        cfg = DsamConfig()
    labels = _pk_labels()
    worst = 0.0
    for _ in range(n_instances):
        X = _sample_until(
            rng,
            lambda: rng.standard_normal((labels.size, DIM)),
            lambda A: _dsam_hinges_smooth(A, labels, cfg.m_neg),
        )
        a = int(rng.integers(labels.size))
        part = anchor_partition(a, labels)

        X_hat, norms = numerics.normalize_rows(X)
        D = numerics.pairwise_angular_D(X)
        _, grad_D = dsam_neg(part, D, cfg)
        grad_hat = numerics.pairwise_angular_D_backward(X_hat, D, grad_D)
        grad = numerics.normalize_rows_backward(X_hat, norms, grad_hat)

        fd = numerics.finite_difference_gradient(
            lambda A: dsam_neg(part, numerics.pairwise_angular_D(A), cfg)[0],
            X, FD_STEP)
        worst = max(worst, relative_error(grad, fd))
    return worst


def check_dsam_loss(rng, n_instances, tol, cfg=None):
    if cfg is None:
        cfg = DsamConfig()
    batch = _pk_batch()
    worst = 0.0
    for _ in range(n_instances):
        X = _sample_until(
            rng,
            lambda: rng.standard_normal((len(batch), DIM)),
            lambda A: _dsam_hinges_smooth(A, batch.labels, cfg.m_neg),
        )
        res = dsam_loss(X, batch, cfg)
        fd = numerics.finite_difference_gradient(
            lambda A: dsam_loss(A, batch, cfg).value, X, FD_STEP)
        worst = max(worst, relative_error(res.grad_features, fd))
    return worst


def check_combined_loss(rng, n_instances, tol, dsam_cfg=None):
    if dsam_cfg is None:
        dsam_cfg = DsamConfig()
    batch = _pk_batch()
    labels = batch.labels
    worst = 0.0
    for _ in range(n_instances):
        X = _sample_until(
            rng,
            lambda: rng.standard_normal((len(batch), DIM)),
            lambda A: _dsam_hinges_smooth(A, labels, dsam_cfg.m_neg),
        )
        cls = ClassifierWeights(
            W=rng.standard_normal((N_CLASSES, DIM)),
            bias=rng.standard_normal(N_CLASSES),
        )
        res = combined_loss(X, cls, labels, batch, "softmax", dsam_cfg=dsam_cfg)
        fd_X = numerics.finite_difference_gradient(
            lambda A: combined_loss(
                A, cls, labels, batch, "softmax", dsam_cfg=dsam_cfg).value,
            X, FD_STEP)
        fd_W = numerics.finite_difference_gradient(
            lambda W: combined_loss(
                X, ClassifierWeights(W, cls.bias), labels, batch, "softmax",
                dsam_cfg=dsam_cfg).value,
            cls.W, FD_STEP)
        worst = max(worst,
                    relative_error(res.grad_features, fd_X),
                    relative_error(res.grad_weights, fd_W))
    return worst


def check_triplet(rng, n_instances, tol, margin=0.3):
    batch = _pk_batch()
    worst = 0.0
    for _ in range(n_instances):
        X = _sample_until(
            rng,
            lambda: rng.standard_normal((len(batch), DIM)),
            lambda A: _triplet_smooth(A, batch.labels, margin),
        )
        res = triplet_batch_hard(X, batch, margin)
        fd = numerics.finite_difference_gradient(
            lambda A: triplet_batch_hard(A, batch, margin).value, X, FD_STEP)
        worst = max(worst, relative_error(res.grad_features, fd))
    return worst


def check_ang_pos(rng, n_instances, tol):
    labels = _pk_labels()
    worst = 0.0
    for _ in range(n_instances):
        X = _sample_until(
            rng,
            lambda: numerics.normalize_rows(
                rng.standard_normal((labels.size, DIM)))[0],
            lambda A: np.all(
                np.abs(A @ A.T - np.eye(labels.size)) <= 1.0 - REJECT_MARGIN
            ),
        )
        a = int(rng.integers(labels.size))
        part = anchor_partition(a, labels)
        _, grad = ang_pos_loss(part, X)
        fd = numerics.finite_difference_gradient(
            lambda A: ang_pos_loss(part, A)[0], X, FD_STEP)
        worst = max(worst, relative_error(grad, fd))
    return worst


def check_model_backward(rng, n_instances, tol):
    """Loss-through-network composition: classifier cross-entropy on the
    embeddings, gradients checked for every layer and the inputs."""
    labels = _pk_labels()
    widths = [6, 7, DIM]
    worst = 0.0
    for _ in range(n_instances):
        def draw():
            net = model_mod.EmbeddingModel(widths, rng)
            inputs = rng.standard_normal((labels.size, widths[0]))
            return net, inputs

        def smooth(cand):
            net, inputs = cand
            # only hidden layer; its rectifier kink is the risk
            pre = inputs @ net.weights[0].T + net.biases[0]
            return bool(np.all(np.abs(pre) > REJECT_MARGIN))

        net, inputs = _sample_until(rng, draw, smooth)
        cls = ClassifierWeights(W=rng.standard_normal((N_CLASSES, DIM)),
                                bias=rng.standard_normal(N_CLASSES))

        emb = model_mod.forward(net, inputs)
        res = softmax_ce(emb, cls, labels)
        w_grads, b_grads, in_grads = model_mod.backward(
            net, inputs, res.grad_features)

        def loss_with(net2, inputs2):
            return softmax_ce(model_mod.forward(net2, inputs2), cls, labels).value

        errs = []
        for li in range(len(net.weights)):
            def f_w(Wp, li=li):
                saved = net.weights[li]
                net.weights[li] = Wp
                try:
                    return loss_with(net, inputs)
                finally:
                    net.weights[li] = saved

            def f_b(bp, li=li):
                saved = net.biases[li]
                net.biases[li] = bp
                try:
                    return loss_with(net, inputs)
                finally:
                    net.biases[li] = saved

            errs.append(relative_error(
                w_grads[li],
                numerics.finite_difference_gradient(f_w, net.weights[li], FD_STEP)))
            errs.append(relative_error(
                b_grads[li],
                numerics.finite_difference_gradient(f_b, net.biases[li], FD_STEP)))
        errs.append(relative_error(
            in_grads,
            numerics.finite_difference_gradient(
                lambda A: loss_with(net, A), inputs, FD_STEP)))
        worst = max(worst, max(errs))
    return worst


#: name -> check function, in the order the CLI prints them
ALL_CHECKS = [
    ("softmax_ce", check_softmax_ce),
    ("angular_margin_ce", check_angular_margin_ce),
    ("dsam_pos", check_dsam_pos),
    ("dsam_neg_chain", check_dsam_neg_chain),
    ("dsam_loss", check_dsam_loss),
    ("combined_loss", check_combined_loss),
    ("triplet_batch_hard", check_triplet),
    ("ang_pos_loss", check_ang_pos),
    ("model_backward", check_model_backward),
]


def run_all(seed=0, tol=1e-5, n_instances=20):
    """Run every suite; returns [(name, worst_error, passed), ...]."""
    results = []
    for offset, (name, fn) in enumerate(ALL_CHECKS):
        rng = np.random.default_rng([seed, offset])
        worst = fn(rng, n_instances, tol)
        results.append((name, worst, worst <= tol))
    return results
