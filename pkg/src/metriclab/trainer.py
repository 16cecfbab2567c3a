"""SGD training loop over PK batches.

One seeded numpy Generator drives the whole run (initialization first,
then every batch draw, in a fixed order), so a config plus seed pins the
entire trajectory bit-for-bit. The LR follows a step schedule: divided by
a fixed factor every fixed number of epochs, never below a floor.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import evaluation, model as model_mod
from .errors import InsufficientClasses, NonFiniteLoss, ShapeMismatch
from .losses import (
    ARCFACE,
    AngularMarginConfig,
    ClassifierWeights,
    DsamConfig,
    combined_loss,
    dsam_loss,
    softmax_ce,
    angular_margin_ce,
    triplet_batch_hard,
)
from .sampling import batches_per_epoch, pk_sample

BASE_CHOICES = ("softmax", "normalized-softmax", "angular-margin", "triplet")


@dataclass
class TrainConfig:
    """Everything a training run needs besides the dataset itself."""

    base: str = "softmax"
    use_dsam: bool = False
    dsam: DsamConfig = field(default_factory=DsamConfig)
    angular: AngularMarginConfig = field(default_factory=lambda: ARCFACE)
    triplet_margin: float = 0.3
    P: int = 8
    Q: int = 8
    hidden: tuple = (32,)
    embedding_dim: int = 2
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay_factor: float = 0.1
    lr_decay_period: int = 10
    lr_floor: float = 1e-5
    epochs: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.base not in BASE_CHOICES:
            raise ValueError("base must be one of %r" % (BASE_CHOICES,))
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epoch count must be >= 1")


@dataclass
class MetricsLog:
    """Append-only run log; step records and epoch records interleaved."""

    records: list = field(default_factory=list)

    def append(self, record):
        if record["kind"] == "step":
            prev = next(
                (r["step"] for r in reversed(self.records) if r["kind"] == "step"),
                None,
            )
            if prev is not None and record["step"] <= prev:
                raise ValueError("step indices must be strictly increasing")
        self.records.append(record)

    def steps(self):
        return [r for r in self.records if r["kind"] == "step"]

    def epochs(self):
        return [r for r in self.records if r["kind"] == "epoch"]

    def dump_jsonl(self, path):
        with open(path, "w") as fh:
            for record in self.records:
                fh.write(json.dumps(record) + "\n")

    @classmethod
    def load_jsonl(cls, path):
        log = cls()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    log.records.append(json.loads(line))
        return log


def lr_schedule(epoch, base_lr, decay_factor, period, floor):
    """Step schedule: base_lr * decay_factor^(epoch // period), floored."""
    return max(floor, base_lr * decay_factor ** (epoch // period))


def sgd_step(params, grads, velocity, lr, momentum, weight_decay):
    """Momentum SGD on a list of arrays, updated in place.

    g' = grad + weight_decay * param; v <- momentum * v + g';
    param <- param - lr * v. Returns (params, velocity).
    """
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise ShapeMismatch(
                "param/grad/velocity shapes disagree: %r %r %r"
                % (p.shape, g.shape, v.shape)
            )
        gp = g + weight_decay * p
        v *= momentum
        v += gp
        p -= lr * v
    return params, velocity


def _step_loss(embeddings, batch, classifier, config):
    """Evaluate the configured loss on one batch of embeddings."""
    if config.base == "triplet":
        res = triplet_batch_hard(embeddings, batch, config.triplet_margin)
        if config.use_dsam:
            extra = dsam_loss(embeddings, batch, config.dsam)
            res.value += config.dsam.lam * extra.value
            res.grad_features = (
                res.grad_features + config.dsam.lam * extra.grad_features
            )
            res.diagnostics["dsam_value"] = extra.value
        return res
    if config.use_dsam:
        return combined_loss(
            embeddings,
            classifier,
            batch.labels,
            batch,
            config.base,
            ang_cfg=config.angular,
            dsam_cfg=config.dsam,
        )
    if config.base == "softmax":
        return softmax_ce(embeddings, classifier, batch.labels)
    cfg = config.angular
    if config.base == "normalized-softmax":
        cfg = AngularMarginConfig(s=cfg.s, m1=1.0, m2=0.0, m3=0.0)
    return angular_margin_ce(embeddings, classifier, batch.labels, cfg)


def _check_finite(step, value, arrays):
    if not np.isfinite(value):
        raise NonFiniteLoss("loss became non-finite", step=step)
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteLoss("parameters became non-finite", step=step)


def train(dataset, config):
    """Train the embedding model under the configured loss.

    Returns (model, classifier, metrics_log); classifier is None for the
    triplet-only configuration, which never instantiates one.
    """
    labels = dataset.labels
    n_classes = int(labels.max()) + 1
    if np.unique(labels).size < config.P:
        raise InsufficientClasses(
            "dataset has %d classes, config needs P=%d"
            % (np.unique(labels).size, config.P)
        )

    rng = np.random.default_rng(config.seed)
    widths = [dataset.features.shape[1]] + list(config.hidden) + [
        config.embedding_dim
    ]
    net = model_mod.EmbeddingModel(widths, rng)

    classifier = None
    if config.base != "triplet":
        bound = 1.0 / np.sqrt(config.embedding_dim)
        classifier = ClassifierWeights(
            W=rng.uniform(-bound, bound, size=(n_classes, config.embedding_dim)),
            bias=np.zeros(n_classes),
        )

    w_vel = [np.zeros_like(W) for W in net.weights]
    b_vel = [np.zeros_like(b) for b in net.biases]
    cls_vel = (
        [np.zeros_like(classifier.W), np.zeros_like(classifier.bias)]
        if classifier is not None
        else None
    )

    log = MetricsLog()
    steps = batches_per_epoch(labels.shape[0], config.P, config.Q)
    global_step = 0
    for epoch in range(config.epochs):
        lr = lr_schedule(
            epoch,
            config.lr,
            config.lr_decay_factor,
            config.lr_decay_period,
            config.lr_floor,
        )
        epoch_losses = []
        for _ in range(steps):
            batch = pk_sample(labels, config.P, config.Q, rng)
            inputs = dataset.features[batch.indices]
            emb = model_mod.forward(net, inputs)
            if not np.all(np.isfinite(emb)):
                raise NonFiniteLoss(
                    "embeddings became non-finite at step %d (diverged; "
                    "lower the learning rate or the loss weights)" % global_step,
                    step=global_step,
                )
            res = _step_loss(emb, batch, classifier, config)

            w_grads, b_grads, _ = model_mod.backward(net, inputs, res.grad_features)
            sgd_step(net.weights, w_grads, w_vel, lr, config.momentum,
                     config.weight_decay)
            sgd_step(net.biases, b_grads, b_vel, lr, config.momentum, 0.0)
            if classifier is not None and res.grad_weights is not None:
                sgd_step([classifier.W], [res.grad_weights], [cls_vel[0]],
                         lr, config.momentum, config.weight_decay)
                if res.grad_bias is not None:
                    sgd_step([classifier.bias], [res.grad_bias], [cls_vel[1]],
                             lr, config.momentum, 0.0)

            _check_finite(global_step, res.value, net.weights + net.biases)
            record = {
                "kind": "step",
                "step": global_step,
                "epoch": epoch,
                "lr": lr,
                "loss": res.value,
                "seed": config.seed,
            }
            record.update(res.diagnostics)
            log.append(record)
            epoch_losses.append(res.value)
            global_step += 1

        emb_all = model_mod.forward(net, dataset.features)
        summary = evaluation.margin_diagnostics(emb_all, labels, config.dsam)
        log.append({
            "kind": "epoch",
            "epoch": epoch,
            "seed": config.seed,
            "mean_loss": float(np.mean(epoch_losses)),
            "mean_intraclass_angle": summary.mean_intraclass_angle,
            "min_interclass_angle": summary.min_interclass_angle,
            "margin_satisfaction": summary.margin_satisfaction,
        })
    return net, classifier, log
