"""Small feedforward embedding network on plain numpy arrays.

Hidden layers use max(0, x) with the gradient at exactly zero defined as
zero; the output layer is purely linear so embeddings cover all of R^d.
Initialization is centered uniform scaled by 1/sqrt(fan-in), biases zero.
The backward pass is exact reverse-mode, written out by hand.
"""

import json

import numpy as np

from .errors import DimensionMismatch, IoError, SchemaError

CHECKPOINT_VERSION = 1


class EmbeddingModel:
    """Weights and biases for a widths[0] -> ... -> widths[-1] MLP."""

    def __init__(self, widths, rng):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise DimensionMismatch("widths must be >= 2 positive layer sizes")
        self.widths = widths
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def embedding_dim(self):
        return self.widths[-1]

    def _forward_cached(self, inputs):
        """Run the net, keeping each layer's post-activation output."""
        acts = [inputs]
        h = inputs
        last = len(self.weights) - 1
        for li, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W.T + b
            if li != last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return acts


def forward(model, inputs):
    """Embed a batch of input rows; output width is the embedding dim."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != model.widths[0]:
        raise DimensionMismatch(
            "inputs are %r but the model takes width %d"
            % (inputs.shape, model.widths[0])
        )
    return model._forward_cached(inputs)[-1]


def backward(model, inputs, grad_embeddings):
    """Reverse-mode gradients of forward contracted with grad_embeddings.

    Returns (weight_grads, bias_grads, input_grads) with the first two as
    per-layer lists matching model.weights / model.biases.
    """
    inputs = np.asarray(inputs, dtype=float)
    grad_embeddings = np.asarray(grad_embeddings, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != model.widths[0]:
        raise DimensionMismatch("inputs do not match the model input width")
    if grad_embeddings.shape != (inputs.shape[0], model.widths[-1]):
        raise DimensionMismatch("grad_embeddings shape does not match the output")

    acts = model._forward_cached(inputs)
    weight_grads = [None] * len(model.weights)
    bias_grads = [None] * len(model.biases)
    delta = grad_embeddings
    for li in range(len(model.weights) - 1, -1, -1):
        if li != len(model.weights) - 1:
            # strictly-positive mask: gradient at exactly 0 is 0
            delta = delta * (acts[li + 1] > 0.0)
        weight_grads[li] = delta.T @ acts[li]
        bias_grads[li] = delta.sum(axis=0)
        delta = delta @ model.weights[li]
    return weight_grads, bias_grads, delta


def save_checkpoint(path, model, classifier=None):
    """Write model (and optionally classifier) parameters as JSON."""
    record = {
        "format_version": CHECKPOINT_VERSION,
        "widths": model.widths,
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    if classifier is not None:
        record["classifier"] = {
            "W": classifier.W.tolist(),
            "bias": classifier.bias.tolist(),
        }
    with open(path, "w") as fh:
        json.dump(record, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint back; returns (model, classifier-or-None)."""
    from .losses import ClassifierWeights

    try:
        with open(path) as fh:
            record = json.load(fh)
    except OSError as exc:
        raise IoError("cannot read checkpoint %s: %s" % (path, exc))
    except ValueError as exc:
        raise SchemaError("checkpoint %s is not valid JSON: %s" % (path, exc))
    if not isinstance(record, dict) or "format_version" not in record:
        raise SchemaError("checkpoint %s lacks a format_version" % path)
    if record["format_version"] != CHECKPOINT_VERSION:
        raise SchemaError(
            "checkpoint version %r unsupported (want %d)"
            % (record["format_version"], CHECKPOINT_VERSION)
        )
    try:
        widths = record["widths"]
        model = EmbeddingModel(widths, np.random.default_rng(0))
        model.weights = [np.asarray(W, dtype=float) for W in record["weights"]]
        model.biases = [np.asarray(b, dtype=float) for b in record["biases"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError("checkpoint %s is malformed: %s" % (path, exc))
    for W, b, fan_in, fan_out in zip(
        model.weights, model.biases, widths[:-1], widths[1:]
    ):
        if W.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise SchemaError("checkpoint %s parameters disagree with widths" % path)
    classifier = None
    if record.get("classifier") is not None:
        cls = record["classifier"]
        try:
            classifier = ClassifierWeights(
                W=np.asarray(cls["W"], dtype=float),
                bias=np.asarray(cls["bias"], dtype=float),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError("checkpoint %s classifier is malformed: %s" % (path, exc))
    return model, classifier
