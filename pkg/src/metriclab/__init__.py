"""metriclab: a small metric-learning laboratory on plain numpy.

Losses with hand-derived analytic gradients (classifier cross-entropies,
angular-margin variants, a distance-shrinking pull/push pair, batch-hard
triplet), PK-balanced batch sampling, a tiny embedding MLP trained with
momentum SGD, synthetic multi-modal datasets, and cosine-retrieval
evaluation — all deterministic given a seed, all gradient-checked
against finite differences.
"""

from .backend import active_backend
from .dataset import (
    LabeledDataset,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    query_gallery_split,
    save_csv,
)
from .evaluation import (
    MarginDiagnostics,
    RetrievalReport,
    average_precision,
    evaluate,
    margin_diagnostics,
    rank_gallery,
)
from .losses import (
    ARCFACE,
    AngularMarginConfig,
    AnchorPartition,
    ClassifierWeights,
    DsamConfig,
    LossResult,
    ang_pos_loss,
    anchor_partition,
    angular_margin_ce,
    angular_margin_logits,
    combined_loss,
    dsam_loss,
    dsam_neg,
    dsam_pos,
    saturation_probability,
    softmax_ce,
    triplet_batch_hard,
)
from .model import EmbeddingModel, backward, forward, load_checkpoint, save_checkpoint
from .sampling import SampledBatch, build_partitions, pk_sample
from .trainer import MetricsLog, TrainConfig, lr_schedule, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "ARCFACE",
    "AngularMarginConfig",
    "AnchorPartition",
    "ClassifierWeights",
    "DsamConfig",
    "EmbeddingModel",
    "LabeledDataset",
    "LossResult",
    "MarginDiagnostics",
    "MetricsLog",
    "RetrievalReport",
    "SampledBatch",
    "SyntheticSpec",
    "TrainConfig",
    "active_backend",
    "ang_pos_loss",
    "anchor_partition",
    "angular_margin_ce",
    "angular_margin_logits",
    "average_precision",
    "backward",
    "build_partitions",
    "combined_loss",
    "dsam_loss",
    "dsam_neg",
    "dsam_pos",
    "evaluate",
    "forward",
    "generate_synthetic",
    "load_checkpoint",
    "load_csv",
    "lr_schedule",
    "margin_diagnostics",
    "pk_sample",
    "query_gallery_split",
    "rank_gallery",
    "saturation_probability",
    "save_checkpoint",
    "save_csv",
    "sgd_step",
    "softmax_ce",
    "train",
    "triplet_batch_hard",
]
