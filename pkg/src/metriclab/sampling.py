"""Identity-balanced PK batch construction.

A batch is P classes times Q samples per class, drawn from a labeled
dataset with a caller-owned numpy Generator. Classes shorter than Q are
topped up with replacement after every distinct row has been included
once, so the P*Q shape holds no matter how lopsided the dataset is.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientClasses, InvalidQ
from .losses import anchor_partition


@dataclass
class SampledBatch:
    """P*Q dataset row indices with their labels, grouped by class."""

    indices: np.ndarray
    labels: np.ndarray
    P: int
    Q: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self):
        return self.indices.shape[0]


def pk_sample(labels, P, Q, rng_state):
    """Draw a PK batch: P labels without replacement, then Q rows each.

    rng_state is a numpy Generator and is advanced by the call; reusing
    the same seeded generator from scratch reproduces the same batch.
    """
    if Q < 2:
        raise InvalidQ("PK batches need Q >= 2, got Q=%d" % Q)
    labels = np.asarray(labels)
    distinct = np.unique(labels)
    if distinct.size < P:
        raise InsufficientClasses(
            "need %d distinct labels, dataset has %d" % (P, distinct.size)
        )

    chosen = rng_state.choice(distinct, size=P, replace=False)
    idx_parts = []
    lab_parts = []
    for lab in chosen:
        rows = np.nonzero(labels == lab)[0]
        if rows.size >= Q:
            take = rng_state.choice(rows, size=Q, replace=False)
        else:
            # every distinct row once, then fill with replacement
            fill = rng_state.choice(rows, size=Q - rows.size, replace=True)
            take = np.concatenate([rng_state.permutation(rows), fill])
        idx_parts.append(take)
        lab_parts.append(np.full(Q, lab))
    return SampledBatch(
        indices=np.concatenate(idx_parts),
        labels=np.concatenate(lab_parts),
        P=int(P),
        Q=int(Q),
    )


def build_partitions(batch):
    """AnchorPartition for every batch position, straight off the labels."""
    return [anchor_partition(a, batch.labels) for a in range(len(batch))]


def batches_per_epoch(n_rows, P, Q):
    """Number of independent PK draws that counts as one epoch."""
    return -(-n_rows // (P * Q))
