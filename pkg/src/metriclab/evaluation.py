"""Cosine-similarity retrieval metrics and angular-geometry diagnostics.

Ranking is by descending cosine similarity with ties broken by ascending
gallery index, so every result is deterministic. Metrics follow the usual
retrieval definitions: AP as the mean of precision-at-k over relevant
positions, CMC as the fraction of queries with a hit in the top n.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import EmptyQuerySet, NoRelevantItems

# Above this many rows the diagnostics switch to a fixed-seed subsample.
_EXACT_LIMIT = 10_000


@dataclass
class RetrievalReport:
    """mAP, CMC curve, and the per-query APs they summarize."""

    map: float
    cmc: np.ndarray
    per_query_ap: np.ndarray
    n_queries: int
    n_gallery: int
    skipped_queries: int

    def as_dict(self):
        return {
            "map": self.map,
            "cmc": [float(v) for v in self.cmc],
            "per_query_ap": [float(v) for v in self.per_query_ap],
            "n_queries": self.n_queries,
            "n_gallery": self.n_gallery,
            "skipped_queries": self.skipped_queries,
        }

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")


@dataclass
class MarginDiagnostics:
    """Measured angular geometry of an embedding set.

    spread_reduction is the drop in mean intraclass angle relative to a
    caller-supplied reference value (None when no reference is given).
    """

    mean_intraclass_angle: float
    min_interclass_angle: float
    margin_satisfaction: float
    spread_reduction: float = None

    def as_dict(self):
        return {
            "mean_intraclass_angle": self.mean_intraclass_angle,
            "min_interclass_angle": self.min_interclass_angle,
            "margin_satisfaction": self.margin_satisfaction,
            "spread_reduction": self.spread_reduction,
        }


def rank_gallery(query_embedding, gallery):
    """Indices of gallery rows sorted by descending cosine similarity to
    the query; ties keep ascending index order."""
    q = np.asarray(query_embedding, dtype=float).reshape(1, -1)
    q_hat, _ = numerics.normalize_rows(q)
    g_hat, _ = numerics.normalize_rows(np.asarray(gallery, dtype=float))
    sims = g_hat @ q_hat[0]
    return np.argsort(-sims, kind="stable")


def average_precision(relevance):
    """AP of a ranked 0/1 relevance list: mean over relevant positions k
    (1-based) of (relevant within top k) / k."""
    relevance = np.asarray(relevance, dtype=bool)
    positions = np.nonzero(relevance)[0]
    if positions.size == 0:
        raise NoRelevantItems("relevance list contains no relevant item")
    hits = np.arange(1, positions.size + 1, dtype=float)
    return float(np.mean(hits / (positions + 1.0)))


def evaluate(query_ds, gallery_ds, max_rank=50):
    """Retrieve every query against the gallery and summarize.

    Queries whose label never occurs in the gallery are skipped and
    counted; raises EmptyQuerySet when nothing evaluable remains. The CMC
    curve covers ranks 1..min(max_rank, gallery size).
    """
    qX = np.asarray(query_ds.features, dtype=float)
    gX = np.asarray(gallery_ds.features, dtype=float)
    q_labels = np.asarray(query_ds.labels)
    g_labels = np.asarray(gallery_ds.labels)
    if qX.shape[0] == 0:
        raise EmptyQuerySet("no queries to evaluate")

    q_hat, _ = numerics.normalize_rows(qX)
    g_hat, _ = numerics.normalize_rows(gX)
    sims = q_hat @ g_hat.T

    depth = min(int(max_rank), gX.shape[0])
    cmc_hits = np.zeros(depth)
    aps = []
    skipped = 0
    for qi in range(qX.shape[0]):
        order = np.argsort(-sims[qi], kind="stable")
        rel = g_labels[order] == q_labels[qi]
        if not rel.any():
            skipped += 1
            continue
        aps.append(average_precision(rel))
        first = int(np.argmax(rel))
        if first < depth:
            cmc_hits[first:] += 1.0
    if not aps:
        raise EmptyQuerySet(
            "all %d queries lacked a same-label gallery row" % qX.shape[0]
        )
    aps = np.asarray(aps)
    return RetrievalReport(
        map=float(np.mean(aps)),
        cmc=cmc_hits / len(aps),
        per_query_ap=aps,
        n_queries=len(aps),
        n_gallery=gX.shape[0],
        skipped_queries=skipped,
    )


def _pairwise_angles(X_hat):
    return np.arccos(np.clip(numerics.pairwise_cosine(X_hat), -1.0, 1.0))


def margin_diagnostics(embeddings, labels, cfg, reference_spread=None):
    """Angular summary of an embedding set against the hinge margin.

    Exact over all pairs up to 10^4 rows; larger sets are uniformly
    subsampled once with a fixed seed. Satisfaction counts, over anchors
    that have at least one positive, the fraction of their negatives whose
    angular difference exceeds the hardest positive's by >= cfg.m_neg.
    """
    X = np.asarray(embeddings, dtype=float)
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise ValueError("diagnostics need at least 2 classes")

    if X.shape[0] > _EXACT_LIMIT:
        keep = np.sort(
            np.random.default_rng(0).choice(X.shape[0], _EXACT_LIMIT, replace=False)
        )
        X = X[keep]
        labels = labels[keep]

    X_hat, _ = numerics.normalize_rows(X)
    angles = _pairwise_angles(X_hat)
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    diff = labels[:, None] != labels[None, :]
    if not same.any():
        raise ValueError("diagnostics need some class with >= 2 samples")

    iu = np.triu_indices(X.shape[0], k=1)
    mean_intra = float(np.mean(angles[iu][same[iu]]))
    min_inter = float(np.min(angles[iu][diff[iu]]))

    D = numerics.pairwise_angular_D(X_hat)
    masked = np.where(same, D, -np.inf)
    best = masked.max(axis=1)
    has_pos = same.any(axis=1)
    gaps = D - np.where(has_pos, best, 0.0)[:, None]
    counted = diff & has_pos[:, None]
    satisfied = counted & (gaps >= cfg.m_neg)
    total = int(counted.sum())
    fraction = float(satisfied.sum()) / total if total else 0.0

    reduction = None
    if reference_spread is not None:
        reduction = float(reference_spread) - mean_intra
    return MarginDiagnostics(
        mean_intraclass_angle=mean_intra,
        min_interclass_angle=min_inter,
        margin_satisfaction=fraction,
        spread_reduction=reduction,
    )
