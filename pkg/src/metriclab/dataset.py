"""Synthetic labeled vectors, CSV round-tripping, and query/gallery splits.

Each class is a small mixture: one class center, M sub-cluster ("mode")
centers around it, samples spread around the modes round-robin. Columns
are standardized at the end so every feature enters training at
comparable scale. All randomness flows through one seeded Generator,
making generation reproducible byte-for-byte.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples, IoError, ParseError, SchemaError

_CENTER_COLLISION = 1e-9


@dataclass
class SyntheticSpec:
    """Knobs of the generator; see generate_synthetic."""

    n_classes: int = 8
    samples_per_class: int = 200
    input_dim: int = 16
    center_scale: float = 3.0
    sigma: float = 0.6
    modes_per_class: int = 3
    mode_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.samples_per_class < 2:
            raise ValueError("samples_per_class must be >= 2")
        if self.modes_per_class < 1:
            raise ValueError("modes_per_class must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")


@dataclass
class LabeledDataset:
    """Feature rows with integer labels 0..K-1 and stable sample ids."""

    features: np.ndarray
    labels: np.ndarray
    ids: np.ndarray = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on row count")
        uniq = np.unique(self.labels)
        if uniq.size and not np.array_equal(uniq, np.arange(uniq.size)):
            raise ValueError("labels must be contiguous integers from 0")
        if self.ids is None:
            self.ids = np.arange(self.labels.shape[0], dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n_classes(self):
        return int(np.unique(self.labels).size)


def _draw_centers(rng, n, dim, scale):
    """Draw n cluster centers, redrawing until all are pairwise distinct."""
    while True:
        centers = scale * rng.standard_normal((n, dim))
        d2 = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        if np.sqrt(d2.min()) >= _CENTER_COLLISION:
            return centers


def generate_synthetic(spec, rng=None):
    """Build a LabeledDataset from a SyntheticSpec; rng defaults to a
    Generator seeded with spec.seed (injectable for testing)."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    K, d, M = spec.n_classes, spec.input_dim, spec.modes_per_class
    centers = _draw_centers(rng, K, d, spec.center_scale)

    rows = []
    labels = []
    for k in range(K):
        modes = centers[k] + spec.mode_scale * rng.standard_normal((M, d))
        for s in range(spec.samples_per_class):
            mode = modes[s % M]
            rows.append(mode + spec.sigma * rng.standard_normal(d))
            labels.append(k)
    X = np.asarray(rows)
    X -= X.mean(axis=0)
    X /= np.maximum(X.std(axis=0), 1e-12)
    return LabeledDataset(features=X, labels=np.asarray(labels))


def save_csv(ds, path, prefix="f"):
    """Write `id,label,<prefix>0..<prefix>{d-1}` rows with full-precision
    (shortest round-trip) float formatting."""
    d = ds.features.shape[1]
    header = "id,label," + ",".join("%s%d" % (prefix, j) for j in range(d))
    try:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for i in range(len(ds)):
                cells = [str(ds.ids[i]), str(ds.labels[i])]
                cells += [repr(float(v)) for v in ds.features[i]]
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise IoError("cannot write %s: %s" % (path, exc))


def load_csv(path):
    """Read a dataset or embedding CSV back into a LabeledDataset.

    Accepts either the f- or e- column prefix. Raises SchemaError for a
    bad header or column structure, ParseError (with the line number) for
    unparseable cells.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError("cannot read %s: %s" % (path, exc))
    if not lines or not lines[0].strip():
        raise SchemaError("%s is empty" % path)

    cols = lines[0].split(",")
    if cols[:2] != ["id", "label"] or len(cols) < 3:
        raise SchemaError("%s: header must start with id,label,..." % path)
    prefix = cols[2][:1]
    if prefix not in ("f", "e"):
        raise SchemaError("%s: feature columns must be f*/e*, got %r" % (path, cols[2]))
    expect = ["%s%d" % (prefix, j) for j in range(len(cols) - 2)]
    if cols[2:] != expect:
        raise SchemaError("%s: feature columns must be %s0..%s%d in order"
                          % (path, prefix, prefix, len(cols) - 3))

    ids, labels, rows = [], [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(cols):
            raise ParseError(
                "%s: expected %d fields, got %d" % (path, len(cols), len(cells)),
                line=ln,
            )
        try:
            ids.append(int(cells[0]))
            labels.append(int(cells[1]))
            rows.append([float(c) for c in cells[2:]])
        except ValueError:
            raise ParseError("%s: non-numeric field" % path, line=ln)
    if not rows:
        raise SchemaError("%s has a header but no data rows" % path)
    return LabeledDataset(
        features=np.asarray(rows),
        labels=np.asarray(labels),
        ids=np.asarray(ids),
    )


def query_gallery_split(ds, queries_per_class, seed):
    """Split queries_per_class rows out of every class for querying.

    Deterministic given seed; the remainder forms the gallery, so every
    query label stays represented. Raises InsufficientSamples naming the
    first class too small to leave a nonempty gallery share.
    """
    rng = np.random.default_rng(seed)
    q_idx, g_idx = [], []
    for k in range(ds.n_classes):
        rows = np.nonzero(ds.labels == k)[0]
        if rows.size < queries_per_class + 1:
            raise InsufficientSamples(
                "class %d has %d samples; need >= %d for %d queries + gallery"
                % (k, rows.size, queries_per_class + 1, queries_per_class)
            )
        perm = rng.permutation(rows)
        q_idx.append(perm[:queries_per_class])
        g_idx.append(perm[queries_per_class:])
    q_idx = np.concatenate(q_idx)
    g_idx = np.concatenate(g_idx)

    def subset(idx):
        return LabeledDataset(
            features=ds.features[idx],
            labels=ds.labels[idx],
            ids=ds.ids[idx],
        )

    return subset(q_idx), subset(g_idx)
