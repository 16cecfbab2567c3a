"""Property tests for PK batch sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metriclab.errors import InsufficientClasses, InvalidQ
from metriclab.sampling import (
    SampledBatch,
    batches_per_epoch,
    build_partitions,
    pk_sample,
)


def make_labels(class_sizes):
    return np.concatenate([np.full(n, k) for k, n in enumerate(class_sizes)])


@st.composite
def pk_instances(draw):
    n_classes = draw(st.integers(min_value=2, max_value=8))
    sizes = draw(
        st.lists(
            st.integers(min_value=1, max_value=12),
            min_size=n_classes,
            max_size=n_classes,
        )
    )
    P = draw(st.integers(min_value=2, max_value=n_classes))
    Q = draw(st.integers(min_value=2, max_value=6))
    seed = draw(st.integers(min_value=0, max_value=2**31))
    return sizes, P, Q, seed


@settings(max_examples=120, deadline=None)
@given(pk_instances())
def test_pk_sample_shape_and_balance(instance):
    sizes, P, Q, seed = instance
    labels = make_labels(sizes)
    batch = pk_sample(labels, P, Q, np.random.default_rng(seed))

    assert len(batch) == P * Q
    assert batch.indices.shape == (P * Q,)
    # indices point at rows of the right class
    assert np.array_equal(labels[batch.indices], batch.labels)
    # exactly P distinct classes, each exactly Q times
    uniq, counts = np.unique(batch.labels, return_counts=True)
    assert uniq.size == P
    assert np.all(counts == Q)


@settings(max_examples=60, deadline=None)
@given(pk_instances())
def test_pk_sample_no_duplicates_when_class_is_big_enough(instance):
    sizes, P, Q, seed = instance
    labels = make_labels(sizes)
    batch = pk_sample(labels, P, Q, np.random.default_rng(seed))
    for lab in np.unique(batch.labels):
        rows = batch.indices[batch.labels == lab]
        if (labels == lab).sum() >= Q:
            assert np.unique(rows).size == Q


@settings(max_examples=60, deadline=None)
@given(pk_instances())
def test_pk_sample_small_classes_cover_every_row(instance):
    sizes, P, Q, seed = instance
    labels = make_labels(sizes)
    batch = pk_sample(labels, P, Q, np.random.default_rng(seed))
    for lab in np.unique(batch.labels):
        class_rows = np.nonzero(labels == lab)[0]
        if class_rows.size < Q:
            taken = set(batch.indices[batch.labels == lab].tolist())
            assert taken == set(class_rows.tolist())


@settings(max_examples=40, deadline=None)
@given(pk_instances())
def test_pk_sample_deterministic_per_seed(instance):
    sizes, P, Q, seed = instance
    labels = make_labels(sizes)
    b1 = pk_sample(labels, P, Q, np.random.default_rng(seed))
    b2 = pk_sample(labels, P, Q, np.random.default_rng(seed))
    assert np.array_equal(b1.indices, b2.indices)
    assert np.array_equal(b1.labels, b2.labels)


def test_pk_sample_rejects_q_below_two():
    with pytest.raises(InvalidQ):
        pk_sample(make_labels([4, 4]), 2, 1, np.random.default_rng(0))


def test_pk_sample_rejects_too_few_classes():
    with pytest.raises(InsufficientClasses):
        pk_sample(make_labels([4, 4]), 3, 2, np.random.default_rng(0))


def test_pk_sample_advances_generator():
    labels = make_labels([10, 10, 10])
    gen = np.random.default_rng(7)
    b1 = pk_sample(labels, 2, 3, gen)
    b2 = pk_sample(labels, 2, 3, gen)
    # overwhelmingly unlikely to coincide if the state advanced
    assert not (
        np.array_equal(b1.indices, b2.indices)
        and np.array_equal(b1.labels, b2.labels)
    )


# ---------------------------------------------------------------- partitions

def test_build_partitions_structure():
    batch = SampledBatch(
        indices=np.arange(6), labels=np.array([0, 0, 0, 1, 1, 1]), P=2, Q=3
    )
    parts = build_partitions(batch)
    assert len(parts) == 6
    for a, part in enumerate(parts):
        assert part.anchor == a
        assert part.positives.size == 2
        assert part.negatives.size == 3
        assert a not in part.positives
        assert a not in part.negatives
        assert np.all(batch.labels[part.positives] == batch.labels[a])
        assert np.all(batch.labels[part.negatives] != batch.labels[a])


@pytest.mark.parametrize(
    "n_rows, P, Q, want",
    [
        (64, 8, 8, 1),
        (65, 8, 8, 2),
        (1600, 8, 8, 25),
        (1, 2, 2, 1),
        (100, 4, 4, 7),  # ceil(100/16)
    ],
)
def test_batches_per_epoch(n_rows, P, Q, want):
    assert batches_per_epoch(n_rows, P, Q) == want
