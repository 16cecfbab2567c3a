"""Trainer tests: optimizer math, schedule, logging, and short end-to-end
runs for every supported loss configuration.
"""

import dataclasses

import numpy as np
import pytest

import metriclab as ml
from metriclab.errors import NonFiniteLoss, ShapeMismatch
from metriclab.trainer import MetricsLog, TrainConfig, lr_schedule, sgd_step, train

from conftest import toy_dataset


# ---------------------------------------------------------------- schedule

@pytest.mark.parametrize(
    "epoch, want",
    [
        (0, 0.01),
        (9, 0.01),
        (10, 0.001),
        (19, 0.001),
        (20, 1e-4),
        (50, 1e-5),   # 1e-7 would fall below the floor of 1e-5
        (500, 1e-5),
    ],
)
def test_lr_schedule_steps(epoch, want):
    got = lr_schedule(epoch, base_lr=0.01, decay_factor=0.1, period=10, floor=1e-5)
    assert got == pytest.approx(want, rel=1e-12)


def test_lr_schedule_floor_binds_exactly():
    assert lr_schedule(1000, 0.01, 0.1, 10, 1e-5) == 1e-5


# --------------------------------------------------------------- optimizer

def test_sgd_step_hand_formula():
    p = [np.array([1.0, 2.0])]
    g = [np.array([0.5, -1.0])]
    v = [np.array([0.1, 0.1])]
    sgd_step(p, g, v, lr=0.1, momentum=0.9, weight_decay=0.01)
    # g' = g + wd*p = [0.51, -0.98]; v = 0.9*0.1 + g' = [0.6, -0.89]
    assert np.allclose(v[0], [0.6, -0.89], atol=1e-12)
    assert np.allclose(p[0], [1.0 - 0.06, 2.0 + 0.089], atol=1e-12)


def test_sgd_step_zero_momentum_is_plain_descent(rng):
    p = [rng.normal(size=(3, 2))]
    p0 = p[0].copy()
    g = [rng.normal(size=(3, 2))]
    v = [np.zeros((3, 2))]
    sgd_step(p, g, v, lr=0.05, momentum=0.0, weight_decay=0.0)
    assert np.allclose(p[0], p0 - 0.05 * g[0], atol=1e-14)


def test_sgd_step_updates_in_place(rng):
    arr = rng.normal(size=(2, 2))
    params = [arr]
    sgd_step(params, [np.ones((2, 2))], [np.zeros((2, 2))], 0.1, 0.0, 0.0)
    assert params[0] is arr  # same array object mutated


def test_sgd_step_shape_check(rng):
    with pytest.raises(ShapeMismatch):
        sgd_step(
            [np.zeros((2, 2))], [np.zeros((2, 3))], [np.zeros((2, 2))], 0.1, 0.9, 0.0
        )


# ------------------------------------------------------------------ config

def test_train_config_defaults_are_sane():
    cfg = TrainConfig(base="softmax")
    assert cfg.P == 8 and cfg.Q == 8
    assert cfg.dsam.m_neg == pytest.approx(0.9)
    assert cfg.angular.s == pytest.approx(64.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(base="contrastive"),
        dict(base="softmax", lr=0.0),
        dict(base="softmax", momentum=1.0),
        dict(base="softmax", epochs=0),
        dict(base="softmax", weight_decay=-1e-3),
    ],
)
def test_train_config_rejects(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


# --------------------------------------------------------------------- log

def test_metrics_log_enforces_increasing_steps():
    log = MetricsLog()
    log.append({"kind": "step", "step": 0, "loss": 1.0})
    log.append({"kind": "epoch", "epoch": 0})
    log.append({"kind": "step", "step": 1, "loss": 0.9})
    with pytest.raises(ValueError):
        log.append({"kind": "step", "step": 1, "loss": 0.8})


def test_metrics_log_filters():
    log = MetricsLog()
    log.append({"kind": "step", "step": 0})
    log.append({"kind": "epoch", "epoch": 0})
    log.append({"kind": "step", "step": 1})
    assert len(log.steps()) == 2
    assert len(log.epochs()) == 1


def test_metrics_log_jsonl_roundtrip(tmp_path):
    log = MetricsLog()
    log.append({"kind": "step", "step": 0, "loss": 0.5, "lr": 0.01})
    log.append({"kind": "epoch", "epoch": 0, "mean_loss": 0.5})
    path = tmp_path / "metrics.jsonl"
    log.dump_jsonl(path)
    back = MetricsLog.load_jsonl(path)
    assert back.records == log.records


# ------------------------------------------------------------------- train

def quick_config(**kw):
    defaults = dict(
        base="softmax",
        P=4,
        Q=4,
        hidden=(16,),
        embedding_dim=4,
        epochs=6,
        lr=0.02,
        seed=3,
    )
    defaults.update(kw)
    return TrainConfig(**defaults)


ALL_LOSS_MODES = [
    dict(base="softmax"),
    dict(base="softmax", use_dsam=True),
    dict(base="normalized-softmax"),
    dict(base="normalized-softmax", use_dsam=True),
    dict(base="angular-margin"),
    dict(base="angular-margin", use_dsam=True),
    dict(base="triplet"),
]


@pytest.mark.parametrize("mode", ALL_LOSS_MODES, ids=lambda m: m["base"] + ("+dsam" if m.get("use_dsam") else ""))
def test_train_loss_decreases(mode):
    ds = toy_dataset(n_classes=4, per_class=16, dim=6, seed=1)
    net, classifier, log = train(ds, quick_config(**mode))
    epochs = log.epochs()
    assert len(epochs) == 6
    assert epochs[-1]["mean_loss"] < epochs[0]["mean_loss"]
    if mode["base"] == "triplet":
        assert classifier is None
    else:
        assert classifier is not None
        assert classifier.W.shape == (4, 4)


def test_train_is_deterministic():
    ds = toy_dataset(seed=2)
    cfg = quick_config(epochs=3)
    _, _, log1 = train(ds, cfg)
    _, _, log2 = train(ds, cfg)
    assert log1.records == log2.records


def test_train_seed_changes_run():
    ds = toy_dataset(seed=2)
    _, _, log1 = train(ds, quick_config(epochs=2, seed=0))
    _, _, log2 = train(ds, quick_config(epochs=2, seed=1))
    losses1 = [r["loss"] for r in log1.steps()]
    losses2 = [r["loss"] for r in log2.steps()]
    assert losses1 != losses2


def test_train_step_records_contents():
    ds = toy_dataset()
    _, _, log = train(ds, quick_config(epochs=2, use_dsam=True))
    step = log.steps()[0]
    for key in ("step", "epoch", "lr", "loss", "seed", "base_value", "dsam_value"):
        assert key in step, key
    epoch = log.epochs()[0]
    for key in (
        "mean_loss",
        "mean_intraclass_angle",
        "min_interclass_angle",
        "margin_satisfaction",
    ):
        assert key in epoch, key


def test_train_steps_count_matches_epoch_budget():
    ds = toy_dataset(n_classes=4, per_class=16, dim=6)  # 64 rows
    cfg = quick_config(epochs=2)  # P*Q = 16 -> 4 steps/epoch
    _, _, log = train(ds, cfg)
    assert len(log.steps()) == 2 * 4
    assert [r["step"] for r in log.steps()] == list(range(8))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_diverging_run_raises_with_step():
    ds = toy_dataset()
    cfg = quick_config(lr=1e9, epochs=3)
    with pytest.raises(NonFiniteLoss) as err:
        train(ds, cfg)
    assert err.value.step is not None


def test_train_lr_follows_schedule():
    ds = toy_dataset()
    cfg = quick_config(epochs=4, lr=0.01, lr_decay_factor=0.5, lr_decay_period=2)
    _, _, log = train(ds, cfg)
    by_epoch = {}
    for r in log.steps():
        by_epoch.setdefault(r["epoch"], set()).add(r["lr"])
    assert by_epoch[0] == {0.01}
    assert by_epoch[1] == {0.01}
    assert by_epoch[2] == {0.005}
    assert by_epoch[3] == {0.005}


def test_train_margin_satisfaction_in_range():
    ds = toy_dataset()
    _, _, log = train(ds, quick_config(epochs=2))
    for r in log.epochs():
        assert 0.0 <= r["margin_satisfaction"] <= 1.0
