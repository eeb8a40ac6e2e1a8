import dataclasses
import math

import numpy as np
import pytest

from oracles import central_difference, rel_err
from tailcomp.core import ClassifierHead, EmbeddingDataset, HeadKind
from tailcomp.errors import AbsentClass, ConfigInvalid, EmptyDataset
from tailcomp.head import TrainConfig, ce_loss_and_grads, forward_logits, train_head


def _loss(head, x, y):
    return ce_loss_and_grads(head, x, y)[0]


def gradient_errors(kind, instances=20, seed=0, h=1e-5):
    """Relative error between analytic and central-difference gradients per random instance."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(instances):
        f = int(rng.integers(2, 6))
        n = int(rng.integers(2, 7))
        b = int(rng.integers(1, 8))
        w = rng.standard_normal((f, n))
        s = float(rng.uniform(1, 20)) if kind is HeadKind.COSINE else 1.0
        x = rng.standard_normal((b, f))
        y = rng.integers(0, n, size=b)
        _, gw, gs = ce_loss_and_grads(ClassifierHead(w, s, kind), x, y)
        num_w = central_difference(lambda m: _loss(ClassifierHead(m, s, kind), x, y), w, h)
        errs = [rel_err(gw, num_w)]
        if kind is HeadKind.COSINE:
            num_s = (_loss(ClassifierHead(w, s + h, kind), x, y) - _loss(ClassifierHead(w, s - h, kind), x, y)) / (2 * h)
            errs.append(abs(gs - num_s) / max(abs(gs), abs(num_s), 1e-30))
        out.append(max(errs))
    return out


@pytest.mark.parametrize("kind", [HeadKind.COSINE, HeadKind.DOT])
def test_gradients_match_finite_differences(kind):
    errs = gradient_errors(kind)
    assert max(errs) < 1e-6


def test_gradient_ignores_absent_columns():
    w = np.array([[1.0, 0.0, 0.3], [0.0, 0.0, 1.0]])
    head = ClassifierHead(w, 8.0)
    x = np.array([[1.0, 0.2], [0.1, 1.0]])
    _, gw, _ = ce_loss_and_grads(head, x, [0, 2])
    assert np.all(gw[:, 1] == 0)
    with pytest.raises(AbsentClass):
        ce_loss_and_grads(head, x, [1, 0])


def test_forward_logits_examples():
    np.testing.assert_allclose(forward_logits(ClassifierHead(np.eye(2), 16.0), np.array([3.0, 0.0])), [16, 0],
                               atol=1e-12)
    z = forward_logits(ClassifierHead(np.eye(2), 10.0), np.array([1.0, 1.0]))
    np.testing.assert_allclose(z, [10 / math.sqrt(2)] * 2, atol=1e-12)
    dot = ClassifierHead(np.array([[3.0, 0.0], [0.0, 1.0]]), 16.0, HeadKind.DOT)
    assert forward_logits(dot, np.array([2.0, 0.0]))[0] == 6.0


def test_uniform_logits_give_ln2():
    head = ClassifierHead(np.array([[1.0, 1.0], [0.0, 0.0]]), 16.0)
    loss, _, _ = ce_loss_and_grads(head, np.array([[1.0, 0.5]]), [0])
    assert loss == pytest.approx(math.log(2), abs=1e-12)


def test_perfect_prediction_has_vanishing_loss():
    head = ClassifierHead(np.eye(2), 200.0)
    loss, gw, _ = ce_loss_and_grads(head, np.eye(2), [0, 1], scale_learnable=False)
    assert loss < 1e-30 and np.linalg.norm(gw) < 1e-30


def test_fixed_scale_has_zero_scale_grad():
    head = ClassifierHead(np.eye(3)[:, :2], 4.0)
    _, _, gs = ce_loss_and_grads(head, np.ones((2, 3)), [0, 1], scale_learnable=False)
    assert gs == 0.0


def test_empty_batch_rejected():
    with pytest.raises(EmptyDataset):
        ce_loss_and_grads(ClassifierHead(np.eye(2), 1.0), np.zeros((0, 2)), [])


@pytest.fixture
def toy():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal([5, 0], 0.1, (40, 2)), rng.normal([-5, 0], 0.1, (40, 2))])
    y = np.repeat([0, 1], 40)
    return EmbeddingDataset(x, y, 2)


def test_separable_toy_reaches_full_accuracy(toy):
    cfg = TrainConfig(epochs=50, batch_size=16)
    head = train_head(toy, cfg)
    acc = np.mean(np.argmax(head.predict_proba(toy.features), axis=1) == toy.labels)
    assert acc == 1.0
    assert head.scale > 0


def test_training_reduces_loss(toy):
    # a unit scale keeps the initial loss far from zero so the decrease is visible
    cfg = TrainConfig(epochs=50, batch_size=16, scale_init=1.0)
    init = train_head(toy, dataclasses.replace(cfg, epochs=1, learning_rate=1e-12))
    final = train_head(toy, cfg)
    assert _loss(final, toy.features, toy.labels) < 0.5 * _loss(init, toy.features, toy.labels)


def test_training_is_deterministic_and_non_mutating(toy):
    before = toy.features.copy()
    a = train_head(toy, TrainConfig(epochs=3, seed=7))
    b = train_head(toy, TrainConfig(epochs=3, seed=7))
    c = train_head(toy, TrainConfig(epochs=3, seed=8))
    assert a.weights.tobytes() == b.weights.tobytes() and a.scale == b.scale
    assert a.weights.tobytes() != c.weights.tobytes()
    np.testing.assert_array_equal(toy.features, before)


def test_scale_projection_keeps_scale_positive(toy, caplog):
    # a huge learning rate on the scale drives it negative; projection must catch it
    flipped = EmbeddingDataset(toy.features, 1 - toy.labels, 2)
    caplog.set_level("WARNING", logger="tailcomp.head")
    head = train_head(flipped, TrainConfig(epochs=2, batch_size=80, learning_rate=50.0, weight_decay=0.0))
    assert head.scale > 0
    assert any("projected" in r.getMessage() for r in caplog.records)


def test_dot_kind_trains(toy):
    head = train_head(toy, TrainConfig(epochs=5, kind=HeadKind.DOT))
    assert head.kind is HeadKind.DOT
    assert np.mean(np.argmax(head.predict_proba(toy.features), axis=1) == toy.labels) == 1.0


def test_empty_classes_keep_zero_columns(toy):
    ds = EmbeddingDataset(toy.features, toy.labels, 3)
    head = train_head(ds, TrainConfig(epochs=2))
    assert np.all(head.weights[:, 2] == 0)
    assert head.present.tolist() == [True, True, False]


@pytest.mark.parametrize(
    "changes", [dict(epochs=0), dict(learning_rate=0.0), dict(scale_init=-1.0), dict(batch_size=0)]
)
def test_invalid_train_config(changes, toy):
    with pytest.raises(ConfigInvalid):
        train_head(toy, TrainConfig(**changes))
