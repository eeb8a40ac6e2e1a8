import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tailcomp.core import ClassifierHead, EmbeddingDataset, PrototypeSet, Source, predict
from tailcomp.errors import AbsentClass
from tailcomp.prototypes import PrototypeClassifier, compute_prototypes, prototype_predict


def test_mean_of_unit_vectors():
    ds = EmbeddingDataset(np.array([[2.0, 0.0], [0.0, 2.0], [0.0, 3.0]]), [0, 0, 1], 2)
    p = compute_prototypes(ds)
    np.testing.assert_allclose(p.prototypes[:, 0], [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(p.prototypes[:, 1], [0.0, 1.0], atol=1e-15)
    assert p.source is Source.TRAIN


def test_matches_brute_force_mean():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((7, 4))
    ds = EmbeddingDataset(x, np.zeros(7, int), 1)
    np.testing.assert_allclose(compute_prototypes(ds).prototypes, oracles.prototypes(x, [0] * 7, 1), atol=1e-12)


def test_absent_class_marked_and_rejected():
    ds = EmbeddingDataset(np.eye(2), [0, 0], 2)
    p = compute_prototypes(ds, Source.VALIDATION)
    assert p.present.tolist() == [True, False]
    assert p.source is Source.VALIDATION
    with pytest.raises(AbsentClass):
        prototype_predict(p, 16, [1.0, 0.0])
    np.testing.assert_array_equal(prototype_predict(p, 16, [1.0, 0.0], classes=[0]), [1.0, 0.0])


def test_argmax_on_own_direction():
    p = PrototypeSet(np.diag([0.5, 0.9, 0.2]), Source.TRAIN)
    assert int(np.argmax(prototype_predict(p, 16, [0.0, 0.0, 4.0]))) == 2


def test_substitution_identity_and_oracle():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((4, 3))
    f = rng.standard_normal(4)
    p = PrototypeSet(w, Source.TRAIN)
    out = prototype_predict(p, 12.0, f)
    np.testing.assert_allclose(out, ClassifierHead(w, 12.0).predict_proba(f), atol=1e-12)
    np.testing.assert_allclose(out, oracles.cosine_probs(w, 12.0, f), atol=1e-12)
    np.testing.assert_allclose(PrototypeClassifier(p, 12.0).predict_proba(f[None]), [out], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12), st.integers(2, 5))
def test_norm_bound_permutation_and_duplication(seed, m, f):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, f))
    y = np.zeros(m, int)
    base = compute_prototypes(EmbeddingDataset(x, y, 1)).prototypes
    assert np.linalg.norm(base) <= 1 + 1e-12
    perm = rng.permutation(m)
    np.testing.assert_allclose(compute_prototypes(EmbeddingDataset(x[perm], y, 1)).prototypes, base, atol=1e-12)
    dup = compute_prototypes(EmbeddingDataset(np.concatenate([x, x]), np.zeros(2 * m, int), 1)).prototypes
    np.testing.assert_allclose(dup, base, atol=1e-12)


def test_norm_one_iff_parallel():
    ds = EmbeddingDataset(np.array([[1.0, 1.0], [3.0, 3.0]]), [0, 0], 1)
    assert np.linalg.norm(compute_prototypes(ds).prototypes) == pytest.approx(1.0, abs=1e-12)


def test_predict_with_prototypes_matches_predict():
    p = PrototypeSet(np.array([[0.3, 0.0], [0.1, 0.4]]), Source.TRAIN)
    np.testing.assert_array_equal(prototype_predict(p, 5.0, [1.0, 2.0]), predict(p.prototypes, 5.0, [1.0, 2.0]))
