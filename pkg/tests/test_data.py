import hashlib
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from tailcomp.core import ClassifierHead, EmbeddingDataset, HeadKind
from tailcomp.data import (
    SynthConfig,
    class_counts,
    embd_from_bytes,
    embd_nbytes,
    embd_to_bytes,
    generate_synthetic,
    head_from_bytes,
    head_nbytes,
    head_to_bytes,
    load_embd,
    load_head,
    save_embd,
    save_head,
    supercluster_of,
)
from tailcomp.errors import (
    BadMagic,
    BadVersion,
    ConfigInvalid,
    LabelOutOfRange,
    TailcompError,
    TruncatedFile,
)


@pytest.fixture
def tiny():
    x = np.array([[1.5, -2.0], [0.1, 0.7], [3.0, 3.0]])
    return EmbeddingDataset(x, [0, 2, 1], 3)


def test_embd_layout(tiny):
    buf = embd_to_bytes(tiny)
    assert len(buf) == embd_nbytes(3, 2) == 24 + 4 * 3 + 4 * 3 * 2
    magic, ver, dim, n, m = struct.unpack_from("<4sIIIQ", buf)
    assert (magic, ver, dim, n, m) == (b"EMBD", 1, 2, 3, 3)
    assert struct.unpack_from("<3I", buf, 24) == (0, 2, 1)
    assert struct.unpack_from("<f", buf, 36)[0] == 1.5


def test_embd_round_trip_is_bit_exact(tmp_path, tiny):
    p1, p2 = tmp_path / "a.embd", tmp_path / "b.embd"
    save_embd(p1, tiny)
    loaded = load_embd(p1)
    save_embd(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()
    np.testing.assert_array_equal(loaded.labels, tiny.labels)
    np.testing.assert_array_equal(loaded.features, tiny.features.astype(np.float32))
    np.testing.assert_array_equal(loaded.train_counts, [1, 1, 1])


def test_embd_external_counts(tiny):
    ds = embd_from_bytes(embd_to_bytes(tiny), train_counts=[100, 50, 5])
    np.testing.assert_array_equal(ds.train_counts, [100, 50, 5])


def test_embd_errors(tiny):
    buf = embd_to_bytes(tiny)
    with pytest.raises(BadMagic):
        embd_from_bytes(b"EMBX" + buf[4:])
    with pytest.raises(BadVersion):
        embd_from_bytes(buf[:4] + struct.pack("<I", 2) + buf[8:])
    with pytest.raises(TruncatedFile):
        embd_from_bytes(buf[:-5])
    with pytest.raises(TruncatedFile):
        embd_from_bytes(buf[:10])
    bad = bytearray(buf)
    struct.pack_into("<I", bad, 24, 7)
    with pytest.raises(LabelOutOfRange):
        embd_from_bytes(bytes(bad))


def test_head_layout_and_round_trip(tmp_path):
    w = np.array([[1.0, 0.0, 0.5], [0.0, 2.0, -0.25]])
    head = ClassifierHead(w, 16.0, HeadKind.DOT)
    buf = head_to_bytes(head.kind, head.weights, head.scale)
    assert len(buf) == head_nbytes(3, 2) == 21 + 4 * 3 * 2
    assert buf[:4] == b"HEAD" and buf[8] == 1
    # class-major weights: class 1 occupies the second F-block
    assert struct.unpack_from("<2f", buf, 21 + 8) == (0.0, 2.0)
    save_head(tmp_path / "h.head", head)
    loaded = load_head(tmp_path / "h.head")
    assert loaded.kind is HeadKind.DOT and loaded.scale == 16.0
    np.testing.assert_array_equal(loaded.weights, w)
    save_head(tmp_path / "h2.head", loaded)
    assert (tmp_path / "h.head").read_bytes() == (tmp_path / "h2.head").read_bytes()


def test_head_errors():
    buf = head_to_bytes(HeadKind.COSINE, np.eye(2), 16.0)
    with pytest.raises(BadMagic):
        head_from_bytes(b"HEAX" + buf[4:])
    with pytest.raises(TruncatedFile):
        head_from_bytes(buf[:-1])
    with pytest.raises(BadVersion):
        head_from_bytes(buf[:4] + struct.pack("<I", 9) + buf[8:])


@settings(max_examples=500, suppress_health_check=[HealthCheck.too_slow])
@given(st.binary(max_size=200))
def test_fuzz_arbitrary_bytes_map_to_typed_errors(blob):
    for parse in (embd_from_bytes, head_from_bytes):
        try:
            parse(blob)
        except TailcompError:
            pass


@settings(max_examples=300)
@given(st.binary(min_size=1, max_size=120), st.integers(min_value=0, max_value=60))
def test_fuzz_corrupted_headers(tail, cut):
    good_e = embd_to_bytes(EmbeddingDataset(np.ones((2, 3)), [0, 1], 2))
    good_h = head_to_bytes(HeadKind.COSINE, np.ones((3, 2)), 4.0)
    for good, parse in ((good_e, embd_from_bytes), (good_h, head_from_bytes)):
        blob = good[:cut] + tail
        try:
            parse(blob)
        except TailcompError:
            pass


def test_count_law_oracle():
    cfg = SynthConfig(count_exponent=1.0, count_max=500, count_min=5)
    n = class_counts(cfg)
    # oracle: the count formula evaluated with plain python floats
    oracle = [min(500, max(5, int(500 * (r + 1) ** -1.0 + 0.5))) for r in range(100)]
    assert n.tolist() == oracle
    assert n[0] == 500 and n[99] == 5
    assert np.all(np.diff(n) <= 0)


def test_degenerate_single_class():
    cfg = SynthConfig(num_superclusters=1, classes_per_supercluster=1, count_max=10, count_min=10,
                      test_per_class=3)
    train, val, test = generate_synthetic(cfg)
    assert len(train) == 10 and train.num_classes == 1
    assert len(val) == 5 and len(test) == 3


def test_generation_is_deterministic():
    a = [embd_to_bytes(s) for s in generate_synthetic(SynthConfig(seed=3))]
    b = [embd_to_bytes(s) for s in generate_synthetic(SynthConfig(seed=3))]
    c = [embd_to_bytes(s) for s in generate_synthetic(SynthConfig(seed=4))]
    assert a == b
    assert a != c


def test_generated_splits_shape():
    cfg = SynthConfig()
    train, val, test = generate_synthetic(cfg)
    counts = class_counts(cfg)
    np.testing.assert_array_equal(train.train_counts, counts)
    np.testing.assert_array_equal(val.train_counts, np.minimum(5, counts))
    np.testing.assert_array_equal(test.train_counts, np.full(100, cfg.test_per_class))
    # features are already float32-representable, so saving loses nothing
    for split in (train, val, test):
        np.testing.assert_array_equal(embd_from_bytes(embd_to_bytes(split)).features, split.features)


def test_superclusters_mix_head_and_tail():
    cfg = SynthConfig()
    sc = supercluster_of(cfg)
    counts = class_counts(cfg)
    for g in range(cfg.num_superclusters):
        members = counts[sc == g]
        assert members.max() > 20 and members.min() <= 20


def test_same_supercluster_centers_are_closer():
    cfg = SynthConfig(supercluster_radius=2.0, class_offset_sigma=0.05, sample_noise_sigma=0.05)
    within, between = [], []
    for seed in range(5):
        train, _, _ = generate_synthetic(cfg.replace(seed=seed))
        means = np.stack([train.features[train.labels == i].mean(0) for i in range(train.num_classes)])
        d = np.linalg.norm(means[:, None] - means[None], axis=-1)
        sc = supercluster_of(cfg)
        same = sc[:, None] == sc[None]
        off = ~np.eye(len(sc), dtype=bool)
        within.append(d[same & off].mean())
        between.append(d[~same].mean())
    assert np.mean(within) < np.mean(between)


@pytest.mark.parametrize(
    "changes",
    [dict(dim=1), dict(class_offset_sigma=2.0, supercluster_radius=1.0), dict(sample_noise_sigma=0.0),
     dict(count_min=0), dict(count_max=3, count_min=5), dict(count_exponent=0.0),
     dict(num_superclusters=0)],
)
def test_invalid_configs(changes):
    with pytest.raises(ConfigInvalid):
        SynthConfig(**changes).validate()


def test_generated_file_hash_stable(tmp_path):
    train, _, _ = generate_synthetic(SynthConfig(seed=11))
    save_embd(tmp_path / "t.embd", train)
    h1 = hashlib.sha256((tmp_path / "t.embd").read_bytes()).hexdigest()
    train2, _, _ = generate_synthetic(SynthConfig(seed=11))
    assert hashlib.sha256(embd_to_bytes(train2)).hexdigest() == h1
