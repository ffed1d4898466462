import gzip
import struct

import numpy as np
import pytest

from prunebench import datasets, mlp
from prunebench.datasets import Dataset
from prunebench.errors import ConsistencyError, DataError, DomainError, FormatError, LengthError
from prunebench.mlp import DenseLayer, Mlp, TrainConfig


def write_pair(tmp_path, pixels, labels, rows=2, cols=2, gz=False):
    img = datasets.idx_image_bytes(pixels, rows, cols)
    lab = datasets.idx_label_bytes(labels)
    if gz:
        img, lab = gzip.compress(img), gzip.compress(lab)
    ip, lp = tmp_path / "img", tmp_path / "lab"
    ip.write_bytes(img)
    lp.write_bytes(lab)
    return ip, lp


def test_idx_single_white_image(tmp_path):
    ip, lp = write_pair(tmp_path, np.full((1, 4), 255), [7])
    data = datasets.load_idx(ip, lp)
    assert data.inputs.shape == (1, 4)
    assert np.array_equal(data.inputs, np.ones((1, 4)))
    assert list(data.labels) == [7]


def test_idx_header_layout(tmp_path):
    raw = datasets.idx_image_bytes(np.arange(12).reshape(3, 4), 2, 2)
    assert struct.unpack(">IIII", raw[:16]) == (0x803, 3, 2, 2)
    assert raw[16:] == bytes(range(12))
    assert struct.unpack(">II", datasets.idx_label_bytes([1, 2])[:8]) == (0x801, 2)


@pytest.mark.parametrize("gz", [False, True])
def test_idx_round_trip(tmp_path, gz):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(5, 28 * 28))
    labels = rng.integers(0, 10, size=5)
    ip, lp = write_pair(tmp_path, pixels, labels, 28, 28, gz=gz)
    data = datasets.load_idx(ip, lp)
    datasets.write_idx(data, tmp_path / "i2", tmp_path / "l2")
    again = datasets.load_idx(tmp_path / "i2", tmp_path / "l2")
    assert again.inputs.tobytes() == data.inputs.tobytes()
    assert np.array_equal(again.labels, data.labels)
    assert np.array_equal(datasets.to_uint8(again.inputs), pixels)
    raw = gzip.decompress(ip.read_bytes()) if gz else ip.read_bytes()
    assert (tmp_path / "i2").read_bytes() == raw


def test_idx_wrong_magic(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((1, 4)), [0])
    raw = bytearray(ip.read_bytes())
    raw[3] = 0x02
    ip.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="0x00000803.*0x00000802"):
        datasets.load_idx(ip, lp)


def test_idx_labels_wrong_magic(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((1, 4)), [0])
    with pytest.raises(FormatError):
        datasets.load_idx(ip, ip)


@pytest.mark.parametrize("cut", [1, 3, 10])
def test_idx_truncated_images(tmp_path, cut):
    ip, lp = write_pair(tmp_path, np.zeros((3, 4)), [0, 1, 2])
    ip.write_bytes(ip.read_bytes()[:-cut])
    with pytest.raises(LengthError):
        datasets.load_idx(ip, lp)


def test_idx_truncated_labels(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((3, 4)), [0, 1, 2])
    lp.write_bytes(lp.read_bytes()[:-1])
    with pytest.raises(LengthError):
        datasets.load_idx(ip, lp)


def test_idx_truncated_gzip(tmp_path):
    ip, lp = write_pair(tmp_path, np.zeros((50, 4)), np.zeros(50), gz=True)
    ip.write_bytes(ip.read_bytes()[:-12])
    with pytest.raises(LengthError):
        datasets.load_idx(ip, lp)


def test_idx_count_mismatch(tmp_path):
    ip, _ = write_pair(tmp_path, np.zeros((3, 4)), [0, 1, 2])
    lp = tmp_path / "lab2"
    lp.write_bytes(datasets.idx_label_bytes([0, 1]))
    with pytest.raises(ConsistencyError):
        datasets.load_idx(ip, lp)


def test_cifar_single_record(tmp_path):
    path = tmp_path / "b.bin"
    path.write_bytes(bytes([3]) + bytes(3072))
    data = datasets.load_cifar10([path])
    assert data.inputs.shape == (1, 3072)
    assert np.array_equal(data.inputs[0], np.zeros(3072))
    assert list(data.labels) == [3]


def test_cifar_channel_major_layout(tmp_path):
    pixels = np.concatenate([np.full(1024, 10), np.full(1024, 20), np.full(1024, 30)])
    path = tmp_path / "b.bin"
    path.write_bytes(datasets.cifar10_bytes(pixels, [9]))
    data = datasets.load_cifar10(path)
    assert np.array_equal(datasets.to_uint8(data.inputs[0]), pixels)


def test_cifar_round_trip_multiple_batches(tmp_path):
    rng = np.random.default_rng(1)
    paths = []
    for i in range(3):
        px = rng.integers(0, 256, size=(4, 3072))
        lab = rng.integers(0, 10, size=4)
        p = tmp_path / f"data_batch_{i}.bin"
        p.write_bytes(datasets.cifar10_bytes(px, lab))
        paths.append(p)
    data = datasets.load_cifar10(paths)
    assert len(data) == 12 and data.input_dim == 3072
    rebuilt = b"".join(p.read_bytes() for p in paths)
    assert datasets.cifar10_bytes(datasets.to_uint8(data.inputs), data.labels) == rebuilt


def test_cifar_truncated(tmp_path):
    path = tmp_path / "b.bin"
    path.write_bytes(bytes(3072))
    with pytest.raises(FormatError):
        datasets.load_cifar10([path])


def test_cifar_bad_label(tmp_path):
    path = tmp_path / "b.bin"
    path.write_bytes(bytes([10]) + bytes(3072))
    with pytest.raises(FormatError, match="label byte 10"):
        datasets.load_cifar10([path])


def test_synthetic_small_and_deterministic():
    d = datasets.synthetic_blobs(2, 1, 5, 0.5, seed=3)
    assert len(d) == 2
    a = datasets.synthetic_blobs(4, 10, 8, 0.8, seed=9)
    b = datasets.synthetic_blobs(4, 10, 8, 0.8, seed=9)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert np.array_equal(a.labels, b.labels)
    assert a.inputs.min() >= 0 and a.inputs.max() <= 1


def test_synthetic_blobs_are_linearly_separable():
    data = datasets.synthetic_blobs(4, 50, 10, separation=1.2, seed=0)
    linear = Mlp([DenseLayer(np.zeros((4, 10)), np.zeros(4), "identity")])
    mlp.train(linear, data, TrainConfig(learning_rate=0.1, momentum=0.9, batch_size=16, epochs=100))
    assert mlp.evaluate(linear, data) == 1.0


def test_synthetic_impossible_separation():
    with pytest.raises(DomainError):
        datasets.synthetic_blobs(3, 1, 1, separation=2.0, seed=0, max_tries=100)


def test_dataset_invariants():
    with pytest.raises(ConsistencyError):
        Dataset(np.zeros((3, 2)), np.zeros(2))


def test_standardize_uses_train_statistics():
    train = Dataset(np.array([[0.0, 1.0], [1.0, 1.0]]), [0, 1])
    test = Dataset(np.array([[0.5, 1.0]]), [0])
    tr, te = datasets.standardize(train, test)
    assert np.allclose(tr.inputs.mean(axis=0), 0)
    assert np.array_equal(te.inputs, [[0.0, 0.0]])


def test_cache_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv("PRUNEBENCH_DATA", str(tmp_path))
    assert datasets.cache_root() == tmp_path


def test_load_split_from_cache(tmp_path):
    d = tmp_path / "mnist"
    d.mkdir()
    for split, n in (("train", 3), ("test", 2)):
        imgs, labs = datasets.IDX_FILES[split]
        (d / imgs).write_bytes(gzip.compress(datasets.idx_image_bytes(np.zeros((n, 784)), 28, 28)))
        (d / (labs + ".gz")).write_bytes(gzip.compress(datasets.idx_label_bytes(np.arange(n))))
    assert len(datasets.load_split("mnist", "train", tmp_path)) == 3
    assert len(datasets.load_split("mnist", "test", tmp_path)) == 2
    with pytest.raises(DataError):
        datasets.load_split("fashion_mnist", "train", tmp_path)
