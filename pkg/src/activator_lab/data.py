"""CIFAR-10/100 binary ingestion, normalization, and batch iteration.

CIFAR-10: data_batch_1..5.bin + test_batch.bin, 10000 records each, record =
1 label byte + 3072 pixel bytes (R plane, G plane, B plane, row-major 32x32).
CIFAR-100: train.bin/test.bin, record = coarse label byte + fine label byte +
3072 pixel bytes; the fine label is the class target.

No augmentation anywhere. Normalization is x/255 followed by per-channel
standardization with statistics computed from the training split.
"""

import queue
import threading
from dataclasses import dataclass

import numpy as np

CIFAR10_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR10_TEST_FILE = "test_batch.bin"
CIFAR10_RECORD = 3073
CIFAR100_RECORD = 3074
RECORDS_PER_FILE = 10000


class DataError(RuntimeError):
    """Missing or corrupt dataset files."""


@dataclass
class Stats:
    mean: np.ndarray   # per-channel, of x/255
    std: np.ndarray


@dataclass
class Dataset:
    images: np.ndarray           # [n, 3, 32, 32] uint8
    labels: np.ndarray           # [n] int64
    split: str                   # "train" | "test"
    n_classes: int
    stats: Stats | None = None   # train-split statistics, shared with test

    def __len__(self):
        return len(self.labels)

    def label_histogram(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, n):
        return Dataset(self.images[:n], self.labels[:n], self.split,
                       self.n_classes, self.stats)


def _read_file(path, expected_size):
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        raise DataError(f"missing dataset file: {path}") from None
    if len(raw) != expected_size:
        raise DataError(
            f"{path}: expected {expected_size} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8)


def _parse_records(raw, path, record_size, label_offset, n_classes):
    records = raw.reshape(-1, record_size)
    labels = records[:, label_offset].astype(np.int64)
    bad = np.nonzero(labels >= n_classes)[0]
    if bad.size:
        i = int(bad[0])
        raise DataError(
            f"{path}: label {labels[i]} >= {n_classes} at record {i} "
            f"(byte offset {i * record_size + label_offset})")
    pixels = records[:, label_offset + 1:]
    images = pixels.reshape(-1, 3, 32, 32)
    return images, labels


def compute_stats(train_images_u8):
    x = train_images_u8.astype(np.float64) / 255.0
    mean = x.mean(axis=(0, 2, 3))
    std = x.std(axis=(0, 2, 3))
    return Stats(mean=mean, std=std)


def load_cifar10(dir_path):
    dir_path = str(dir_path)
    parts = []
    for fname in CIFAR10_TRAIN_FILES:
        raw = _read_file(f"{dir_path}/{fname}",
                         CIFAR10_RECORD * RECORDS_PER_FILE)
        parts.append(_parse_records(raw, fname, CIFAR10_RECORD, 0, 10))
    train_images = np.concatenate([p[0] for p in parts])
    train_labels = np.concatenate([p[1] for p in parts])
    raw = _read_file(f"{dir_path}/{CIFAR10_TEST_FILE}",
                     CIFAR10_RECORD * RECORDS_PER_FILE)
    test_images, test_labels = _parse_records(
        raw, CIFAR10_TEST_FILE, CIFAR10_RECORD, 0, 10)
    stats = compute_stats(train_images)
    train = Dataset(train_images, train_labels, "train", 10, stats)
    test = Dataset(test_images, test_labels, "test", 10, stats)
    return train, test


def load_cifar100(dir_path):
    dir_path = str(dir_path)
    raw = _read_file(f"{dir_path}/train.bin", CIFAR100_RECORD * 50000)
    train_images, train_labels = _parse_records(
        raw, "train.bin", CIFAR100_RECORD, 1, 100)
    raw = _read_file(f"{dir_path}/test.bin", CIFAR100_RECORD * 10000)
    test_images, test_labels = _parse_records(
        raw, "test.bin", CIFAR100_RECORD, 1, 100)
    stats = compute_stats(train_images)
    train = Dataset(train_images, train_labels, "train", 100, stats)
    test = Dataset(test_images, test_labels, "test", 100, stats)
    return train, test


def load_dataset(name, dir_path):
    if name == "cifar10":
        return load_cifar10(dir_path)
    if name == "cifar100":
        return load_cifar100(dir_path)
    raise DataError(f"unknown dataset {name!r}; expected cifar10 or cifar100")


def serialize_cifar10_records(images_u8, labels):
    """Inverse of the CIFAR-10 parser; used for round-trip tests/fixtures."""
    n = len(labels)
    out = np.empty((n, CIFAR10_RECORD), dtype=np.uint8)
    out[:, 0] = labels
    out[:, 1:] = images_u8.reshape(n, 3072)
    return out.tobytes()


def serialize_cifar100_records(images_u8, fine_labels, coarse_labels=None):
    n = len(fine_labels)
    out = np.empty((n, CIFAR100_RECORD), dtype=np.uint8)
    out[:, 0] = 0 if coarse_labels is None else coarse_labels
    out[:, 1] = fine_labels
    out[:, 2:] = images_u8.reshape(n, 3072)
    return out.tobytes()


def normalize(images_u8, stats, dtype=np.float32):
    """x/255 then per-channel (x - mean) / std using train-split stats."""
    x = images_u8.astype(np.float64) / 255.0
    x = (x - stats.mean[None, :, None, None]) / stats.std[None, :, None, None]
    return x.astype(dtype)


@dataclass
class Batch:
    images: np.ndarray   # [b, 3, 32, 32] normalized floats
    labels: np.ndarray   # [b] int64


def epoch_permutation(n, base_seed, epoch):
    rng = np.random.default_rng([base_seed, epoch])
    return rng.permutation(n)


def batches(dataset, batch_size, base_seed=0, epoch=0, shuffle=None,
            dtype=np.float32, prefetch=False):
    """Deterministic batch iterator; train split shuffled per epoch.

    The final partial batch is included. With prefetch=True, batches are
    prepared one ahead on a background thread (single producer, single
    consumer).
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if shuffle is None:
        shuffle = dataset.split == "train"
    n = len(dataset)
    order = (epoch_permutation(n, base_seed, epoch) if shuffle
             else np.arange(n))

    def generate():
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            yield Batch(images=normalize(dataset.images[idx], dataset.stats,
                                         dtype),
                        labels=dataset.labels[idx])

    if not prefetch:
        yield from generate()
        return

    q = queue.Queue(maxsize=2)
    _END = object()

    def producer():
        for batch in generate():
            q.put(batch)
        q.put(_END)

    t = threading.Thread(target=producer, daemon=True)
    t.start()
    while True:
        item = q.get()
        if item is _END:
            break
        yield item
    t.join()


def n_batches(n, batch_size):
    return (n + batch_size - 1) // batch_size
