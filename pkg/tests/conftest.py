import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))  # for the oracles helper

from activator_lab import data as data_mod


def make_images(rng, n):
    return rng.integers(0, 256, size=(n, 3, 32, 32), dtype=np.uint8)


def balanced_labels(n, n_classes):
    return (np.arange(n) % n_classes).astype(np.uint8)


@pytest.fixture(scope="session")
def cifar10_dir(tmp_path_factory):
    """Synthetic files in the exact CIFAR-10 binary layout, balanced labels."""
    root = tmp_path_factory.mktemp("cifar10")
    rng = np.random.default_rng(1234)
    for fname in data_mod.CIFAR10_TRAIN_FILES + [data_mod.CIFAR10_TEST_FILE]:
        images = make_images(rng, 10000)
        labels = balanced_labels(10000, 10)
        (root / fname).write_bytes(
            data_mod.serialize_cifar10_records(images, labels))
    return root


@pytest.fixture(scope="session")
def cifar100_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cifar100")
    rng = np.random.default_rng(4321)
    for fname, n in (("train.bin", 50000), ("test.bin", 10000)):
        images = make_images(rng, n)
        labels = balanced_labels(n, 100)
        (root / fname).write_bytes(
            data_mod.serialize_cifar100_records(images, labels))
    return root


def make_memory_dataset(n=256, n_classes=10, seed=0, split="train"):
    """Small in-memory dataset for training tests (no files involved)."""
    rng = np.random.default_rng(seed)
    images = make_images(rng, n)
    labels = (np.arange(n) % n_classes).astype(np.int64)
    stats = data_mod.compute_stats(images)
    return data_mod.Dataset(images, labels, split, n_classes, stats)


@pytest.fixture
def real_cifar10_dir():
    """Real CIFAR-10 binaries, if the user points at them; else skip."""
    path = os.environ.get("ACTIVATOR_DATA_DIR")
    if not path or not os.path.exists(
            os.path.join(path, "data_batch_1.bin")):
        pytest.skip("real CIFAR-10 data not available "
                    "(set ACTIVATOR_DATA_DIR)")
    return path
