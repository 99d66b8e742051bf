"""Dataset loading with an in-memory cache.

Real datasets come from torchvision and require one-time download; the
`synthetic` dataset is generated in-process (seeded Gaussian blobs, one
mean image per class) so protocol and partition tests can run offline.
"""

from __future__ import annotations

import numpy as np
import torch


class DatasetUnavailable(RuntimeError):
    """The dataset could not be downloaded or read from disk."""


_cache: dict[tuple, tuple] = {}


def synthetic_dataset(n_train: int = 8000, n_test: int = 2000, n_classes: int = 10, seed: int = 7):
    """Linearly separable toy images: class mean patterns plus noise."""
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, 1.0, size=(n_classes, 28, 28)).astype(np.float32)

    def make(n, offset):
        r = np.random.default_rng(seed + offset)
        labels = r.integers(0, n_classes, size=n)
        images = means[labels] + r.normal(0.0, 0.8, size=(n, 28, 28)).astype(np.float32)
        return (
            torch.from_numpy(images[:, None, :, :]),
            torch.from_numpy(labels.astype(np.int64)),
        )

    return make(n_train, 1) + make(n_test, 2)


def load_dataset(name: str, root: str = "data", n_classes: int = 10):
    """(train_images, train_labels, test_images, test_labels) tensors.

    Images are float32 in [0, 1] with a channel dimension; labels int64.
    """
    key = (name, root)
    if key in _cache:
        return _cache[key]
    if name == "synthetic":
        out = synthetic_dataset(n_classes=n_classes)
        _cache[key] = out
        return out

    from torchvision import datasets

    loaders = {
        "mnist": lambda train: datasets.MNIST(root, train=train, download=True),
        "fashion-mnist": lambda train: datasets.FashionMNIST(root, train=train, download=True),
        "emnist": lambda train: datasets.EMNIST(root, split="digits", train=train, download=True),
    }
    if name not in loaders:
        raise ValueError(f"unknown dataset {name!r}")
    try:
        train = loaders[name](True)
        test = loaders[name](False)
    except Exception as exc:  # torchvision raises various URL/IO errors
        raise DatasetUnavailable(f"cannot load {name}: {exc}") from exc

    def tensors(ds):
        images = ds.data.to(torch.float32).div(255.0).unsqueeze(1)
        labels = ds.targets.to(torch.int64)
        return images, labels

    out = tensors(train) + tensors(test)
    _cache[key] = out
    return out
