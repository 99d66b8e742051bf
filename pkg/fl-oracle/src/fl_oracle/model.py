"""The measurement network and its training loop.

Two 5x5 convolution layers (16 and 32 channels, each followed by 2x2
max-pooling) into three fully-connected layers (128, 64, classes).
Sized for minutes-scale CPU runs on partitions of a few hundred samples.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class ConvNet(nn.Module):
    def __init__(self, n_classes: int = 10, in_channels: int = 1, image_size: int = 28):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, 16, kernel_size=5, padding=2),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, kernel_size=5, padding=2),
            nn.ReLU(),
            nn.MaxPool2d(2),
        )
        flat = 32 * (image_size // 4) ** 2
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(flat, 128),
            nn.ReLU(),
            nn.Linear(128, 64),
            nn.ReLU(),
            nn.Linear(64, n_classes),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


def train_and_eval(
    train_images: torch.Tensor,
    train_labels: torch.Tensor,
    test_images: torch.Tensor,
    test_labels: torch.Tensor,
    epochs: int = 5,
    seed: int = 0,
    batch_size: int = 32,
    lr: float = 1e-3,
    n_classes: int = 10,
) -> float:
    """Train on the given partition and return full-test-split accuracy.

    An empty partition skips training and scores the freshly initialized
    network (chance-level by construction).
    """
    torch.manual_seed(seed)
    model = ConvNet(n_classes=n_classes, image_size=train_images.shape[-1])
    if len(train_images) > 0:
        opt = torch.optim.Adam(model.parameters(), lr=lr)
        loss_fn = nn.CrossEntropyLoss()
        order_rng = np.random.default_rng(seed)
        model.train()
        for _ in range(epochs):
            order = order_rng.permutation(len(train_images))
            for lo in range(0, len(order), batch_size):
                idx = order[lo:lo + batch_size]
                opt.zero_grad()
                loss = loss_fn(model(train_images[idx]), train_labels[idx])
                loss.backward()
                opt.step()
    model.eval()
    hits = 0
    with torch.no_grad():
        for lo in range(0, len(test_images), 512):
            logits = model(test_images[lo:lo + 512])
            hits += int((logits.argmax(dim=1) == test_labels[lo:lo + 512]).sum())
    return hits / len(test_images)
