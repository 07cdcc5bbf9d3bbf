"""Shared synthetic dataset for the demo scripts.

Each class gets a bright patch at a class-specific grid position over a
noisy dark background — trivially separable, so the demos finish in
seconds without any downloaded data.
"""

import numpy as np

from synaptogen import LabeledDataset, compute_norm_stats, normalize, pad_to_32


def make_split(per_class: int, seed: int, name: str, split: str) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(10), per_class).astype(np.int64)
    n = labels.shape[0]
    images = np.clip(rng.normal(30.0, 20.0, size=(n, 28, 28)), 0, 255)
    for i, lab in enumerate(labels):
        gy, gx = divmod(int(lab), 4)
        y0, x0 = 2 + gy * 6, 2 + gx * 6
        images[i, y0 : y0 + 7, x0 : x0 + 7] = np.clip(
            rng.normal(220.0, 10.0, size=(7, 7)), 0, 255
        )
    return LabeledDataset(images[:, None].astype(np.float64), labels, name, split)


def normalized_pair(train_per_class=8, test_per_class=4, seed=0):
    """(train, test) padded to 32x32 and normalized with training statistics."""
    train = pad_to_32(make_split(train_per_class, seed, "demo", "train"))
    test = pad_to_32(make_split(test_per_class, seed + 1, "demo", "test"))
    stats = compute_norm_stats(train)
    return normalize(train, stats), normalize(test, stats)


def raw_pair(train_per_class=8, test_per_class=4, seed=0):
    """(train, test) padded to 32x32 but NOT normalized (pipeline input form)."""
    train = pad_to_32(make_split(train_per_class, seed, "demo", "train"))
    test = pad_to_32(make_split(test_per_class, seed + 1, "demo", "test"))
    return train, test
