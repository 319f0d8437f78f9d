"""Dataset loading: MNIST from a local directory when available, with the
bundled scikit-learn digits set (upsampled to 28x28) as the offline
fallback. Images come back as float32 (N, 1, 28, 28) in [0, 1], labels as
int64 class ids.
"""

import os

import numpy as np
import torch
import torch.nn.functional as F


class DatasetUnavailable(RuntimeError):
    pass


def _mnist_root(data_dir):
    return (
        data_dir
        or os.environ.get("MNIST_DIR")
        or os.path.join(os.path.expanduser("~"), ".cache", "activation-harness")
    )


def _load_mnist(subset_size, seed, data_dir, download=False):
    try:
        from torchvision import datasets
    except ImportError as exc:
        raise DatasetUnavailable(f"torchvision unavailable: {exc}") from exc
    root = _mnist_root(data_dir)
    try:
        ds = datasets.MNIST(root=root, train=True, download=download)
    except Exception as exc:
        raise DatasetUnavailable(
            f"MNIST not found under {root!r} (set MNIST_DIR or pass --data-dir; "
            f"download with --download where the network allows): {exc}"
        ) from exc
    images = ds.data.numpy().astype(np.float32) / 255.0
    labels = ds.targets.numpy().astype(np.int64)
    return _subset(images[:, None, :, :], labels, subset_size, seed)


def _load_digits(subset_size, seed):
    from sklearn.datasets import load_digits

    bundle = load_digits()
    images = bundle.images.astype(np.float32) / 16.0  # (1797, 8, 8)
    with torch.no_grad():
        up = F.interpolate(
            torch.from_numpy(images).unsqueeze(1),
            size=(28, 28),
            mode="bilinear",
            align_corners=False,
        ).numpy()
    labels = bundle.target.astype(np.int64)
    return _subset(up, labels, subset_size, seed)


def _subset(images, labels, subset_size, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    take = order[: min(subset_size, len(labels))]
    return images[take], labels[take]


def resolve_dataset_name(name, data_dir=None):
    """Map "auto" to mnist when it is present locally, else digits."""
    if name != "auto":
        return name
    try:
        from torchvision import datasets

        datasets.MNIST(root=_mnist_root(data_dir), train=True, download=False)
        return "mnist"
    except Exception:
        return "digits"


def load_dataset(name, subset_size, seed=0, data_dir=None, download=False):
    name = resolve_dataset_name(name, data_dir)
    if name == "mnist":
        images, labels = _load_mnist(subset_size, seed, data_dir, download)
    elif name == "digits":
        images, labels = _load_digits(subset_size, seed)
    else:
        raise DatasetUnavailable(f"unknown dataset {name!r}")
    return name, images, labels
