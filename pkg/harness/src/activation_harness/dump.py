"""Training loop with scheduled activation/error dumps.

Dumped batches write, per layer: every conv feature map rasterized to one
n x (H*W) tensor (filter index then row-major spatial order), fc
activations as n x d, the raw input batch, float class labels, and the
loss gradients with respect to each layer's output (one rasterized tensor
per layer, output layer first). The manifest indexes everything with paths
relative to its own directory.
"""

import json
import os

import numpy as np
import torch
from numpy.lib import format as npy_format
from torch import nn

from .datasets import load_dataset
from .models import build_model


def write_npy(path, array):
    arr = np.ascontiguousarray(array.astype(np.float32, copy=False))
    assert np.isfinite(arr).all(), f"non-finite values headed for {path}"
    with open(path, "wb") as fp:
        npy_format.write_array(fp, arr, version=(1, 0))


def _dump_batch(out_dir, tag, x, y, traces, batch_size):
    assert x.shape[0] == batch_size and y.shape[0] == batch_size
    entry = {"input": f"{tag}_input.npy", "labels": f"{tag}_labels.npy"}
    write_npy(os.path.join(out_dir, entry["input"]), x.detach().cpu().numpy())
    write_npy(
        os.path.join(out_dir, entry["labels"]),
        y.detach().cpu().numpy().astype(np.float32),
    )
    layers = []
    errors = []
    for name, kind, tensor in traces:
        acts = tensor.detach().cpu().numpy()
        assert acts.shape[0] == batch_size, f"layer {name}: bad batch dimension"
        if kind == "conv":
            maps = []
            for ci in range(acts.shape[1]):
                path = f"{tag}_{name}_f{ci}.npy"
                write_npy(os.path.join(out_dir, path), acts[:, ci])
                maps.append(path)
            layers.append({"name": name, "kind": "conv", "maps": maps})
        else:
            path = f"{tag}_{name}.npy"
            write_npy(os.path.join(out_dir, path), acts)
            layers.append({"name": name, "kind": "fc", "tensor": path})
    for name, _, tensor in reversed(traces):
        grad = tensor.grad
        assert grad is not None, f"layer {name}: no gradient recorded"
        grad = grad.detach().cpu().numpy().reshape(batch_size, -1)
        path = f"{tag}_err_{name}.npy"
        write_npy(os.path.join(out_dir, path), grad)
        errors.append({"name": name, "kind": "fc", "tensor": path})
    entry["layers"] = layers
    entry["errors"] = errors
    return entry


def train_and_dump(config, out_dir):
    """Train per the config, dumping scheduled batches; returns the
    manifest path. Incomplete trailing batches are dropped so every dumped
    tensor's first dimension equals config.batch_size."""
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(config.seed)
    dataset_name, images, labels = load_dataset(
        config.dataset, config.subset_size, seed=config.seed, data_dir=config.data_dir
    )
    num_classes = int(labels.max()) + 1
    x_all = torch.from_numpy(images)
    y_all = torch.from_numpy(labels)
    model = build_model(config, num_classes)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=config.lr, momentum=config.momentum
    )
    loss_fn = nn.CrossEntropyLoss()
    n = config.batch_size
    num_batches = len(y_all) // n
    if num_batches < 1:
        raise ValueError(
            f"subset of {len(y_all)} samples is smaller than one batch of {n}"
        )
    order_rng = torch.Generator().manual_seed(config.seed)
    epochs_doc = []
    for epoch in range(config.epochs):
        order = torch.randperm(len(y_all), generator=order_rng)
        batches_doc = []
        for bi in range(num_batches):
            idx = order[bi * n : (bi + 1) * n]
            x, y = x_all[idx], y_all[idx]
            optimizer.zero_grad()
            if bi % config.dump_every == 0:
                logits, traces = model.forward_traces(x, post_pool=config.post_pool)
                for _, _, tensor in traces:
                    tensor.retain_grad()
                loss = loss_fn(logits, y)
                loss.backward()
                tag = f"e{epoch}_b{bi}"
                batches_doc.append(_dump_batch(out_dir, tag, x, y, traces, n))
            else:
                loss = loss_fn(model(x), y)
                loss.backward()
            optimizer.step()
        epochs_doc.append({"epoch": epoch, "batches": batches_doc})
    manifest = {
        "run_id": config.run_id,
        "batch_size": n,
        "dataset": dataset_name,
        "architecture": config.architecture,
        "activation": config.activation,
        "epochs": epochs_doc,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fp:
        json.dump(manifest, fp, indent=2)
        fp.write("\n")
    return manifest_path
