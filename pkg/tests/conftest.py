import json
import os

import numpy as np
import pytest

from infoflow import KernelSpec, gram, write_tensor


def random_gram(rng, n, d=3, sigma=None):
    """Random valid Gram matrix from gaussian samples."""
    sigma = sigma if sigma is not None else float(rng.uniform(0.3, 3.0))
    return gram(rng.normal(size=(n, d)), KernelSpec.rbf_fixed(sigma))


def make_run(
    root,
    n=16,
    epochs=2,
    batches=2,
    conv_channels=(3, 2),
    fc_dims=(5, 4),
    d_input=6,
    seed=0,
    with_errors=True,
    run_id="synthetic",
):
    """Write a synthetic activation dump and return its manifest path.

    Layer activations are deterministic transforms of the input batch so
    the dumps behave like a real network's (later layers are functions of
    earlier ones).
    """
    rng = np.random.default_rng(seed)
    root = os.fspath(root)
    os.makedirs(root, exist_ok=True)
    conv_w = []
    width = d_input
    for _ in conv_channels:
        conv_w.append(rng.normal(size=(width, 4)))
        width = 4
    fc_w = []
    for out_width in fc_dims:
        fc_w.append(rng.normal(size=(width, out_width)))
        width = out_width
    epochs_doc = []
    for e in range(epochs):
        batches_doc = []
        for b in range(batches):
            tag = f"e{e}_b{b}"
            x = rng.normal(size=(n, d_input))
            y = rng.integers(0, 4, size=n).astype(np.float64)
            write_tensor(os.path.join(root, f"{tag}_input.npy"), x)
            write_tensor(os.path.join(root, f"{tag}_labels.npy"), y)
            layers = []
            errors = []
            feed = x
            for li, c in enumerate(conv_channels):
                maps = []
                for ci in range(c):
                    fmap = np.tanh(feed @ conv_w[li] + ci)
                    path = f"{tag}_conv{li}_f{ci}.npy"
                    write_tensor(os.path.join(root, path), fmap)
                    maps.append(path)
                layers.append({"name": f"conv{li}", "kind": "conv", "maps": maps})
                feed = np.tanh(feed @ conv_w[li])
            for li, w in enumerate(fc_w):
                feed = np.tanh(feed @ w)
                path = f"{tag}_fc{li}.npy"
                write_tensor(os.path.join(root, path), feed)
                layers.append({"name": f"fc{li}", "kind": "fc", "tensor": path})
            if with_errors:
                for name in [f"fc{len(fc_dims)-1-i}" for i in range(len(fc_dims))] + [
                    f"conv{len(conv_channels)-1-i}" for i in range(len(conv_channels))
                ]:
                    path = f"{tag}_err_{name}.npy"
                    write_tensor(
                        os.path.join(root, path), rng.normal(size=(n, 4)) * 0.01
                    )
                    errors.append({"name": name, "kind": "fc", "tensor": path})
            batch_doc = {
                "input": f"{tag}_input.npy",
                "labels": f"{tag}_labels.npy",
                "layers": layers,
            }
            if errors:
                batch_doc["errors"] = errors
            batches_doc.append(batch_doc)
        epochs_doc.append({"epoch": e, "batches": batches_doc})
    manifest_path = os.path.join(root, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fp:
        json.dump(
            {"run_id": run_id, "batch_size": n, "epochs": epochs_doc}, fp, indent=2
        )
    return manifest_path


@pytest.fixture
def synthetic_run(tmp_path):
    return make_run(tmp_path / "run")
