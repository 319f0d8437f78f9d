"""On-disk interchange format for activation dumps.

Tensors travel as NPY v1.0 files (magic ``\\x93NUMPY``, little-endian
``<f4``/``<f8`` payloads, C order). A training run is indexed by a single
``manifest.json`` whose tensor paths are relative to the manifest's
directory. Readers rasterize every tensor to one row per sample: trailing
dimensions beyond the first are flattened in C order.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.lib import format as npy_format


class TensorFormatError(ValueError):
    """Raised when a tensor file violates the interchange format."""


class ManifestError(ValueError):
    """Raised when a run manifest is malformed or inconsistent."""


_ALLOWED_DTYPES = (np.dtype("<f4"), np.dtype("<f8"))


def read_tensor(path):
    """Read one NPY v1.0 tensor and rasterize it to an n x d float64 matrix.

    The first dimension indexes samples; all trailing dimensions are
    flattened in C order. float32 payloads are widened to float64 (exact).

    Raises:
      TensorFormatError: bad magic/version/header, dtype other than
        little-endian float32/float64, payload length mismatch, Fortran
        order, or non-finite values.
    """
    path = os.fspath(path)
    try:
        fp = open(path, "rb")
    except OSError as exc:
        raise TensorFormatError(f"{path}: cannot open tensor file ({exc})") from exc
    with fp:
        try:
            version = npy_format.read_magic(fp)
        except ValueError as exc:
            raise TensorFormatError(f"{path}: not an NPY file ({exc})") from exc
        if version != (1, 0):
            raise TensorFormatError(
                f"{path}: unsupported NPY version {version[0]}.{version[1]}, expected 1.0"
            )
        try:
            shape, fortran_order, dtype = npy_format.read_array_header_1_0(fp)
        except ValueError as exc:
            raise TensorFormatError(f"{path}: malformed NPY header ({exc})") from exc
        if fortran_order:
            raise TensorFormatError(f"{path}: Fortran-order payloads are not supported")
        if dtype not in _ALLOWED_DTYPES:
            raise TensorFormatError(
                f"{path}: dtype {dtype.str!r} not supported, expected '<f4' or '<f8'"
            )
        payload = fp.read()
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise TensorFormatError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    if not np.isfinite(arr).all():
        raise TensorFormatError(f"{path}: tensor contains non-finite values")
    mat = arr.astype(np.float64)
    if mat.ndim == 0:
        raise TensorFormatError(f"{path}: zero-dimensional tensor has no sample axis")
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    else:
        mat = mat.reshape(mat.shape[0], -1)
    return mat


def write_tensor(path, array):
    """Write a float32/float64 array as an NPY v1.0 file.

    The array's dtype is preserved (forced little-endian); round-tripping
    through read_tensor reproduces the values exactly.
    """
    arr = np.asarray(array)
    if arr.dtype == np.float32:
        arr = arr.astype("<f4", copy=False)
    elif arr.dtype == np.float64:
        arr = arr.astype("<f8", copy=False)
    else:
        raise TensorFormatError(
            f"{os.fspath(path)}: dtype {arr.dtype.str!r} not supported, use float32/float64"
        )
    if not np.isfinite(arr).all():
        raise TensorFormatError(f"{os.fspath(path)}: refusing to write non-finite values")
    with open(path, "wb") as fp:
        npy_format.write_array(fp, np.ascontiguousarray(arr), version=(1, 0))


@dataclass(frozen=True)
class LayerSnapshot:
    """One mini-batch's rasterized activations for one layer.

    ``matrices`` holds C per-filter n x d matrices for a convolutional
    layer and a single matrix for a fully connected one. All matrices
    share n; d is constant across the feature maps of one layer.
    """

    name: str
    kind: str
    matrices: list

    @property
    def n(self):
        return self.matrices[0].shape[0]

    @property
    def channels(self):
        return len(self.matrices)


@dataclass(frozen=True)
class LayerRef:
    name: str
    kind: str  # "conv" or "fc"
    paths: list

    def __post_init__(self):
        if self.kind not in ("conv", "fc"):
            raise ManifestError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if not self.paths:
            raise ManifestError(f"layer {self.name!r}: no tensor refs")
        if self.kind == "fc" and len(self.paths) != 1:
            raise ManifestError(f"layer {self.name!r}: fc layers carry exactly one tensor")


@dataclass(frozen=True)
class BatchEntry:
    input: str
    labels: str
    layers: list
    errors: list = field(default_factory=list)


@dataclass(frozen=True)
class EpochEntry:
    epoch: int
    batches: list


@dataclass(frozen=True)
class RunManifest:
    """Index of a training run's dumped tensors.

    Layer order is network order (input side first); error entries are
    ordered from the output layer backwards. All paths are relative to
    ``base_dir``.
    """

    run_id: str
    batch_size: int
    epochs: list
    base_dir: str = "."

    def resolve(self, rel_path):
        return os.path.join(self.base_dir, rel_path)


def _layer_ref_from_json(obj, what):
    if not isinstance(obj, dict):
        raise ManifestError(f"{what}: layer entry must be an object")
    name = obj.get("name")
    kind = obj.get("kind")
    if name is None or kind is None:
        raise ManifestError(f"{what}: layer entry needs 'name' and 'kind'")
    if kind == "conv":
        paths = obj.get("maps")
        if not isinstance(paths, list) or not paths:
            raise ManifestError(f"{what}: conv layer {name!r} needs a non-empty 'maps' list")
    else:
        tensor = obj.get("tensor")
        if not isinstance(tensor, str):
            raise ManifestError(f"{what}: fc layer {name!r} needs a 'tensor' path")
        paths = [tensor]
    return LayerRef(name=str(name), kind=str(kind), paths=[str(p) for p in paths])


def load_manifest(path):
    """Parse and structurally validate a manifest.json."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fp:
            doc = json.load(fp)
    except OSError as exc:
        raise ManifestError(f"{path}: cannot open manifest ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("run_id", "batch_size", "epochs"):
        if key not in doc:
            raise ManifestError(f"{path}: missing top-level key {key!r}")
    batch_size = doc["batch_size"]
    if not isinstance(batch_size, int) or batch_size <= 0:
        raise ManifestError(f"{path}: batch_size must be a positive integer")
    epochs = []
    for ei, eobj in enumerate(doc["epochs"]):
        where = f"{path}: epochs[{ei}]"
        if "epoch" not in eobj or "batches" not in eobj:
            raise ManifestError(f"{where}: needs 'epoch' and 'batches'")
        batches = []
        for bi, bobj in enumerate(eobj["batches"]):
            bwhere = f"{where}.batches[{bi}]"
            for key in ("input", "labels", "layers"):
                if key not in bobj:
                    raise ManifestError(f"{bwhere}: missing key {key!r}")
            layers = [
                _layer_ref_from_json(lobj, bwhere) for lobj in bobj["layers"]
            ]
            errors = [
                _layer_ref_from_json(lobj, bwhere + ".errors")
                for lobj in bobj.get("errors", [])
            ]
            batches.append(
                BatchEntry(
                    input=str(bobj["input"]),
                    labels=str(bobj["labels"]),
                    layers=layers,
                    errors=errors,
                )
            )
        epochs.append(EpochEntry(epoch=int(eobj["epoch"]), batches=batches))
    return RunManifest(
        run_id=str(doc["run_id"]),
        batch_size=batch_size,
        epochs=epochs,
        base_dir=os.path.dirname(path) or ".",
    )


def _layer_ref_to_json(ref):
    if ref.kind == "conv":
        return {"name": ref.name, "kind": ref.kind, "maps": list(ref.paths)}
    return {"name": ref.name, "kind": ref.kind, "tensor": ref.paths[0]}


def write_manifest(manifest, path):
    """Serialize a RunManifest back to manifest.json (paths stay relative)."""
    doc = {
        "run_id": manifest.run_id,
        "batch_size": manifest.batch_size,
        "epochs": [
            {
                "epoch": ep.epoch,
                "batches": [
                    {
                        "input": b.input,
                        "labels": b.labels,
                        "layers": [_layer_ref_to_json(l) for l in b.layers],
                        **({"errors": [_layer_ref_to_json(l) for l in b.errors]} if b.errors else {}),
                    }
                    for b in ep.batches
                ],
            }
            for ep in manifest.epochs
        ],
    }
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=2)
        fp.write("\n")


def _load_ref(manifest, rel_path, expect_n):
    mat = read_tensor(manifest.resolve(rel_path))
    if mat.shape[0] != expect_n:
        raise ManifestError(
            f"{rel_path}: first dimension {mat.shape[0]} does not match batch size {expect_n}"
        )
    return mat


def _load_layer(manifest, ref, expect_n):
    mats = [_load_ref(manifest, p, expect_n) for p in ref.paths]
    widths = {m.shape[1] for m in mats}
    if len(widths) > 1:
        raise ManifestError(
            f"layer {ref.name!r}: feature maps disagree on rasterized width {sorted(widths)}"
        )
    return LayerSnapshot(name=ref.name, kind=ref.kind, matrices=mats)


def load_batch(manifest, epoch, batch):
    """Load one dumped mini-batch.

    ``epoch`` and ``batch`` are positional indices into the manifest's
    ordered lists. Returns (input, labels, layers, errors) snapshots; every
    matrix's first dimension is checked against the manifest batch size.
    """
    try:
        epoch_entry = manifest.epochs[epoch]
    except IndexError:
        raise ManifestError(f"epoch index {epoch} out of range") from None
    try:
        entry = epoch_entry.batches[batch]
    except IndexError:
        raise ManifestError(
            f"batch index {batch} out of range in epoch entry {epoch}"
        ) from None
    n = manifest.batch_size
    input_snap = LayerSnapshot(
        name="input", kind="fc", matrices=[_load_ref(manifest, entry.input, n)]
    )
    labels_snap = LayerSnapshot(
        name="labels", kind="fc", matrices=[_load_ref(manifest, entry.labels, n)]
    )
    layers = [_load_layer(manifest, ref, n) for ref in entry.layers]
    errors = [_load_layer(manifest, ref, n) for ref in entry.errors]
    return input_snap, labels_snap, layers, errors
