import numpy as np
import pytest

from infoflow import (
    ManifestError,
    TensorFormatError,
    load_batch,
    load_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)

from conftest import make_run


def test_round_trip_float64(tmp_path):
    arr = np.array([[1.0, 2.5, -3.25], [4.0, 5.0, 6.0]])
    path = tmp_path / "a.npy"
    write_tensor(path, arr)
    out = read_tensor(path)
    assert out.dtype == np.float64
    assert np.array_equal(out, arr)


def test_round_trip_float32_widens_exactly(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(5, 7)).astype(np.float32)
    path = tmp_path / "a.npy"
    write_tensor(path, arr)
    out = read_tensor(path)
    assert out.dtype == np.float64
    # float32 embeds exactly into float64
    assert np.array_equal(out, arr.astype(np.float64))


def test_simple_2x3_example(tmp_path):
    arr = np.array([[1, 2, 3], [4, 5, 6]], dtype=np.float32)
    path = tmp_path / "a.npy"
    write_tensor(path, arr)
    assert np.array_equal(read_tensor(path), [[1, 2, 3], [4, 5, 6]])


def test_4d_tensor_flattens_c_order(tmp_path):
    arr = np.arange(128 * 6 * 24 * 24, dtype=np.float32).reshape(128, 6, 24, 24)
    path = tmp_path / "a.npy"
    write_tensor(path, arr)
    out = read_tensor(path)
    assert out.shape == (128, 3456)
    assert np.array_equal(out[0], arr[0].reshape(-1))


def test_flattening_is_shape_stable(tmp_path):
    rng = np.random.default_rng(1)
    payload = rng.normal(size=(4, 3, 5))
    p1, p2 = tmp_path / "a.npy", tmp_path / "b.npy"
    write_tensor(p1, payload)
    write_tensor(p2, payload.reshape(4, 15))
    assert np.array_equal(read_tensor(p1), read_tensor(p2))


def test_1d_tensor_becomes_column(tmp_path):
    path = tmp_path / "a.npy"
    write_tensor(path, np.array([1.0, 2.0, 3.0]))
    assert read_tensor(path).shape == (3, 1)


def test_nan_rejected(tmp_path):
    path = tmp_path / "a.npy"
    np.save(path, np.array([[1.0, np.nan]]))
    with pytest.raises(TensorFormatError, match="non-finite"):
        read_tensor(path)


def test_inf_rejected_on_write(tmp_path):
    with pytest.raises(TensorFormatError, match="non-finite"):
        write_tensor(tmp_path / "a.npy", np.array([np.inf]))


def test_wrong_dtype_rejected(tmp_path):
    path = tmp_path / "a.npy"
    np.save(path, np.array([[1, 2]], dtype=np.int32))
    with pytest.raises(TensorFormatError, match="dtype"):
        read_tensor(path)
    with pytest.raises(TensorFormatError, match="dtype"):
        write_tensor(tmp_path / "b.npy", np.array([1, 2], dtype=np.int64))


def test_fortran_order_rejected(tmp_path):
    path = tmp_path / "a.npy"
    arr = np.asfortranarray(np.arange(6, dtype=np.float64).reshape(2, 3))
    np.save(path, arr)
    with pytest.raises(TensorFormatError, match="Fortran"):
        read_tensor(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "a.npy"
    path.write_bytes(b"not an npy file at all")
    with pytest.raises(TensorFormatError, match="not an NPY"):
        read_tensor(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "a.npy"
    write_tensor(path, np.ones((4, 4)))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(TensorFormatError, match="payload"):
        read_tensor(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "a.npy"
    write_tensor(path, np.ones((4, 4)))
    path.write_bytes(path.read_bytes() + b"\x00" * 16)
    with pytest.raises(TensorFormatError, match="payload"):
        read_tensor(path)


def test_missing_file(tmp_path):
    with pytest.raises(TensorFormatError, match="cannot open"):
        read_tensor(tmp_path / "nope.npy")


def test_zero_dim_rejected(tmp_path):
    path = tmp_path / "a.npy"
    np.save(path, np.float64(3.5))
    with pytest.raises(TensorFormatError, match="zero-dimensional"):
        read_tensor(path)


class TestManifest:
    def test_load_batch_shapes(self, tmp_path):
        manifest = load_manifest(make_run(tmp_path, conv_channels=(6,), fc_dims=(4,)))
        inp, labels, layers, errors = load_batch(manifest, 0, 0)
        assert inp.n == labels.n == 16
        assert len(layers) == 2
        assert layers[0].kind == "conv" and layers[0].channels == 6
        assert layers[1].kind == "fc" and layers[1].channels == 1
        assert [e.name for e in errors] == ["fc0", "conv0"]

    def test_two_layer_manifest(self, tmp_path):
        manifest = load_manifest(
            make_run(tmp_path, epochs=1, batches=1, conv_channels=(3,), fc_dims=(4,))
        )
        _, _, layers, _ = load_batch(manifest, 0, 0)
        assert len(layers) == 2

    def test_missing_tensor_names_path(self, tmp_path):
        path = make_run(tmp_path, epochs=1, batches=1)
        manifest = load_manifest(path)
        victim = manifest.resolve(manifest.epochs[0].batches[0].input)
        import os

        os.remove(victim)
        with pytest.raises(TensorFormatError, match="input"):
            load_batch(manifest, 0, 0)

    def test_batch_size_mismatch(self, tmp_path):
        path = make_run(tmp_path, epochs=1, batches=1)
        import json

        doc = json.loads(open(path).read())
        doc["batch_size"] = 17
        open(path, "w").write(json.dumps(doc))
        with pytest.raises(ManifestError, match="does not match batch size"):
            load_batch(load_manifest(path), 0, 0)

    def test_index_out_of_range(self, tmp_path):
        manifest = load_manifest(make_run(tmp_path, epochs=1, batches=1))
        with pytest.raises(ManifestError, match="epoch index"):
            load_batch(manifest, 5, 0)
        with pytest.raises(ManifestError, match="batch index"):
            load_batch(manifest, 0, 3)

    def test_structural_validation(self, tmp_path):
        bad = tmp_path / "manifest.json"
        bad.write_text('{"run_id": "x", "epochs": []}')
        with pytest.raises(ManifestError, match="batch_size"):
            load_manifest(bad)
        bad.write_text(
            '{"run_id": "x", "batch_size": 4, "epochs": '
            '[{"epoch": 0, "batches": [{"input": "a", "labels": "b", '
            '"layers": [{"name": "c", "kind": "conv", "maps": []}]}]}]}'
        )
        with pytest.raises(ManifestError, match="maps"):
            load_manifest(bad)

    def test_manifest_round_trip(self, tmp_path):
        manifest = load_manifest(make_run(tmp_path / "run"))
        out = tmp_path / "run" / "copy.json"
        write_manifest(manifest, out)
        again = load_manifest(out)
        assert again.run_id == manifest.run_id
        assert again.batch_size == manifest.batch_size
        assert again.epochs == manifest.epochs
