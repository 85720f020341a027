import numpy as np
import pytest

from logoforge.checkpoint import CheckpointError, load_checkpoint, save_checkpoint, sidecar_path


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "g.conv1.w": rng.standard_normal((4, 3, 3, 3)).astype(np.float32),
        "g.lin.b": rng.standard_normal(7).astype(np.float32),
        "scalar": np.float32(3.5),
    }
    meta = {"latent_dim": 64, "conditioning": "lc"}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, tensors, meta)
    loaded, loaded_meta = load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], np.asarray(tensors[name], dtype=np.float32))
    assert loaded_meta == meta


def test_no_sidecar_when_meta_none(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, {"a": np.zeros(2, dtype=np.float32)})
    assert not sidecar_path(path).exists()
    _, meta = load_checkpoint(path)
    assert meta is None


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_truncated_rejected(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, {"a": np.ones((8, 8), dtype=np.float32)})
    blob = path.read_bytes()
    path.write_bytes(blob[:-13])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)
