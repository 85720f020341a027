import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from logoforge import latent as L
from logoforge.models import ModelConfig, init_generator, init_discriminator
from logoforge.service import create_app
from logoforge.snapshot import ModelSnapshot


@pytest.fixture(scope="module")
def snapshot(tmp_path_factory):
    cfg = ModelConfig(arch="dcgan", resolution=16, latent_dim=16, k=4, conditioning="lc", widths=(12, 24))
    rng = np.random.default_rng(0)
    snap = ModelSnapshot(
        config=cfg,
        g_params=init_generator(cfg, rng),
        d_params=init_discriminator(cfg, rng),
        directions={
            "sharpen": L.DirectionVector(
                name="sharpen",
                z_offset=np.linspace(-1, 1, 16).astype(np.float32),
                label_offset=np.array([0.1, -0.1, 0.0, 0.0], dtype=np.float32),
                n_positive=40,
                n_negative=42,
            ),
            "zonly": L.DirectionVector(name="zonly", z_offset=np.ones(16, dtype=np.float32) * 0.1),
        },
    )
    # exercise the checkpoint container round trip on the way in
    path = tmp_path_factory.mktemp("svc") / "model.ckpt"
    snap.save(path)
    return ModelSnapshot.load(path)


@pytest.fixture(scope="module")
def client(snapshot):
    return TestClient(create_app(snapshot))


def decode_png(b64: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))))


class TestInfo:
    def test_config_echo(self, client):
        r = client.get("/info")
        assert r.status_code == 200
        assert r.json() == {"latent_dim": 16, "k": 4, "resolution": 16, "conditioning": "lc"}


class TestGenerate:
    def test_fixed_seed_identical_payloads(self, client):
        body = {"count": 3, "seed": 42}
        a = client.post("/generate", json=body)
        b = client.post("/generate", json=body)
        assert a.status_code == b.status_code == 200
        assert a.content == b.content

    def test_cluster_conditions_all_items(self, client):
        r = client.post("/generate", json={"count": 8, "cluster": 3, "seed": 1})
        items = r.json()["items"]
        assert len(items) == 8
        assert all(item["label"] == 3 for item in items)

    def test_omitted_cluster_draws_uniformly(self, client):
        r = client.post("/generate", json={"count": 64, "seed": 2})
        labels = [item["label"] for item in r.json()["items"]]
        assert set(labels) == {0, 1, 2, 3}

    def test_images_decode_to_rgb_at_resolution(self, client):
        r = client.post("/generate", json={"count": 1, "seed": 3})
        img = decode_png(r.json()["items"][0]["image"])
        assert img.shape == (16, 16, 3)

    def test_payload_reproduces_image(self, client):
        r = client.post("/generate", json={"count": 1, "seed": 4})
        item = r.json()["items"][0]
        rerender = client.post("/transfer", json={"z": item["z"], "label": item["label"]})
        assert rerender.status_code == 200
        assert rerender.json()["items"][0]["image"] == item["image"]

    def test_cluster_out_of_range(self, client):
        r = client.post("/generate", json={"count": 1, "cluster": 9})
        assert r.status_code == 400
        assert "error" in r.json()

    def test_server_generated_seed_returned(self, client):
        r = client.post("/generate", json={"count": 1})
        assert isinstance(r.json()["seed"], int)


class TestValidationResilience:
    def test_malformed_z_structured_error_service_stays_up(self, client):
        r = client.post("/vicinity", json={"z": [0.0] * 7, "label": 0})
        assert r.status_code == 400
        assert "latent_dim" in r.json()["error"]
        assert client.get("/info").status_code == 200

    def test_unknown_field_rejected(self, client):
        r = client.post("/generate", json={"count": 1, "bogus": True})
        assert r.status_code == 422
        assert "error" in r.json()

    def test_non_finite_z_rejected(self, client):
        # raw body so the NaN literal reaches the server instead of the
        # client-side JSON encoder
        body = '{"z": [' + ", ".join(["NaN"] * 16) + '], "label": 0}'
        r = client.post("/transfer", content=body, headers={"content-type": "application/json"})
        assert r.status_code in (400, 422)
        assert "error" in r.json()

    def test_unknown_direction(self, client):
        r = client.post("/direction/apply", json={"z": [0.0] * 16, "direction": "nope", "label": 0})
        assert r.status_code == 400
        assert "unknown direction" in r.json()["error"]


class TestVicinity:
    def test_defaults_eight_and_third(self, client):
        z = [0.1] * 16
        r = client.post("/vicinity", json={"z": z, "label": 1, "seed": 5})
        body = r.json()
        assert len(body["items"]) == 8
        # distance law: d = amount * ||r - z||; redo with amount=1 on same seed
        full = client.post("/vicinity", json={"z": z, "label": 1, "seed": 5, "amount": 1.0}).json()
        za = np.asarray(z)
        for item_third, item_full in zip(body["items"], full["items"]):
            d3 = np.linalg.norm(np.asarray(item_third["z"]) - za)
            d1 = np.linalg.norm(np.asarray(item_full["z"]) - za)
            assert d3 == pytest.approx(d1 / 3.0, rel=1e-4)

    def test_amount_zero_identical_images(self, client):
        z = list(np.linspace(-1, 1, 16).astype(float))
        r = client.post("/vicinity", json={"z": z, "label": 2, "amount": 0.0, "seed": 6})
        images = {item["image"] for item in r.json()["items"]}
        assert len(images) == 1

    def test_cross_cluster_via_op_field(self, client):
        z = [0.0] * 16
        r = client.post("/vicinity", json={"z": z, "label": 0, "op": "vicinity_cross", "seed": 7, "count": 32})
        labels = {item["label"] for item in r.json()["items"]}
        assert len(labels) > 1


class TestInterpolate:
    def test_steps_path_endpoints_exact(self, client):
        rng = np.random.default_rng(8)
        z1 = [float(v) for v in rng.standard_normal(16)]
        z2 = [float(v) for v in rng.standard_normal(16)]
        r = client.post("/interpolate", json={"z": z1, "z2": z2, "steps": 5, "label": 1})
        items = r.json()["items"]
        assert len(items) == 5
        np.testing.assert_allclose(items[0]["z"], np.asarray(z1, dtype=np.float32), rtol=1e-6)
        np.testing.assert_allclose(items[-1]["z"], np.asarray(z2, dtype=np.float32), rtol=1e-6)

    def test_steps_one_rejected(self, client):
        r = client.post("/interpolate", json={"z": [0.0] * 16, "z2": [1.0] * 16, "steps": 1, "label": 0})
        assert r.status_code == 422

    def test_amount_mode_single_item(self, client):
        r = client.post("/interpolate", json={"z": [0.0] * 16, "z2": [1.0] * 16, "amount": 0.5, "label": 0})
        assert len(r.json()["items"]) == 1

    def test_steps_and_amount_exclusive(self, client):
        r = client.post("/interpolate", json={"z": [0.0] * 16, "z2": [1.0] * 16, "steps": 3, "amount": 0.5, "label": 0})
        assert r.status_code == 400

    def test_label_blend_toward_cluster(self, client):
        r = client.post("/interpolate", json={"z": [0.0] * 16, "z2": [1.0] * 16, "steps": 3, "label": 0, "cluster": 2})
        items = r.json()["items"]
        assert items[0]["label"] == 0
        assert items[-1]["label"] == 2
        mid = items[1]["soft_label"]
        assert mid is not None
        assert mid[0] == pytest.approx(0.5, abs=1e-5)
        assert mid[2] == pytest.approx(0.5, abs=1e-5)


class TestTransfer:
    def test_same_label_identical_rerender(self, client):
        gen = client.post("/generate", json={"count": 1, "cluster": 2, "seed": 9}).json()["items"][0]
        a = client.post("/transfer", json={"z": gen["z"], "label": 2, "cluster": 2})
        assert a.json()["items"][0]["image"] == gen["image"]

    def test_z_unchanged_through_transfer(self, client):
        z = [float(v) for v in np.random.default_rng(10).standard_normal(16)]
        r = client.post("/transfer", json={"z": z, "label": 0, "cluster": 3})
        item = r.json()["items"][0]
        np.testing.assert_array_equal(
            np.asarray(item["z"], dtype=np.float32), np.asarray(z, dtype=np.float32)
        )
        assert item["label"] == 3


class TestDirections:
    def test_list_from_checkpoint(self, client):
        r = client.get("/direction/list")
        body = r.json()
        names = [d["name"] for d in body["directions"]]
        assert names == ["sharpen", "zonly"]
        sharpen = body["directions"][0]
        assert sharpen["has_z"] and sharpen["has_label"]
        assert sharpen["n_positive"] == 40 and sharpen["n_negative"] == 42

    def test_apply_and_revert_round_trips_z(self, client):
        z = [float(v) for v in np.random.default_rng(11).standard_normal(16)]
        fwd = client.post("/direction/apply", json={"z": z, "direction": "sharpen", "amount": 0.8, "label": 1})
        z_fwd = fwd.json()["items"][0]["z"]
        back = client.post("/direction/apply", json={"z": z_fwd, "direction": "sharpen", "amount": -0.8, "label": 1})
        z_back = np.asarray(back.json()["items"][0]["z"], dtype=np.float32)
        np.testing.assert_allclose(z_back, np.asarray(z, dtype=np.float32), atol=1e-6)

    def test_label_space_needs_label_offset(self, client):
        r = client.post("/direction/apply", json={"z": [0.0] * 16, "direction": "zonly", "space": "label", "label": 0})
        assert r.status_code == 400


class TestStatelessness:
    def test_replaying_request_stream_replays_responses(self, client):
        stream = [
            ("/generate", {"count": 2, "seed": 1}),
            ("/vicinity", {"z": [0.2] * 16, "label": 1, "seed": 2}),
            ("/interpolate", {"z": [0.0] * 16, "z2": [0.5] * 16, "steps": 3, "label": 0}),
            ("/direction/apply", {"z": [0.1] * 16, "direction": "sharpen", "label": 2, "seed": 3}),
        ]
        first = [client.post(ep, json=body).content for ep, body in stream]
        second = [client.post(ep, json=body).content for ep, body in stream]
        assert first == second

    def test_snapshot_not_mutated(self, snapshot, client):
        before = {k: v.data.copy() for k, v in snapshot.g_params.items()}
        client.post("/generate", json={"count": 4, "seed": 5})
        client.post("/vicinity", json={"z": [0.3] * 16, "label": 0, "seed": 6})
        for k, v in snapshot.g_params.items():
            assert np.array_equal(before[k], v.data)

    def test_debug_flag_returns_raw_floats(self, client):
        r = client.post("/generate?debug=true", json={"count": 1, "seed": 7})
        raw = r.json()["items"][0]["raw"]
        arr = np.asarray(raw, dtype=np.float32)
        assert arr.shape == (3, 16, 16)
        assert np.abs(arr).max() <= 1.0


class TestEnvOverride:
    def test_env_var_overrides_cli_path(self, monkeypatch, tmp_path, snapshot):
        from logoforge.service import CHECKPOINT_ENV, resolve_checkpoint_path

        env_path = tmp_path / "env.ckpt"
        snapshot.save(env_path)
        monkeypatch.setenv(CHECKPOINT_ENV, str(env_path))
        assert resolve_checkpoint_path("/some/cli/path.ckpt") == str(env_path)
        monkeypatch.delenv(CHECKPOINT_ENV)
        assert resolve_checkpoint_path("/some/cli/path.ckpt") == "/some/cli/path.ckpt"
        with pytest.raises(ValueError, match="no checkpoint"):
            resolve_checkpoint_path(None)
