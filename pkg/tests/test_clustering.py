import numpy as np
import pytest

from logoforge import clustering as C
from logoforge import data as D
from logoforge.models import ModelConfig


def lloyd_oracle(points, centroids, iters=100):
    """Full-batch Lloyd iterations, independent of the mini-batch route."""
    cents = centroids.copy()
    for _ in range(iters):
        labels = C.assign_nearest(points, cents)
        new = np.stack([points[labels == c].mean(axis=0) if (labels == c).any() else cents[c] for c in range(len(cents))])
        if np.allclose(new, cents):
            break
        cents = new
    return cents, C.assign_nearest(points, cents)


class TestPca:
    def test_axis_aligned_ratios(self):
        # exact diagonal covariance with variances proportional to (4, 1, 0)
        pts = np.array([[2.0, 1.0, 0.0], [2.0, -1.0, 0.0], [-2.0, 1.0, 0.0], [-2.0, -1.0, 0.0]])
        model = C.pca_fit(pts, 2)
        np.testing.assert_allclose(model.explained_variance_ratio, [0.8, 0.2], atol=1e-12)
        np.testing.assert_allclose(np.abs(model.basis[:, 0]), [1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(np.abs(model.basis[:, 1]), [0, 1, 0], atol=1e-12)

    def test_collinear_ratio_one(self):
        t = np.linspace(-1, 1, 9)
        pts = np.stack([3 * t, -2 * t], axis=1)
        model = C.pca_fit(pts, 1)
        assert model.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)

    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 8)) @ rng.standard_normal((8, 8))
        m = 5
        model = C.pca_fit(x, m)

        # oracle: brute-force covariance eigendecomposition
        xc = x - x.mean(axis=0)
        cov = xc.T @ xc / (len(x) - 1)
        w, v = np.linalg.eigh(cov)
        order = np.argsort(w)[::-1]
        v = v[:, order[:m]]

        proj_impl = model.project(x)
        proj_oracle = xc @ v
        for j in range(m):
            sign = np.sign(proj_impl[:, j] @ proj_oracle[:, j])
            np.testing.assert_allclose(proj_impl[:, j], sign * proj_oracle[:, j], atol=1e-5)

    def test_m_out_of_range(self):
        with pytest.raises(C.ClusterError):
            C.pca_fit(np.random.default_rng(1).standard_normal((10, 4)), 5)

    def test_degenerate_data_rejected(self):
        with pytest.raises(C.ClusterError, match="degenerate"):
            C.pca_fit(np.ones((20, 4)), 2)

    def test_projection_is_isometry_onto_range(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((40, 6))
        model = C.pca_fit(x, 3)
        proj = model.project(x)
        # distances between projected points equal distances between their
        # reconstructions in the ambient space
        recon = proj @ model.basis.T
        for i in range(0, 40, 7):
            for j in range(0, 40, 7):
                d1 = np.linalg.norm(proj[i] - proj[j])
                d2 = np.linalg.norm(recon[i] - recon[j])
                assert abs(d1 - d2) < 1e-5

    def test_order_invariant_fit(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((30, 5))
        perm = rng.permutation(30)
        a = C.pca_fit(x, 3)
        b = C.pca_fit(x[perm], 3)
        np.testing.assert_allclose(a.basis, b.basis, atol=1e-9)


class TestMinibatchKmeans:
    def blobs(self, seed=0, n=200, d=4, sep=10.0):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n // 2, d)) + sep
        b = rng.standard_normal((n - n // 2, d)) - sep
        pts = np.concatenate([a, b])
        truth = np.concatenate([np.zeros(n // 2, dtype=int), np.ones(n - n // 2, dtype=int)])
        perm = rng.permutation(n)
        return pts[perm], truth[perm]

    def test_k1_full_batch_limit_is_mean(self):
        rng = np.random.default_rng(4)
        pts = rng.standard_normal((64, 3))
        cents, labels, _ = C.minibatch_kmeans(pts, 1, batch=64, iters=1, seed=0)
        np.testing.assert_allclose(cents[0], pts.mean(axis=0), atol=1e-8)
        assert (labels == 0).all()

    def test_two_blobs_purity_and_lloyd_agreement(self):
        pts, truth = self.blobs()
        cents, labels, _ = C.minibatch_kmeans(pts, 2, batch=64, iters=60, seed=1)
        # purity against ground truth
        purity = max(
            (labels == truth).mean(),
            (labels == 1 - truth).mean(),
        )
        assert purity == 1.0
        # oracle: full-batch Lloyd from the same separated data
        _, lloyd_labels = lloyd_oracle(pts, pts[[0, -1]].copy())
        agreement = max((labels == lloyd_labels).mean(), (labels == 1 - lloyd_labels).mean())
        assert agreement == 1.0

    def test_identical_points_zero_inertia(self):
        pts = np.ones((30, 3)) * 2.5
        cents, labels, _ = C.minibatch_kmeans(pts, 1, batch=8, iters=10, seed=2)
        assert C.inertia(pts, cents, labels) == pytest.approx(0.0, abs=1e-12)

    def test_inertia_non_increasing_per_epoch(self):
        pts, _ = self.blobs(seed=5, n=240)
        _, _, trace = C.minibatch_kmeans(pts, 2, batch=40, iters=60, seed=3)
        for a, b in zip(trace, trace[1:]):
            assert b <= a + 1e-6

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(C.ClusterError):
            C.minibatch_kmeans(np.zeros((3, 2)), 5)

    def test_empty_cluster_repair(self):
        pts = np.concatenate([np.zeros((10, 2)), np.ones((10, 2)) * 4])
        centroids = np.array([[0.0, 0.0], [4.0, 4.0], [100.0, 100.0]])
        labels = C.assign_nearest(pts, centroids)
        assert not (labels == 2).any()
        cents, labels = C._repair_empty_clusters(pts, centroids.copy(), labels)
        hist = np.bincount(labels, minlength=3)
        assert (hist > 0).all()

    def test_labels_in_range_no_empty_clusters(self):
        rng = np.random.default_rng(6)
        pts = rng.standard_normal((120, 3))
        model, labels = C.fit_cluster_model(pts, k=6, m=3, seed=0, iters=80)
        assert labels.min() >= 0 and labels.max() < 6
        assert (np.bincount(labels, minlength=6) > 0).all()


class TestFeatureAndLabelFiles:
    def test_feature_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((12, 2048)).astype(np.float32)
        p = tmp_path / "f.feat"
        C.save_features(p, x)
        np.testing.assert_array_equal(C.load_features(p), x)

    def test_label_round_trip(self, tmp_path):
        labels = np.array([0, 3, 2, 1, 3], dtype=np.uint16)
        p = tmp_path / "l.lbl"
        C.save_labels(p, labels, 4)
        out, k = C.load_labels(p)
        np.testing.assert_array_equal(out, labels)
        assert k == 4

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.feat"
        p.write_bytes(b"BADMAGIC" + b"\x00" * 8)
        with pytest.raises(C.ClusterError, match="magic"):
            C.load_features(p)


class TestRcClustering:
    def test_onehot_features_perfect_purity(self, tmp_path):
        rng = np.random.default_rng(8)
        modes = 4
        truth = rng.integers(0, modes, 80)
        feats = np.zeros((80, modes), dtype=np.float32)
        feats[np.arange(80), truth] = 1.0
        feats += rng.normal(0, 0.01, feats.shape).astype(np.float32)
        p = tmp_path / "f.feat"
        C.save_features(p, feats)
        labels, model = C.rc_cluster_labels(p, k=modes, m=3, seed=0)
        # purity: every cluster maps to exactly one true mode
        for c in range(modes):
            members = truth[labels == c]
            assert len(members) > 0
            assert (members == members[0]).all()

    def test_2048_dim_accepted(self, tmp_path):
        rng = np.random.default_rng(9)
        feats = rng.standard_normal((40, 2048)).astype(np.float32)
        p = tmp_path / "f.feat"
        C.save_features(p, feats)
        labels, model = C.rc_cluster_labels(p, k=3, m=16, seed=0)
        assert len(labels) == 40

    def test_count_mismatch_rejected(self, tmp_path):
        p = tmp_path / "f.feat"
        C.save_features(p, np.zeros((10, 4), dtype=np.float32) + np.arange(10)[:, None])
        with pytest.raises(C.ClusterError, match="does not match"):
            C.rc_cluster_labels(p, k=2, m=2, expected_count=12)

    def test_permutation_equivariance(self, tmp_path):
        rng = np.random.default_rng(10)
        feats = np.concatenate([rng.normal(i * 8, 0.3, (20, 6)) for i in range(3)]).astype(np.float32)
        perm = rng.permutation(len(feats))
        p1, p2 = tmp_path / "a.feat", tmp_path / "b.feat"
        C.save_features(p1, feats)
        C.save_features(p2, feats[perm])
        la, _ = C.rc_cluster_labels(p1, k=3, m=4, seed=0)
        lb, _ = C.rc_cluster_labels(p2, k=3, m=4, seed=0)
        np.testing.assert_array_equal(la[perm], lb)

    def test_label_file_emitted(self, tmp_path):
        rng = np.random.default_rng(11)
        feats = rng.standard_normal((30, 8)).astype(np.float32)
        p = tmp_path / "f.feat"
        out = tmp_path / "labels.lbl"
        C.save_features(p, feats)
        labels, _ = C.rc_cluster_labels(p, k=3, m=4, seed=1, labels_out=out)
        loaded, k = C.load_labels(out)
        np.testing.assert_array_equal(loaded, labels)
        assert k == 3


@pytest.fixture(scope="module")
def tiny_ae():
    ds, labels = D.synth_logo_corpus(192, resolution=16, modes=4, seed=11)
    cfg = ModelConfig(arch="dcgan", resolution=16, latent_dim=16, widths=(16, 32))
    result = C.ae_train(ds, cfg, epochs=60, batch=32, lr=2e-3, seed=0)
    return ds, labels, result


class TestAutoencoder:
    def test_epoch_losses_non_increasing(self, tiny_ae):
        # stochastic per-epoch averages wiggle; the convergence contract is
        # checked on non-overlapping 5-epoch windows
        _, _, result = tiny_ae
        ls = np.array(result.epoch_losses)
        win = ls[: len(ls) // 5 * 5].reshape(-1, 5).mean(axis=1)
        for a, b in zip(win, win[1:]):
            assert b <= a + 1e-4

    def test_single_repeated_image_memorized(self):
        img, _ = D.synth_logo_corpus(1, resolution=16, modes=2, seed=3)
        ds = D.PackedDataset(np.repeat(img.pixels, 32, axis=0))
        cfg = ModelConfig(arch="dcgan", resolution=16, latent_dim=8, widths=(8, 16))
        result = C.ae_train(ds, cfg, epochs=500, batch=32, lr=5e-3, seed=1)
        gray = C.to_grayscale(ds.to_float())
        z = C.encode_images(result.encoder, result.config, ds.to_float())
        from logoforge.models import generator_forward
        recon = generator_forward(result.decoder, result.config, z)
        err = float(np.mean((recon.data - gray) ** 2))
        assert err < 1e-3

    def test_encoder_mirrors_discriminator_shapes(self):
        from logoforge.models import init_discriminator
        cfg = ModelConfig(arch="dcgan", resolution=16, latent_dim=16, widths=(16, 32), channels=1)
        encoder = init_discriminator(cfg, np.random.default_rng(0), out_dim=16)
        critic = init_discriminator(cfg, np.random.default_rng(0), out_dim=1)
        for name in critic:
            if name.startswith("lin."):
                continue
            assert encoder[name].shape == critic[name].shape
        assert encoder["lin.w"].shape == (critic["lin.w"].shape[0], 16)

    def test_decoder_is_the_generator_architecture(self, tiny_ae):
        from logoforge.models import init_generator
        _, _, result = tiny_ae
        reference = init_generator(result.config, np.random.default_rng(0))
        assert set(result.decoder) == set(reference)
        for name in reference:
            assert result.decoder[name].shape == reference[name].shape

    def test_mode_latents_linearly_separable(self, tiny_ae):
        ds, labels, result = tiny_ae
        z = C.encode_images(result.encoder, result.config, ds.to_float())
        cents = np.stack([z[labels == m].mean(axis=0) for m in range(4)])
        pred = C.assign_nearest(z.astype(np.float64), cents.astype(np.float64))
        assert (pred == labels).mean() >= 0.95

    def test_ae_cluster_labels_deterministic(self):
        ds, _ = D.synth_logo_corpus(96, resolution=16, modes=4, seed=13)
        cfg = ModelConfig(arch="dcgan", resolution=16, latent_dim=8, widths=(8, 16))
        la, ma, _ = C.ae_cluster_labels(ds, k=4, m=6, seed=5, ae_epochs=2, config=cfg, kmeans_iters=40)
        lb, mb, _ = C.ae_cluster_labels(ds, k=4, m=6, seed=5, ae_epochs=2, config=cfg, kmeans_iters=40)
        np.testing.assert_array_equal(la, lb)
        np.testing.assert_allclose(ma.centroids, mb.centroids)

    def test_ae_cluster_purity_on_modes(self, tiny_ae):
        ds, labels, result = tiny_ae
        lab, model, _ = C.ae_cluster_labels(ds, k=4, m=8, seed=2, ae=result, kmeans_iters=120)
        # purity: dominant true mode per cluster
        total = 0
        for c in range(4):
            members = labels[lab == c]
            if len(members):
                total += np.bincount(members, minlength=4).max()
        assert total / len(labels) >= 0.90


class TestClusterModelPersistence:
    def test_tensor_round_trip(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((60, 10))
        model, labels = C.fit_cluster_model(x, k=3, m=4, seed=0, iters=40)
        tensors = model.to_tensors()
        back = C.ClusterModel.from_tensors(tensors)
        # float32 storage round trip: assignments must survive
        np.testing.assert_array_equal(back.assign(x), model.assign(x))
