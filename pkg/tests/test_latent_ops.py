import numpy as np
import pytest

from logoforge import latent as L


class TestSampleZ:
    def test_gaussian_moments(self):
        z = L.sample_z(10000, 64, "gaussian", seed=0)
        assert z.shape == (10000, 64)
        assert np.abs(z.mean(axis=0)).max() < 0.05
        var = z.var(axis=0)
        assert var.min() > 0.9 and var.max() < 1.1

    def test_same_seed_identical(self):
        a = L.sample_z(16, 32, "gaussian", seed=7)
        b = L.sample_z(16, 32, "gaussian", seed=7)
        np.testing.assert_array_equal(a, b)

    def test_uniform_range(self):
        z = L.sample_z(1000, 8, "uniform", seed=1)
        assert z.min() >= -1.0 and z.max() <= 1.0

    def test_dim_512_accepted(self):
        z = L.sample_z(2, 512, "gaussian", seed=2)
        assert z.shape == (2, 512)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            L.sample_z(0, 8)
        with pytest.raises(ValueError):
            L.sample_z(1, 8, "cauchy")


class TestInterpolate:
    def test_endpoints_exact(self):
        rng = np.random.default_rng(0)
        z1 = rng.standard_normal(32).astype(np.float32)
        z2 = rng.standard_normal(32).astype(np.float32)
        np.testing.assert_array_equal(L.interpolate(z1, z2, 0.0, matched=True), z1)
        np.testing.assert_array_equal(L.interpolate(z1, z2, 1.0, matched=True), z2)

    def test_matched_midpoint_formula(self):
        rng = np.random.default_rng(1)
        z1 = rng.standard_normal(16).astype(np.float32)
        z2 = rng.standard_normal(16).astype(np.float32)
        mid = L.interpolate(z1, z2, 0.5, matched=True)
        np.testing.assert_allclose(mid, (z1 + z2) / np.sqrt(2), rtol=1e-5)

    def test_matched_midpoint_variance_preserved(self):
        rng = np.random.default_rng(2)
        z1 = rng.standard_normal((10000, 8)).astype(np.float32)
        z2 = rng.standard_normal((10000, 8)).astype(np.float32)
        mids = (z1 + z2) * np.float32(1.0 / np.sqrt(2))
        var = mids.var()
        assert abs(var - 1.0) < 0.02

    def test_unmatched_is_lerp(self):
        z1 = np.zeros(4, dtype=np.float32)
        z2 = np.ones(4, dtype=np.float32)
        np.testing.assert_allclose(L.interpolate(z1, z2, 0.25, matched=False), np.full(4, 0.25))

    def test_uniform_prior_falls_back_with_warning(self):
        z1 = np.zeros(4, dtype=np.float32)
        z2 = np.ones(4, dtype=np.float32)
        with pytest.warns(UserWarning, match="uniform"):
            out = L.interpolate(z1, z2, 0.5, matched=True, prior="uniform")
        np.testing.assert_allclose(out, np.full(4, 0.5))

    def test_path_needs_two_steps(self):
        with pytest.raises(ValueError):
            L.interpolate_path(np.zeros(4), np.ones(4), steps=1)

    def test_path_endpoints(self):
        rng = np.random.default_rng(3)
        z1, z2 = rng.standard_normal(8), rng.standard_normal(8)
        path = L.interpolate_path(z1, z2, steps=5)
        assert path.shape == (5, 8)
        np.testing.assert_allclose(path[0], z1.astype(np.float32))
        np.testing.assert_allclose(path[-1], z2.astype(np.float32))


class TestClassTransfer:
    def test_identity_transfer(self):
        z = np.random.default_rng(4).standard_normal(16).astype(np.float32)
        z2, lab = L.class_transfer(z, 3, 3, k=8)
        assert lab == 3
        np.testing.assert_array_equal(z, z2)

    def test_z_bit_identical(self):
        z = np.random.default_rng(5).standard_normal(16).astype(np.float32)
        z2, lab = L.class_transfer(z, 0, 7, k=8)
        assert lab == 7
        assert z2.tobytes() == z.tobytes()

    def test_label_validation(self):
        with pytest.raises(ValueError):
            L.class_transfer(np.zeros(4), 0, 9, k=8)

    def test_grid_structure(self):
        # 5 latents x 5 labels: z constant per column, label constant per row
        rng = np.random.default_rng(6)
        zs = [rng.standard_normal(8).astype(np.float32) for _ in range(5)]
        grid = [[L.class_transfer(z, 0, lab, k=5) for z in zs] for lab in range(5)]
        for row in range(5):
            assert all(grid[row][col][1] == row for col in range(5))
            for col in range(5):
                assert grid[row][col][0].tobytes() == zs[col].tobytes()


class TestLabelInterpolate:
    def onehot(self, i, k=4):
        v = np.zeros(k, dtype=np.float32)
        v[i] = 1.0
        return v

    def test_endpoints(self):
        a, b = self.onehot(0), self.onehot(2)
        np.testing.assert_array_equal(L.label_interpolate(a, b, 0.0), a)
        np.testing.assert_array_equal(L.label_interpolate(a, b, 1.0), b)

    def test_midpoint_weights(self):
        out = L.label_interpolate(self.onehot(1), self.onehot(3), 0.5)
        np.testing.assert_allclose(out, [0, 0.5, 0, 0.5])

    def test_always_sums_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.dirichlet(np.ones(5)).astype(np.float32)
            b = rng.dirichlet(np.ones(5)).astype(np.float32)
            t = float(rng.uniform())
            out = L.label_interpolate(a, b, t)
            assert out.sum() == pytest.approx(1.0, abs=1e-5)

    def test_negative_weights_rejected(self):
        bad = np.array([1.5, -0.5, 0, 0], dtype=np.float32)
        with pytest.raises(ValueError):
            L.label_interpolate(bad, self.onehot(0), 0.5)


class TestVicinity:
    def test_amount_zero_copies(self):
        z = np.random.default_rng(8).standard_normal(16).astype(np.float32)
        out, labels = L.vicinity_sample(z, 2, count=8, amount=0.0, seed=0)
        assert out.shape == (8, 16)
        for row in out:
            np.testing.assert_array_equal(row, z)
        assert labels == [2] * 8

    def test_distance_scaling_law_exact(self):
        rng = np.random.default_rng(9)
        z = rng.standard_normal(32).astype(np.float32)
        # same seed gives the same draws r, so distances scale exactly by amount
        full, _ = L.vicinity_sample(z, 0, count=6, amount=1.0, seed=4)
        third, _ = L.vicinity_sample(z, 0, count=6, amount=1.0 / 3.0, seed=4)
        for f, t in zip(full, third):
            d_full = np.linalg.norm((f - z).astype(np.float64))
            d_third = np.linalg.norm((t - z).astype(np.float64))
            assert d_third == pytest.approx(d_full / 3.0, rel=1e-5)

    def test_deterministic(self):
        z = np.zeros(8, dtype=np.float32)
        a, _ = L.vicinity_sample(z, 0, count=4, amount=0.5, seed=11)
        b, _ = L.vicinity_sample(z, 0, count=4, amount=0.5, seed=11)
        np.testing.assert_array_equal(a, b)

    def test_cross_cluster_redraws_labels(self):
        z = np.zeros(8, dtype=np.float32)
        _, labels = L.vicinity_sample(z, 0, count=32, amount=0.5, seed=12, k=6, cross_cluster=True)
        assert all(0 <= lab < 6 for lab in labels)
        assert len(set(labels)) > 1

    def test_amount_bounds(self):
        with pytest.raises(ValueError):
            L.vicinity_sample(np.zeros(4), 0, amount=1.5)


class TestDirections:
    def test_equal_groups_zero_offset(self):
        pts = np.random.default_rng(10).standard_normal((5, 8)).astype(np.float32)
        d = L.direction_from_examples(pts, pts, "null")
        np.testing.assert_allclose(d.z_offset, np.zeros(8), atol=1e-7)

    def test_singletons_simple_difference(self):
        a = np.ones((1, 4), dtype=np.float32) * 3
        b = np.ones((1, 4), dtype=np.float32)
        d = L.direction_from_examples(a, b, "diff")
        np.testing.assert_allclose(d.z_offset, np.full(4, 2.0))

    def test_uneven_counts_supported(self):
        rng = np.random.default_rng(11)
        sharp = rng.standard_normal((40, 16)).astype(np.float32)
        blurry = rng.standard_normal((42, 16)).astype(np.float32)
        d = L.direction_from_examples(sharp, blurry, "sharpen")
        assert d.n_positive == 40 and d.n_negative == 42
        np.testing.assert_allclose(d.z_offset, sharp.mean(axis=0) - blurry.mean(axis=0), atol=1e-6)

    def test_translation_covariance(self):
        rng = np.random.default_rng(12)
        pos = rng.standard_normal((7, 8)).astype(np.float32)
        neg = rng.standard_normal((9, 8)).astype(np.float32)
        shift = rng.standard_normal(8).astype(np.float32)
        d1 = L.direction_from_examples(pos, neg, "a")
        d2 = L.direction_from_examples(pos + shift, neg + shift, "a")
        np.testing.assert_allclose(d1.z_offset, d2.z_offset, atol=1e-5)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            L.direction_from_examples(np.zeros((0, 4)), np.ones((1, 4)), "bad")

    def test_needs_some_offset(self):
        with pytest.raises(ValueError):
            L.DirectionVector(name="empty", z_offset=None, label_offset=None)


class TestApplyDirection:
    def direction(self):
        return L.DirectionVector(
            name="d",
            z_offset=np.array([1.0, -2.0, 0.5], dtype=np.float32),
            label_offset=np.array([0.2, -0.2, 0.0], dtype=np.float32),
        )

    def test_amount_zero_identity(self):
        z = np.array([1.0, 2.0, 3.0], dtype=np.float32)
        lab = np.array([0.3, 0.3, 0.4], dtype=np.float32)
        z2, lab2 = L.apply_direction(z, lab, self.direction(), 0.0, "both")
        np.testing.assert_array_equal(z2, z)
        np.testing.assert_allclose(lab2, lab, atol=1e-7)

    def test_latent_round_trip(self):
        z = np.random.default_rng(13).standard_normal(3).astype(np.float32)
        d = self.direction()
        fwd, _ = L.apply_direction(z, None, d, 0.7, "latent")
        back, _ = L.apply_direction(fwd, None, d, -0.7, "latent")
        np.testing.assert_allclose(back, z, atol=1e-6)

    def test_label_result_valid_distribution(self):
        rng = np.random.default_rng(14)
        d = self.direction()
        for _ in range(50):
            lab = rng.dirichlet(np.ones(3)).astype(np.float32)
            amount = float(rng.uniform(-3, 3))
            _, out = L.apply_direction(np.zeros(3, dtype=np.float32), lab, d, amount, "label")
            assert (out >= 0).all()
            assert out.sum() == pytest.approx(1.0, abs=1e-5)

    def test_missing_offset_rejected(self):
        d = L.DirectionVector(name="z_only", z_offset=np.ones(3, dtype=np.float32))
        with pytest.raises(ValueError, match="label"):
            L.apply_direction(np.zeros(3), np.ones(3) / 3, d, 0.5, "label")

    def test_unknown_space(self):
        with pytest.raises(ValueError):
            L.apply_direction(np.zeros(3), None, self.direction(), 0.5, "pixel")
