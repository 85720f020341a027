"""Synthetic labels via PCA + mini-batch k-means over autoencoder latents or
externally supplied feature vectors.

Feature file layout: magic "LGFFEAT1", u32 N, u32 d, raw little-endian f32.
Label file layout:   magic "LGFLBL1", u32 N, u16 k, u16 labels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import GradTape, Tensor, backward, init_adam, adam_step, lr_linear_decay
from .autodiff import tensor as T
from .data import PackedDataset
from .models import ModelConfig, generator_forward, discriminator_forward, init_discriminator, init_generator, trainable

FEAT_MAGIC = b"LGFFEAT1"
LABEL_MAGIC = b"LGFLBL1"

# Rec. 601 luma weights for grayscale conversion
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


class ClusterError(ValueError):
    pass


@dataclass
class FeatureSet:
    """N feature vectors of width d, from the autoencoder or an external file."""

    vectors: np.ndarray
    source: str = "external"  # ae | external

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ClusterError("feature vectors must form an (N, d) matrix")
        if not np.all(np.isfinite(self.vectors)):
            raise ClusterError("feature vectors contain non-finite values")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    basis: np.ndarray  # (d, m), orthonormal columns
    explained_variance_ratio: np.ndarray  # (m,), non-increasing

    def project(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.basis


@dataclass
class ClusterModel:
    pca: PcaModel
    centroids: np.ndarray  # (k, m)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def assign(self, features: np.ndarray) -> np.ndarray:
        """Nearest-centroid labels for raw (unprojected) feature vectors."""
        proj = self.pca.project(features)
        return assign_nearest(proj, self.centroids)

    def to_tensors(self, prefix: str = "cluster") -> dict[str, np.ndarray]:
        return {
            f"{prefix}.pca_mean": self.pca.mean.astype(np.float32),
            f"{prefix}.pca_basis": self.pca.basis.astype(np.float32),
            f"{prefix}.pca_evr": self.pca.explained_variance_ratio.astype(np.float32),
            f"{prefix}.centroids": self.centroids.astype(np.float32),
        }

    @classmethod
    def from_tensors(cls, tensors: dict, prefix: str = "cluster") -> "ClusterModel":
        pca = PcaModel(
            mean=np.asarray(tensors[f"{prefix}.pca_mean"], dtype=np.float64),
            basis=np.asarray(tensors[f"{prefix}.pca_basis"], dtype=np.float64),
            explained_variance_ratio=np.asarray(tensors[f"{prefix}.pca_evr"], dtype=np.float64),
        )
        return cls(pca=pca, centroids=np.asarray(tensors[f"{prefix}.centroids"], dtype=np.float64))


def assign_nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


def inertia(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray | None = None) -> float:
    if labels is None:
        labels = assign_nearest(points, centroids)
    return float(((points - centroids[labels]) ** 2).sum())


# ---------------------------------------------------------------------------
# PCA


def pca_fit(vectors: np.ndarray, m: int) -> PcaModel:
    """Top-m principal directions via SVD of the centered data."""
    x = np.asarray(vectors, dtype=np.float64)
    n, d = x.shape
    if not 1 <= m <= min(n, d):
        raise ClusterError(f"m={m} outside [1, {min(n, d)}]")
    mean = x.mean(axis=0)
    xc = x - mean
    total_var = float((xc**2).sum()) / (n - 1) if n > 1 else 0.0
    if total_var <= 1e-12:
        raise ClusterError("degenerate data: all feature vectors identical")
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    var = (s**2) / (n - 1)
    basis = vt[:m].T.copy()
    # canonical sign per component: largest-magnitude coefficient positive,
    # so the fit does not depend on sample order
    for j in range(basis.shape[1]):
        i = int(np.abs(basis[:, j]).argmax())
        if basis[i, j] < 0:
            basis[:, j] = -basis[:, j]
    return PcaModel(mean=mean, basis=basis, explained_variance_ratio=var[:m] / total_var)


# ---------------------------------------------------------------------------
# mini-batch k-means


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=points.dtype)
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i:] = points[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centroids[i] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _repair_empty_clusters(points, centroids, labels):
    """Re-seed each empty centroid at the point farthest from its own centroid."""
    for c in range(len(centroids)):
        if not (labels == c).any():
            dist = ((points - centroids[labels]) ** 2).sum(axis=1)
            far = int(dist.argmax())
            centroids[c] = points[far]
            labels = assign_nearest(points, centroids)
            if not (labels == c).any():
                # exact-tie degenerate case: claim the reseeded point outright
                labels[far] = c
    return centroids, labels


def minibatch_kmeans(
    vectors: np.ndarray,
    k: int,
    batch: int = 256,
    iters: int = 200,
    seed: int = 0,
    n_init: int = 8,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Standard mini-batch k-means with per-centroid counts as learning rates.

    Runs `n_init` restarts with derived seeds and keeps the lowest-inertia
    run; k-means++ alone gets stuck in poor local minima often enough that
    single-shot fits are not dependable.

    Returns (centroids, labels, per-epoch inertia trace of the winning run).
    """
    best = None
    for r in range(max(1, n_init)):
        result = _minibatch_kmeans_single(vectors, k, batch, iters, seed=(seed, r))
        if best is None or result[3] < best[3]:
            best = result
    return best[0], best[1], best[2]


def _minibatch_kmeans_single(vectors, k, batch, iters, seed):
    points = np.asarray(vectors, dtype=np.float64)
    n = len(points)
    if k < 1 or n < k:
        raise ClusterError(f"need at least k={k} points, have {n}")
    if batch < 1:
        raise ClusterError("batch must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    counts = np.zeros(k, dtype=np.int64)
    per_epoch = max(1, int(np.ceil(n / batch)))
    best = centroids.copy()
    best_inertia = np.inf
    epoch_inertia: list[float] = []
    for it in range(iters):
        # full-batch limit uses one exact pass so k=1 lands on the exact mean
        idx = rng.permutation(n) if batch >= n else rng.integers(0, n, size=batch)
        pts = points[idx]
        lab = assign_nearest(pts, centroids)
        for c in np.unique(lab):
            members = pts[lab == c]
            for p in members:
                counts[c] += 1
                eta = 1.0 / counts[c]
                centroids[c] = (1.0 - eta) * centroids[c] + eta * p
        if (it + 1) % per_epoch == 0 or it == iters - 1:
            cur = inertia(points, centroids)
            if cur < best_inertia:
                best_inertia = cur
                best = centroids.copy()
            epoch_inertia.append(best_inertia)
    labels = assign_nearest(points, best)
    best, labels = _repair_empty_clusters(points, best, labels)
    return best, labels, epoch_inertia, best_inertia


def fit_cluster_model(vectors, k: int, m: int, seed: int = 0, batch: int = 256, iters: int = 200) -> tuple[ClusterModel, np.ndarray]:
    """PCA to m dims then mini-batch k-means; returns (model, labels).

    The k-means fit runs over a lexicographically sorted view of the projected
    vectors, so permuting the input order permutes the labels and nothing else.
    """
    features = vectors if isinstance(vectors, FeatureSet) else FeatureSet(vectors)
    if features.count < k:
        raise ClusterError(f"need at least k={k} feature vectors, have {features.count}")
    x = features.vectors
    pca = pca_fit(x, min(m, min(x.shape)))
    proj = pca.project(x)
    order = np.lexsort(proj.T)
    centroids, _, _ = minibatch_kmeans(proj[order], k, batch=batch, iters=iters, seed=seed)
    labels = assign_nearest(proj, centroids)
    centroids, labels = _repair_empty_clusters(proj, centroids, labels)
    return ClusterModel(pca=pca, centroids=centroids), labels


# ---------------------------------------------------------------------------
# autoencoder route


def to_grayscale(images: np.ndarray) -> np.ndarray:
    """(N, 3, H, W) [-1,1] -> (N, 1, H, W) via Rec. 601 luma."""
    x = np.asarray(images, dtype=np.float32)
    if x.shape[1] == 1:
        return x
    return np.einsum("nchw,c->nhw", x, LUMA)[:, None, :, :]


@dataclass
class AutoencoderResult:
    encoder: dict[str, Tensor]
    decoder: dict[str, Tensor]
    config: ModelConfig
    epoch_losses: list[float]


def ae_train(
    dataset: PackedDataset,
    config: ModelConfig,
    epochs: int = 8,
    batch: int = 64,
    lr: float = 2e-4,
    seed: int = 0,
    lr_decay: bool = True,
) -> AutoencoderResult:
    """Joint encoder/decoder training with mean squared reconstruction loss.

    The decoder is the GAN generator; the encoder is the GAN discriminator
    with latent_dim outputs. Both run on grayscale images. The learning rate
    ramps linearly to zero so epoch-average losses settle monotonically.
    """
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(
        arch=config.arch,
        resolution=config.resolution,
        latent_dim=config.latent_dim,
        k=1,
        conditioning="none",
        widths=config.widths,
        channels=1,
    )
    encoder = init_discriminator(cfg, rng, out_dim=cfg.latent_dim)
    decoder = init_generator(cfg, rng)
    enc_train, dec_train = trainable(encoder), trainable(decoder)
    # the two dicts reuse layer names; merge under distinct prefixes
    merged = {**{f"e.{k}": v for k, v in enc_train.items()}, **{f"d.{k}": v for k, v in dec_train.items()}}
    opt = init_adam(merged, beta1=0.5, beta2=0.999)

    gray = to_grayscale(dataset.to_float())
    n = len(gray)
    steps_per_epoch = max(1, n // batch)
    total_steps = epochs * steps_per_epoch
    epoch_losses = []
    step = 0
    for _ in range(epochs):
        losses = []
        for _ in range(steps_per_epoch):
            idx = rng.integers(0, n, size=batch)
            x = Tensor(gray[idx])
            with GradTape() as tape:
                z = discriminator_forward(encoder, cfg, x, train=True, update_stats=True)
                recon = generator_forward(decoder, cfg, z, train=True, update_stats=True)
                diff = recon - x
                loss = T.mean(T.mul(diff, diff))
                grads = backward(loss, tape, list(merged.values()))
            if not np.isfinite(loss.data):
                raise FloatingPointError("autoencoder training diverged (non-finite loss)")
            rate = lr_linear_decay(lr, step, total_steps) if lr_decay else lr
            adam_step(merged, dict(zip(merged.keys(), grads)), opt, rate)
            losses.append(float(loss.data))
            step += 1
        epoch_losses.append(float(np.mean(losses)))
    return AutoencoderResult(encoder=encoder, decoder=decoder, config=cfg, epoch_losses=epoch_losses)


def encode_images(encoder: dict[str, Tensor], cfg: ModelConfig, images: np.ndarray, batch: int = 256) -> np.ndarray:
    """Grayscale-convert and encode to latent vectors (no grad)."""
    gray = to_grayscale(images)
    outs = []
    for start in range(0, len(gray), batch):
        z = discriminator_forward(encoder, cfg, Tensor(gray[start : start + batch]), train=False)
        outs.append(z.data)
    return np.concatenate(outs, axis=0)


def ae_cluster_labels(
    dataset: PackedDataset,
    k: int,
    m: int = 64,
    seed: int = 0,
    ae: AutoencoderResult | None = None,
    ae_epochs: int = 8,
    config: ModelConfig | None = None,
    kmeans_iters: int = 200,
) -> tuple[np.ndarray, ClusterModel, AutoencoderResult]:
    """Full AE route: grayscale -> encode -> PCA -> mini-batch k-means -> assign."""
    if ae is None:
        if config is None:
            config = ModelConfig(arch="dcgan", resolution=dataset.width, latent_dim=32, widths=(32, 64) if dataset.width == 16 else ())
        ae = ae_train(dataset, config, epochs=ae_epochs, seed=seed)
    latents = encode_images(ae.encoder, ae.config, dataset.to_float())
    model, labels = fit_cluster_model(FeatureSet(latents, source="ae"), k, m, seed=seed, iters=kmeans_iters)
    return labels.astype(np.uint16), model, ae


# ---------------------------------------------------------------------------
# external-feature (RC) route


def save_features(path, vectors: np.ndarray) -> None:
    x = np.ascontiguousarray(np.asarray(vectors, dtype="<f4"))
    if x.ndim != 2:
        raise ClusterError("feature matrix must be 2-D")
    with open(path, "wb") as f:
        f.write(FEAT_MAGIC)
        f.write(struct.pack("<II", x.shape[0], x.shape[1]))
        f.write(x.tobytes())


def load_features(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:8] != FEAT_MAGIC:
        raise ClusterError(f"bad feature file magic in {path}")
    n, d = struct.unpack_from("<II", blob, 8)
    off = 16
    if len(blob) - off != 4 * n * d:
        raise ClusterError(f"feature file payload mismatch in {path}")
    return np.frombuffer(blob[off:], dtype="<f4").reshape(n, d).copy()


def save_labels(path, labels: np.ndarray, k: int) -> None:
    lab = np.ascontiguousarray(np.asarray(labels, dtype="<u2"))
    with open(path, "wb") as f:
        f.write(LABEL_MAGIC)
        f.write(struct.pack("<IH", len(lab), k))
        f.write(lab.tobytes())


def load_labels(path) -> tuple[np.ndarray, int]:
    blob = Path(path).read_bytes()
    if blob[:7] != LABEL_MAGIC:
        raise ClusterError(f"bad label file magic in {path}")
    n, k = struct.unpack_from("<IH", blob, 7)
    off = 7 + struct.calcsize("<IH")
    if len(blob) - off != 2 * n:
        raise ClusterError(f"label file payload mismatch in {path}")
    return np.frombuffer(blob[off:], dtype="<u2").copy(), k


def rc_cluster_labels(
    features_path,
    k: int,
    m: int = 64,
    seed: int = 0,
    expected_count: int | None = None,
    labels_out=None,
    kmeans_iters: int = 200,
) -> tuple[np.ndarray, ClusterModel]:
    """Cluster externally supplied feature vectors; optionally emit a label file."""
    vectors = load_features(features_path)
    if expected_count is not None and len(vectors) != expected_count:
        raise ClusterError(f"feature count {len(vectors)} does not match dataset count {expected_count}")
    model, labels = fit_cluster_model(FeatureSet(vectors, source="external"), k, m, seed=seed, iters=kmeans_iters)
    labels = labels.astype(np.uint16)
    if labels_out is not None:
        save_labels(labels_out, labels, k)
    return labels, model
