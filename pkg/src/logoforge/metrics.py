"""Sample-quality metrics: the classifier-based score (Inception-score formula
with a pluggable classifier) and MS-SSIM based diversity.

MS-SSIM settings: 11x11 Gaussian window with sigma 1.5, C1=(0.01*L)^2,
C2=(0.03*L)^2 with L=2 for [-1, 1] data, and 3 scales at 32 px (the first
three canonical weights renormalized to sum 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import GradTape, Tensor, backward, init_adam, adam_step, lr_linear_decay
from .autodiff import functional as F
from .autodiff import tensor as T
from .clustering import LUMA
from .models import ModelConfig, discriminator_forward, init_discriminator, trainable
from .training import softmax_cross_entropy

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass
class ScoreReport:
    metric: str
    mean: float
    std: float
    n_samples: int
    n_splits: int

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be >= 0")
        if self.n_splits > 0 and self.n_samples % self.n_splits:
            raise ValueError("n_samples must be divisible by n_splits")

    def line(self) -> str:
        return f"{self.metric}: {self.mean:.4f} +/- {self.std:.4f} (n={self.n_samples}, splits={self.n_splits})"

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean": self.mean,
            "std": self.std,
            "n_samples": self.n_samples,
            "n_splits": self.n_splits,
        }


# ---------------------------------------------------------------------------
# classifier score


def classifier_score(pred_matrix: np.ndarray, n_splits: int = 10) -> ScoreReport:
    """exp(mean KL(p(y|x) || p_bar(y))) per split; mean and std over splits."""
    p = np.asarray(pred_matrix, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("prediction matrix must be (N, k)")
    n, k = p.shape
    if n_splits < 1 or n < n_splits:
        raise ValueError(f"need at least n_splits={n_splits} rows, have {n}")
    if (p < 0).any() or np.abs(p.sum(axis=1) - 1.0).max() > 1e-5:
        raise ValueError("rows must be probability distributions summing to 1 within 1e-5")
    part = n // n_splits
    scores = []
    eps = 1e-16
    for i in range(n_splits):
        block = p[i * part : (i + 1) * part]
        marginal = block.mean(axis=0, keepdims=True)
        kl = (block * (np.log(block + eps) - np.log(marginal + eps))).sum(axis=1)
        scores.append(float(np.exp(kl.mean())))
    return ScoreReport(
        metric="classifier_score",
        mean=float(np.mean(scores)),
        std=float(np.std(scores)),
        n_samples=part * n_splits,
        n_splits=n_splits,
    )


# ---------------------------------------------------------------------------
# MS-SSIM


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    xs = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    k /= k.sum()
    return k


def _filter_valid(img: np.ndarray, k1d: np.ndarray) -> np.ndarray:
    """Separable 'valid' filtering of a 2-D image."""
    from numpy.lib.stride_tricks import sliding_window_view

    t = sliding_window_view(img, len(k1d), axis=0) @ k1d
    return sliding_window_view(t, len(k1d), axis=1) @ k1d


def _to_gray2d(img: np.ndarray) -> np.ndarray:
    x = np.asarray(img, dtype=np.float64)
    if x.ndim == 3:
        if x.shape[0] in (1, 3):  # CHW
            x = x[0] if x.shape[0] == 1 else np.einsum("chw,c->hw", x, LUMA.astype(np.float64))
        elif x.shape[2] in (1, 3):  # HWC
            x = x[..., 0] if x.shape[2] == 1 else x @ LUMA.astype(np.float64)
        else:
            raise ValueError(f"cannot interpret image shape {x.shape}")
    if x.ndim != 2:
        raise ValueError(f"cannot interpret image shape {np.asarray(img).shape}")
    return x


def _window_size(side: int, nominal: int = 11) -> int:
    """Largest odd window <= nominal that fits the image side."""
    size = min(nominal, side)
    return size if size % 2 else size - 1


def _ssim_terms(a: np.ndarray, b: np.ndarray, data_range: float = 2.0):
    """(luminance, contrast-structure) means for one scale."""
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    k = _gaussian_window(_window_size(min(a.shape)))
    mu_a, mu_b = _filter_valid(a, k), _filter_valid(b, k)
    var_a = _filter_valid(a * a, k) - mu_a**2
    var_b = _filter_valid(b * b, k) - mu_b**2
    cov = _filter_valid(a * b, k) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return float(lum.mean()), float(cs.mean())


def _downsample2x(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    x = img[:h, :w]
    return (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2]) / 4.0


def msssim(img_a, img_b, scales: int | None = None, weights=None, data_range: float = 2.0) -> float:
    """Multi-scale structural similarity of two images, in [0, 1].

    Contrast/structure terms at every scale, luminance only at the coarsest,
    combined as the weighted geometric product. Images are grayscale-converted
    internally; each scale halves the resolution.
    """
    a = _to_gray2d(img_a)
    b = _to_gray2d(img_b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if scales is None:
        scales = 3 if min(a.shape) < 176 else 5
    min_side = min(a.shape) // (2 ** (scales - 1))
    if min_side < 3:
        raise ValueError(f"image too small for {scales} scales (final side {min_side} < 3)")
    if weights is None:
        w = np.array(MSSSIM_WEIGHTS[:scales], dtype=np.float64)
        w = w / w.sum()
    else:
        w = np.asarray(weights, dtype=np.float64)
        if len(w) != scales:
            raise ValueError("need one weight per scale")
    value = 1.0
    for s in range(scales):
        lum, cs = _ssim_terms(a, b, data_range)
        if s == scales - 1:
            value *= max(lum, 0.0) ** w[s]
        value *= max(cs, 0.0) ** w[s]
        if s < scales - 1:
            a, b = _downsample2x(a), _downsample2x(b)
    return float(np.clip(value, 0.0, 1.0))


def diversity_score(sample_source, n_samples: int, n_pairs: int, seed: int = 0) -> ScoreReport:
    """Mean MS-SSIM over uniformly random distinct pairs of generated samples.

    `sample_source` is either an (N, C, H, W) array or a callable(n) -> array.
    Lower means more diverse.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    samples = sample_source(n_samples) if callable(sample_source) else np.asarray(sample_source)[:n_samples]
    if len(samples) < n_samples:
        raise ValueError(f"sample source yielded {len(samples)} < {n_samples}")
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_pairs):
        i = int(rng.integers(0, n_samples))
        j = int(rng.integers(0, n_samples - 1))
        if j >= i:
            j += 1
        vals.append(msssim(samples[i], samples[j]))
    return ScoreReport(
        metric="diversity_msssim",
        mean=float(np.mean(vals)),
        std=float(np.std(vals)),
        n_samples=n_samples,
        n_splits=1,
    )


# ---------------------------------------------------------------------------
# pluggable classifier (small convnet trained on labeled data)


def train_mode_classifier(
    images: np.ndarray,
    labels: np.ndarray,
    k: int,
    epochs: int = 4,
    batch: int = 64,
    lr: float = 2e-3,
    seed: int = 0,
    widths: tuple[int, int] = (16, 32),
) -> tuple[dict, ModelConfig]:
    """Train a small convolutional classifier on (N, C, H, W) [-1, 1] images."""
    x = np.asarray(images, dtype=np.float32)
    y = np.asarray(labels)
    res = x.shape[2]
    cfg = ModelConfig(arch="dcgan", resolution=res, latent_dim=8, k=1, conditioning="none", widths=widths)
    rng = np.random.default_rng(seed)
    params = init_discriminator(cfg, rng, out_dim=k)
    train = trainable(params)
    opt = init_adam(train, beta1=0.9, beta2=0.999)
    n = len(x)
    steps = max(1, n // batch) * epochs
    for step in range(steps):
        idx = rng.integers(0, n, size=batch)
        with GradTape() as tape:
            logits = discriminator_forward(params, cfg, Tensor(x[idx]), train=True, update_stats=True)
            loss = softmax_cross_entropy(logits, y[idx])
            grads = backward(loss, tape, list(train.values()))
        adam_step(train, dict(zip(train.keys(), grads)), opt, lr_linear_decay(lr, step, steps))
    return params, cfg


def classify_probs(params: dict, cfg: ModelConfig, images: np.ndarray, batch: int = 256) -> np.ndarray:
    """Softmax class probabilities from a trained mode classifier."""
    x = np.asarray(images, dtype=np.float32)
    outs = []
    for start in range(0, len(x), batch):
        logits = discriminator_forward(params, cfg, Tensor(x[start : start + batch]), train=False)
        z = logits.data - logits.data.max(axis=1, keepdims=True)
        e = np.exp(z)
        outs.append(e / e.sum(axis=1, keepdims=True))
    return np.concatenate(outs, axis=0)
