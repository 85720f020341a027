"""Latent-space exploration primitives: sampling, matched interpolation,
class transfer, vicinity sampling, and semantic direction vectors.

Everything here is a pure function of its arguments plus an explicit seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

PRIORS = ("gaussian", "uniform")


@dataclass
class DirectionVector:
    """Named semantic offset with a latent part and an optional label part."""

    name: str
    z_offset: np.ndarray | None
    label_offset: np.ndarray | None = None
    n_positive: int = 0
    n_negative: int = 0

    def __post_init__(self):
        if self.z_offset is None and self.label_offset is None:
            raise ValueError("direction needs at least one of z_offset / label_offset")
        if self.z_offset is not None:
            self.z_offset = np.asarray(self.z_offset, dtype=np.float32)
            if not np.all(np.isfinite(self.z_offset)):
                raise ValueError("z_offset must be finite")
        if self.label_offset is not None:
            self.label_offset = np.asarray(self.label_offset, dtype=np.float32)
            if not np.all(np.isfinite(self.label_offset)):
                raise ValueError("label_offset must be finite")


def sample_z(n: int, dim: int, prior: str = "gaussian", seed: int = 0) -> np.ndarray:
    """(n, dim) i.i.d. draws from the configured prior, deterministic per seed."""
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be >= 1")
    if prior not in PRIORS:
        raise ValueError(f"unknown prior {prior!r}")
    rng = np.random.default_rng(seed)
    if prior == "gaussian":
        return rng.standard_normal((n, dim)).astype(np.float32)
    return rng.uniform(-1.0, 1.0, (n, dim)).astype(np.float32)


def interpolate(z1: np.ndarray, z2: np.ndarray, t: float, matched: bool = True, prior: str = "gaussian") -> np.ndarray:
    """Interpolant between two latents at parameter t in [0, 1].

    Matched mode rescales the linear interpolant by 1/sqrt((1-t)^2 + t^2) so a
    gaussian prior's marginal is preserved along the path; the factor is 1 at
    both endpoints so they are exact. Uniform priors fall back to a plain lerp.
    """
    a = np.asarray(z1, dtype=np.float32)
    b = np.asarray(z2, dtype=np.float32)
    if a.shape != b.shape:
        raise ValueError(f"latent shape mismatch: {a.shape} vs {b.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    lerp = (1.0 - t) * a + t * b
    if not matched:
        return lerp
    if prior == "uniform":
        warnings.warn("distribution matching for uniform priors is not implemented; using plain lerp")
        return lerp
    scale = 1.0 / np.sqrt((1.0 - t) ** 2 + t**2)
    return (lerp * scale).astype(np.float32)


def interpolate_path(z1, z2, steps: int, matched: bool = True, prior: str = "gaussian") -> np.ndarray:
    """`steps` interpolants from z1 to z2 inclusive; needs steps >= 2."""
    if steps < 2:
        raise ValueError("interpolation needs at least 2 steps")
    ts = np.linspace(0.0, 1.0, steps)
    return np.stack([interpolate(z1, z2, float(t), matched=matched, prior=prior) for t in ts])


def class_transfer(z: np.ndarray, from_label: int, to_label: int, k: int) -> tuple[np.ndarray, int]:
    """Keep the latent representation constant; only the cluster changes."""
    for lab in (from_label, to_label):
        if not 0 <= lab < k:
            raise ValueError(f"label {lab} out of range for k={k}")
    return np.asarray(z, dtype=np.float32), to_label


def label_interpolate(onehot_a: np.ndarray, onehot_b: np.ndarray, t: float) -> np.ndarray:
    """Convex combination of two (soft) label vectors."""
    a = np.asarray(onehot_a, dtype=np.float32)
    b = np.asarray(onehot_b, dtype=np.float32)
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    if (a < 0).any() or (b < 0).any():
        raise ValueError("label weights must be non-negative")
    for v in (a, b):
        if abs(float(v.sum()) - 1.0) > 1e-4:
            raise ValueError("label vectors must sum to 1")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return (1.0 - t) * a + t * b


def vicinity_sample(
    z: np.ndarray,
    label,
    count: int = 8,
    amount: float = 1.0 / 3.0,
    seed: int = 0,
    prior: str = "gaussian",
    k: int | None = None,
    cross_cluster: bool = False,
) -> tuple[np.ndarray, list]:
    """Perturb z a fixed fraction toward `count` fresh prior draws.

    z' = z + amount * (r - z) for each draw r, so ||z' - z|| scales exactly
    linearly with `amount`. Labels are kept as-is, or redrawn uniformly in
    cross-cluster mode.
    """
    if not 0.0 <= amount <= 1.0:
        raise ValueError("amount must lie in [0, 1]")
    if count < 1:
        raise ValueError("count must be >= 1")
    zv = np.asarray(z, dtype=np.float32).reshape(-1)
    rng = np.random.default_rng(seed)
    if prior == "gaussian":
        r = rng.standard_normal((count, zv.size)).astype(np.float32)
    else:
        r = rng.uniform(-1.0, 1.0, (count, zv.size)).astype(np.float32)
    out = zv[None, :] + np.float32(amount) * (r - zv[None, :])
    if cross_cluster:
        if k is None:
            raise ValueError("cross-cluster sampling needs k")
        labels = [int(x) for x in rng.integers(0, k, count)]
    else:
        labels = [label] * count
    return out.astype(np.float32), labels


def direction_from_examples(positives, negatives, name: str, label_positives=None, label_negatives=None) -> DirectionVector:
    """Mean-difference direction: mean(positives) - mean(negatives)."""
    pos = np.asarray(positives, dtype=np.float32)
    neg = np.asarray(negatives, dtype=np.float32)
    if pos.ndim != 2 or neg.ndim != 2 or len(pos) == 0 or len(neg) == 0:
        raise ValueError("positives and negatives must be non-empty (n, dim) arrays")
    z_offset = pos.mean(axis=0) - neg.mean(axis=0)
    label_offset = None
    if label_positives is not None and label_negatives is not None:
        lp = np.asarray(label_positives, dtype=np.float32)
        ln = np.asarray(label_negatives, dtype=np.float32)
        label_offset = lp.mean(axis=0) - ln.mean(axis=0)
    return DirectionVector(
        name=name,
        z_offset=z_offset,
        label_offset=label_offset,
        n_positive=len(pos),
        n_negative=len(neg),
    )


def apply_direction(
    z: np.ndarray,
    label_vec: np.ndarray | None,
    direction: DirectionVector,
    amount: float,
    space: str = "latent",
) -> tuple[np.ndarray, np.ndarray | None]:
    """Shift a latent and/or soft-label state along a semantic direction.

    Label-space results are clamped non-negative and renormalized so the
    output is always a valid distribution.
    """
    if space not in ("latent", "label", "both"):
        raise ValueError(f"unknown space {space!r}")
    zv = np.asarray(z, dtype=np.float32)
    out_label = None if label_vec is None else np.asarray(label_vec, dtype=np.float32)
    if space in ("latent", "both"):
        if direction.z_offset is None:
            raise ValueError(f"direction {direction.name!r} has no latent offset")
        zv = zv + np.float32(amount) * direction.z_offset
    if space in ("label", "both"):
        if direction.label_offset is None:
            raise ValueError(f"direction {direction.name!r} has no label offset")
        if out_label is None:
            raise ValueError("label-space application needs a label vector")
        shifted = out_label + np.float32(amount) * direction.label_offset
        shifted = np.clip(shifted, 0.0, None)
        total = float(shifted.sum())
        if total <= 0.0:
            # fully clamped away: fall back to the uniform distribution
            shifted = np.full_like(shifted, 1.0 / len(shifted))
        else:
            shifted = shifted / total
        out_label = shifted
    return zv.astype(np.float32), out_label
