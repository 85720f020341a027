"""Dataset packing, cleanup stages, and the procedural multi-mode logo corpus.

Pack file layout: magic "LLDPACK1", u32 count, u16 w, u16 h, u8 c, raw pixel
bytes (uint8, sample-major), all little-endian. Pixels live as [0, 255] bytes
on disk and convert to [-1, 1] float32 on load.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

PACK_MAGIC = b"LLDPACK1"


class PackError(ValueError):
    pass


@dataclass
class PackedDataset:
    pixels: np.ndarray  # (N, H, W, C) uint8
    source_ids: list[str] | None = None

    def __post_init__(self):
        if self.pixels.ndim != 4 or self.pixels.dtype != np.uint8:
            raise PackError(f"pixels must be (N,H,W,C) uint8, got {self.pixels.shape} {self.pixels.dtype}")

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @property
    def channels(self) -> int:
        return self.pixels.shape[3]

    def to_float(self) -> np.ndarray:
        """(N, C, H, W) float32 in [-1, 1]."""
        x = self.pixels.astype(np.float32) / 127.5 - 1.0
        return np.ascontiguousarray(x.transpose(0, 3, 1, 2))

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(PACK_MAGIC)
            f.write(struct.pack("<IHHB", self.count, self.width, self.height, self.channels))
            f.write(self.pixels.tobytes())

    @classmethod
    def load(cls, path) -> "PackedDataset":
        blob = Path(path).read_bytes()
        if blob[:8] != PACK_MAGIC:
            raise PackError(f"bad pack magic in {path}")
        count, w, h, c = struct.unpack_from("<IHHB", blob, 8)
        off = 8 + struct.calcsize("<IHHB")
        need = count * h * w * c
        if len(blob) - off != need:
            raise PackError(f"pack payload size mismatch in {path}: have {len(blob) - off}, need {need}")
        pixels = np.frombuffer(blob[off:], dtype=np.uint8).reshape(count, h, w, c).copy()
        return cls(pixels)


def from_float(x: np.ndarray) -> PackedDataset:
    """(N, C, H, W) [-1, 1] floats back to a uint8 pack."""
    arr = np.clip((np.asarray(x) + 1.0) * 127.5, 0, 255)
    arr = np.rint(arr).astype(np.uint8).transpose(0, 2, 3, 1)
    return PackedDataset(np.ascontiguousarray(arr))


# ---------------------------------------------------------------------------
# packing / cleanup


def pack_images(directory, resize: int | None = None) -> tuple[PackedDataset, dict]:
    """Pack all readable square images from a directory, lexicographic order.

    Non-square images are rejected; with `resize` set, square images are
    rescaled to that size, otherwise mismatched sizes are skipped and counted.
    """
    directory = Path(directory)
    report = {"packed": 0, "skipped_unreadable": 0, "skipped_non_square": 0, "skipped_size_mismatch": 0}
    frames, names = [], []
    size = resize
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        try:
            with Image.open(path) as img:
                img = img.convert("RGB")
                if img.width != img.height:
                    report["skipped_non_square"] += 1
                    continue
                if resize is not None and img.width != resize:
                    img = img.resize((resize, resize), Image.LANCZOS)
                if size is None:
                    size = img.width
                if img.width != size:
                    report["skipped_size_mismatch"] += 1
                    continue
                frames.append(np.asarray(img, dtype=np.uint8))
                names.append(path.name)
        except Exception:
            report["skipped_unreadable"] += 1
    report["packed"] = len(frames)
    if frames:
        pixels = np.stack(frames)
    else:
        s = size or (resize or 32)
        pixels = np.zeros((0, s, s, 3), dtype=np.uint8)
    return PackedDataset(pixels, source_ids=names), report


def unpack_images(dataset: PackedDataset, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    digits = max(5, len(str(max(dataset.count - 1, 1))))
    for i in range(dataset.count):
        p = directory / f"{i:0{digits}d}.png"
        Image.fromarray(dataset.pixels[i]).save(p)
        out.append(p)
    return out


def dedup_exact(dataset: PackedDataset) -> tuple[PackedDataset, int]:
    """Drop byte-identical duplicates, keeping first occurrences in order."""
    seen = set()
    keep = []
    for i in range(dataset.count):
        key = dataset.pixels[i].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    removed = dataset.count - len(keep)
    ids = [dataset.source_ids[i] for i in keep] if dataset.source_ids else None
    return PackedDataset(dataset.pixels[keep].copy(), source_ids=ids), removed


def _png_scanline_stream(img: np.ndarray) -> bytes:
    # PNG-style filter-0 scanlines (row-prefixed with the filter byte)
    h = img.shape[0]
    rows = np.concatenate([np.zeros((h, 1), dtype=np.uint8), img.reshape(h, -1)], axis=1)
    return rows.tobytes()


def complexity_score(img: np.ndarray, level: int = 6) -> int:
    """Deflate-compressed byte size of the image serialized PNG-style."""
    return len(zlib.compress(_png_scanline_stream(img), level))


def complexity_sort(dataset: PackedDataset) -> np.ndarray:
    """Indices ordered by ascending compressed size; ties keep original order."""
    scores = np.array([complexity_score(dataset.pixels[i]) for i in range(dataset.count)])
    return np.argsort(scores, kind="stable")


def white_pixel_count(img: np.ndarray, cutoff: int = 250) -> int:
    return int(np.all(img >= cutoff, axis=-1).sum())


def white_pixel_filter(dataset: PackedDataset, indices, threshold: int) -> np.ndarray:
    """Keep indices whose white-pixel count is at least `threshold`."""
    if not 0 <= threshold <= dataset.width * dataset.height:
        raise ValueError(f"threshold must lie in [0, {dataset.width * dataset.height}]")
    kept = [i for i in np.asarray(indices, dtype=np.int64) if white_pixel_count(dataset.pixels[i]) >= threshold]
    return np.asarray(kept, dtype=np.int64)


# ---------------------------------------------------------------------------
# synthetic corpus

SHAPES = ("disc", "square", "ring", "bar")

# base colors spread in hue and luma so modes separate in RGB and grayscale
PALETTES = (
    (40, 60, 180),    # dark blue
    (200, 50, 40),    # red
    (60, 190, 70),    # green
    (235, 210, 60),   # yellow
    (130, 40, 160),   # purple
    (240, 140, 40),   # orange
    (70, 200, 200),   # cyan
    (245, 245, 245),  # near-white
)


def synth_logo_corpus(
    n: int,
    resolution: int = 16,
    modes: int = 4,
    seed: int = 0,
) -> tuple[PackedDataset, np.ndarray]:
    """Procedural logo-like corpus: solid background, centered shape, palette
    per mode. Mode = (shape, palette) pair; labels assigned round-robin so the
    counts are balanced to within one.
    """
    if modes < 2:
        raise ValueError("need at least 2 modes")
    if modes > len(PALETTES):
        raise ValueError(f"at most {len(PALETTES)} modes supported")
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.uint16) % modes
    pixels = np.empty((n, resolution, resolution, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:resolution, 0:resolution].astype(np.float32)
    yy = (yy + 0.5) / resolution - 0.5
    xx = (xx + 0.5) / resolution - 0.5
    for i in range(n):
        mode = int(labels[i])
        shape = SHAPES[mode % len(SHAPES)]
        color = np.array(PALETTES[mode], dtype=np.float32)
        color = np.clip(color + rng.normal(0, 10, 3), 0, 255)
        bg = np.clip(rng.normal(215, 6) + rng.normal(0, 4, 3), 180, 255)
        cy, cx = rng.normal(0, 0.015, 2)
        r = rng.uniform(0.30, 0.36)
        dy, dx = yy - cy, xx - cx
        if shape == "disc":
            mask = dy**2 + dx**2 <= r**2
        elif shape == "square":
            mask = (np.abs(dy) <= r * 0.9) & (np.abs(dx) <= r * 0.9)
        elif shape == "ring":
            d2 = dy**2 + dx**2
            mask = (d2 <= r**2) & (d2 >= (0.55 * r) ** 2)
        else:  # bar
            mask = (np.abs(dy) <= r * 0.42) & (np.abs(dx) <= r * 1.15)
        img = np.empty((resolution, resolution, 3), dtype=np.float32)
        img[:] = bg
        img[mask] = color
        pixels[i] = np.clip(img, 0, 255).astype(np.uint8)
    return PackedDataset(pixels), labels


def mode_centroids(dataset: PackedDataset, labels: np.ndarray, modes: int) -> np.ndarray:
    """Per-mode mean image in [-1, 1] pixel space, flattened: (modes, C*H*W)."""
    x = dataset.to_float().reshape(dataset.count, -1)
    cents = np.stack([x[labels == m].mean(axis=0) for m in range(modes)])
    return cents


def nearest_centroid_classify(images: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Assign each (N, C, H, W) [-1, 1] image to the closest mode centroid."""
    flat = np.asarray(images, dtype=np.float32).reshape(len(images), -1)
    d = ((flat[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1)
