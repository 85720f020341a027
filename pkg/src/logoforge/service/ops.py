"""Operation handlers shared by the HTTP app and the CLI's local mode.

Every handler is a pure function of (snapshot, request): the snapshot is never
mutated, caller-supplied seeds make responses reproducible, and each returned
image carries the full latent payload needed to re-render it.
"""

from __future__ import annotations

import base64
import io
import secrets

import numpy as np
from PIL import Image

from .. import latent as L
from ..models import label_vectors
from ..snapshot import ModelSnapshot
from ..training import sample_images
from .schemas import (
    DirectionApplyRequest,
    DirectionInfo,
    DirectionListResponse,
    GenerateRequest,
    ImageItem,
    InfoResponse,
    InterpolateRequest,
    OpResponse,
    TransferRequest,
    VicinityRequest,
)


class RequestError(ValueError):
    """Invalid request content; maps to a structured 400 response."""


def _resolve_seed(seed: int | None) -> int:
    """Server-generated fallback for ops that actually consume randomness."""
    return secrets.randbits(31) if seed is None else int(seed)


def _echo_seed(seed: int | None) -> int:
    """Deterministic ops echo the caller's seed (or 0) so replays stay pure."""
    return 0 if seed is None else int(seed)


def encode_png(img: np.ndarray) -> str:
    """[-1, 1] CHW float image to base64 PNG."""
    arr = np.clip((np.asarray(img) + 1.0) * 127.5, 0, 255)
    arr = np.rint(arr).astype(np.uint8).transpose(1, 2, 0)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG", compress_level=6)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _check_z(snapshot: ModelSnapshot, z: list[float], name: str = "z") -> np.ndarray:
    arr = np.asarray(z, dtype=np.float32)
    if arr.ndim != 1 or arr.size != snapshot.config.latent_dim:
        raise RequestError(f"{name} must hold exactly latent_dim={snapshot.config.latent_dim} floats, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise RequestError(f"{name} contains non-finite values")
    return arr


def _check_cluster(snapshot: ModelSnapshot, cluster: int | None, field: str = "cluster"):
    if cluster is not None and not 0 <= cluster < snapshot.config.k:
        raise RequestError(f"{field} {cluster} out of range for k={snapshot.config.k}")


def _soft_label(snapshot: ModelSnapshot, label: int | None, soft_label: list[float] | None) -> np.ndarray | None:
    """Normalize request label fields to a soft vector (or None when unconditional)."""
    k = snapshot.config.k
    if snapshot.config.conditioning == "none":
        return None
    if soft_label is not None:
        arr = np.asarray(soft_label, dtype=np.float32)
        if arr.shape != (k,):
            raise RequestError(f"soft_label must hold k={k} weights")
        if (arr < 0).any() or abs(float(arr.sum()) - 1.0) > 1e-4:
            raise RequestError("soft_label must be a distribution over k clusters")
        return arr
    _check_cluster(snapshot, label, "label")
    if label is None:
        return None
    out = np.zeros(k, dtype=np.float32)
    out[label] = 1.0
    return out


def _render(snapshot: ModelSnapshot, z_batch: np.ndarray, labels, debug: bool = False) -> list[ImageItem]:
    cond = snapshot.config.conditioning != "none"
    imgs = sample_images(snapshot.g_params, snapshot.config, z_batch, labels if cond else None)
    items = []
    for i in range(len(imgs)):
        if not cond:
            lab_i, soft_i = None, None
        else:
            vec = labels[i] if isinstance(labels, np.ndarray) and labels.ndim == 2 else None
            if vec is None:
                lab_i = int(labels[i]) if np.ndim(labels) else int(labels)
                soft_i = None
            else:
                hard = int(vec.argmax())
                if abs(vec[hard] - 1.0) < 1e-6 and abs(vec.sum() - 1.0) < 1e-5:
                    lab_i, soft_i = hard, None
                else:
                    lab_i, soft_i = None, [float(v) for v in vec]
        items.append(
            ImageItem(
                image=encode_png(imgs[i]),
                z=[float(v) for v in z_batch[i]],
                label=lab_i,
                soft_label=soft_i,
                raw=imgs[i].tolist() if debug else None,
            )
        )
    return items


def info(snapshot: ModelSnapshot) -> InfoResponse:
    cfg = snapshot.config
    return InfoResponse(latent_dim=cfg.latent_dim, k=cfg.k, resolution=cfg.resolution, conditioning=cfg.conditioning)


def generate(snapshot: ModelSnapshot, req: GenerateRequest, debug: bool = False) -> OpResponse:
    seed = _resolve_seed(req.seed)
    _check_cluster(snapshot, req.cluster)
    cfg = snapshot.config
    rng = np.random.default_rng(seed)
    z = (
        rng.standard_normal((req.count, cfg.latent_dim)).astype(np.float32)
        if cfg.prior == "gaussian"
        else rng.uniform(-1, 1, (req.count, cfg.latent_dim)).astype(np.float32)
    )
    if cfg.conditioning == "none":
        labels = None
    elif req.cluster is not None:
        labels = np.full(req.count, req.cluster, dtype=np.int64)
    else:
        labels = rng.integers(0, cfg.k, req.count)
    return OpResponse(op="generate", seed=seed, items=_render(snapshot, z, labels, debug))


def vicinity(snapshot: ModelSnapshot, req: VicinityRequest, debug: bool = False) -> OpResponse:
    seed = _resolve_seed(req.seed)
    z = _check_z(snapshot, req.z)
    soft = _soft_label(snapshot, req.label, req.soft_label)
    cross = req.op == "vicinity_cross"
    zs, labs = L.vicinity_sample(
        z,
        0,
        count=req.count,
        amount=req.amount,
        seed=seed,
        prior=snapshot.config.prior,
        k=snapshot.config.k,
        cross_cluster=cross,
    )
    if snapshot.config.conditioning == "none":
        labels = None
    elif cross:
        labels = np.asarray(labs, dtype=np.int64)
    else:
        if soft is None:
            raise RequestError("vicinity on a conditional model needs label or soft_label")
        labels = np.tile(soft, (req.count, 1))
    return OpResponse(op="vicinity_cross" if cross else "vicinity", seed=seed, items=_render(snapshot, zs, labels, debug))


def interpolate(snapshot: ModelSnapshot, req: InterpolateRequest, debug: bool = False) -> OpResponse:
    seed = _echo_seed(req.seed)
    z1 = _check_z(snapshot, req.z)
    z2 = _check_z(snapshot, req.z2, "z2")
    if (req.steps is None) == (req.amount is None):
        raise RequestError("interpolate needs exactly one of steps (a path) or amount (single point)")
    soft_from = _soft_label(snapshot, req.label, req.soft_label)
    _check_cluster(snapshot, req.cluster)
    cond = snapshot.config.conditioning != "none"
    if cond and soft_from is None:
        raise RequestError("interpolate on a conditional model needs label or soft_label")
    prior = snapshot.config.prior

    if req.steps is not None:
        ts = np.linspace(0.0, 1.0, req.steps)
    else:
        ts = np.array([req.amount])
    zs = np.stack([L.interpolate(z1, z2, float(t), matched=True, prior=prior) for t in ts])
    if cond:
        if req.cluster is not None:
            target = np.zeros(snapshot.config.k, dtype=np.float32)
            target[req.cluster] = 1.0
        else:
            target = soft_from
        labels = np.stack([L.label_interpolate(soft_from, target, float(t)) for t in ts])
    else:
        labels = None
    return OpResponse(op="interpolate", seed=seed, items=_render(snapshot, zs, labels, debug))


def transfer(snapshot: ModelSnapshot, req: TransferRequest, debug: bool = False) -> OpResponse:
    seed = _echo_seed(req.seed)
    z = _check_z(snapshot, req.z)
    soft = _soft_label(snapshot, req.label, req.soft_label)
    _check_cluster(snapshot, req.cluster)
    cond = snapshot.config.conditioning != "none"
    if cond and soft is None and req.cluster is None:
        raise RequestError("transfer on a conditional model needs label, soft_label or cluster")
    if cond:
        if req.cluster is not None:
            vec = np.zeros(snapshot.config.k, dtype=np.float32)
            vec[req.cluster] = 1.0
        else:
            vec = soft
        labels = vec[None, :]
    else:
        labels = None
    return OpResponse(op="transfer", seed=seed, items=_render(snapshot, z[None, :], labels, debug))


def direction_list(snapshot: ModelSnapshot) -> DirectionListResponse:
    infos = [
        DirectionInfo(
            name=d.name,
            has_z=d.z_offset is not None,
            has_label=d.label_offset is not None,
            n_positive=d.n_positive,
            n_negative=d.n_negative,
        )
        for d in snapshot.directions.values()
    ]
    return DirectionListResponse(directions=sorted(infos, key=lambda d: d.name))


def direction_apply(snapshot: ModelSnapshot, req: DirectionApplyRequest, debug: bool = False) -> OpResponse:
    seed = _echo_seed(req.seed)
    z = _check_z(snapshot, req.z)
    if req.direction not in snapshot.directions:
        raise RequestError(f"unknown direction {req.direction!r}")
    if req.space not in ("latent", "label", "both"):
        raise RequestError(f"unknown space {req.space!r}")
    soft = _soft_label(snapshot, req.label, req.soft_label)
    cond = snapshot.config.conditioning != "none"
    if cond and soft is None:
        raise RequestError("direction apply on a conditional model needs label or soft_label")
    direction = snapshot.directions[req.direction]
    try:
        z_out, soft_out = L.apply_direction(z, soft, direction, req.amount, req.space)
    except ValueError as exc:
        raise RequestError(str(exc)) from exc
    labels = soft_out[None, :] if (cond and soft_out is not None) else (soft[None, :] if cond else None)
    return OpResponse(op="direction_apply", seed=seed, items=_render(snapshot, z_out[None, :], labels, debug))
