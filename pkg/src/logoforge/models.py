"""Conditional generator/discriminator architectures and the blur input path.

Two families: a DCGAN-style stack (batch norm in both networks, transposed
convs in the generator) and a residual stack whose critic carries no
normalization. Conditioning modes:

  none -- labels ignored
  lc   -- one-hot label vector appended to every linear input and one-hot
          feature maps appended to the input of every convolution; residual
          shortcuts stay unconditional
  ac   -- labels never enter the discriminator input; it grows a k-way
          classification head instead
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .autodiff import functional as F
from .autodiff import tensor as T

CONDITIONING_MODES = ("none", "lc", "ac")
ARCHS = ("dcgan", "resnet")


@dataclass
class ModelConfig:
    arch: str = "dcgan"
    resolution: int = 32
    latent_dim: int = 512
    k: int = 1
    conditioning: str = "none"
    widths: tuple[int, ...] = ()
    channels: int = 3
    blur_sigma: float = 0.0
    prior: str = "gaussian"
    bn_eps: float = 1e-5
    leak: float = 0.2

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.resolution not in (16, 32, 64):
            raise ValueError(f"resolution must be 16, 32 or 64, got {self.resolution}")
        if self.conditioning not in CONDITIONING_MODES:
            raise ValueError(f"unknown conditioning {self.conditioning!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.prior not in ("gaussian", "uniform"):
            raise ValueError(f"unknown prior {self.prior!r}")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if self.blur_sigma > 0 and self.resolution not in (32, 64):
            raise ValueError("blur mode needs resolution 32 or 64")
        if not self.widths:
            self.widths = {16: (64, 128), 32: (64, 128, 256), 64: (64, 128, 256, 512)}[self.resolution]
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.widths) != self.stages:
            raise ValueError(f"resolution {self.resolution} needs {self.stages} stage widths, got {len(self.widths)}")

    @property
    def stages(self) -> int:
        return int(np.log2(self.resolution)) - 2

    @property
    def gen_resolution(self) -> int:
        """Native generator output size; blur mode at 32 px renders at 64."""
        if self.blur_sigma > 0 and self.resolution == 32:
            return 64
        return self.resolution

    @property
    def disc_resolution(self) -> int:
        """Discriminator input size; the blur path always presents 64 px."""
        return 64 if self.blur_sigma > 0 else self.resolution

    @property
    def cond_channels(self) -> int:
        return self.k if self.conditioning == "lc" else 0

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "resolution": self.resolution,
            "latent_dim": self.latent_dim,
            "k": self.k,
            "conditioning": self.conditioning,
            "widths": list(self.widths),
            "channels": self.channels,
            "blur_sigma": self.blur_sigma,
            "prior": self.prior,
            "bn_eps": self.bn_eps,
            "leak": self.leak,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["widths"] = tuple(d.get("widths", ()))
        return cls(**d)


# ---------------------------------------------------------------------------
# conditioning helpers


def build_onehot_feature_maps(label: int, k: int, h: int, w: int) -> Tensor:
    """k feature maps, all zero except the label's map which is all ones."""
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for k={k}")
    m = np.zeros((k, h, w), dtype=np.float32)
    m[label] = 1.0
    return Tensor(m)


def label_vectors(labels, k: int, n: int) -> np.ndarray:
    """Normalize int/array/soft labels to an (N, k) float32 matrix."""
    if labels is None:
        raise ValueError("labels required")
    arr = np.asarray(labels)
    if arr.ndim == 0:
        arr = np.full(n, int(arr))
    if arr.ndim == 1 and np.issubdtype(arr.dtype, np.integer):
        if arr.min() < 0 or arr.max() >= k:
            raise ValueError(f"label out of range for k={k}")
        out = np.zeros((n, k), dtype=np.float32)
        out[np.arange(n), arr.astype(np.int64)] = 1.0
        return out
    arr = arr.astype(np.float32)
    if arr.ndim == 1:
        arr = np.tile(arr[None, :], (n, 1))
    if arr.shape != (n, k):
        raise ValueError(f"soft labels must be (n, k)={n, k}, got {arr.shape}")
    if (arr < 0).any():
        raise ValueError("soft labels must be non-negative")
    return arr


def _cond_maps(vecs: np.ndarray, h: int, w: int) -> Tensor:
    """Per-sample label maps (N,k,h,w); soft labels scale the maps."""
    n, k = vecs.shape
    return Tensor(np.broadcast_to(vecs[:, :, None, None], (n, k, h, w)))


# ---------------------------------------------------------------------------
# parameter construction


def _conv_init(rng, o, i, kh, kw, scale=0.02):
    return Tensor(rng.normal(0.0, scale, (o, i, kh, kw)).astype(np.float32), requires_grad=True)


def _lin_init(rng, fan_in, fan_out, scale=0.02):
    return Tensor(rng.normal(0.0, scale, (fan_in, fan_out)).astype(np.float32), requires_grad=True)


def _bn_params(params, name, c):
    params[f"{name}.gamma"] = Tensor(np.ones(c, dtype=np.float32), requires_grad=True)
    params[f"{name}.beta"] = Tensor(np.zeros(c, dtype=np.float32), requires_grad=True)
    params[f"{name}.rmean"] = Tensor(np.zeros(c, dtype=np.float32))
    params[f"{name}.rvar"] = Tensor(np.ones(c, dtype=np.float32))


def trainable(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: v for k, v in params.items() if v.requires_grad}


def count_params(params: dict[str, Tensor], trainable_only: bool = True) -> int:
    return sum(int(v.size) for k, v in params.items() if v.requires_grad or not trainable_only)


def _gen_ladder(cfg: ModelConfig) -> list[int]:
    """Generator stage widths deep-to-shallow, extended when blur adds a stage."""
    ladder = list(reversed(cfg.widths))
    extra = int(np.log2(cfg.gen_resolution)) - 2 - len(ladder)
    for _ in range(extra):
        ladder.append(max(8, ladder[-1] // 2))
    return ladder


def _disc_widths(cfg: ModelConfig) -> list[int]:
    """Discriminator stage widths shallow-to-deep, extended for blur input."""
    widths = list(cfg.widths)
    extra = int(np.log2(cfg.disc_resolution)) - 2 - len(widths)
    for _ in range(extra):
        widths.insert(0, max(8, widths[0] // 2))
    return widths


def init_generator(cfg: ModelConfig, rng: np.random.Generator, out_channels: int | None = None) -> dict[str, Tensor]:
    out_channels = cfg.channels if out_channels is None else out_channels
    kc = cfg.cond_channels
    cond_in = cfg.k if cfg.conditioning == "lc" else 0
    params: dict[str, Tensor] = {}
    if cfg.arch == "dcgan":
        ladder = _gen_ladder(cfg)
        params["lin.w"] = _lin_init(rng, cfg.latent_dim + cond_in, 4 * 4 * ladder[0])
        params["lin.b"] = Tensor(np.zeros(4 * 4 * ladder[0], dtype=np.float32), requires_grad=True)
        _bn_params(params, "bn0", ladder[0])
        chain = ladder[1:] + [out_channels]
        for i, (cin, cout) in enumerate(zip(ladder, chain)):
            params[f"conv{i}.w"] = _conv_init(rng, cin + kc, cout, 4, 4)
            params[f"conv{i}.b"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
            if i < len(chain) - 1:
                _bn_params(params, f"bn{i + 1}", cout)
    else:
        width = cfg.widths[0]
        stages = int(np.log2(cfg.gen_resolution)) - 2
        params["lin.w"] = _lin_init(rng, cfg.latent_dim + cond_in, 4 * 4 * width, scale=0.05)
        params["lin.b"] = Tensor(np.zeros(4 * 4 * width, dtype=np.float32), requires_grad=True)
        for i in range(stages):
            _res_block_params(params, f"block{i}", width, width, rng, kc, norm=True)
        _bn_params(params, "bn_out", width)
        params["conv_out.w"] = _conv_init(rng, out_channels, width + kc, 3, 3, scale=0.05)
        params["conv_out.b"] = Tensor(np.zeros(out_channels, dtype=np.float32), requires_grad=True)
    return params


def init_discriminator(cfg: ModelConfig, rng: np.random.Generator, out_dim: int = 1, in_channels: int | None = None) -> dict[str, Tensor]:
    in_channels = cfg.channels if in_channels is None else in_channels
    kc = cfg.cond_channels
    cond_in = cfg.k if cfg.conditioning == "lc" else 0
    params: dict[str, Tensor] = {}
    if cfg.arch == "dcgan":
        widths = _disc_widths(cfg)
        chain = [in_channels] + widths
        for i in range(len(widths)):
            params[f"conv{i}.w"] = _conv_init(rng, chain[i + 1], chain[i] + kc, 4, 4)
            params[f"conv{i}.b"] = Tensor(np.zeros(chain[i + 1], dtype=np.float32), requires_grad=True)
            if i > 0:
                _bn_params(params, f"bn{i}", chain[i + 1])
        feat = widths[-1] * 4 * 4
        params["lin.w"] = _lin_init(rng, feat + cond_in, out_dim)
        params["lin.b"] = Tensor(np.zeros(out_dim, dtype=np.float32), requires_grad=True)
        if cfg.conditioning == "ac":
            params["ac.w"] = _lin_init(rng, feat, cfg.k)
            params["ac.b"] = Tensor(np.zeros(cfg.k, dtype=np.float32), requires_grad=True)
    else:
        width = cfg.widths[0]
        params["conv_in.w"] = _conv_init(rng, width, in_channels + kc, 3, 3, scale=0.05)
        params["conv_in.b"] = Tensor(np.zeros(width, dtype=np.float32), requires_grad=True)
        for i in range(int(np.log2(cfg.disc_resolution)) - 2):
            # critic never uses normalization
            _res_block_params(params, f"block{i}", width, width, rng, kc, norm=False)
        params["lin.w"] = _lin_init(rng, width + cond_in, out_dim, scale=0.05)
        params["lin.b"] = Tensor(np.zeros(out_dim, dtype=np.float32), requires_grad=True)
        if cfg.conditioning == "ac":
            params["ac.w"] = _lin_init(rng, width, cfg.k, scale=0.05)
            params["ac.b"] = Tensor(np.zeros(cfg.k, dtype=np.float32), requires_grad=True)
    return params


def _res_block_params(params, name, cin, cout, rng, kc, norm):
    params[f"{name}.conv1.w"] = _conv_init(rng, cout, cin + kc, 3, 3, scale=0.05)
    params[f"{name}.conv1.b"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
    params[f"{name}.conv2.w"] = _conv_init(rng, cout, cout + kc, 3, 3, scale=0.05)
    params[f"{name}.conv2.b"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
    # skip connections remain unconditional
    params[f"{name}.skip.w"] = _conv_init(rng, cout, cin, 1, 1, scale=0.05)
    params[f"{name}.skip.b"] = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)
    if norm:
        _bn_params(params, f"{name}.bn1", cin)
        _bn_params(params, f"{name}.bn2", cout)


# ---------------------------------------------------------------------------
# forward passes


def _bn(params, name, x, cfg, train, update_stats):
    return F.batch_norm(
        x,
        params[f"{name}.gamma"],
        params[f"{name}.beta"],
        params[f"{name}.rmean"],
        params[f"{name}.rvar"],
        train=train,
        update_stats=update_stats,
        eps=cfg.bn_eps,
    )


def generator_forward(
    params: dict[str, Tensor],
    cfg: ModelConfig,
    z,
    labels=None,
    train: bool = False,
    update_stats: bool = False,
) -> Tensor:
    """Map latent batch (N, latent_dim) to images (N, C, gen_res, gen_res) in [-1, 1]."""
    zt = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float32))
    if zt.ndim != 2 or zt.shape[1] != cfg.latent_dim:
        raise ValueError(f"latent batch must be (n, {cfg.latent_dim}), got {zt.shape}")
    n = zt.shape[0]
    lc = cfg.conditioning == "lc"
    vecs = label_vectors(labels, cfg.k, n) if lc else None

    h = T.concat([zt, Tensor(vecs)], axis=1) if lc else zt
    h = F.linear(h, params["lin.w"], params["lin.b"])

    if cfg.arch == "dcgan":
        ladder = _gen_ladder(cfg)
        h = T.reshape(h, (n, ladder[0], 4, 4))
        h = F.relu(_bn(params, "bn0", h, cfg, train, update_stats))
        size = 4
        n_convs = len(ladder)
        for i in range(n_convs):
            if lc:
                h = T.concat([h, _cond_maps(vecs, size, size)], axis=1)
            h = F.conv2d_transpose(h, params[f"conv{i}.w"], stride=2, padding=1)
            h = F.bias_add(h, params[f"conv{i}.b"])
            size *= 2
            if i < n_convs - 1:
                h = F.relu(_bn(params, f"bn{i + 1}", h, cfg, train, update_stats))
        return T.tanh(h)

    width = cfg.widths[0]
    h = T.reshape(h, (n, width, 4, 4))
    size = 4
    for i in range(int(np.log2(cfg.gen_resolution)) - 2):
        h = _res_block_forward(params, f"block{i}", h, vecs, cfg, train, update_stats, up=True, norm=True)
        size *= 2
    h = F.relu(_bn(params, "bn_out", h, cfg, train, update_stats))
    if lc:
        h = T.concat([h, _cond_maps(vecs, size, size)], axis=1)
    h = F.bias_add(F.conv2d(h, params["conv_out.w"], stride=1, padding=1), params["conv_out.b"])
    return T.tanh(h)


def discriminator_forward(
    params: dict[str, Tensor],
    cfg: ModelConfig,
    x,
    labels=None,
    train: bool = True,
    update_stats: bool = False,
):
    """Score an image batch; returns (N,) scores, or (scores, k logits) in AC mode."""
    xt = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
    if xt.ndim != 4:
        raise ValueError(f"image batch must be 4-D, got {xt.shape}")
    if xt.shape[2] != cfg.disc_resolution or xt.shape[3] != cfg.disc_resolution:
        raise ValueError(f"image batch is {xt.shape[2]}x{xt.shape[3]}, expected {cfg.disc_resolution}")
    n = xt.shape[0]
    lc = cfg.conditioning == "lc"
    vecs = label_vectors(labels, cfg.k, n) if lc else None

    if cfg.arch == "dcgan":
        h = xt
        size = xt.shape[2]
        for i in range(len(_disc_widths(cfg))):
            if lc:
                h = T.concat([h, _cond_maps(vecs, size, size)], axis=1)
            h = F.bias_add(F.conv2d(h, params[f"conv{i}.w"], stride=2, padding=1), params[f"conv{i}.b"])
            size //= 2
            if i > 0:
                h = _bn(params, f"bn{i}", h, cfg, train, update_stats)
            h = T.leaky_relu(h, cfg.leak)
        feat = F.flatten(h)
        h = T.concat([feat, Tensor(vecs)], axis=1) if lc else feat
        score = F.linear(h, params["lin.w"], params["lin.b"])
    else:
        h = xt
        if lc:
            h = T.concat([h, _cond_maps(vecs, xt.shape[2], xt.shape[2])], axis=1)
        h = F.bias_add(F.conv2d(h, params["conv_in.w"], stride=1, padding=1), params["conv_in.b"])
        for i in range(int(np.log2(cfg.disc_resolution)) - 2):
            h = _res_block_forward(params, f"block{i}", h, vecs, cfg, train, update_stats, down=True, norm=False)
        h = F.relu(h)
        feat = F.global_mean_pool(h)
        h = T.concat([feat, Tensor(vecs)], axis=1) if lc else feat
        score = F.linear(h, params["lin.w"], params["lin.b"])

    if params["lin.w"].shape[1] == 1:
        score = T.reshape(score, (n,))
    if cfg.conditioning == "ac":
        logits = F.linear(feat, params["ac.w"], params["ac.b"])
        return score, logits
    return score


def _res_block_forward(params, name, x, vecs, cfg, train, update_stats, up=False, down=False, norm=True):
    """Residual block; conditioning maps feed only the residual-path convs."""
    lc = vecs is not None
    size = x.shape[2]

    h = x
    if norm:
        h = _bn(params, f"{name}.bn1", h, cfg, train, update_stats)
    h = F.relu(h)
    if up:
        h = F.upsample_nearest2x(h)
        size *= 2
    if lc:
        h = T.concat([h, _cond_maps(vecs, size, size)], axis=1)
    h = F.bias_add(F.conv2d(h, params[f"{name}.conv1.w"], stride=1, padding=1), params[f"{name}.conv1.b"])
    if norm:
        h = _bn(params, f"{name}.bn2", h, cfg, train, update_stats)
    h = F.relu(h)
    if lc:
        h = T.concat([h, _cond_maps(vecs, size, size)], axis=1)
    h = F.bias_add(F.conv2d(h, params[f"{name}.conv2.w"], stride=1, padding=1), params[f"{name}.conv2.b"])
    if down:
        h = F.avg_pool2x(h)

    # unconditional shortcut sees the raw input only
    s = x
    if up:
        s = F.upsample_nearest2x(s)
    s = F.bias_add(F.conv2d(s, params[f"{name}.skip.w"], stride=1, padding=0), params[f"{name}.skip.b"])
    if down:
        s = F.avg_pool2x(s)
    return T.add(s, h)


def resblock_lc_forward(x, labels, params: dict[str, Tensor], cfg: ModelConfig, name: str = "block0") -> Tensor:
    """Single layer-conditional residual block, exposed for direct use."""
    xt = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
    vecs = label_vectors(labels, cfg.k, xt.shape[0]) if cfg.conditioning == "lc" else None
    return _res_block_forward(params, name, xt, vecs, cfg, train=False, update_stats=False, norm=False)


# ---------------------------------------------------------------------------
# blur input pipeline


def blur_pipeline(x, sigma: float) -> Tensor:
    """Upscale 32 px inputs to 64 px (nearest) and blur; 64 px inputs blur directly."""
    xt = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if xt.ndim != 4:
        raise ValueError(f"image batch must be 4-D, got {xt.shape}")
    res = xt.shape[2]
    if xt.shape[3] != res or res not in (32, 64):
        raise ValueError(f"unsupported input resolution {xt.shape[2]}x{xt.shape[3]} for blur pipeline")
    if res == 32:
        xt = F.upsample_nearest2x(xt)
    return F.gaussian_blur2d(xt, sigma)


def downsample_area2x(x) -> Tensor:
    xt = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
    return F.avg_pool2x(xt)
