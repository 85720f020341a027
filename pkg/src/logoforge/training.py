"""Adversarial losses and the two training loops.

DCGAN stack: stabilized BCE losses, batch norm in both players, and the
3-generator-steps-per-discriminator-step schedule. Residual stack: Wasserstein
critic with gradient penalty, 5 critic steps per generator step. Both decay
the learning rate linearly from its initial value to zero over the run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import GradTape, NonFiniteError, Tensor, backward, init_adam, adam_step, lr_linear_decay
from .autodiff import tensor as T
from .data import PackedDataset
from .models import (
    ModelConfig,
    blur_pipeline,
    discriminator_forward,
    generator_forward,
    init_discriminator,
    init_generator,
    trainable,
)
from .snapshot import ModelSnapshot


@dataclass
class TrainingConfig:
    total_iters: int = 2000
    batch_size: int = 64
    lr0: float = 4e-4
    critic_steps: int = 5
    gen_steps: int = 3
    gp_lambda: float = 10.0
    ac_weight: float = 1.0
    seed: int = 0
    checkpoint_interval: int = 1000
    beta1: float = 0.5
    beta2_dcgan: float = 0.999
    beta2_critic: float = 0.9
    lr_decay: bool = True

    def __post_init__(self):
        for name in ("total_iters", "batch_size", "critic_steps", "gen_steps", "checkpoint_interval"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gp_lambda < 0:
            raise ValueError("gp_lambda must be >= 0")


@dataclass
class TrainResult:
    metrics: list[dict]
    checkpoints: list[Path]
    g_params: dict
    d_params: dict
    aborted: bool = False
    abort_reason: str = ""

    @property
    def final_checkpoint(self) -> Path | None:
        return self.checkpoints[-1] if self.checkpoints else None


class TrainingDiverged(RuntimeError):
    def __init__(self, reason: str, result: TrainResult):
        super().__init__(reason)
        self.result = result


# ---------------------------------------------------------------------------
# losses


def dcgan_losses(d_real: Tensor, d_fake: Tensor) -> tuple[Tensor, Tensor]:
    """Stabilized BCE pair on pre-sigmoid logits.

    d_loss = BCE(real -> 1) + BCE(fake -> 0); g_loss = BCE(fake -> 1),
    written as softplus so no exp can overflow.
    """
    d_loss = T.add(T.mean(T.softplus(T.neg(d_real))), T.mean(T.softplus(d_fake)))
    g_loss = T.mean(T.softplus(T.neg(d_fake)))
    return d_loss, g_loss


def wgan_gp_critic_loss(d_real: Tensor, d_fake: Tensor, interp_grad_norms: Tensor, gp_lambda: float) -> Tensor:
    """mean(fake) - mean(real) + lambda * mean((||grad|| - 1)^2)."""
    wass = T.add(T.mean(d_fake), T.neg(T.mean(d_real)))
    if gp_lambda == 0.0:
        return wass
    pen = T.mean(T.pow_const(T.add(interp_grad_norms, -1.0), 2.0))
    return T.add(wass, T.mul(pen, gp_lambda))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean CE of integer labels under log-softmax (max-shifted for stability)."""
    n, k = logits.shape
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range for k={k}")
    shift = Tensor(logits.data.max(axis=1, keepdims=True))  # constant, gradient-free
    centered = T.add(logits, T.neg(T.broadcast_to(shift, logits.shape)))
    lse = T.log(T.sum_(T.exp(centered), axis=1, keepdims=True))
    logp = T.add(centered, T.neg(T.broadcast_to(lse, logits.shape)))
    onehot = np.zeros((n, k), dtype=np.float32)
    onehot[np.arange(n), labels.astype(np.int64)] = 1.0
    return T.neg(T.mean(T.sum_(T.mul(logp, Tensor(onehot)), axis=1)))


def ac_loss_terms(class_logits_real: Tensor, class_logits_fake: Tensor, labels_real, labels_fake, ac_weight: float):
    """Auxiliary-classifier cross-entropies: (term for D, term for G).

    The discriminator pays for both real and fake classification; the
    generator pays for the fake term only.
    """
    ce_real = softmax_cross_entropy(class_logits_real, labels_real)
    ce_fake = softmax_cross_entropy(class_logits_fake, labels_fake)
    d_term = T.mul(T.add(ce_real, ce_fake), ac_weight)
    g_term = T.mul(ce_fake, ac_weight)
    return d_term, g_term


def interpolation_gradient_norms(d_params, cfg, x_real, x_fake, labels, tape, rng) -> Tensor:
    """Per-sample critic input-gradient norms on random interpolates.

    The backward pass is recorded on the live tape, so the resulting norms can
    be differentiated w.r.t. the critic parameters (the gradient penalty).
    """
    eps = rng.uniform(0.0, 1.0, (x_real.shape[0], 1, 1, 1)).astype(np.float32)
    mix = eps * np.asarray(x_real, dtype=np.float32) + (1.0 - eps) * np.asarray(x_fake, dtype=np.float32)
    x_hat = Tensor(mix, requires_grad=True)
    out = discriminator_forward(d_params, cfg, x_hat, labels, train=True)
    d_hat = out[0] if isinstance(out, tuple) else out
    (grad_x,) = backward(T.sum_(d_hat), tape, [x_hat], create_graph=True)
    flat = T.reshape(grad_x, (x_hat.shape[0], -1))
    return T.pow_const(T.sum_(T.mul(flat, flat), axis=1), 0.5)


# ---------------------------------------------------------------------------
# training loops


def _sample_labels(rng, labels, batch):
    idx = rng.integers(0, len(labels), size=batch)
    return labels[idx]


def train_run(
    dataset: PackedDataset,
    labels: np.ndarray | None,
    model_cfg: ModelConfig,
    train_cfg: TrainingConfig,
    out_dir=None,
    probe=None,
    probe_every: int = 0,
) -> TrainResult:
    """Full adversarial training run; emits periodic checkpoints and a metrics log.

    The schedule follows the architecture: the DCGAN stack runs `gen_steps`
    generator updates per discriminator update; the residual stack runs
    `critic_steps` critic updates per generator update with gradient penalty.
    On a non-finite loss the run aborts, keeping the last good checkpoint.

    `probe(iteration, g_params)` is called between iterations every
    `probe_every` steps (parameters must be treated as a read-only snapshot).
    """
    conditional = model_cfg.conditioning != "none"
    if conditional:
        if labels is None:
            raise ValueError("conditioning enabled but no labels supplied")
        labels = np.asarray(labels)
        if len(labels) != dataset.count:
            raise ValueError(f"labels length {len(labels)} != dataset length {dataset.count}")
        if labels.max() >= model_cfg.k:
            raise ValueError(f"label {labels.max()} out of range for k={model_cfg.k}")

    rng = np.random.default_rng(train_cfg.seed)
    g_params = init_generator(model_cfg, rng)
    d_params = init_discriminator(model_cfg, rng)
    g_train, d_train = trainable(g_params), trainable(d_params)
    is_dcgan = model_cfg.arch == "dcgan"
    beta2 = train_cfg.beta2_dcgan if is_dcgan else train_cfg.beta2_critic
    g_opt = init_adam(g_train, beta1=train_cfg.beta1, beta2=beta2)
    d_opt = init_adam(d_train, beta1=train_cfg.beta1, beta2=beta2)

    images = dataset.to_float()
    n = len(images)
    batch = train_cfg.batch_size
    blur = model_cfg.blur_sigma > 0

    out_dir = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out_dir / "metrics.jsonl", "w")

    metrics: list[dict] = []
    checkpoints: list[Path] = []

    def data_batch():
        idx = rng.integers(0, n, size=batch)
        x = images[idx]
        lab = labels[idx] if conditional else None
        return x, lab

    def gen_batch(lab=None):
        z = (
            rng.standard_normal((batch, model_cfg.latent_dim)).astype(np.float32)
            if model_cfg.prior == "gaussian"
            else rng.uniform(-1, 1, (batch, model_cfg.latent_dim)).astype(np.float32)
        )
        if conditional and lab is None:
            lab = _sample_labels(rng, labels, batch)
        return z, lab

    def to_disc_input(x):
        # blur path sees 64 px images; generator output is already 64 px native
        if not blur:
            return x
        return blur_pipeline(x, model_cfg.blur_sigma)

    def save_ckpt(tag):
        if out_dir is None:
            return None
        snap = ModelSnapshot(
            config=model_cfg,
            g_params=g_params,
            d_params=d_params,
            meta={"iteration": tag, "seed": train_cfg.seed},
        )
        path = out_dir / (f"ckpt_{tag:06d}.ckpt" if isinstance(tag, int) else f"ckpt_{tag}.ckpt")
        snap.save(path)
        checkpoints.append(path)
        return path

    def emit(rec):
        metrics.append(rec)
        if metrics_fh is not None:
            metrics_fh.write(json.dumps(rec) + "\n")
            metrics_fh.flush()

    def finalize(aborted=False, reason=""):
        if metrics_fh is not None:
            metrics_fh.close()
        return TrainResult(
            metrics=metrics,
            checkpoints=checkpoints,
            g_params=g_params,
            d_params=d_params,
            aborted=aborted,
            abort_reason=reason,
        )

    for it in range(train_cfg.total_iters):
        lr = lr_linear_decay(train_cfg.lr0, it, train_cfg.total_iters) if train_cfg.lr_decay else train_cfg.lr0
        t0 = time.perf_counter()
        try:
            if is_dcgan:
                d_loss_v, g_loss_v, gp_v = _dcgan_iteration(
                    g_params, d_params, g_train, d_train, g_opt, d_opt,
                    model_cfg, train_cfg, data_batch, gen_batch, to_disc_input, lr,
                )
            else:
                d_loss_v, g_loss_v, gp_v = _wgan_iteration(
                    g_params, d_params, g_train, d_train, g_opt, d_opt,
                    model_cfg, train_cfg, data_batch, gen_batch, to_disc_input, lr, rng,
                )
        except (NonFiniteError, FloatingPointError) as exc:
            emit({"iter": it, "d_loss": None, "g_loss": None, "gp": None, "lr": lr,
                  "wall_ms": (time.perf_counter() - t0) * 1e3, "error": str(exc)})
            return finalize(aborted=True, reason=f"non-finite loss at iteration {it}: {exc}")

        emit({
            "iter": it,
            "d_loss": d_loss_v,
            "g_loss": g_loss_v,
            "gp": gp_v,
            "lr": lr,
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        })
        if probe is not None and probe_every > 0 and (it + 1) % probe_every == 0:
            probe(it + 1, g_params)
        if (it + 1) % train_cfg.checkpoint_interval == 0 and it + 1 < train_cfg.total_iters:
            save_ckpt(it + 1)

    save_ckpt("final")
    return finalize()


def _dcgan_iteration(g_params, d_params, g_train, d_train, g_opt, d_opt,
                     model_cfg, train_cfg, data_batch, gen_batch, to_disc_input, lr):
    ac = model_cfg.conditioning == "ac"

    # one discriminator step
    with GradTape() as tape:
        x_real, lab_real = data_batch()
        z, lab_fake = gen_batch()
        fake = generator_forward(g_params, model_cfg, z, lab_fake, train=True, update_stats=False)
        real_in = to_disc_input(Tensor(x_real))
        fake_in = to_disc_input(fake)
        out_r = discriminator_forward(d_params, model_cfg, real_in, lab_real, train=True, update_stats=True)
        out_f = discriminator_forward(d_params, model_cfg, fake_in, lab_fake, train=True, update_stats=True)
        if ac:
            (d_real, logits_r), (d_fake, logits_f) = out_r, out_f
        else:
            d_real, d_fake = out_r, out_f
        d_loss, _ = dcgan_losses(d_real, d_fake)
        if ac:
            d_term, _ = ac_loss_terms(logits_r, logits_f, lab_real, lab_fake, train_cfg.ac_weight)
            d_loss = T.add(d_loss, d_term)
        grads = backward(d_loss, tape, list(d_train.values()))
    adam_step(d_train, dict(zip(d_train.keys(), grads)), d_opt, lr)
    d_loss_v = float(d_loss.data)

    # gen_steps generator steps
    g_loss_v = 0.0
    for _ in range(train_cfg.gen_steps):
        with GradTape() as tape:
            z, lab_fake = gen_batch()
            fake = generator_forward(g_params, model_cfg, z, lab_fake, train=True, update_stats=True)
            out_f = discriminator_forward(d_params, model_cfg, to_disc_input(fake), lab_fake, train=True, update_stats=False)
            if ac:
                d_fake, logits_f = out_f
            else:
                d_fake = out_f
            g_loss = T.mean(T.softplus(T.neg(d_fake)))
            if ac:
                _, g_term = ac_loss_terms(logits_f, logits_f, lab_fake, lab_fake, train_cfg.ac_weight)
                g_loss = T.add(g_loss, g_term)
            grads = backward(g_loss, tape, list(g_train.values()))
        adam_step(g_train, dict(zip(g_train.keys(), grads)), g_opt, lr)
        g_loss_v = float(g_loss.data)

    return d_loss_v, g_loss_v, 0.0


def _wgan_iteration(g_params, d_params, g_train, d_train, g_opt, d_opt,
                    model_cfg, train_cfg, data_batch, gen_batch, to_disc_input, lr, rng):
    ac = model_cfg.conditioning == "ac"

    d_loss_v = gp_v = 0.0
    for _ in range(train_cfg.critic_steps):
        with GradTape() as tape:
            x_real, lab_real = data_batch()
            z, lab_fake = gen_batch(lab_real)
            fake = generator_forward(g_params, model_cfg, z, lab_fake, train=True, update_stats=False)
            real_in = to_disc_input(Tensor(x_real))
            fake_in = to_disc_input(fake)
            out_r = discriminator_forward(d_params, model_cfg, real_in, lab_real, train=True)
            out_f = discriminator_forward(d_params, model_cfg, fake_in, lab_fake, train=True)
            if ac:
                (d_real, logits_r), (d_fake, logits_f) = out_r, out_f
            else:
                d_real, d_fake = out_r, out_f
            norms = interpolation_gradient_norms(
                d_params, model_cfg, real_in.data, fake_in.data, lab_real, tape, rng
            )
            d_loss = wgan_gp_critic_loss(d_real, d_fake, norms, train_cfg.gp_lambda)
            if ac:
                d_term, _ = ac_loss_terms(logits_r, logits_f, lab_real, lab_fake, train_cfg.ac_weight)
                d_loss = T.add(d_loss, d_term)
            grads = backward(d_loss, tape, list(d_train.values()))
        adam_step(d_train, dict(zip(d_train.keys(), grads)), d_opt, lr)
        d_loss_v = float(d_loss.data)
        gp_v = float(np.mean((norms.data - 1.0) ** 2))

    with GradTape() as tape:
        z, lab_fake = gen_batch()
        fake = generator_forward(g_params, model_cfg, z, lab_fake, train=True, update_stats=True)
        out_f = discriminator_forward(d_params, model_cfg, to_disc_input(fake), lab_fake, train=True)
        if ac:
            d_fake, logits_f = out_f
        else:
            d_fake = out_f
        g_loss = T.neg(T.mean(d_fake))
        if ac:
            _, g_term = ac_loss_terms(logits_f, logits_f, lab_fake, lab_fake, train_cfg.ac_weight)
            g_loss = T.add(g_loss, g_term)
        grads = backward(g_loss, tape, list(g_train.values()))
    adam_step(g_train, dict(zip(g_train.keys(), grads)), g_opt, lr)
    g_loss_v = float(g_loss.data)

    return d_loss_v, g_loss_v, gp_v


# ---------------------------------------------------------------------------
# sampling from a trained model


def sample_images(g_params, model_cfg: ModelConfig, z, labels=None) -> np.ndarray:
    """Generate at the data resolution: blur-mode 64 px output is area-downsampled."""
    out = generator_forward(g_params, model_cfg, z, labels, train=False)
    if model_cfg.gen_resolution != model_cfg.resolution:
        from .models import downsample_area2x

        out = downsample_area2x(out)
    return out.data
