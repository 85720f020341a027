"""Mode-collapse contrast study: unconditional DCGAN vs DCGAN-LC over seeds.

Trains the same configuration with and without layer conditioning across a
set of seeds (constant learning rate, the unstable baseline regime) and
probes generated mode entropy along the run via the nearest-centroid oracle
classifier. An unconditional run "exhibits mode collapse" when its entropy
ratio dips below the collapse threshold at any post-warmup probe; a
conditional run "retains" entropy when its final ratio stays at or above the
retain threshold. Emits a JSON report with full trajectories; every threshold
is a configurable parameter, not a hard-coded judgment.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import mode_centroids, nearest_centroid_classify, synth_logo_corpus
from .models import ModelConfig
from .training import TrainingConfig, sample_images, train_run


@dataclass
class StabilityConfig:
    modes: int = 8
    corpus_size: int = 4096
    resolution: int = 16
    corpus_seed: int = 200
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    iters: int = 1000
    batch_size: int = 32
    lr0: float = 2e-3
    beta1: float = 0.9
    lr_decay: bool = False      # constant lr: the unstable-baseline regime
    latent_dim: int = 32
    widths: tuple[int, ...] = (24, 48)
    eval_samples: int = 512
    probe_every: int = 100
    warmup_fraction: float = 0.3  # probes before this point don't count as collapse
    collapse_threshold: float = 0.5   # entropy ratio below this = collapsed
    retain_threshold: float = 0.9     # final entropy ratio at/above this = retained
    min_collapsed_unconditional: int = 3
    min_retained_conditional: int = 4
    workers: int = 2


def _entropy(hist: np.ndarray) -> float:
    p = hist / hist.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _one_run(args) -> dict:
    cfg_dict, conditioning, seed = args
    scfg = StabilityConfig(**cfg_dict)
    scfg.widths = tuple(scfg.widths)
    scfg.seeds = tuple(scfg.seeds)
    ds, labels = synth_logo_corpus(scfg.corpus_size, resolution=scfg.resolution, modes=scfg.modes, seed=scfg.corpus_seed)
    cents = mode_centroids(ds, labels, scfg.modes)
    data_entropy = _entropy(np.bincount(labels, minlength=scfg.modes).astype(float))

    model_cfg = ModelConfig(
        arch="dcgan",
        resolution=scfg.resolution,
        latent_dim=scfg.latent_dim,
        k=scfg.modes if conditioning != "none" else 1,
        conditioning=conditioning,
        widths=scfg.widths,
    )
    train_cfg = TrainingConfig(
        total_iters=scfg.iters,
        batch_size=scfg.batch_size,
        lr0=scfg.lr0,
        seed=seed,
        checkpoint_interval=10**9,
        beta1=scfg.beta1,
        lr_decay=scfg.lr_decay,
    )

    trajectory: list[float] = []

    def probe(_iteration, g_params):
        rng = np.random.default_rng(10_000 + seed)
        z = rng.standard_normal((scfg.eval_samples, scfg.latent_dim)).astype(np.float32)
        lab = rng.integers(0, scfg.modes, scfg.eval_samples) if conditioning != "none" else None
        imgs = sample_images(g_params, model_cfg, z, lab)
        pred = nearest_centroid_classify(imgs, cents)
        trajectory.append(_entropy(np.bincount(pred, minlength=scfg.modes).astype(float)) / data_entropy)

    result = train_run(ds, labels if conditioning != "none" else None, model_cfg, train_cfg,
                       probe=probe, probe_every=scfg.probe_every)
    rec = {"conditioning": conditioning, "seed": seed, "aborted": result.aborted, "trajectory": trajectory}
    if result.aborted or not trajectory:
        # divergence counts as the most severe instability
        rec["min_post_warmup"] = 0.0
        rec["final"] = 0.0
        return rec
    warmup_probes = int(np.ceil(scfg.warmup_fraction * scfg.iters / scfg.probe_every))
    post = trajectory[warmup_probes:] or trajectory[-1:]
    rec["min_post_warmup"] = float(min(post))
    rec["final"] = float(trajectory[-1])
    return rec


def run_stability_study(config: StabilityConfig | None = None, report_path=None) -> dict:
    """Train every (conditioning, seed) pair and assemble the contrast report."""
    scfg = config or StabilityConfig()
    jobs = [(asdict(scfg), cond, seed) for cond in ("none", "lc") for seed in scfg.seeds]
    if scfg.workers > 1:
        with ProcessPoolExecutor(max_workers=scfg.workers) as pool:
            runs = list(pool.map(_one_run, jobs))
    else:
        runs = [_one_run(j) for j in jobs]

    uncond = [r for r in runs if r["conditioning"] == "none"]
    cond = [r for r in runs if r["conditioning"] == "lc"]
    collapsed = sum(1 for r in uncond if r["min_post_warmup"] < scfg.collapse_threshold)
    retained = sum(1 for r in cond if r["final"] >= scfg.retain_threshold)
    report = {
        "config": asdict(scfg),
        "runs": runs,
        "unconditional_collapsed": collapsed,
        "conditional_retained": retained,
        "unconditional_pass": collapsed >= scfg.min_collapsed_unconditional,
        "conditional_pass": retained >= scfg.min_retained_conditional,
    }
    report["pass"] = report["unconditional_pass"] and report["conditional_pass"]
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=2))
    return report
