"""Command-line interface.

Data preparation, training, clustering, and evaluation run locally. The
latent-space commands (sample / interpolate / transfer / vicinity / direction)
are thin clients of the service protocol: they build the same request models
and either POST them to a running server (--server) or dispatch them in
process against a loaded checkpoint (--checkpoint).
"""

import os

# single-threaded BLAS measured faster for this workload; set before numpy loads
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import base64
import json
import sys
from pathlib import Path

import click
import numpy as np


def _echo_json(obj):
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


@click.group()
def main():
    """logoforge: clustered-GAN logo synthesis toolkit."""


# ---------------------------------------------------------------------------
# data


@main.group()
def data():
    """Dataset packing, cleanup, and the synthetic corpus."""


@data.command("pack")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--resize", type=int, default=None, help="Rescale square images to this size.")
def data_pack(directory, out, resize):
    from .data import pack_images

    ds, report = pack_images(directory, resize=resize)
    ds.save(out)
    _echo_json(report)


@data.command("dedup")
@click.argument("pack_in", type=click.Path(exists=True, dir_okay=False))
@click.argument("pack_out", type=click.Path(dir_okay=False))
def data_dedup(pack_in, pack_out):
    from .data import PackedDataset, dedup_exact

    ds, removed = dedup_exact(PackedDataset.load(pack_in))
    ds.save(pack_out)
    _echo_json({"kept": ds.count, "removed": removed})


@data.command("sort")
@click.argument("pack_in", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the index order as JSON.")
@click.option("--apply", "apply_to", type=click.Path(dir_okay=False), default=None, help="Write a reordered pack.")
def data_sort(pack_in, out, apply_to):
    from .data import PackedDataset, complexity_sort

    ds = PackedDataset.load(pack_in)
    order = complexity_sort(ds)
    if out:
        Path(out).write_text(json.dumps([int(i) for i in order]))
    if apply_to:
        PackedDataset(ds.pixels[order].copy()).save(apply_to)
    click.echo(f"sorted {ds.count} images by compressed size (ascending)")


@data.command("filter")
@click.argument("pack_in", type=click.Path(exists=True, dir_okay=False))
@click.argument("pack_out", type=click.Path(dir_okay=False))
@click.option("--threshold", type=int, required=True, help="Minimum white-pixel count to keep an image.")
def data_filter(pack_in, pack_out, threshold):
    from .data import PackedDataset, white_pixel_filter

    ds = PackedDataset.load(pack_in)
    kept = white_pixel_filter(ds, np.arange(ds.count), threshold)
    PackedDataset(ds.pixels[kept].copy()).save(pack_out)
    _echo_json({"kept": int(len(kept)), "removed": int(ds.count - len(kept))})


@data.command("synth")
@click.option("--n", type=int, default=4096)
@click.option("--resolution", type=int, default=16)
@click.option("--modes", type=int, default=4)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--labels-out", type=click.Path(dir_okay=False), default=None)
def data_synth(n, resolution, modes, seed, out, labels_out):
    from .clustering import save_labels
    from .data import synth_logo_corpus

    ds, labels = synth_logo_corpus(n, resolution=resolution, modes=modes, seed=seed)
    ds.save(out)
    if labels_out:
        save_labels(labels_out, labels, modes)
    _echo_json({"count": ds.count, "resolution": resolution, "modes": modes})


# ---------------------------------------------------------------------------
# clustering


@main.group()
def cluster():
    """Synthetic labels via AE latents or external feature vectors."""


@cluster.command("ae")
@click.option("--data", "pack_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=int, required=True)
@click.option("--m", type=int, default=64, help="PCA dimensionality.")
@click.option("--seed", type=int, default=0)
@click.option("--epochs", type=int, default=60)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Label file to write.")
def cluster_ae(pack_path, k, m, seed, epochs, out):
    from .clustering import ae_cluster_labels, save_labels
    from .data import PackedDataset

    ds = PackedDataset.load(pack_path)
    labels, model, _ = ae_cluster_labels(ds, k=k, m=m, seed=seed, ae_epochs=epochs)
    save_labels(out, labels, k)
    hist = np.bincount(labels, minlength=k).tolist()
    _echo_json({"labels": out, "k": k, "histogram": hist})


@cluster.command("rc")
@click.option("--features", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=int, required=True)
@click.option("--m", type=int, default=64)
@click.option("--seed", type=int, default=0)
@click.option("--count", type=int, default=None, help="Expected dataset size to validate against.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cluster_rc(features, k, m, seed, count, out):
    from .clustering import rc_cluster_labels

    labels, model = rc_cluster_labels(features, k=k, m=m, seed=seed, expected_count=count, labels_out=out)
    _echo_json({"labels": out, "k": k, "histogram": np.bincount(labels, minlength=k).tolist()})


# ---------------------------------------------------------------------------
# training


@main.command("train")
@click.option("--data", "pack_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--mode", type=click.Choice(["dcgan", "iwgan"]), default="dcgan")
@click.option("--cond", type=click.Choice(["none", "lc", "ac"]), default="lc")
@click.option("--k", type=int, default=None, help="Cluster count; defaults to the label file's k.")
@click.option("--iters", type=int, default=2000)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--batch", type=int, default=64)
@click.option("--lr", type=float, default=None, help="Defaults: 4e-4 dcgan, 2e-4 iwgan.")
@click.option("--latent-dim", type=int, default=None, help="Defaults: 512 dcgan, 128 iwgan.")
@click.option("--widths", type=str, default=None, help="Comma-separated stage widths.")
@click.option("--blur-sigma", type=float, default=0.0)
@click.option("--checkpoint-interval", type=int, default=1000)
def train_cmd(pack_path, labels_path, mode, cond, k, iters, seed, out_dir, batch, lr,
              latent_dim, widths, blur_sigma, checkpoint_interval):
    """Adversarial training; writes checkpoints and a metrics log to --out."""
    from .clustering import load_labels
    from .data import PackedDataset
    from .models import ModelConfig
    from .training import TrainingConfig, train_run

    ds = PackedDataset.load(pack_path)
    labels = None
    if labels_path:
        labels, file_k = load_labels(labels_path)
        k = k or file_k
    if cond != "none" and labels is None:
        raise click.UsageError("--labels is required when --cond is lc or ac")
    arch = "dcgan" if mode == "dcgan" else "resnet"
    cfg = ModelConfig(
        arch=arch,
        resolution=ds.width,
        latent_dim=latent_dim or (512 if arch == "dcgan" else 128),
        k=k or 1,
        conditioning=cond,
        widths=tuple(int(w) for w in widths.split(",")) if widths else (),
        blur_sigma=blur_sigma,
    )
    tcfg = TrainingConfig(
        total_iters=iters,
        batch_size=batch,
        lr0=lr or (4e-4 if arch == "dcgan" else 2e-4),
        seed=seed,
        checkpoint_interval=checkpoint_interval,
    )
    result = train_run(ds, labels, cfg, tcfg, out_dir=out_dir)
    summary = {
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
        "final_checkpoint": str(result.final_checkpoint) if result.final_checkpoint else None,
        "iterations": len(result.metrics),
    }
    _echo_json(summary)
    if result.aborted:
        sys.exit(1)


# ---------------------------------------------------------------------------
# evaluation


@main.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--metric", type=click.Choice(["score", "diversity"]), required=True)
@click.option("--n", type=int, default=1024, help="Generated sample count.")
@click.option("--seed", type=int, default=0)
@click.option("--data", "pack_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Labeled data to fit the pluggable classifier on (score metric).")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--splits", type=int, default=10)
@click.option("--pairs", type=int, default=200, help="Random pairs for the diversity metric.")
@click.option("--json-out", type=click.Path(dir_okay=False), default=None)
def eval_cmd(checkpoint, metric, n, seed, pack_path, labels_path, splits, pairs, json_out):
    """Classifier score or MS-SSIM diversity of generated samples."""
    from .clustering import load_labels
    from .data import PackedDataset
    from .metrics import classifier_score, classify_probs, diversity_score, train_mode_classifier
    from .snapshot import ModelSnapshot
    from .training import sample_images

    snap = ModelSnapshot.load(checkpoint)
    cfg = snap.config
    rng = np.random.default_rng(seed)

    def sample(count):
        z = rng.standard_normal((count, cfg.latent_dim)).astype(np.float32)
        labs = rng.integers(0, cfg.k, count) if cfg.conditioning != "none" else None
        return sample_images(snap.g_params, cfg, z, labs)

    if metric == "score":
        if not pack_path or not labels_path:
            raise click.UsageError("--data and --labels are required to fit the score classifier")
        ds = PackedDataset.load(pack_path)
        labels, k = load_labels(labels_path)
        clf, clf_cfg = train_mode_classifier(ds.to_float(), labels, k=k, seed=seed)
        probs = classify_probs(clf, clf_cfg, sample(n))
        report = classifier_score(probs, n_splits=splits)
    else:
        report = diversity_score(sample, n_samples=n, n_pairs=pairs, seed=seed)

    click.echo(report.line())
    if json_out:
        Path(json_out).write_text(json.dumps(report.to_dict()))


# ---------------------------------------------------------------------------
# service + latent ops (thin client)


@main.command("serve")
@click.option("--checkpoint", type=click.Path(dir_okay=False), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8765)
def serve_cmd(checkpoint, host, port):
    """Run the stateless inference service (LOGOFORGE_CHECKPOINT overrides --checkpoint)."""
    from .service import serve

    serve(checkpoint, host=host, port=port)


class Client:
    """Dispatches wire-protocol requests remotely (HTTP) or in process."""

    def __init__(self, server=None, checkpoint=None):
        self.server = server
        if server is None:
            from .service import resolve_checkpoint_path
            from .service import ops as _ops
            from .snapshot import ModelSnapshot

            self.ops = _ops
            self.snapshot = ModelSnapshot.load(resolve_checkpoint_path(checkpoint))

    def call(self, endpoint: str, payload: dict):
        if self.server:
            import httpx

            url = f"{self.server.rstrip('/')}{endpoint}"
            if endpoint in ("/info", "/direction/list"):
                r = httpx.get(url, timeout=120.0)
            else:
                r = httpx.post(url, json=payload, timeout=120.0)
            if r.status_code != 200:
                raise click.ClickException(f"server error {r.status_code}: {r.text[:300]}")
            return r.json()
        from .service.schemas import (
            DirectionApplyRequest,
            GenerateRequest,
            InterpolateRequest,
            TransferRequest,
            VicinityRequest,
        )

        table = {
            "/generate": (GenerateRequest, self.ops.generate),
            "/vicinity": (VicinityRequest, self.ops.vicinity),
            "/interpolate": (InterpolateRequest, self.ops.interpolate),
            "/transfer": (TransferRequest, self.ops.transfer),
            "/direction/apply": (DirectionApplyRequest, self.ops.direction_apply),
        }
        if endpoint == "/direction/list":
            return self.ops.direction_list(self.snapshot).model_dump()
        if endpoint == "/info":
            return self.ops.info(self.snapshot).model_dump()
        model, fn = table[endpoint]
        return fn(self.snapshot, model(**payload)).model_dump(exclude_none=True)


def _client_options(fn):
    fn = click.option("--server", default=None, help="Base URL of a running service.")(fn)
    fn = click.option("--checkpoint", type=click.Path(dir_okay=False), default=None)(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                      help="Directory for decoded PNGs.")(fn)
    return fn


def _deliver(resp: dict, out_dir, prefix: str):
    items = resp.get("items", [])
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, item in enumerate(items):
            (out / f"{prefix}_{i:03d}.png").write_bytes(base64.b64decode(item["image"]))
    slim = {k: v for k, v in resp.items() if k != "items"}
    slim["items"] = [{k: v for k, v in item.items() if k != "image"} for item in items]
    _echo_json(slim)


@main.command("sample")
@_client_options
@click.option("--count", type=int, default=8)
@click.option("--cluster", type=int, default=None)
@click.option("--seed", type=int, default=None)
def sample_cmd(server, checkpoint, out_dir, count, cluster, seed):
    """Generate random logos."""
    client = Client(server, checkpoint)
    resp = client.call("/generate", {"count": count, "cluster": cluster, "seed": seed})
    _deliver(resp, out_dir, "sample")


@main.command("interpolate")
@_client_options
@click.option("--z", "z_json", required=True, help="JSON list, or @file.json.")
@click.option("--z2", "z2_json", required=True)
@click.option("--steps", type=int, default=8)
@click.option("--label", type=int, default=None)
@click.option("--cluster", type=int, default=None)
def interpolate_cmd(server, checkpoint, out_dir, z_json, z2_json, steps, label, cluster):
    """Distribution-matched interpolation between two latents."""
    client = Client(server, checkpoint)
    resp = client.call("/interpolate", {
        "z": _load_vec(z_json), "z2": _load_vec(z2_json), "steps": steps,
        "label": label, "cluster": cluster,
    })
    _deliver(resp, out_dir, "interp")


@main.command("transfer")
@_client_options
@click.option("--z", "z_json", required=True)
@click.option("--label", type=int, default=None)
@click.option("--cluster", type=int, required=True, help="Target cluster.")
def transfer_cmd(server, checkpoint, out_dir, z_json, label, cluster):
    """Re-render the same latent under a different cluster."""
    client = Client(server, checkpoint)
    resp = client.call("/transfer", {"z": _load_vec(z_json), "label": label, "cluster": cluster})
    _deliver(resp, out_dir, "transfer")


@main.command("vicinity")
@_client_options
@click.option("--z", "z_json", required=True)
@click.option("--label", type=int, default=None)
@click.option("--amount", type=float, default=1.0 / 3.0)
@click.option("--count", type=int, default=8)
@click.option("--cross", is_flag=True, help="Redraw cluster labels per variant.")
@click.option("--seed", type=int, default=None)
def vicinity_cmd(server, checkpoint, out_dir, z_json, label, amount, count, cross, seed):
    """Perturb a latent a fixed fraction toward fresh prior draws."""
    client = Client(server, checkpoint)
    resp = client.call("/vicinity", {
        "z": _load_vec(z_json), "label": label, "amount": amount, "count": count,
        "seed": seed, "op": "vicinity_cross" if cross else "vicinity",
    })
    _deliver(resp, out_dir, "vicinity")


@main.group()
def direction():
    """Fit and apply semantic direction vectors."""


@direction.command("fit")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--name", required=True)
@click.option("--positives", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSON file: list of z vectors.")
@click.option("--negatives", type=click.Path(exists=True, dir_okay=False), required=True)
def direction_fit(checkpoint, name, positives, negatives):
    """Fit a mean-difference direction and store it in the checkpoint."""
    from .latent import direction_from_examples
    from .snapshot import ModelSnapshot

    snap = ModelSnapshot.load(checkpoint)
    pos = np.asarray(json.loads(Path(positives).read_text()), dtype=np.float32)
    neg = np.asarray(json.loads(Path(negatives).read_text()), dtype=np.float32)
    snap.directions[name] = direction_from_examples(pos, neg, name)
    snap.save(checkpoint)
    _echo_json({"direction": name, "n_positive": len(pos), "n_negative": len(neg)})


@direction.command("list")
@_client_options
def direction_list_cmd(server, checkpoint, out_dir):
    client = Client(server, checkpoint)
    _echo_json(client.call("/direction/list", {}))


@direction.command("apply")
@_client_options
@click.option("--z", "z_json", required=True)
@click.option("--name", required=True)
@click.option("--amount", type=float, default=1.0)
@click.option("--space", type=click.Choice(["latent", "label", "both"]), default="latent")
@click.option("--label", type=int, default=None)
def direction_apply_cmd(server, checkpoint, out_dir, z_json, name, amount, space, label):
    client = Client(server, checkpoint)
    resp = client.call("/direction/apply", {
        "z": _load_vec(z_json), "direction": name, "amount": amount, "space": space, "label": label,
    })
    _deliver(resp, out_dir, "direction")


@main.command("info")
@_client_options
def info_cmd(server, checkpoint, out_dir):
    client = Client(server, checkpoint)
    _echo_json(client.call("/info", {}))


def _load_vec(spec: str):
    if spec.startswith("@"):
        return json.loads(Path(spec[1:]).read_text())
    return json.loads(spec)


if __name__ == "__main__":
    main()
