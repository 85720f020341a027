"""Model snapshots: everything a checkpoint carries, in one loadable value.

A snapshot bundles the model config, generator (and optionally discriminator)
parameters, any named direction vectors, and the cluster model. It is an
immutable value once loaded; inference shares it freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .clustering import ClusterModel
from .latent import DirectionVector
from .models import ModelConfig


@dataclass
class ModelSnapshot:
    config: ModelConfig
    g_params: dict[str, Tensor]
    d_params: dict[str, Tensor] | None = None
    directions: dict[str, DirectionVector] = field(default_factory=dict)
    cluster: ClusterModel | None = None
    meta: dict = field(default_factory=dict)

    def save(self, path) -> None:
        tensors: dict[str, np.ndarray] = {}
        for name, t in self.g_params.items():
            tensors[f"g.{name}"] = t.data
        if self.d_params:
            for name, t in self.d_params.items():
                tensors[f"d.{name}"] = t.data
        for name, d in self.directions.items():
            if "." in name or not name:
                raise ValueError(f"direction name {name!r} must be non-empty and dot-free")
            if d.z_offset is not None:
                tensors[f"direction.{name}.z"] = d.z_offset
            if d.label_offset is not None:
                tensors[f"direction.{name}.label"] = d.label_offset
            tensors[f"direction.{name}.counts"] = np.array([d.n_positive, d.n_negative], dtype=np.float32)
        if self.cluster is not None:
            tensors.update(self.cluster.to_tensors())
        meta = dict(self.meta)
        meta["model"] = self.config.to_dict()
        save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "ModelSnapshot":
        tensors, meta = load_checkpoint(path)
        if meta is None or "model" not in meta:
            raise ValueError(f"checkpoint {path} is missing its config sidecar")
        config = ModelConfig.from_dict(meta["model"])
        g_params: dict[str, Tensor] = {}
        d_params: dict[str, Tensor] = {}
        dir_parts: dict[str, dict] = {}
        cluster_parts: dict[str, np.ndarray] = {}
        for name, arr in tensors.items():
            if name.startswith("g."):
                g_params[name[2:]] = Tensor(arr)
            elif name.startswith("d."):
                d_params[name[2:]] = Tensor(arr)
            elif name.startswith("direction."):
                _, dname, part = name.split(".", 2)
                dir_parts.setdefault(dname, {})[part] = arr
            elif name.startswith("cluster."):
                cluster_parts[name] = arr
        directions = {}
        for dname, parts in sorted(dir_parts.items()):
            counts = parts.get("counts", np.zeros(2))
            directions[dname] = DirectionVector(
                name=dname,
                z_offset=parts.get("z"),
                label_offset=parts.get("label"),
                n_positive=int(counts[0]),
                n_negative=int(counts[1]),
            )
        cluster = ClusterModel.from_tensors(cluster_parts) if cluster_parts else None
        if not g_params:
            raise ValueError(f"checkpoint {path} holds no generator parameters")
        meta = {k: v for k, v in meta.items() if k != "model"}
        return cls(
            config=config,
            g_params=g_params,
            d_params=d_params or None,
            directions=directions,
            cluster=cluster,
            meta=meta,
        )
