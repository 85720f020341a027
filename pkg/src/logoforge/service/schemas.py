"""Wire-protocol request/response models.

Request field vocabulary is fixed: op, z, z2, label, soft_label, amount,
count, steps, seed, cluster, direction, space. Unknown fields are rejected so
malformed requests fail loudly instead of being silently ignored.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class BaseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: str | None = None
    seed: int | None = None


class GenerateRequest(BaseRequest):
    count: int = Field(default=1, ge=1, le=256)
    cluster: int | None = None


class VicinityRequest(BaseRequest):
    z: list[float]
    label: int | None = None
    soft_label: list[float] | None = None
    amount: float = Field(default=1.0 / 3.0, ge=0.0, le=1.0)
    count: int = Field(default=8, ge=1, le=64)


class InterpolateRequest(BaseRequest):
    z: list[float]
    z2: list[float]
    steps: int | None = Field(default=None, ge=2, le=256)
    amount: float | None = Field(default=None, ge=0.0, le=1.0)
    label: int | None = None
    soft_label: list[float] | None = None
    cluster: int | None = None


class TransferRequest(BaseRequest):
    z: list[float]
    label: int | None = None
    soft_label: list[float] | None = None
    cluster: int | None = None


class DirectionApplyRequest(BaseRequest):
    z: list[float]
    direction: str
    amount: float = Field(default=1.0, ge=-4.0, le=4.0)
    space: str = "latent"
    label: int | None = None
    soft_label: list[float] | None = None


class ImageItem(BaseModel):
    image: str  # base64-encoded PNG
    z: list[float]
    label: int | None = None
    soft_label: list[float] | None = None
    raw: list | None = None  # float tensor, debug only


class OpResponse(BaseModel):
    op: str
    seed: int
    items: list[ImageItem]


class InfoResponse(BaseModel):
    latent_dim: int
    k: int
    resolution: int
    conditioning: str


class DirectionInfo(BaseModel):
    name: str
    has_z: bool
    has_label: bool
    n_positive: int
    n_negative: int


class DirectionListResponse(BaseModel):
    directions: list[DirectionInfo]


class ErrorResponse(BaseModel):
    error: str
