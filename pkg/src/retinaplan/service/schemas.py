"""Pydantic request/response models for the planning service.

Response payloads are produced by the engine's own serializers; the models
here declare the wire shapes for validation and OpenAPI docs. Models that
mirror engine documents allow extra fields so the engine serializer stays
the single source of truth.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    status: Literal["ok"]
    engine_version: str


class SceneCreateResponse(BaseModel):
    id: str
    version: int


class SceneListResponse(BaseModel):
    scenes: list[str]


class SceneGetResponse(BaseModel):
    id: str
    version: int
    document: dict[str, Any]
    image_meta: Optional[dict[str, Any]] = None


class SceneUpdateRequest(BaseModel):
    document: dict[str, Any]
    expected_version: int = Field(ge=1)


class ExecutedTilt(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_deg: float
    beta_deg: float


class PixelTargetRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x_px: float
    y_px: float


class TargetResponse(BaseModel):
    model_config = ConfigDict(extra="allow")

    polar_deg: float
    azimuth_deg: float
    source: Literal["pixel", "polar"]
    compensated: bool


class TargetSpec(BaseModel):
    """Either a pixel click or a direct polar target."""

    model_config = ConfigDict(extra="forbid")

    x_px: Optional[float] = None
    y_px: Optional[float] = None
    polar_deg: Optional[float] = None
    azimuth_deg: Optional[float] = None

    def to_spec(self) -> dict[str, float]:
        if self.x_px is not None and self.y_px is not None:
            return {"x_px": self.x_px, "y_px": self.y_px}
        if self.polar_deg is not None and self.azimuth_deg is not None:
            return {"polar_deg": self.polar_deg, "azimuth_deg": self.azimuth_deg}
        raise ValueError("target needs x_px/y_px or polar_deg/azimuth_deg")


class PlanRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    targets: list[TargetSpec] = Field(min_length=1)
    executed_tilt: Optional[ExecutedTilt] = None


class PlanResponse(BaseModel):
    model_config = ConfigDict(extra="allow")

    kind: Literal["plan_record"]
    schema_version: int
    engine_version: str
    scene_id: str
    created_at: str
    inputs_hash: str
    centroid: dict[str, Any]
    tilt: dict[str, Any]
    approach: Optional[dict[str, Any]]
    joint_targets: list[dict[str, Any]]
    feasible: bool
    reasons: list[str]


class WhatIfRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["z_align", "eye_pose", "trocar_roll", "trocar_yaw",
                  "instr_trocar_offset"]
    magnitude: float
    targets: Optional[list[tuple[float, float]]] = None


class WhatIfResponse(BaseModel):
    model_config = ConfigDict(extra="allow")

    kind: str
    magnitude: float
    unit: Literal["deg", "mm"]
    delta_theta2_deg: Optional[float]
    delta_theta4_deg: Optional[float]
    delta_depth_mm: Optional[float]
    excluded: int
    per_target: list[dict[str, Any]]


class OverlayResponse(BaseModel):
    model_config = ConfigDict(extra="allow")

    grid_meta: dict[str, Any]
    context: dict[str, Any]
    masks: dict[str, list[int]]
    area_fractions: dict[str, float]


class ErrorBody(BaseModel):
    code: str
    detail: str


class ErrorResponse(BaseModel):
    error: ErrorBody
