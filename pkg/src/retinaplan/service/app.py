"""HTTP API around the planning engine.

Planning is pure, so requests may be served concurrently; scene mutations go
through an optimistic version check (409 on conflict) guarded by a per-scene
lock. Engine errors map to machine-readable {error: {code, detail}} bodies.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from pathlib import Path

import cv2
import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..accessibility import (RetinalRegionSample, accessible_mask, make_grid,
                             overlay_payload, visible_mask)
from ..errorlab import whatif_row
from ..errors import ImageUnreadable, PlanningError, SceneInvalid
from ..fundus import load_image
from ..workflow import Workspace, plan, resolve_target
from . import schemas as api

ERROR_STATUS = {
    "scene_invalid": 422,
    "image_unreadable": 422,
    "out_of_field": 422,
    "boundary_not_found": 422,
    "version_conflict": 409,
    "unreachable": 422,
    "degenerate_approach": 422,
    "degenerate_geometry": 422,
}


def create_app(workspace_dir: str | Path,
               console_dir: str | Path | None = None) -> FastAPI:
    """Build the API app; ``console_dir`` optionally serves the static console."""
    app = FastAPI(title="retinaplan service", version=__version__)
    workspace = Workspace(workspace_dir)
    scene_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    @app.exception_handler(PlanningError)
    async def _planning_error(_, exc: PlanningError):
        status = ERROR_STATUS.get(exc.code, 400)
        if isinstance(exc, SceneInvalid) and "unknown scene id" in str(exc):
            status = 404
        return JSONResponse(status_code=status,
                            content={"error": {"code": exc.code,
                                               "detail": str(exc)}})

    @app.get("/health", response_model=api.HealthResponse)
    def health():
        return {"status": "ok", "engine_version": __version__}

    @app.post("/scenes", status_code=201, response_model=api.SceneCreateResponse)
    def create_scene(document: dict):
        scene_id, _ = workspace.create_scene(document)
        return {"id": scene_id, "version": 1}

    @app.get("/scenes", response_model=api.SceneListResponse)
    def list_scenes():
        return {"scenes": workspace.scene_ids()}

    @app.get("/scenes/{scene_id}", response_model=api.SceneGetResponse)
    def get_scene(scene_id: str):
        scene, version = workspace.load_scene(scene_id)
        image_meta = None
        if scene.image_config() is not None:
            meta = scene.image_meta()
            image_meta = {
                "width_px": meta.width_px, "height_px": meta.height_px,
                "view_angle_deg": meta.view_angle_deg,
                "detected_center_px": list(meta.detected_center_px),
                "detected_diameter_px": meta.detected_diameter_px,
                "mm_per_px": meta.mm_per_px,
            }
        return {"id": scene_id, "version": version,
                "document": scene.document, "image_meta": image_meta}

    @app.put("/scenes/{scene_id}", response_model=api.SceneCreateResponse)
    def update_scene(scene_id: str, request: api.SceneUpdateRequest):
        with scene_locks[scene_id]:
            version = workspace.update_scene(scene_id, request.document,
                                             request.expected_version)
        return {"id": scene_id, "version": version}

    @app.get("/scenes/{scene_id}/image")
    def get_scene_image(scene_id: str):
        scene, _ = workspace.load_scene(scene_id)
        if scene.image_config() is None:
            raise SceneInvalid("scene has no image configured")
        raster = load_image(scene.image_path())
        ok, png = cv2.imencode(".png", raster)
        if not ok:
            raise ImageUnreadable("could not encode scene image as PNG")
        return Response(content=png.tobytes(), media_type="image/png")

    @app.post("/scenes/{scene_id}/targets", response_model=api.TargetResponse)
    def reconstruct_target(scene_id: str, request: api.PixelTargetRequest):
        scene, _ = workspace.load_scene(scene_id)
        target = resolve_target(scene, {"x_px": request.x_px,
                                        "y_px": request.y_px})
        return target.to_fragment()

    @app.post("/scenes/{scene_id}/plan", response_model=api.PlanResponse)
    def plan_scene(scene_id: str, request: api.PlanRequest):
        scene, _ = workspace.load_scene(scene_id)
        executed = (request.executed_tilt.model_dump()
                    if request.executed_tilt else None)
        record = plan(scene, [t.to_spec() for t in request.targets],
                      executed_tilt=executed)
        workspace.save_plan(record)
        return record.document()

    @app.get("/scenes/{scene_id}/overlay", response_model=api.OverlayResponse)
    def overlay(scene_id: str, plan_hash: str | None = None,
                polar_deg: float = 180.0, azimuth_deg: float = 0.0):
        """Accessibility overlay for a planned context.

        With ``plan_hash`` the stored plan's context is reused; otherwise a
        fresh single-target plan for (polar_deg, azimuth_deg) provides it.
        """
        scene, _ = workspace.load_scene(scene_id)
        if plan_hash is not None:
            doc = workspace.load_plan(f"plan-{plan_hash}")
            approach = doc["approach"]
            tilt = doc["tilt"]
            if approach is None:
                raise SceneInvalid("stored plan has no approach context")
            alpha, beta = tilt["alpha_deg"], tilt["beta_deg"]
            trocar_after = approach["trocar_world_mm"]
            theta_ini = approach["theta_ini_deg"]
            p0 = approach["p0_mm"]
            context = {"plan_hash": plan_hash}
        else:
            record = plan(scene, [{"polar_deg": polar_deg,
                                   "azimuth_deg": azimuth_deg}])
            if record.approach is None:
                raise SceneInvalid("overlay context could not be planned")
            alpha, beta = record.effective_tilt
            trocar_after = record.approach.trocar_after
            theta_ini = record.approach.theta_ini_deg
            p0 = record.sweep.p0_mm
            context = {"polar_deg": polar_deg, "azimuth_deg": azimuth_deg}
        eye = scene.eye()
        working = scene.pcjm().working_angle(p0)
        grid = make_grid()
        trocar_after = np.asarray(trocar_after, dtype=float)
        sample = RetinalRegionSample(
            grid=grid,
            visible=visible_mask(grid, alpha, beta, scene.view_angle_deg(), eye),
            accessible=accessible_mask(grid, alpha, beta, trocar_after,
                                       theta_ini, working,
                                       scene.theta4_limit_deg(), eye))
        context.update({"alpha_deg": alpha, "beta_deg": beta,
                        "theta_ini_deg": theta_ini, "p0_mm": p0})
        return overlay_payload(sample, context)

    @app.post("/scenes/{scene_id}/whatif", response_model=api.WhatIfResponse)
    def whatif(scene_id: str, request: api.WhatIfRequest):
        scene, _ = workspace.load_scene(scene_id)
        return whatif_row(scene, request.kind, request.magnitude,
                          targets=request.targets)

    if console_dir is not None and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app
