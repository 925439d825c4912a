"""Plan orchestration: scenes, the target-to-joints pipeline and persistence.

A Scene bundles the eye model, trocar layout, robot configuration and an
optional calibrated image. ``plan`` runs the full pipeline for a batch of
targets: reconstruct targets, solve the eye tilt for the target centroid,
rotate the scene, pick the trocar, derive theta_ini / gamma / the actuator
initial position, then solve joint targets per point. Infeasible targets are
flagged with reasons and never abort the batch.

The pipeline is pure: identical inputs produce a byte-identical serialized
record (timestamp aside), which is why plan files are content-addressed by a
hash of their inputs. All angles serialize in degrees and lengths in mm,
rounded to 6 decimal places.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import (DegenerateApproach, SceneInvalid, Unreachable,
                     VersionConflict)
from .fundus import (AxisCompensation, FundusImageMeta, PixelTarget,
                     RetinalTarget, compensate_visual_axis,
                     detect_fundus_boundary, load_image, pixel_to_polar)
from .geometry import EyeModel, SphericalPoint, geodesic_angle_deg
from .posture import EyeTiltProposal, fov_center_after_tilt_cart, solve_eye_tilt
from .robot import JointTarget, PcjmModel, SweepResult, rcm_pose, solve_joint_target, sweep_initial_position
from .trocar import ApproachPlan, TrocarLayout, build_approach, rotate_scene

SCHEMA_VERSION = 1

DEFAULT_SCENE: dict = {
    "schema_version": SCHEMA_VERSION,
    "name": "scene",
    "eye": {"radius_mm": 12.1, "center": [0.0, 0.0, 0.0], "tilt_limit_deg": 10.0},
    "trocars": {"ring_polar_deg": 45.0, "side": "+y",
                "azimuth_offsets_deg": [-20.0, 0.0, 20.0]},
    "robot": {"stroke_mm": 13.5, "sweep_step_mm": 0.1,
              "effective_length_mm": 80.1, "theta4_limit_deg": 45.0,
              "theta_ini_band_deg": [15.0, 31.0],
              "instrument_length_mm": 35.0},
    "view_angle_deg": 60.0,
    "flags": {"apply_axis_compensation": False},
    "axis_compensation": {"kappa_deg": 5.0, "nodal_offset_mm": 16.4},
}


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------

def round_floats(value, ndigits: int = 6):
    """Recursively round floats so serialized documents are reproducible."""
    if isinstance(value, float):
        rounded = round(value, ndigits)
        return 0.0 if rounded == 0.0 else rounded  # fold -0.0
    if isinstance(value, dict):
        return {k: round_floats(v, ndigits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, ndigits) for v in value]
    if isinstance(value, np.ndarray):
        return [round_floats(float(v), ndigits) for v in value.ravel()]
    if isinstance(value, (np.floating,)):
        return round_floats(float(value), ndigits)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def canonical_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def content_hash(document: dict) -> str:
    return hashlib.sha256(canonical_json(document).encode("utf-8")).hexdigest()


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_schema(name: str) -> dict:
    with resources.files("retinaplan.schemas").joinpath(name).open("r") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# scene
# ---------------------------------------------------------------------------

@dataclass
class Scene:
    """Validated planning scene with parsed engine objects."""

    document: dict
    base_dir: Path | None = None
    _image_meta: FundusImageMeta | None = field(default=None, repr=False)

    @classmethod
    def from_document(cls, document: dict, base_dir: str | Path | None = None) -> "Scene":
        if not isinstance(document, dict):
            raise SceneInvalid("scene document must be a JSON object")
        normalized = _deep_merge(DEFAULT_SCENE, document)
        try:
            jsonschema.validate(normalized, load_schema("scene.schema.json"))
        except jsonschema.ValidationError as exc:
            raise SceneInvalid(f"scene schema violation: {exc.message}") from exc
        scene = cls(document=normalized,
                    base_dir=Path(base_dir) if base_dir is not None else None)
        scene.eye()  # fail fast on semantic problems
        scene.layout()
        scene.pcjm()
        if scene.image_config() is not None and not scene.image_path().is_file():
            raise SceneInvalid(f"referenced image does not exist: {scene.image_path()}")
        return scene

    @classmethod
    def from_file(cls, path: str | Path) -> "Scene":
        p = Path(path)
        if not p.is_file():
            raise SceneInvalid(f"scene file not found: {p}")
        try:
            document = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise SceneInvalid(f"scene file is not valid JSON: {p}") from exc
        return cls.from_document(document, base_dir=p.parent)

    # -- parsed views ------------------------------------------------------

    def eye(self) -> EyeModel:
        e = self.document["eye"]
        try:
            return EyeModel(radius_mm=e["radius_mm"], center=np.array(e["center"]),
                            tilt_limit_deg=e["tilt_limit_deg"])
        except ValueError as exc:
            raise SceneInvalid(str(exc)) from exc

    def layout(self) -> TrocarLayout:
        t = self.document["trocars"]
        try:
            return TrocarLayout(ring_polar_deg=t["ring_polar_deg"], side=t["side"],
                                azimuth_offsets_deg=tuple(t["azimuth_offsets_deg"]))
        except ValueError as exc:
            raise SceneInvalid(str(exc)) from exc

    def pcjm(self) -> PcjmModel:
        r = self.document["robot"]
        try:
            return PcjmModel(stroke_mm=r["stroke_mm"],
                             sweep_step_mm=r["sweep_step_mm"],
                             effective_length_mm=r["effective_length_mm"])
        except ValueError as exc:
            raise SceneInvalid(str(exc)) from exc

    def theta4_limit_deg(self) -> float:
        return float(self.document["robot"]["theta4_limit_deg"])

    def theta_ini_band_deg(self) -> tuple[float, float]:
        lo, hi = self.document["robot"]["theta_ini_band_deg"]
        return (float(lo), float(hi))

    def instrument_length_mm(self) -> float:
        return float(self.document["robot"]["instrument_length_mm"])

    def view_angle_deg(self) -> float:
        image = self.image_config()
        if image is not None and "view_angle_deg" in image:
            return float(image["view_angle_deg"])
        return float(self.document["view_angle_deg"])

    def apply_axis_compensation(self) -> bool:
        return bool(self.document["flags"]["apply_axis_compensation"])

    def axis_compensation(self) -> AxisCompensation:
        a = self.document["axis_compensation"]
        return AxisCompensation.for_eye(self.eye(), kappa_deg=a["kappa_deg"],
                                        nodal_offset_mm=a["nodal_offset_mm"])

    def image_config(self) -> dict | None:
        return self.document.get("image")

    def image_path(self) -> Path:
        image = self.image_config()
        if image is None:
            raise SceneInvalid("scene has no image configured")
        path = Path(image["path"])
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path

    def image_meta(self) -> FundusImageMeta:
        """Calibration of the scene image (detected once, cached)."""
        if self._image_meta is not None:
            return self._image_meta
        image = self.image_config()
        if image is None:
            raise SceneInvalid("pixel targets require a scene image")
        raster = load_image(self.image_path())
        manual_center = image.get("manual_center_px")
        manual_diameter = image.get("manual_diameter_px")
        if manual_center is not None and manual_diameter is not None:
            meta = FundusImageMeta.from_boundary(
                width_px=raster.shape[1], height_px=raster.shape[0],
                view_angle_deg=self.view_angle_deg(),
                center_px=tuple(manual_center), diameter_px=manual_diameter,
                eye=self.eye())
        else:
            meta = detect_fundus_boundary(raster, self.view_angle_deg(), self.eye())
        self._image_meta = meta
        return meta

    def scene_id(self) -> str:
        return "scn-" + content_hash(round_floats(self.document))[:12]


# ---------------------------------------------------------------------------
# plan record
# ---------------------------------------------------------------------------

@dataclass
class PlannedTarget:
    target: RetinalTarget
    world_after: np.ndarray
    joints: JointTarget | None
    visible: bool
    feasible: bool
    reasons: list[str]
    tip_error_mm: float | None


@dataclass
class PlanRecord:
    scene: Scene
    targets_in: list[dict]
    executed_tilt: dict | None
    targets: list[PlannedTarget]
    centroid: SphericalPoint
    proposal: EyeTiltProposal
    effective_tilt: tuple[float, float]
    approach: ApproachPlan | None
    sweep: SweepResult | None
    created_at: str
    reasons: list[str]

    @property
    def feasible(self) -> bool:
        return bool(self.targets) and all(t.feasible for t in self.targets) \
            and not self.reasons

    def inputs_document(self) -> dict:
        return round_floats({
            "scene": self.scene.document,
            "targets": self.targets_in,
            "executed_tilt": self.executed_tilt,
        })

    def inputs_hash(self) -> str:
        return content_hash(self.inputs_document())

    def document(self) -> dict:
        alpha, beta = self.effective_tilt
        doc = {
            "kind": "plan_record",
            "schema_version": SCHEMA_VERSION,
            "engine_version": __version__,
            "scene_id": self.scene.scene_id(),
            "created_at": self.created_at,
            "inputs": self.inputs_document(),
            "inputs_hash": self.inputs_hash(),
            "centroid": {"polar_deg": self.centroid.polar_deg,
                         "azimuth_deg": self.centroid.azimuth_deg},
            "tilt": {
                "alpha_deg": alpha, "beta_deg": beta,
                "proposed_alpha_deg": self.proposal.alpha_deg,
                "proposed_beta_deg": self.proposal.beta_deg,
                "raw_alpha_deg": self.proposal.raw_alpha_deg,
                "raw_beta_deg": self.proposal.raw_beta_deg,
                "clamped": self.proposal.clamped,
                "residual_mm": self.proposal.residual_mm,
                "executed_override": self.executed_tilt is not None,
            },
            "approach": None,
            "joint_targets": [],
            "feasible": self.feasible,
            "reasons": list(self.reasons),
        }
        if self.approach is not None and self.sweep is not None:
            setup_reasons = []
            if not self.approach.theta_ini_in_band:
                setup_reasons.append("theta_ini_out_of_band")
            if self.sweep.saturated:
                setup_reasons.append("p0_saturated")
            doc["approach"] = {
                "selected_trocar": self.approach.selected_index,
                "trocar_world_mm": list(self.approach.trocar_after),
                "theta_ini_deg": self.approach.theta_ini_deg,
                "theta_ini_in_band": self.approach.theta_ini_in_band,
                "gamma_deg": self.approach.gamma_deg,
                "p0_mm": self.sweep.p0_mm,
                "p0_saturated": self.sweep.saturated,
                "working_angle_deg": {
                    "min": self.sweep.working.min_deg,
                    "max": self.sweep.working.max_deg,
                    "center": self.sweep.working.center_deg,
                },
                "angle_span_delta_deg": self.sweep.angle_span_delta_deg,
                "feasible": not setup_reasons,
                "reasons": setup_reasons,
            }
        for planned in self.targets:
            entry = planned.target.to_fragment()
            entry["world_after_tilt_mm"] = list(planned.world_after)
            entry["visible"] = planned.visible
            entry["feasible"] = planned.feasible
            entry["reasons"] = list(planned.reasons)
            if planned.joints is not None:
                entry.update(planned.joints.to_fragment())
                entry["k_mm"] = planned.joints.k_mm
            if planned.tip_error_mm is not None:
                entry["tip_error_mm"] = planned.tip_error_mm
            doc["joint_targets"].append(entry)
        return round_floats(doc)

    def record_hash(self) -> str:
        doc = self.document()
        doc.pop("created_at", None)
        return content_hash(doc)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def resolve_target(scene: Scene, spec: dict) -> RetinalTarget:
    """Turn a target spec ({x_px, y_px} or {polar_deg, azimuth_deg}) into a target."""
    if "x_px" in spec and "y_px" in spec:
        meta = scene.image_meta()
        point = pixel_to_polar(PixelTarget(spec["x_px"], spec["y_px"]), meta,
                               scene.eye())
        compensated = scene.apply_axis_compensation()
        if compensated:
            point = compensate_visual_axis(point, scene.axis_compensation(),
                                           scene.eye())
        return RetinalTarget(point=point, source="pixel", compensated=compensated)
    if "polar_deg" in spec and "azimuth_deg" in spec:
        try:
            point = SphericalPoint(float(spec["polar_deg"]),
                                   float(spec["azimuth_deg"]))
        except ValueError as exc:
            raise SceneInvalid(str(exc)) from exc
        return RetinalTarget(point=point, source="polar", compensated=False)
    raise SceneInvalid(
        "target must provide x_px/y_px or polar_deg/azimuth_deg, got "
        f"{sorted(spec)}")


def _centroid(units: np.ndarray) -> np.ndarray:
    mean = units.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-9:
        raise SceneInvalid("targets are antipodal; centroid undefined")
    return mean / norm


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def plan(scene: Scene, targets_in: list[dict],
         executed_tilt: dict | None = None,
         created_at: str | None = None) -> PlanRecord:
    """Run the full planning pipeline for a batch of targets.

    One tilt / trocar / robot configuration is chosen for the centroid of the
    batch; joint targets are solved per point. When ``executed_tilt`` is given
    (the manually executed eye tilt), every downstream step is re-solved for
    it while the proposal is still reported.
    """
    if not targets_in:
        raise SceneInvalid("at least one target is required")
    # canonicalize inputs to serialization precision up front so that stored
    # inputs reproduce stored outputs exactly on replay
    targets_in = round_floats(targets_in)
    executed_tilt = round_floats(executed_tilt)
    eye = scene.eye()
    targets = [resolve_target(scene, spec) for spec in targets_in]
    units = np.array([t.point.unit() for t in targets])
    centroid_unit = _centroid(units)
    centroid_cart = eye.center + eye.radius_mm * centroid_unit
    centroid_pt = SphericalPoint(
        math.degrees(math.acos(max(-1.0, min(1.0, centroid_unit[2])))),
        math.degrees(math.atan2(centroid_unit[0], centroid_unit[1]))
        if math.hypot(centroid_unit[0], centroid_unit[1]) > 1e-12 else 0.0)

    plan_reasons: list[str] = []
    try:
        proposal = solve_eye_tilt(centroid_cart, eye)
    except Unreachable as exc:
        # keep the batch alive: fall back to zero tilt and flag the plan
        plan_reasons.append(f"unreachable_tilt: {exc}")
        miss = geodesic_angle_deg(centroid_cart - eye.center, [0.0, 0.0, -1.0])
        proposal = EyeTiltProposal(
            alpha_deg=0.0, beta_deg=0.0, clamped=False,
            fov_center_after=SphericalPoint(180.0, 0.0),
            residual_mm=eye.radius_mm * math.radians(miss),
            raw_alpha_deg=0.0, raw_beta_deg=0.0)
    if executed_tilt is not None:
        alpha = float(executed_tilt["alpha_deg"])
        beta = float(executed_tilt["beta_deg"])
    else:
        alpha, beta = proposal.alpha_deg, proposal.beta_deg

    anat_points = eye.center + eye.radius_mm * units
    targets_after = rotate_scene(anat_points, alpha, beta, eye)
    centroid_after = rotate_scene(centroid_cart, alpha, beta, eye)
    trocars_after = rotate_scene(scene.layout().world_points(eye), alpha, beta, eye)

    approach = None
    sweep = None
    try:
        approach = build_approach(trocars_after, centroid_after,
                                  theta_ini_band_deg=scene.theta_ini_band_deg())
        sweep = sweep_initial_position(approach.gamma_deg, scene.pcjm())
    except DegenerateApproach as exc:
        plan_reasons.append(f"degenerate_approach: {exc}")

    fov_after = fov_center_after_tilt_cart(alpha, beta, eye)
    half_view = scene.view_angle_deg() / 2.0

    planned: list[PlannedTarget] = []
    for target, anat, world_after in zip(targets, anat_points, targets_after):
        reasons: list[str] = []
        joints = None
        tip_error = None
        visible = geodesic_angle_deg(anat - eye.center,
                                     fov_after - eye.center) <= half_view + 1e-12
        if not visible:
            reasons.append("not_visible")
        if approach is not None and sweep is not None:
            try:
                joints = solve_joint_target(
                    world_after - approach.trocar_after,
                    approach.theta_ini_deg, approach.trocar_after, eye,
                    sweep.working, scene.theta4_limit_deg())
                reasons.extend(joints.violations)
                if joints.within_limits:
                    line = rcm_pose(approach.trocar_after,
                                    approach.theta_ini_deg, joints.theta2_deg,
                                    joints.theta4_deg, joints.depth_mm,
                                    instrument_length_mm=scene.instrument_length_mm())
                    tip_error = eye.radius_mm * math.radians(geodesic_angle_deg(
                        line.tip_point - eye.center, world_after - eye.center))
            except (ValueError, Unreachable) as exc:
                reasons.append(f"unsolvable: {exc}")
        feasible = (joints is not None and joints.within_limits and visible
                    and not plan_reasons)
        if not feasible and proposal.clamped and "tilt_clamped" not in reasons:
            reasons.append("tilt_clamped")
        planned.append(PlannedTarget(target=target, world_after=world_after,
                                     joints=joints, visible=visible,
                                     feasible=feasible, reasons=reasons,
                                     tip_error_mm=tip_error))

    return PlanRecord(scene=scene, targets_in=targets_in,
                      executed_tilt=executed_tilt, targets=planned,
                      centroid=centroid_pt, proposal=proposal,
                      effective_tilt=(alpha, beta), approach=approach,
                      sweep=sweep,
                      created_at=created_at or _utc_now(),
                      reasons=plan_reasons)


def replay(record_document: dict) -> PlanRecord:
    """Re-run the engine on the inputs stored in a plan record."""
    inputs = record_document["inputs"]
    scene = Scene.from_document(inputs["scene"])
    return plan(scene, inputs["targets"], executed_tilt=inputs["executed_tilt"])


# ---------------------------------------------------------------------------
# workspace persistence
# ---------------------------------------------------------------------------

class Workspace:
    """Flat-file store: scenes by id, plans content-addressed by input hash."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.scenes_dir = self.root / "scenes"
        self.plans_dir = self.root / "plans"
        self.scenes_dir.mkdir(parents=True, exist_ok=True)
        self.plans_dir.mkdir(parents=True, exist_ok=True)

    def _scene_path(self, scene_id: str) -> Path:
        return self.scenes_dir / f"{scene_id}.json"

    def create_scene(self, document: dict) -> tuple[str, Scene]:
        scene = Scene.from_document(document, base_dir=self.root)
        scene_id = scene.scene_id()
        payload = {"id": scene_id, "version": 1, "document": scene.document}
        self._scene_path(scene_id).write_text(json.dumps(payload, indent=2,
                                                         sort_keys=True))
        return scene_id, scene

    def scene_ids(self) -> list[str]:
        return sorted(p.stem for p in self.scenes_dir.glob("scn-*.json"))

    def load_scene(self, scene_id: str) -> tuple[Scene, int]:
        path = self._scene_path(scene_id)
        if not path.is_file():
            raise SceneInvalid(f"unknown scene id: {scene_id}")
        payload = json.loads(path.read_text())
        return (Scene.from_document(payload["document"], base_dir=self.root),
                int(payload["version"]))

    def update_scene(self, scene_id: str, document: dict,
                     expected_version: int) -> int:
        path = self._scene_path(scene_id)
        if not path.is_file():
            raise SceneInvalid(f"unknown scene id: {scene_id}")
        payload = json.loads(path.read_text())
        if int(payload["version"]) != int(expected_version):
            raise VersionConflict(
                f"scene {scene_id} is at version {payload['version']}, "
                f"expected {expected_version}")
        scene = Scene.from_document(document, base_dir=self.root)
        payload = {"id": scene_id, "version": int(expected_version) + 1,
                   "document": scene.document}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        return payload["version"]

    def save_plan(self, record: PlanRecord) -> Path:
        path = self.plans_dir / f"plan-{record.inputs_hash()[:16]}.json"
        path.write_text(json.dumps(record.document(), indent=2, sort_keys=True))
        return path

    def load_plan(self, name: str) -> dict:
        path = self.plans_dir / (name if name.endswith(".json") else f"{name}.json")
        if not path.is_file():
            raise SceneInvalid(f"unknown plan: {name}")
        return json.loads(path.read_text())
