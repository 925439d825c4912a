"""Error-source injection, sensitivity sweeps and Monte Carlo aggregation.

Five error sources are modeled:

  z_align             relative yaw between robot and eye frames (deg):
                      the whole tilted eye system rotates about Z.
  eye_pose            eye-tilt detection error (deg): the actual tilt about X
                      differs from the planned one.
  trocar_roll         trocar planted rotated about X on the sclera (deg).
  trocar_yaw          trocar planted rotated about Z on the sclera (deg).
  instr_trocar_offset instrument / trocar lateral misalignment (mm); the
                      instrument bends at its base, deflecting both
                      rotational joints by arctan(x / (l_instr - l_insert)).

For each magnitude the scene is perturbed and the joints that would truly be
needed to hit each target are re-derived with the planned setup (theta_ini,
initial position) held fixed; deltas against the planned joints are fitted
with a least-squares line. The solver itself is the oracle: there is no
physical-rig noise model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, SceneInvalid
from .geometry import EyeModel, rot_x, rot_y, rot_z
from .robot import solve_joint_target
from .workflow import PlanRecord, Scene, plan, round_floats

ANGULAR_KINDS = ("z_align", "trocar_roll", "trocar_yaw", "eye_pose")
ALL_KINDS = ANGULAR_KINDS + ("instr_trocar_offset",)

DEFAULT_ANGULAR_MAGNITUDES = (-10.0, -5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0, 10.0)
DEFAULT_OFFSET_MAGNITUDES = (-1.0, -0.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.5, 1.0)

#: Simulation target pattern: pole center plus a ring 10 deg off the pole.
DEFAULT_TARGETS = ((180.0, 0.0), (170.0, 0.0), (170.0, 90.0),
                   (170.0, 180.0), (170.0, 270.0))

DEFAULT_INSTRUMENT_LENGTH_MM = 35.0
DEFAULT_INSERT_DEPTH_MM = 20.0


def five_point_pattern(center_polar_deg: float, center_azimuth_deg: float,
                       dpolar_deg: float = 5.0, dazimuth_deg: float = 10.0,
                       ) -> list[tuple[float, float]]:
    """Experiment-protocol pattern: center plus the four (+/-, +/-) corners."""
    pts = [(center_polar_deg, center_azimuth_deg)]
    for sp in (-1.0, 1.0):
        for sa in (-1.0, 1.0):
            pts.append((center_polar_deg + sp * dpolar_deg,
                        center_azimuth_deg + sa * dazimuth_deg))
    return pts


def instrument_offset_error(x_error_mm: float,
                            l_instrument_mm: float = DEFAULT_INSTRUMENT_LENGTH_MM,
                            l_insert_mm: float = DEFAULT_INSERT_DEPTH_MM) -> float:
    """Angular joint error from a lateral instrument/trocar misalignment."""
    lever = l_instrument_mm - l_insert_mm
    if lever <= 0:
        raise DegenerateGeometry(
            f"instrument length {l_instrument_mm} mm must exceed insertion "
            f"depth {l_insert_mm} mm")
    return math.degrees(math.atan2(x_error_mm, lever))


@dataclass
class ErrorScenario:
    kind: str
    magnitudes: tuple[float, ...] = ()
    targets: tuple[tuple[float, float], ...] = DEFAULT_TARGETS

    def __post_init__(self) -> None:
        if self.kind not in ALL_KINDS:
            raise ValueError(f"kind must be one of {ALL_KINDS}, got {self.kind!r}")
        if not self.magnitudes:
            self.magnitudes = (DEFAULT_OFFSET_MAGNITUDES
                               if self.kind == "instr_trocar_offset"
                               else DEFAULT_ANGULAR_MAGNITUDES)
        if 0.0 not in self.magnitudes:
            raise ValueError("magnitudes must include the 0 baseline")
        self.targets = tuple((float(p), float(a)) for p, a in self.targets)

    @property
    def unit(self) -> str:
        return "mm" if self.kind == "instr_trocar_offset" else "deg"

    def target_specs(self) -> list[dict]:
        return [{"polar_deg": p, "azimuth_deg": a} for p, a in self.targets]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    residual_rms: float

    def to_fragment(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "residual_rms": self.residual_rms}


@dataclass
class SensitivityResult:
    kind: str
    unit: str
    magnitudes: tuple[float, ...]
    #: (n_magnitudes, n_targets) arrays; NaN where a point was excluded
    delta_theta2_deg: np.ndarray
    delta_theta4_deg: np.ndarray
    delta_depth_mm: np.ndarray
    excluded: np.ndarray  # (n_magnitudes,) int counts
    fits: dict[str, LineFit]
    baseline: dict = field(default_factory=dict)

    def row(self, magnitude: float) -> dict:
        i = list(self.magnitudes).index(magnitude)
        per_target = []
        for j in range(self.delta_theta2_deg.shape[1]):
            excluded = bool(np.isnan(self.delta_theta2_deg[i, j]))
            per_target.append({
                "delta_theta2_deg": None if excluded else float(self.delta_theta2_deg[i, j]),
                "delta_theta4_deg": None if excluded else float(self.delta_theta4_deg[i, j]),
                "delta_depth_mm": None if excluded else float(self.delta_depth_mm[i, j]),
                "excluded": excluded,
            })
        def _mean(arr):
            vals = arr[i][~np.isnan(arr[i])]
            return float(vals.mean()) if vals.size else None
        return round_floats({
            "kind": self.kind, "magnitude": float(magnitude), "unit": self.unit,
            "delta_theta2_deg": _mean(self.delta_theta2_deg),
            "delta_theta4_deg": _mean(self.delta_theta4_deg),
            "delta_depth_mm": _mean(self.delta_depth_mm),
            "excluded": int(self.excluded[i]),
            "per_target": per_target,
        })

    def to_document(self) -> dict:
        return round_floats({
            "kind": self.kind,
            "unit": self.unit,
            "magnitudes": list(self.magnitudes),
            "rows": [self.row(m) for m in self.magnitudes],
            "fits": {name: fit.to_fragment() for name, fit in self.fits.items()},
            "slope_units": {"theta2": f"deg/{self.unit}",
                            "theta4": f"deg/{self.unit}",
                            "depth": f"mm/{self.unit}"},
            "baseline": self.baseline,
        })

    def to_csv(self) -> str:
        lines = ["kind,magnitude,target_index,delta_theta2_deg,"
                 "delta_theta4_deg,delta_depth_mm,excluded"]
        for i, m in enumerate(self.magnitudes):
            for j in range(self.delta_theta2_deg.shape[1]):
                excluded = bool(np.isnan(self.delta_theta2_deg[i, j]))
                vals = ("", "", "") if excluded else (
                    f"{self.delta_theta2_deg[i, j]:.6f}",
                    f"{self.delta_theta4_deg[i, j]:.6f}",
                    f"{self.delta_depth_mm[i, j]:.6f}")
                lines.append(f"{self.kind},{m},{j},{vals[0]},{vals[1]},{vals[2]},"
                             f"{int(excluded)}")
        return "\n".join(lines) + "\n"


@dataclass
class _BaselineContext:
    """Planned setup held fixed while the world is perturbed."""

    eye: EyeModel
    alpha_deg: float
    beta_deg: float
    theta_ini_deg: float
    working: object
    theta4_limit_deg: float
    trocar_anat: np.ndarray          # selected trocar, untilted anatomy
    targets_anat: np.ndarray         # (n, 3) untilted anatomy
    planned_theta2: np.ndarray
    planned_theta4: np.ndarray
    planned_depth: np.ndarray


def _context_from_record(scene: Scene, record: PlanRecord) -> _BaselineContext:
    if record.approach is None or record.sweep is None:
        raise SceneInvalid("baseline plan has no approach configuration")
    if not all(t.joints is not None and t.joints.within_limits
               for t in record.targets):
        raise SceneInvalid("baseline scene does not plan successfully at zero error")
    eye = scene.eye()
    alpha, beta = record.effective_tilt
    trocar_anat = scene.layout().world_points(eye)[record.approach.selected_index]
    targets_anat = np.array([t.target.cartesian(eye) for t in record.targets])
    return _BaselineContext(
        eye=eye, alpha_deg=alpha, beta_deg=beta,
        theta_ini_deg=record.approach.theta_ini_deg,
        working=record.sweep.working,
        theta4_limit_deg=scene.theta4_limit_deg(),
        trocar_anat=trocar_anat, targets_anat=targets_anat,
        planned_theta2=np.array([t.joints.theta2_deg for t in record.targets]),
        planned_theta4=np.array([t.joints.theta4_deg for t in record.targets]),
        planned_depth=np.array([t.joints.depth_mm for t in record.targets]))


def _perturbed_world(ctx: _BaselineContext, kind: str, magnitude: float,
                     roll_deg: float = 0.0, yaw_deg: float = 0.0,
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Trocar and target positions in the perturbed (true) world."""
    c = ctx.eye.center
    tilt = rot_y(ctx.beta_deg) @ rot_x(ctx.alpha_deg)
    trocar_anat = ctx.trocar_anat - c
    targets_anat = ctx.targets_anat - c
    if kind == "composite":
        trocar_anat = rot_x(roll_deg) @ rot_z(yaw_deg) @ trocar_anat
        tilt = rot_y(ctx.beta_deg) @ rot_x(ctx.alpha_deg + magnitude)
        trocar = tilt @ trocar_anat
        targets = (tilt @ targets_anat.T).T
        return c + trocar, c + targets
    if kind == "z_align":
        rz = rot_z(magnitude)
        return (c + rz @ (tilt @ trocar_anat),
                c + (rz @ (tilt @ targets_anat.T)).T)
    if kind == "eye_pose":
        tilt2 = rot_y(ctx.beta_deg) @ rot_x(ctx.alpha_deg + magnitude)
        return c + tilt2 @ trocar_anat, c + (tilt2 @ targets_anat.T).T
    if kind == "trocar_roll":
        return (c + tilt @ (rot_x(magnitude) @ trocar_anat),
                c + (tilt @ targets_anat.T).T)
    if kind == "trocar_yaw":
        return (c + tilt @ (rot_z(magnitude) @ trocar_anat),
                c + (tilt @ targets_anat.T).T)
    raise ValueError(f"unknown perturbation kind {kind!r}")


def _true_deltas(ctx: _BaselineContext, trocar: np.ndarray, targets: np.ndarray,
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Joint deltas (true - planned) per target; NaN where unreachable."""
    n = targets.shape[0]
    d2 = np.full(n, np.nan)
    d4 = np.full(n, np.nan)
    dz = np.full(n, np.nan)
    for j in range(n):
        try:
            joints = solve_joint_target(targets[j] - trocar, ctx.theta_ini_deg,
                                        trocar, ctx.eye, ctx.working,
                                        ctx.theta4_limit_deg)
        except Exception:
            continue
        if not joints.within_limits:
            continue
        d2[j] = joints.theta2_deg - ctx.planned_theta2[j]
        d4[j] = joints.theta4_deg - ctx.planned_theta4[j]
        dz[j] = joints.depth_mm - ctx.planned_depth[j]
    return d2, d4, dz


def _fit(magnitudes: np.ndarray, deltas: np.ndarray) -> LineFit:
    xs, ys = [], []
    for i, m in enumerate(magnitudes):
        for value in deltas[i]:
            if not np.isnan(value):
                xs.append(m)
                ys.append(value)
    if len(xs) < 2 or len(set(xs)) < 2:
        return LineFit(slope=float("nan"), intercept=float("nan"),
                       residual_rms=float("nan"))
    coeffs = np.polyfit(xs, ys, 1)
    fitted = np.polyval(coeffs, xs)
    rms = float(np.sqrt(np.mean((np.array(ys) - fitted) ** 2)))
    return LineFit(slope=float(coeffs[0]), intercept=float(coeffs[1]),
                   residual_rms=rms)


def run_scenario(scenario: ErrorScenario, scene: Scene) -> SensitivityResult:
    """Sweep one error source and fit per-joint sensitivity lines."""
    record = plan(scene, scenario.target_specs())
    ctx = _context_from_record(scene, record)
    n_mag, n_tgt = len(scenario.magnitudes), len(scenario.targets)
    d2 = np.full((n_mag, n_tgt), np.nan)
    d4 = np.full((n_mag, n_tgt), np.nan)
    dz = np.full((n_mag, n_tgt), np.nan)
    for i, m in enumerate(scenario.magnitudes):
        if scenario.kind == "instr_trocar_offset":
            err = instrument_offset_error(m)
            d2[i, :] = err
            d4[i, :] = err
            dz[i, :] = 0.0
        else:
            trocar, targets = _perturbed_world(ctx, scenario.kind, m)
            d2[i], d4[i], dz[i] = _true_deltas(ctx, trocar, targets)
    mags = np.array(scenario.magnitudes, dtype=float)
    fits = {"theta2": _fit(mags, d2), "theta4": _fit(mags, d4),
            "depth": _fit(mags, dz)}
    excluded = np.isnan(d2).sum(axis=1)
    baseline = round_floats({
        "theta_ini_deg": ctx.theta_ini_deg,
        "p0_mm": record.sweep.p0_mm,
        "gamma_deg": record.approach.gamma_deg,
        "selected_trocar": record.approach.selected_index,
        "tilt": {"alpha_deg": ctx.alpha_deg, "beta_deg": ctx.beta_deg},
        "targets": [list(t) for t in scenario.targets],
    })
    return SensitivityResult(kind=scenario.kind, unit=scenario.unit,
                             magnitudes=scenario.magnitudes,
                             delta_theta2_deg=d2, delta_theta4_deg=d4,
                             delta_depth_mm=dz, excluded=excluded, fits=fits,
                             baseline=baseline)


def whatif_row(scene: Scene, kind: str, magnitude: float,
               targets: list[tuple[float, float]] | None = None) -> dict:
    """Single-magnitude sensitivity row (drives the console's what-if sliders)."""
    scenario = ErrorScenario(kind=kind,
                             magnitudes=(0.0, float(magnitude))
                             if magnitude != 0.0 else (0.0,),
                             targets=tuple(targets) if targets else DEFAULT_TARGETS)
    result = run_scenario(scenario, scene)
    row = result.row(float(magnitude))
    if kind == "instr_trocar_offset":
        row["theta_error_deg"] = round_floats(instrument_offset_error(magnitude))
    return row


@dataclass
class MonteCarloResult:
    seed: int
    n_trials: int
    rng_algorithm: str
    distributions: dict
    delta_theta2_deg: np.ndarray  # (n_trials, n_targets)
    delta_theta4_deg: np.ndarray
    delta_depth_mm: np.ndarray
    excluded: int

    def stats(self) -> dict:
        def _s(arr: np.ndarray) -> dict:
            vals = arr[~np.isnan(arr)]
            if vals.size == 0:
                return {"mean": None, "sd": None}
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            return {"mean": float(vals.mean()), "sd": sd}
        return {"delta_theta2_deg": _s(self.delta_theta2_deg),
                "delta_theta4_deg": _s(self.delta_theta4_deg),
                "delta_depth_mm": _s(self.delta_depth_mm)}

    def to_document(self) -> dict:
        return round_floats({
            "rng": self.rng_algorithm, "seed": self.seed,
            "n_trials": self.n_trials, "distributions": self.distributions,
            "excluded": self.excluded, "stats": self.stats(),
        })


def _sample(rng: np.random.Generator, spec: dict | None) -> float:
    if spec is None:
        return 0.0
    dist = spec.get("dist", "degenerate")
    if dist == "degenerate":
        return float(spec.get("value", 0.0))
    if dist == "normal":
        return float(rng.normal(0.0, spec["sd"]))
    if dist == "uniform":
        return float(rng.uniform(spec["low"], spec["high"]))
    raise ValueError(f"unknown distribution {dist!r}")


def monte_carlo(scene: Scene, distributions: dict, n_trials: int, seed: int,
                targets: list[tuple[float, float]] | None = None,
                ) -> MonteCarloResult:
    """Stochastic combination of all error sources, deterministic per seed.

    Per trial every configured source is sampled and applied jointly: the
    eye-tilt error perturbs the tilt, roll/yaw perturb the planted trocar,
    the frame yaw rotates the tilted world, and the instrument offset adds
    its closed-form deflection to both rotational joints.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    unknown = set(distributions) - set(ALL_KINDS)
    if unknown:
        raise ValueError(f"unknown error kinds: {sorted(unknown)}")
    scenario_targets = tuple(targets) if targets else DEFAULT_TARGETS
    record = plan(scene, [{"polar_deg": p, "azimuth_deg": a}
                          for p, a in scenario_targets])
    ctx = _context_from_record(scene, record)
    rng = np.random.default_rng(seed)
    n_tgt = len(scenario_targets)
    d2 = np.full((n_trials, n_tgt), np.nan)
    d4 = np.full((n_trials, n_tgt), np.nan)
    dz = np.full((n_trials, n_tgt), np.nan)
    for trial in range(n_trials):
        eps_pose = _sample(rng, distributions.get("eye_pose"))
        eps_roll = _sample(rng, distributions.get("trocar_roll"))
        eps_yaw = _sample(rng, distributions.get("trocar_yaw"))
        eps_z = _sample(rng, distributions.get("z_align"))
        eps_offset = _sample(rng, distributions.get("instr_trocar_offset"))
        trocar, targets_w = _perturbed_world(ctx, "composite", eps_pose,
                                             roll_deg=eps_roll, yaw_deg=eps_yaw)
        if eps_z != 0.0:
            rz = rot_z(eps_z)
            c = ctx.eye.center
            trocar = c + rz @ (trocar - c)
            targets_w = c + (rz @ (targets_w - c).T).T
        t2, t4, tz = _true_deltas(ctx, trocar, targets_w)
        offset_err = instrument_offset_error(eps_offset) if eps_offset else 0.0
        d2[trial] = t2 + offset_err
        d4[trial] = t4 + offset_err
        dz[trial] = tz
    return MonteCarloResult(seed=seed, n_trials=n_trials,
                            rng_algorithm="numpy-default (PCG64)",
                            distributions=distributions,
                            delta_theta2_deg=d2, delta_theta4_deg=d4,
                            delta_depth_mm=dz,
                            excluded=int(np.isnan(d2).sum()))
