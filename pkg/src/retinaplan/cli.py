"""Command-line client for the planning engine.

Thin wrappers only: argument parsing, file IO and calls into the same
library functions the HTTP service uses. The RETINA_PLAN_WORKSPACE
environment variable overrides --workspace wherever one is accepted.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .accessibility import (RetinalRegionSample, accessible_mask, make_grid,
                            overlay_payload, visible_mask)
from .errorlab import ErrorScenario, monte_carlo, run_scenario
from .errors import PlanningError
from .synth import render_fundus_image
from .workflow import DEFAULT_SCENE, Scene, Workspace, plan
from .fundus import write_pgm


def _workspace_dir(option_value: str | None) -> str | None:
    return os.environ.get("RETINA_PLAN_WORKSPACE") or option_value


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _parse_pair(value: str, name: str) -> tuple[float, float]:
    parts = value.split(",")
    if len(parts) != 2:
        raise click.BadParameter(f"{name} expects 'a,b', got {value!r}")
    return float(parts[0]), float(parts[1])


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Preoperative planning for robot-assisted vitreoretinal surgery."""


@main.command("plan")
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--target-px", "targets_px", multiple=True,
              help="Pixel target as 'x,y' offsets from the disc center (+y up).")
@click.option("--target-polar", "targets_polar", multiple=True,
              help="Direct polar target as 'polar_deg,azimuth_deg'.")
@click.option("--executed-tilt", "executed",
              help="Manually executed tilt 'alpha_deg,beta_deg'; replans downstream steps.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Write the plan record here (default: stdout).")
@click.option("--export-overlay", "overlay_path", type=click.Path(dir_okay=False),
              help="Also export the accessibility overlay for the planned context.")
@click.option("--workspace", "workspace_dir", type=click.Path(file_okay=False),
              help="Persist the plan record into this workspace as well.")
def plan_command(scene_path, targets_px, targets_polar, executed, out_path,
                 overlay_path, workspace_dir):
    """Plan joint targets for one or more retinal targets."""
    try:
        scene = Scene.from_file(scene_path)
        targets: list[dict] = []
        for raw in targets_px:
            x, y = _parse_pair(raw, "--target-px")
            targets.append({"x_px": x, "y_px": y})
        for raw in targets_polar:
            p, a = _parse_pair(raw, "--target-polar")
            targets.append({"polar_deg": p, "azimuth_deg": a})
        executed_tilt = None
        if executed:
            alpha, beta = _parse_pair(executed, "--executed-tilt")
            executed_tilt = {"alpha_deg": alpha, "beta_deg": beta}
        record = plan(scene, targets, executed_tilt=executed_tilt)
        document = record.document()
        payload = json.dumps(document, indent=2, sort_keys=True)
        if out_path:
            Path(out_path).write_text(payload + "\n")
            click.echo(f"plan written to {out_path} "
                       f"(feasible={document['feasible']})")
        else:
            click.echo(payload)
        ws = _workspace_dir(workspace_dir)
        if ws:
            saved = Workspace(ws).save_plan(record)
            click.echo(f"plan persisted at {saved}")
        if overlay_path:
            if record.approach is None:
                raise PlanningError("no approach context; overlay unavailable")
            eye = scene.eye()
            alpha, beta = record.effective_tilt
            grid = make_grid()
            sample = RetinalRegionSample(
                grid=grid,
                visible=visible_mask(grid, alpha, beta, scene.view_angle_deg(),
                                     eye),
                accessible=accessible_mask(
                    grid, alpha, beta,
                    np.asarray(record.approach.trocar_after),
                    record.approach.theta_ini_deg, record.sweep.working,
                    scene.theta4_limit_deg(), eye))
            context = {"alpha_deg": alpha, "beta_deg": beta,
                       "theta_ini_deg": record.approach.theta_ini_deg,
                       "p0_mm": record.sweep.p0_mm}
            Path(overlay_path).write_text(
                json.dumps(overlay_payload(sample, context), sort_keys=True)
                + "\n")
            click.echo(f"overlay written to {overlay_path}")
    except (PlanningError, ValueError) as exc:
        _fail(exc)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@click.option("--workspace", "workspace_dir", type=click.Path(file_okay=False),
              default="./workspace", show_default=True)
@click.option("--console", "console_dir", type=click.Path(file_okay=False),
              help="Directory with the built operator console (index.html + dist/).")
def serve_command(host, port, workspace_dir, console_dir):
    """Run the HTTP planning service (optionally serving the console)."""
    import uvicorn

    from .service import create_app

    ws = _workspace_dir(workspace_dir)
    app = create_app(ws, console_dir=console_dir)
    click.echo(f"serving workspace {ws} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.group("errorlab")
def errorlab_group() -> None:
    """Error-source sensitivity analysis."""


@errorlab_group.command("run")
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", required=True,
              type=click.Choice(["z_align", "eye_pose", "trocar_roll",
                                 "trocar_yaw", "instr_trocar_offset"]))
@click.option("--magnitudes", help="Comma-separated sweep magnitudes "
                                   "(deg, or mm for instr_trocar_offset).")
@click.option("--target", "targets", multiple=True,
              help="Override pattern target 'polar_deg,azimuth_deg' (repeatable).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              help="Also write per-point deltas as CSV for plotting.")
def errorlab_run(scene_path, kind, magnitudes, targets, out_path, csv_path):
    """Sweep one error source and fit sensitivity lines."""
    try:
        scene = Scene.from_file(scene_path)
        kwargs = {}
        if magnitudes:
            kwargs["magnitudes"] = tuple(float(v) for v in magnitudes.split(","))
        if targets:
            kwargs["targets"] = tuple(_parse_pair(t, "--target") for t in targets)
        scenario = ErrorScenario(kind=kind, **kwargs)
        result = run_scenario(scenario, scene)
        payload = json.dumps(result.to_document(), indent=2, sort_keys=True)
        if out_path:
            Path(out_path).write_text(payload + "\n")
            click.echo(f"sensitivity result written to {out_path}")
        else:
            click.echo(payload)
        if csv_path:
            Path(csv_path).write_text(result.to_csv())
            click.echo(f"CSV written to {csv_path}")
    except (PlanningError, ValueError) as exc:
        _fail(exc)


@errorlab_group.command("monte-carlo")
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--distributions", "distributions_json", required=True,
              help='JSON, e.g. \'{"trocar_roll": {"dist": "normal", "sd": 2.0}}\'.')
@click.option("--trials", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def errorlab_monte_carlo(scene_path, distributions_json, trials, seed, out_path):
    """Combine error sources stochastically; deterministic for a fixed seed."""
    try:
        scene = Scene.from_file(scene_path)
        distributions = json.loads(distributions_json)
        result = monte_carlo(scene, distributions, trials, seed)
        payload = json.dumps(result.to_document(), indent=2, sort_keys=True)
        if out_path:
            Path(out_path).write_text(payload + "\n")
            click.echo(f"monte carlo result written to {out_path}")
        else:
            click.echo(payload)
    except (PlanningError, ValueError, json.JSONDecodeError) as exc:
        _fail(exc)


@main.group("scene")
def scene_group() -> None:
    """Scene utilities."""


@scene_group.command("init-demo")
@click.argument("directory", type=click.Path(file_okay=False))
def scene_init_demo(directory):
    """Write a demo scene with a synthetic fundus image into DIRECTORY."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    image = render_fundus_image(1024, 1024, center_px=(512.0, 512.0),
                                diameter_px=900.0)
    write_pgm(out / "fundus.pgm", image)
    document = json.loads(json.dumps(DEFAULT_SCENE))
    document["name"] = "demo"
    document["image"] = {"path": "fundus.pgm", "view_angle_deg": 60.0,
                         "manual_center_px": None, "manual_diameter_px": None}
    document["flags"]["apply_axis_compensation"] = True
    (out / "scene.json").write_text(json.dumps(document, indent=2,
                                               sort_keys=True) + "\n")
    click.echo(f"demo scene written to {out / 'scene.json'}")


if __name__ == "__main__":
    main()
