import json
from pathlib import Path

import numpy as np
import pytest

from retinaplan.fundus import write_pgm
from retinaplan.geometry import EyeModel
from retinaplan.synth import render_fundus_image
from retinaplan.workflow import Scene


@pytest.fixture
def eye() -> EyeModel:
    return EyeModel()


@pytest.fixture
def default_scene() -> Scene:
    return Scene.from_document({})


@pytest.fixture
def steep_scene() -> Scene:
    """Steep-approach configuration at the upper edge of the robot tilt band."""
    return Scene.from_document({"trocars": {"ring_polar_deg": 62.0}})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)


def make_image_scene(directory: Path, center=(512.0, 512.0), diameter=900.0,
                     compensate=False, **scene_overrides) -> Scene:
    """Write a synthetic fundus image plus scene file and load the scene."""
    directory.mkdir(parents=True, exist_ok=True)
    image = render_fundus_image(1024, 1024, center_px=center,
                                diameter_px=diameter)
    write_pgm(directory / "fundus.pgm", image)
    document = {
        "name": "synthetic",
        "image": {"path": "fundus.pgm", "view_angle_deg": 60.0},
        "flags": {"apply_axis_compensation": compensate},
    }
    document.update(scene_overrides)
    (directory / "scene.json").write_text(json.dumps(document))
    return Scene.from_file(directory / "scene.json")


@pytest.fixture
def image_scene(tmp_path) -> Scene:
    return make_image_scene(tmp_path / "ws")
