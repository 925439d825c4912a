"""Record a live API transcript into fixtures/transcript.json.

The console's tests replay this file offline to prove the UI is a pure view
over the service: every rendered number must come from these payloads.
Regenerate after changing the service:

    python3 frontend/scripts/record_transcript.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from retinaplan.fundus import write_pgm
from retinaplan.service import create_app
from retinaplan.synth import render_fundus_image

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "fixtures" / "transcript.json"


def main() -> None:
    workspace = Path(tempfile.mkdtemp(prefix="transcript-ws-"))
    image = render_fundus_image(1024, 1024, center_px=(512.0, 512.0),
                                diameter_px=900.0)
    write_pgm(workspace / "fundus.pgm", image)
    client = TestClient(create_app(workspace))
    steps = []

    def record(method, path, body=None):
        if method == "GET":
            response = client.get(path)
        else:
            response = client.post(path, json=body)
        assert response.status_code in (200, 201), (path, response.text)
        steps.append({"method": method, "path": path, "request": body,
                      "status": response.status_code,
                      "response": response.json()})
        return response.json()

    scene_doc = {
        "name": "console-demo",
        "image": {"path": "fundus.pgm", "view_angle_deg": 60.0},
        "flags": {"apply_axis_compensation": False},
    }
    created = record("POST", "/scenes", scene_doc)
    sid = created["id"]
    record("GET", f"/scenes/{sid}")
    record("POST", f"/scenes/{sid}/targets", {"x_px": 0.0, "y_px": 0.0})
    record("POST", f"/scenes/{sid}/targets", {"x_px": 120.0, "y_px": -80.0})
    record("POST", f"/scenes/{sid}/plan",
           {"targets": [{"x_px": 120.0, "y_px": -80.0},
                        {"polar_deg": 170.0, "azimuth_deg": 0.0}]})
    record("POST", f"/scenes/{sid}/plan",
           {"targets": [{"polar_deg": 95.0, "azimuth_deg": 90.0}]})
    record("POST", f"/scenes/{sid}/plan",
           {"targets": [{"polar_deg": 170.0, "azimuth_deg": 0.0}],
            "executed_tilt": {"alpha_deg": -4.95, "beta_deg": 0.05}})
    record("GET", f"/scenes/{sid}/overlay")
    record("POST", f"/scenes/{sid}/whatif",
           {"kind": "instr_trocar_offset", "magnitude": 0.5})
    record("POST", f"/scenes/{sid}/whatif", {"kind": "z_align", "magnitude": 5.0})
    record("POST", f"/scenes/{sid}/whatif", {"kind": "trocar_roll", "magnitude": 0.0})

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"steps": steps}, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} with {len(steps)} steps")


if __name__ == "__main__":
    main()
