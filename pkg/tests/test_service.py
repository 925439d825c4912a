import cv2
import numpy as np
import pytest
from fastapi.testclient import TestClient

from retinaplan.errorlab import whatif_row
from retinaplan.fundus import write_pgm
from retinaplan.synth import render_fundus_image
from retinaplan.workflow import Workspace, plan


@pytest.fixture
def workspace_dir(tmp_path):
    root = tmp_path / "ws"
    root.mkdir()
    image = render_fundus_image(1024, 1024, center_px=(512.0, 512.0),
                                diameter_px=900.0)
    write_pgm(root / "fundus.pgm", image)
    return root


@pytest.fixture
def client(workspace_dir):
    from retinaplan.service import create_app
    return TestClient(create_app(workspace_dir))


@pytest.fixture
def image_scene_doc():
    return {"name": "svc", "image": {"path": "fundus.pgm", "view_angle_deg": 60.0}}


def create_scene(client, doc=None) -> str:
    response = client.post("/scenes", json=doc if doc is not None else {})
    assert response.status_code == 201
    return response.json()["id"]


class TestSceneEndpoints:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_create_and_get(self, client, image_scene_doc):
        scene_id = create_scene(client, image_scene_doc)
        body = client.get(f"/scenes/{scene_id}").json()
        assert body["id"] == scene_id
        assert body["version"] == 1
        assert body["document"]["name"] == "svc"
        assert abs(body["image_meta"]["detected_center_px"][0] - 512.0) <= 2.0

    def test_list(self, client):
        scene_id = create_scene(client)
        assert scene_id in client.get("/scenes").json()["scenes"]

    def test_unknown_scene_404(self, client):
        response = client.get("/scenes/scn-000000000000")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "scene_invalid"

    def test_invalid_scene_422(self, client):
        response = client.post("/scenes", json={"surprise": True})
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "scene_invalid"

    def test_version_conflict_409(self, client):
        scene_id = create_scene(client)
        ok = client.put(f"/scenes/{scene_id}",
                        json={"document": {"name": "u"}, "expected_version": 1})
        assert ok.status_code == 200
        assert ok.json()["version"] == 2
        stale = client.put(f"/scenes/{scene_id}",
                           json={"document": {"name": "x"}, "expected_version": 1})
        assert stale.status_code == 409
        assert stale.json()["error"]["code"] == "version_conflict"

    def test_image_endpoint_returns_png(self, client, image_scene_doc):
        scene_id = create_scene(client, image_scene_doc)
        response = client.get(f"/scenes/{scene_id}/image")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        decoded = cv2.imdecode(np.frombuffer(response.content, np.uint8),
                               cv2.IMREAD_GRAYSCALE)
        assert decoded.shape == (1024, 1024)


class TestTargetEndpoint:
    def test_matches_library_call(self, client, workspace_dir, image_scene_doc):
        scene_id = create_scene(client, image_scene_doc)
        response = client.post(f"/scenes/{scene_id}/targets",
                               json={"x_px": 100.0, "y_px": 50.0})
        assert response.status_code == 200
        scene, _ = Workspace(workspace_dir).load_scene(scene_id)
        from retinaplan.workflow import resolve_target
        expected = resolve_target(scene, {"x_px": 100.0, "y_px": 50.0}).to_fragment()
        assert response.json() == expected

    def test_center_click_reads_180(self, client, image_scene_doc):
        scene_id = create_scene(client, image_scene_doc)
        body = client.post(f"/scenes/{scene_id}/targets",
                           json={"x_px": 0.0, "y_px": 0.0}).json()
        assert body["polar_deg"] == pytest.approx(180.0, abs=0.2)

    def test_out_of_field_422(self, client, image_scene_doc):
        scene_id = create_scene(client, image_scene_doc)
        response = client.post(f"/scenes/{scene_id}/targets",
                               json={"x_px": 0.0, "y_px": 2000.0})
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "out_of_field"


class TestPlanEndpoint:
    def test_equals_direct_library_invocation(self, client, workspace_dir):
        scene_id = create_scene(client)
        targets = [{"polar_deg": 170.0, "azimuth_deg": 0.0},
                   {"polar_deg": 175.0, "azimuth_deg": 90.0}]
        response = client.post(f"/scenes/{scene_id}/plan",
                               json={"targets": targets})
        assert response.status_code == 200
        via_api = response.json()
        scene, _ = Workspace(workspace_dir).load_scene(scene_id)
        direct = plan(scene, targets).document()
        via_api.pop("created_at")
        direct.pop("created_at")
        assert via_api == direct

    def test_plan_persisted(self, client, workspace_dir):
        scene_id = create_scene(client)
        body = client.post(f"/scenes/{scene_id}/plan",
                           json={"targets": [{"polar_deg": 170.0,
                                              "azimuth_deg": 0.0}]}).json()
        plans = list((workspace_dir / "plans").glob("plan-*.json"))
        assert len(plans) == 1
        assert body["inputs_hash"].startswith(plans[0].stem.split("-", 1)[1])

    def test_executed_tilt_passthrough(self, client):
        scene_id = create_scene(client)
        body = client.post(
            f"/scenes/{scene_id}/plan",
            json={"targets": [{"polar_deg": 170.0, "azimuth_deg": 0.0}],
                  "executed_tilt": {"alpha_deg": -4.9, "beta_deg": 0.1}}).json()
        assert body["tilt"]["executed_override"]
        assert body["tilt"]["alpha_deg"] == -4.9

    def test_validation_error_on_empty_targets(self, client):
        scene_id = create_scene(client)
        response = client.post(f"/scenes/{scene_id}/plan", json={"targets": []})
        assert response.status_code == 422


class TestOverlayEndpoint:
    def test_default_context(self, client):
        scene_id = create_scene(client)
        body = client.get(f"/scenes/{scene_id}/overlay").json()
        assert body["grid_meta"]["order"] == "polar-major"
        assert 0 < body["area_fractions"]["both"] < 1

    def test_plan_hash_context(self, client, workspace_dir):
        scene_id = create_scene(client)
        planned = client.post(f"/scenes/{scene_id}/plan",
                              json={"targets": [{"polar_deg": 170.0,
                                                 "azimuth_deg": 0.0}]}).json()
        short = planned["inputs_hash"][:16]
        body = client.get(f"/scenes/{scene_id}/overlay",
                          params={"plan_hash": short}).json()
        assert body["context"]["plan_hash"] == short
        assert body["context"]["theta_ini_deg"] == planned["approach"]["theta_ini_deg"]


class TestWhatIfEndpoint:
    def test_equals_library_row(self, client, workspace_dir):
        scene_id = create_scene(client)
        response = client.post(f"/scenes/{scene_id}/whatif",
                               json={"kind": "trocar_roll", "magnitude": 5.0})
        assert response.status_code == 200
        scene, _ = Workspace(workspace_dir).load_scene(scene_id)
        assert response.json() == whatif_row(scene, "trocar_roll", 5.0)

    def test_offset_anchor_value(self, client):
        scene_id = create_scene(client)
        body = client.post(f"/scenes/{scene_id}/whatif",
                           json={"kind": "instr_trocar_offset",
                                 "magnitude": 0.5}).json()
        assert body["theta_error_deg"] == pytest.approx(1.909152, abs=1e-4)

    def test_unknown_kind_rejected(self, client):
        scene_id = create_scene(client)
        response = client.post(f"/scenes/{scene_id}/whatif",
                               json={"kind": "gremlins", "magnitude": 1.0})
        assert response.status_code == 422
