import json

import pytest
from click.testing import CliRunner

from retinaplan.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def demo_dir(tmp_path, runner):
    target = tmp_path / "demo"
    result = runner.invoke(main, ["scene", "init-demo", str(target)])
    assert result.exit_code == 0
    return target


class TestPlanCommand:
    def test_polar_target_writes_plan(self, runner, demo_dir, tmp_path):
        out = tmp_path / "plan.json"
        result = runner.invoke(main, ["plan", "--scene", str(demo_dir / "scene.json"),
                                      "--target-polar", "170,0",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc["kind"] == "plan_record"
        assert doc["feasible"]

    def test_pixel_target_and_overlay_export(self, runner, demo_dir, tmp_path):
        out = tmp_path / "plan.json"
        overlay = tmp_path / "overlay.json"
        result = runner.invoke(main, ["plan", "--scene", str(demo_dir / "scene.json"),
                                      "--target-px", "512,300",
                                      "--out", str(out),
                                      "--export-overlay", str(overlay)])
        assert result.exit_code == 0, result.output
        ov = json.loads(overlay.read_text())
        assert set(ov["masks"]) == {"visible", "accessible", "both"}

    def test_workspace_env_overrides_flag(self, runner, demo_dir, tmp_path,
                                          monkeypatch):
        env_ws = tmp_path / "env-ws"
        flag_ws = tmp_path / "flag-ws"
        monkeypatch.setenv("RETINA_PLAN_WORKSPACE", str(env_ws))
        result = runner.invoke(main, ["plan", "--scene", str(demo_dir / "scene.json"),
                                      "--target-polar", "170,0",
                                      "--workspace", str(flag_ws)])
        assert result.exit_code == 0, result.output
        assert list(env_ws.glob("plans/plan-*.json"))
        assert not flag_ws.exists()

    def test_bad_target_spec_fails(self, runner, demo_dir):
        result = runner.invoke(main, ["plan", "--scene", str(demo_dir / "scene.json"),
                                      "--target-polar", "170"])
        assert result.exit_code != 0

    def test_no_targets_fails_cleanly(self, runner, demo_dir):
        result = runner.invoke(main, ["plan", "--scene",
                                      str(demo_dir / "scene.json")])
        assert result.exit_code == 1
        assert "error" in result.output


class TestErrorlabCommands:
    def test_run_writes_result_and_csv(self, runner, demo_dir, tmp_path):
        out = tmp_path / "sens.json"
        csv = tmp_path / "sens.csv"
        result = runner.invoke(main, ["errorlab", "run",
                                      "--scene", str(demo_dir / "scene.json"),
                                      "--kind", "trocar_roll",
                                      "--out", str(out), "--csv", str(csv)])
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert doc["kind"] == "trocar_roll"
        assert csv.read_text().startswith("kind,magnitude")

    def test_custom_magnitudes(self, runner, demo_dir, tmp_path):
        out = tmp_path / "s.json"
        result = runner.invoke(main, ["errorlab", "run",
                                      "--scene", str(demo_dir / "scene.json"),
                                      "--kind", "z_align",
                                      "--magnitudes", "-2,0,2",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert json.loads(out.read_text())["magnitudes"] == [-2.0, 0.0, 2.0]

    def test_monte_carlo_deterministic(self, runner, demo_dir, tmp_path):
        dists = json.dumps({"trocar_yaw": {"dist": "normal", "sd": 1.5}})
        outputs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            result = runner.invoke(main, ["errorlab", "monte-carlo",
                                          "--scene", str(demo_dir / "scene.json"),
                                          "--distributions", dists,
                                          "--trials", "40", "--seed", "11",
                                          "--out", str(out)])
            assert result.exit_code == 0, result.output
            outputs.append(out.read_text())
        assert outputs[0] == outputs[1]


class TestSceneInitDemo:
    def test_demo_files_written(self, demo_dir):
        assert (demo_dir / "scene.json").is_file()
        assert (demo_dir / "fundus.pgm").is_file()
        doc = json.loads((demo_dir / "scene.json").read_text())
        assert doc["image"]["path"] == "fundus.pgm"
