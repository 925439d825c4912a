import { describe, expect, it } from "vitest";

import {
  approachRows,
  clampBadge,
  clickToPixelTarget,
  targetReadout,
  tiltRows,
  whatifBars,
} from "../src/view.js";
import type { ApproachInfo, ImageMeta, TiltInfo, WhatIfRow } from "../src/types.js";

const tilt: TiltInfo = {
  alpha_deg: -5.0,
  beta_deg: 0.0,
  proposed_alpha_deg: -5.0,
  proposed_beta_deg: 0.0,
  raw_alpha_deg: -5.0,
  raw_beta_deg: 0.0,
  clamped: false,
  residual_mm: 0.0,
  executed_override: false,
};

const approach: ApproachInfo = {
  selected_trocar: 1,
  trocar_world_mm: [0, 8.555993, 8.555993],
  theta_ini_deg: 22.5,
  theta_ini_in_band: true,
  gamma_deg: 0.0,
  p0_mm: 0.0,
  p0_saturated: false,
  working_angle_deg: { min: -9.702903, max: 9.702903, center: 0.0 },
  angle_span_delta_deg: 0.0,
  feasible: true,
  reasons: [],
};

describe("tilt rows", () => {
  it("renders raw service values without rounding", () => {
    const rows = tiltRows({ ...tilt, alpha_deg: -5.123456 });
    expect(rows[0].value).toBe("-5.123456°");
    expect(rows[0].badge).toBeUndefined();
  });

  it("shows the clamp badge when the proposal was clamped", () => {
    const rows = tiltRows({ ...tilt, clamped: true });
    expect(rows[0].badge).toBe("clamped");
    expect(clampBadge({ ...tilt, clamped: true })).toBe("clamped");
  });

  it("reports the proposal when a manual tilt was executed", () => {
    const rows = tiltRows({ ...tilt, executed_override: true, alpha_deg: -4.9 });
    const proposal = rows.find((r) => r.label === "proposed α/β");
    expect(proposal?.value).toBe("-5° / 0°");
    expect(proposal?.badge).toBe("manual tilt executed");
  });
});

describe("approach rows", () => {
  it("renders the configuration values", () => {
    const rows = approachRows(approach);
    expect(rows.map((r) => r.value)).toContain("22.5°");
    expect(rows.map((r) => r.value)).toContain("0 mm");
    const working = rows.find((r) => r.label === "working angle");
    expect(working?.value).toBe("-9.702903° … 9.702903° (center 0°)");
  });

  it("flags out-of-band robot tilt and saturation", () => {
    const rows = approachRows({
      ...approach,
      theta_ini_in_band: false,
      p0_saturated: true,
    });
    expect(rows.find((r) => r.label === "robot tilt θ_ini")?.badge).toBe(
      "outside band");
    expect(rows.find((r) => r.label === "initial position p₀")?.badge).toBe(
      "saturated");
  });

  it("handles a missing approach", () => {
    expect(approachRows(null)[0].badge).toBe("unavailable");
  });
});

describe("target readout", () => {
  it("formats polar and azimuth from the service values", () => {
    expect(
      targetReadout({
        polar_deg: 180.0,
        azimuth_deg: 0.0,
        source: "pixel",
        compensated: false,
      })
    ).toBe("polar 180° / azimuth 0° (pixel)");
  });

  it("marks compensated targets", () => {
    expect(
      targetReadout({
        polar_deg: 173.225111,
        azimuth_deg: 0.0,
        source: "pixel",
        compensated: true,
      })
    ).toContain("axis-compensated");
  });
});

describe("what-if bars", () => {
  const row: WhatIfRow = {
    kind: "instr_trocar_offset",
    magnitude: 0.5,
    unit: "mm",
    delta_theta2_deg: 1.909152,
    delta_theta4_deg: 1.909152,
    delta_depth_mm: 0.0,
    excluded: 0,
    theta_error_deg: 1.909152,
    per_target: [],
  };

  it("labels bars with two decimals", () => {
    const view = whatifBars(row);
    expect(view.theta2Label).toBe("Δθ₂ 1.91°");
    expect(view.noteworthy).toBe("deflection 1.91°");
  });

  it("handles excluded (null) aggregates", () => {
    const view = whatifBars({
      ...row,
      delta_theta2_deg: null,
      delta_theta4_deg: null,
      delta_depth_mm: null,
    });
    expect(view.theta2Label).toBe("Δθ₂ —°");
    expect(view.theta2Magnitude).toBe(0);
  });
});

describe("canvas click mapping", () => {
  const meta: ImageMeta = {
    width_px: 1024,
    height_px: 1024,
    view_angle_deg: 60,
    detected_center_px: [512, 512],
    detected_diameter_px: 900,
    mm_per_px: 0.013444,
  };

  it("converts raster clicks to +y-up offsets", () => {
    const click = clickToPixelTarget(612, 412, meta);
    expect(click.xPx).toBe(100);
    expect(click.yPx).toBe(100);
    expect(click.insideBoundary).toBe(true);
  });

  it("rejects clicks outside the detected boundary", () => {
    const click = clickToPixelTarget(1000, 40, meta);
    expect(click.insideBoundary).toBe(false);
  });
});
