// Pure view-model builders: service payloads in, display strings out.
// No planning math happens here; the numbers pass through untouched.

import { fixed, raw, rawWithUnit } from "./format.js";
import type {
  ApproachInfo,
  ImageMeta,
  JointTargetEntry,
  OverlayPayload,
  PlanRecord,
  TargetFragment,
  TiltInfo,
  WhatIfRow,
} from "./types.js";
import { rleDecode } from "./rle.js";

export interface PanelRow {
  label: string;
  value: string;
  badge?: string;
}

export function targetReadout(fragment: TargetFragment): string {
  const comp = fragment.compensated ? ", axis-compensated" : "";
  return `polar ${raw(fragment.polar_deg)}° / azimuth ${raw(
    fragment.azimuth_deg
  )}° (${fragment.source}${comp})`;
}

export function clampBadge(tilt: TiltInfo): string | null {
  return tilt.clamped ? "clamped" : null;
}

export function tiltRows(tilt: TiltInfo): PanelRow[] {
  const rows: PanelRow[] = [
    {
      label: "eye tilt α",
      value: `${raw(tilt.alpha_deg)}°`,
      badge: clampBadge(tilt) ?? undefined,
    },
    {
      label: "eye tilt β",
      value: `${raw(tilt.beta_deg)}°`,
      badge: clampBadge(tilt) ?? undefined,
    },
    { label: "residual miss", value: rawWithUnit(tilt.residual_mm, "mm") },
  ];
  if (tilt.executed_override) {
    rows.push({
      label: "proposed α/β",
      value: `${raw(tilt.proposed_alpha_deg)}° / ${raw(tilt.proposed_beta_deg)}°`,
      badge: "manual tilt executed",
    });
  }
  return rows;
}

export function approachRows(approach: ApproachInfo | null): PanelRow[] {
  if (approach === null) {
    return [{ label: "approach", value: "—", badge: "unavailable" }];
  }
  return [
    {
      label: "selected trocar",
      value: `#${approach.selected_trocar}`,
    },
    {
      label: "robot tilt θ_ini",
      value: `${raw(approach.theta_ini_deg)}°`,
      badge: approach.theta_ini_in_band ? undefined : "outside band",
    },
    { label: "refinement γ", value: `${raw(approach.gamma_deg)}°` },
    {
      label: "initial position p₀",
      value: rawWithUnit(approach.p0_mm, "mm"),
      badge: approach.p0_saturated ? "saturated" : undefined,
    },
    {
      label: "working angle",
      value: `${raw(approach.working_angle_deg.min)}° … ${raw(
        approach.working_angle_deg.max
      )}° (center ${raw(approach.working_angle_deg.center)}°)`,
    },
  ];
}

export interface TargetRowView {
  title: string;
  theta2: string;
  theta4: string;
  depth: string;
  feasible: boolean;
  chips: string[];
}

export function targetRows(record: PlanRecord): TargetRowView[] {
  return record.joint_targets.map((entry: JointTargetEntry, index: number) => ({
    title: `target ${index + 1}: ${targetReadout(entry)}`,
    theta2: entry.theta2_deg === undefined ? "—" : `${raw(entry.theta2_deg)}°`,
    theta4: entry.theta4_deg === undefined ? "—" : `${raw(entry.theta4_deg)}°`,
    depth: entry.depth_mm === undefined ? "—" : rawWithUnit(entry.depth_mm, "mm"),
    feasible: entry.feasible,
    chips: entry.reasons.slice(),
  }));
}

export function planSummary(record: PlanRecord): PanelRow[] {
  return [
    { label: "feasible", value: record.feasible ? "yes" : "no" },
    {
      label: "centroid",
      value: `polar ${raw(record.centroid.polar_deg)}° / azimuth ${raw(
        record.centroid.azimuth_deg
      )}°`,
    },
    { label: "inputs hash", value: record.inputs_hash.slice(0, 16) },
    { label: "engine", value: record.engine_version },
  ];
}

export interface WhatIfBarView {
  label: string;
  theta2Label: string;
  theta4Label: string;
  depthLabel: string;
  theta2Magnitude: number;
  theta4Magnitude: number;
  noteworthy?: string;
}

export function whatifBars(row: WhatIfRow): WhatIfBarView {
  const view: WhatIfBarView = {
    label: `${row.kind} @ ${raw(row.magnitude)} ${row.unit}`,
    theta2Label: `Δθ₂ ${fixed(row.delta_theta2_deg)}°`,
    theta4Label: `Δθ₄ ${fixed(row.delta_theta4_deg)}°`,
    depthLabel: `ΔZ ${fixed(row.delta_depth_mm)} mm`,
    theta2Magnitude: Math.abs(row.delta_theta2_deg ?? 0),
    theta4Magnitude: Math.abs(row.delta_theta4_deg ?? 0),
  };
  if (row.theta_error_deg !== undefined) {
    view.noteworthy = `deflection ${fixed(row.theta_error_deg)}°`;
  }
  return view;
}

export interface OverlayGridView {
  nPolar: number;
  nAzimuth: number;
  visible: boolean[];
  accessible: boolean[];
  both: boolean[];
  areaSummary: string;
}

export function overlayGrid(payload: OverlayPayload): OverlayGridView {
  const size = payload.grid_meta.n_polar * payload.grid_meta.n_azimuth;
  return {
    nPolar: payload.grid_meta.n_polar,
    nAzimuth: payload.grid_meta.n_azimuth,
    visible: rleDecode(payload.masks.visible, size),
    accessible: rleDecode(payload.masks.accessible, size),
    both: rleDecode(payload.masks.both, size),
    areaSummary:
      `visible ${(payload.area_fractions.visible * 100).toFixed(1)}% · ` +
      `accessible ${(payload.area_fractions.accessible * 100).toFixed(1)}% · ` +
      `both ${(payload.area_fractions.both * 100).toFixed(1)}%`,
  };
}

// --- canvas/pixel mapping (the only client-side geometry allowed) ----------

export interface ClickCheck {
  xPx: number;
  yPx: number;
  insideBoundary: boolean;
}

export function clickToPixelTarget(
  col: number,
  row: number,
  meta: ImageMeta
): ClickCheck {
  const xPx = col - meta.detected_center_px[0];
  const yPx = meta.detected_center_px[1] - row; // raster rows grow downward
  const inside =
    Math.hypot(xPx, yPx) <= meta.detected_diameter_px / 2;
  return { xPx, yPx, insideBoundary: inside };
}
