// Wire types mirroring the planning service JSON.

export interface SceneSummary {
  id: string;
  version: number;
  document: Record<string, unknown>;
  image_meta: ImageMeta | null;
}

export interface ImageMeta {
  width_px: number;
  height_px: number;
  view_angle_deg: number;
  detected_center_px: [number, number];
  detected_diameter_px: number;
  mm_per_px: number;
}

export interface TargetFragment {
  polar_deg: number;
  azimuth_deg: number;
  source: "pixel" | "polar";
  compensated: boolean;
}

export interface TiltInfo {
  alpha_deg: number;
  beta_deg: number;
  proposed_alpha_deg: number;
  proposed_beta_deg: number;
  raw_alpha_deg: number;
  raw_beta_deg: number;
  clamped: boolean;
  residual_mm: number;
  executed_override: boolean;
}

export interface ApproachInfo {
  selected_trocar: number;
  trocar_world_mm: [number, number, number];
  theta_ini_deg: number;
  theta_ini_in_band: boolean;
  gamma_deg: number;
  p0_mm: number;
  p0_saturated: boolean;
  working_angle_deg: { min: number; max: number; center: number };
  angle_span_delta_deg: number;
  feasible: boolean;
  reasons: string[];
}

export interface JointTargetEntry extends TargetFragment {
  world_after_tilt_mm: [number, number, number];
  visible: boolean;
  feasible: boolean;
  reasons: string[];
  theta2_deg?: number;
  theta4_deg?: number;
  depth_mm?: number;
  k_mm?: number;
  within_limits?: boolean;
  tip_error_mm?: number;
}

export interface PlanRecord {
  kind: "plan_record";
  schema_version: number;
  engine_version: string;
  scene_id: string;
  created_at: string;
  inputs_hash: string;
  centroid: { polar_deg: number; azimuth_deg: number };
  tilt: TiltInfo;
  approach: ApproachInfo | null;
  joint_targets: JointTargetEntry[];
  feasible: boolean;
  reasons: string[];
}

export interface OverlayPayload {
  grid_meta: {
    polar_start_deg: number;
    polar_stop_deg: number;
    polar_step_deg: number;
    azimuth_step_deg: number;
    n_polar: number;
    n_azimuth: number;
    order: "polar-major";
  };
  context: Record<string, unknown>;
  masks: { visible: number[]; accessible: number[]; both: number[] };
  area_fractions: { visible: number; accessible: number; both: number };
}

export interface WhatIfRow {
  kind: string;
  magnitude: number;
  unit: "deg" | "mm";
  delta_theta2_deg: number | null;
  delta_theta4_deg: number | null;
  delta_depth_mm: number | null;
  excluded: number;
  theta_error_deg?: number;
  per_target: Array<Record<string, number | boolean | null>>;
}

export type ErrorKind =
  | "z_align"
  | "eye_pose"
  | "trocar_roll"
  | "trocar_yaw"
  | "instr_trocar_offset";
