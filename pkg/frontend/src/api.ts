// Typed fetch client for the planning service.

import type {
  ErrorKind,
  OverlayPayload,
  PlanRecord,
  SceneSummary,
  TargetFragment,
  WhatIfRow,
} from "./types.js";

export interface TargetSpec {
  x_px?: number;
  y_px?: number;
  polar_deg?: number;
  azimuth_deg?: number;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, detail: string) {
    super(detail);
  }
}

export class PlannerClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const err = (payload as { error?: { code?: string; detail?: string } }).error;
      throw new ApiError(response.status, err?.code ?? "error",
        err?.detail ?? response.statusText);
    }
    return payload as T;
  }

  listScenes(): Promise<{ scenes: string[] }> {
    return this.request("GET", "/scenes");
  }

  getScene(id: string): Promise<SceneSummary> {
    return this.request("GET", `/scenes/${id}`);
  }

  createScene(document: Record<string, unknown>): Promise<{ id: string }> {
    return this.request("POST", "/scenes", document);
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/scenes/${id}/image`;
  }

  reconstructTarget(id: string, xPx: number, yPx: number): Promise<TargetFragment> {
    return this.request("POST", `/scenes/${id}/targets`, { x_px: xPx, y_px: yPx });
  }

  plan(id: string, targets: TargetSpec[],
       executedTilt?: { alpha_deg: number; beta_deg: number }): Promise<PlanRecord> {
    return this.request("POST", `/scenes/${id}/plan`, {
      targets,
      executed_tilt: executedTilt ?? null,
    });
  }

  overlay(id: string, planHash?: string): Promise<OverlayPayload> {
    const query = planHash ? `?plan_hash=${encodeURIComponent(planHash)}` : "";
    return this.request("GET", `/scenes/${id}/overlay${query}`);
  }

  whatif(id: string, kind: ErrorKind, magnitude: number): Promise<WhatIfRow> {
    return this.request("POST", `/scenes/${id}/whatif`, { kind, magnitude });
  }
}
