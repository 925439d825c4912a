// DOM wiring for the operator console. All planning numbers are rendered
// from service responses via the pure builders in view.ts.

import { PlannerClient, ApiError, TargetSpec } from "./api.js";
import { UiSceneState } from "./state.js";
import {
  approachRows,
  clickToPixelTarget,
  overlayGrid,
  PanelRow,
  planSummary,
  targetReadout,
  targetRows,
  tiltRows,
  whatifBars,
} from "./view.js";
import type { ErrorKind, WhatIfRow } from "./types.js";

const client = new PlannerClient("");
const state = new UiSceneState();

const $ = <T extends HTMLElement>(selector: string): T => {
  const el = document.querySelector<T>(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el;
};

const sceneSelect = $<HTMLSelectElement>("#scene-select");
const canvas = $<HTMLCanvasElement>("#fundus-canvas");
const overlayCanvas = $<HTMLCanvasElement>("#overlay-canvas");
const readout = $<HTMLDivElement>("#target-readout");
const planPanel = $<HTMLDivElement>("#plan-panel");
const targetsPanel = $<HTMLDivElement>("#targets-panel");
const whatifPanel = $<HTMLDivElement>("#whatif-bars");
const statusLine = $<HTMLDivElement>("#status-line");
const overlayToggle = $<HTMLInputElement>("#overlay-toggle");
const executedAlpha = $<HTMLInputElement>("#executed-alpha");
const executedBeta = $<HTMLInputElement>("#executed-beta");

const WHATIF_KINDS: ErrorKind[] = [
  "z_align", "eye_pose", "trocar_roll", "trocar_yaw", "instr_trocar_offset",
];

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? "status error" : "status";
}

function renderRows(container: HTMLElement, rows: PanelRow[]): void {
  container.innerHTML = "";
  for (const row of rows) {
    const div = document.createElement("div");
    div.className = "row";
    const label = document.createElement("span");
    label.className = "label";
    label.textContent = row.label;
    const value = document.createElement("span");
    value.className = "value";
    value.textContent = row.value;
    div.append(label, value);
    if (row.badge) {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = row.badge;
      div.append(badge);
    }
    container.append(div);
  }
}

function renderPlan(): void {
  if (!state.record) {
    planPanel.textContent = "no plan yet";
    targetsPanel.innerHTML = "";
    return;
  }
  const record = state.record;
  planPanel.innerHTML = "";
  const sections: Array<[string, PanelRow[]]> = [
    ["plan", planSummary(record)],
    ["eye posture", tiltRows(record.tilt)],
    ["approach", approachRows(record.approach)],
  ];
  for (const [title, rows] of sections) {
    const heading = document.createElement("h3");
    heading.textContent = title;
    planPanel.append(heading);
    const box = document.createElement("div");
    renderRows(box, rows);
    planPanel.append(box);
  }
  targetsPanel.innerHTML = "";
  for (const row of targetRows(record)) {
    const card = document.createElement("div");
    card.className = row.feasible ? "target-card" : "target-card infeasible";
    const title = document.createElement("div");
    title.className = "target-title";
    title.textContent = row.title;
    const joints = document.createElement("div");
    joints.textContent = `θ₂ ${row.theta2} · θ₄ ${row.theta4} · Z ${row.depth}`;
    card.append(title, joints);
    for (const chip of row.chips) {
      const span = document.createElement("span");
      span.className = "chip";
      span.textContent = chip;
      card.append(span);
    }
    targetsPanel.append(card);
  }
  drawMarkers();
}

function drawImage(): void {
  if (!state.sceneId) return;
  const image = new Image();
  image.onload = () => {
    canvas.width = image.width;
    canvas.height = image.height;
    canvas.getContext("2d")!.drawImage(image, 0, 0);
    drawMarkers();
  };
  image.src = client.imageUrl(state.sceneId);
}

function drawMarkers(): void {
  const ctx = canvas.getContext("2d")!;
  if (!state.imageMeta) return;
  const [cx, cy] = state.imageMeta.detected_center_px;
  ctx.strokeStyle = "#39c";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(cx, cy, state.imageMeta.detected_diameter_px / 2, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.fillStyle = "#e33";
  for (const pin of state.pinnedTargets) {
    ctx.beginPath();
    ctx.arc(cx + pin.xPx, cy - pin.yPx, 6, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawOverlay(): void {
  if (!state.overlay || !state.overlayVisible) {
    overlayCanvas.getContext("2d")!.clearRect(
      0, 0, overlayCanvas.width, overlayCanvas.height);
    return;
  }
  const grid = overlayGrid(state.overlay);
  overlayCanvas.width = grid.nAzimuth;
  overlayCanvas.height = grid.nPolar;
  const ctx = overlayCanvas.getContext("2d")!;
  const image = ctx.createImageData(grid.nAzimuth, grid.nPolar);
  for (let i = 0; i < grid.visible.length; i++) {
    const offset = 4 * i;
    image.data[offset] = grid.accessible[i] ? 60 : 10;
    image.data[offset + 1] = grid.both[i] ? 200 : grid.visible[i] ? 90 : 10;
    image.data[offset + 2] = grid.visible[i] ? 140 : 15;
    image.data[offset + 3] = 235;
  }
  ctx.putImageData(image, 0, 0);
  $<HTMLDivElement>("#overlay-caption").textContent = grid.areaSummary;
}

async function refreshOverlay(): Promise<void> {
  if (!state.sceneId) return;
  const planHash = state.record?.inputs_hash.slice(0, 16);
  state.overlay = await client.overlay(state.sceneId, planHash);
  drawOverlay();
}

async function replan(): Promise<void> {
  if (!state.sceneId || state.pinnedTargets.length === 0) return;
  const sequence = state.planRequests.begin();
  const targets: TargetSpec[] = state.pinnedTargets.map((pin) => ({
    x_px: pin.xPx, y_px: pin.yPx,
  }));
  const alpha = parseFloat(executedAlpha.value);
  const beta = parseFloat(executedBeta.value);
  const executed = Number.isFinite(alpha) && Number.isFinite(beta)
    ? { alpha_deg: alpha, beta_deg: beta } : undefined;
  try {
    const record = await client.plan(state.sceneId, targets, executed);
    if (!state.acceptPlan(sequence, record)) return; // stale
    renderPlan();
    if (state.overlayVisible) await refreshOverlay();
    setStatus(`planned ${targets.length} target(s)`);
  } catch (err) {
    setStatus(err instanceof ApiError ? `${err.code}: ${err.message}`
      : String(err), true);
  }
}

async function handleCanvasClick(event: MouseEvent): Promise<void> {
  if (!state.sceneId || !state.imageMeta) return;
  const bounds = canvas.getBoundingClientRect();
  const col = ((event.clientX - bounds.left) / bounds.width) * canvas.width;
  const row = ((event.clientY - bounds.top) / bounds.height) * canvas.height;
  const click = clickToPixelTarget(col, row, state.imageMeta);
  if (!click.insideBoundary) {
    setStatus("click is outside the detected fundus boundary", true);
    return;
  }
  try {
    const fragment = await client.reconstructTarget(
      state.sceneId, click.xPx, click.yPx);
    state.pin({ xPx: click.xPx, yPx: click.yPx, fragment });
    readout.textContent = targetReadout(fragment);
    drawMarkers();
    await replan();
  } catch (err) {
    setStatus(err instanceof ApiError ? `${err.code}: ${err.message}`
      : String(err), true);
  }
}

function buildWhatifSliders(): void {
  const container = $<HTMLDivElement>("#whatif-sliders");
  container.innerHTML = "";
  for (const kind of WHATIF_KINDS) {
    const isOffset = kind === "instr_trocar_offset";
    const wrapper = document.createElement("label");
    wrapper.textContent = `${kind} (${isOffset ? "mm" : "deg"})`;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = isOffset ? "-1" : "-10";
    slider.max = isOffset ? "1" : "10";
    slider.step = isOffset ? "0.1" : "0.5";
    slider.value = "0";
    slider.addEventListener("input", () => runWhatif(kind, parseFloat(slider.value)));
    wrapper.append(slider);
    container.append(wrapper);
  }
}

async function runWhatif(kind: ErrorKind, magnitude: number): Promise<void> {
  if (!state.sceneId) return;
  const sequence = state.whatifRequests.begin();
  try {
    const row: WhatIfRow = await client.whatif(state.sceneId, kind, magnitude);
    if (!state.acceptWhatif(sequence, kind, row)) return; // stale
    renderWhatif();
  } catch (err) {
    setStatus(String(err), true);
  }
}

function renderWhatif(): void {
  whatifPanel.innerHTML = "";
  for (const kind of WHATIF_KINDS) {
    const row = state.whatif[kind];
    if (!row) continue;
    const view = whatifBars(row);
    const box = document.createElement("div");
    box.className = "whatif-row";
    const label = document.createElement("div");
    label.textContent = view.label + (view.noteworthy ? ` — ${view.noteworthy}` : "");
    const bars = document.createElement("div");
    bars.className = "bars";
    for (const [text, magnitude] of [
      [view.theta2Label, view.theta2Magnitude],
      [view.theta4Label, view.theta4Magnitude],
    ] as Array<[string, number]>) {
      const bar = document.createElement("div");
      bar.className = "bar";
      bar.style.width = `${Math.min(100, magnitude * 20)}%`;
      bar.textContent = text;
      bars.append(bar);
    }
    const depth = document.createElement("div");
    depth.textContent = view.depthLabel;
    box.append(label, bars, depth);
    whatifPanel.append(box);
  }
}

async function loadScene(sceneId: string): Promise<void> {
  const summary = await client.getScene(sceneId);
  state.reset(sceneId, summary.image_meta);
  readout.textContent = "click the image to pin a target";
  renderPlan();
  renderWhatif();
  drawImage();
  setStatus(`scene ${sceneId} v${summary.version} loaded`);
}

async function boot(): Promise<void> {
  buildWhatifSliders();
  canvas.addEventListener("click", handleCanvasClick);
  overlayToggle.addEventListener("change", async () => {
    state.overlayVisible = overlayToggle.checked;
    if (state.overlayVisible && !state.overlay) await refreshOverlay();
    drawOverlay();
  });
  $<HTMLButtonElement>("#replan-button").addEventListener("click", replan);
  $<HTMLButtonElement>("#clear-button").addEventListener("click", () => {
    if (state.sceneId) void loadScene(state.sceneId);
  });
  sceneSelect.addEventListener("change", () => void loadScene(sceneSelect.value));
  try {
    const { scenes } = await client.listScenes();
    sceneSelect.innerHTML = "";
    for (const id of scenes) {
      const option = document.createElement("option");
      option.value = id;
      option.textContent = id;
      sceneSelect.append(option);
    }
    if (scenes.length > 0) await loadScene(scenes[0]);
    else setStatus("no scenes in workspace; POST /scenes to create one", true);
  } catch (err) {
    setStatus(`cannot reach planning service: ${String(err)}`, true);
  }
}

void boot();
