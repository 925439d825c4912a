// Client-side session state: one in-flight plan request per scene, stale
// responses discarded by sequence number.

import type {
  ImageMeta,
  OverlayPayload,
  PlanRecord,
  TargetFragment,
  WhatIfRow,
} from "./types.js";

export class RequestSequencer {
  private issued = 0;
  private accepted = 0;

  begin(): number {
    this.issued += 1;
    return this.issued;
  }

  accept(sequence: number): boolean {
    if (sequence < this.issued || sequence <= this.accepted) {
      return sequence === this.issued;
    }
    this.accepted = sequence;
    return true;
  }
}

export interface PinnedTarget {
  xPx: number;
  yPx: number;
  fragment: TargetFragment;
}

export class UiSceneState {
  sceneId: string | null = null;
  imageMeta: ImageMeta | null = null;
  pinnedTargets: PinnedTarget[] = [];
  record: PlanRecord | null = null;
  overlay: OverlayPayload | null = null;
  overlayVisible = false;
  whatif: Partial<Record<string, WhatIfRow>> = {};
  readonly planRequests = new RequestSequencer();
  readonly whatifRequests = new RequestSequencer();

  reset(sceneId: string, meta: ImageMeta | null): void {
    this.sceneId = sceneId;
    this.imageMeta = meta;
    this.pinnedTargets = [];
    this.record = null;
    this.overlay = null;
    this.whatif = {};
  }

  pin(target: PinnedTarget): void {
    this.pinnedTargets.push(target);
  }

  acceptPlan(sequence: number, record: PlanRecord): boolean {
    if (!this.planRequests.accept(sequence)) return false;
    this.record = record;
    return true;
  }

  acceptWhatif(sequence: number, kind: string, row: WhatIfRow): boolean {
    if (!this.whatifRequests.accept(sequence)) return false;
    this.whatif[kind] = row;
    return true;
  }
}
