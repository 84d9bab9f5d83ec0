// Swim-lane view of a slice's step log: one lane per entity, events placed
// proportionally by their start/end stamps. Layout is a pure function so the
// sequential contract (no overlap within a lane) can be checked on numbers;
// render turns a layout into DOM.

import type { StepEvent } from "./model.js";

export interface LaneSegment {
  action: string;
  txnId: string | null;
  ok: boolean;
  startS: number;     // relative to the first event in the log
  endS: number;
  leftPct: number;
  widthPct: number;
}

export interface Lane {
  entity: string;
  segments: LaneSegment[];
}

export interface SwimLaneLayout {
  lanes: Lane[];
  spanS: number;
}

// zero-duration marks (instant bookkeeping events) still get a visible sliver
export const MIN_WIDTH_PCT = 0.4;

export function layoutSwimLanes(events: StepEvent[]): SwimLaneLayout {
  if (events.length === 0) return { lanes: [], spanS: 0 };
  const t0 = Math.min(...events.map((e) => e.started_at));
  const t1 = Math.max(...events.map((e) => e.ended_at));
  const span = Math.max(t1 - t0, 1e-9);

  const lanes: Lane[] = [];
  const byEntity = new Map<string, Lane>();
  for (const event of events) {
    // first-seen entity order mirrors execution order top to bottom
    let lane = byEntity.get(event.entity);
    if (!lane) {
      lane = { entity: event.entity, segments: [] };
      byEntity.set(event.entity, lane);
      lanes.push(lane);
    }
    const startS = event.started_at - t0;
    const endS = event.ended_at - t0;
    lane.segments.push({
      action: event.action,
      txnId: event.txn_id,
      ok: event.ok,
      startS,
      endS,
      leftPct: (startS / span) * 100,
      widthPct: Math.max(((endS - startS) / span) * 100, MIN_WIDTH_PCT),
    });
  }
  return { lanes, spanS: t1 - t0 };
}

export function renderSwimLanes(doc: Document,
                                layout: SwimLaneLayout): HTMLElement {
  const root = doc.createElement("div");
  root.className = "swimlanes";
  for (const lane of layout.lanes) {
    const row = doc.createElement("div");
    row.className = "lane";
    const label = doc.createElement("div");
    label.className = "lane-label";
    label.textContent = lane.entity;
    const track = doc.createElement("div");
    track.className = "lane-track";
    for (const seg of lane.segments) {
      const el = doc.createElement("div");
      el.className = seg.ok ? "step" : "step failed";
      el.style.left = `${seg.leftPct}%`;
      el.style.width = `${seg.widthPct}%`;
      el.title = `${seg.action} [${seg.startS.toFixed(1)} - `
        + `${seg.endS.toFixed(1)} s]`;
      track.appendChild(el);
    }
    row.appendChild(label);
    row.appendChild(track);
    root.appendChild(row);
  }
  return root;
}
