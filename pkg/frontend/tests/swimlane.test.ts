// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import { layoutSwimLanes, renderSwimLanes, MIN_WIDTH_PCT } from "../src/swimlane.js";
import type { StepEvent } from "../src/model.js";

function step(entity: string, action: string, start: number, end: number,
              ok = true): StepEvent {
  return {
    entity, action, started_at: start, ended_at: end,
    txn_id: `${entity}:${action}`, ok,
  };
}

describe("layoutSwimLanes", () => {
  it("keeps lanes in first-seen entity order", () => {
    const layout = layoutSwimLanes([
      step("eth-a", "reserve", 0, 1),
      step("osw-b", "cross_connect", 1, 2),
      step("eth-a", "verify", 2, 3),
    ]);
    expect(layout.lanes.map((l) => l.entity)).toEqual(["eth-a", "osw-b"]);
    expect(layout.lanes[0].segments).toHaveLength(2);
  });

  it("produces non-overlapping segments within a lane", () => {
    const events: StepEvent[] = [];
    for (let i = 0; i < 6; i += 1) {
      events.push(step("kms", `step${i}`, i * 2, i * 2 + 1.5));
    }
    const [lane] = layoutSwimLanes(events).lanes;
    const sorted = [...lane.segments].sort((a, b) => a.startS - b.startS);
    for (let i = 1; i < sorted.length; i += 1) {
      expect(sorted[i].startS).toBeGreaterThanOrEqual(sorted[i - 1].endS - 1e-9);
    }
  });

  it("rebases times so the first event starts at zero", () => {
    const layout = layoutSwimLanes([
      step("a", "x", 100.0, 101.0),
      step("a", "y", 101.0, 104.0),
    ]);
    expect(layout.spanS).toBeCloseTo(4.0, 9);
    const [first, second] = layout.lanes[0].segments;
    expect(first.startS).toBeCloseTo(0.0, 9);
    expect(second.endS).toBeCloseTo(4.0, 9);
    expect(first.leftPct).toBeCloseTo(0.0, 6);
    expect(second.leftPct).toBeCloseTo(25.0, 6);
    expect(second.widthPct).toBeCloseTo(75.0, 6);
  });

  it("floors zero-width segments so they stay visible", () => {
    const layout = layoutSwimLanes([
      step("a", "blip", 5.0, 5.0),
      step("a", "long", 5.0, 15.0),
    ]);
    const blip = layout.lanes[0].segments.find((s) => s.action === "blip");
    expect(blip?.widthPct).toBe(MIN_WIDTH_PCT);
  });

  it("returns an empty layout for no events", () => {
    const layout = layoutSwimLanes([]);
    expect(layout.lanes).toEqual([]);
    expect(layout.spanS).toBe(0);
  });
});

describe("renderSwimLanes", () => {
  it("renders one labeled track per lane and flags failures", () => {
    const layout = layoutSwimLanes([
      step("eth-a", "reserve", 0, 1),
      step("eth-a", "verify", 1, 2, false),
      step("card-b", "bind", 0, 2),
    ]);
    const root = renderSwimLanes(document, layout);
    const lanes = root.querySelectorAll(".lane");
    expect(lanes).toHaveLength(2);
    const labels = [...root.querySelectorAll(".lane-label")].map(
      (el) => el.textContent);
    expect(labels).toEqual(["eth-a", "card-b"]);

    const steps = root.querySelectorAll<HTMLElement>(".step");
    expect(steps).toHaveLength(3);
    const failed = root.querySelectorAll(".step.failed");
    expect(failed).toHaveLength(1);
    expect(failed[0].getAttribute("title")).toContain("verify");

    for (const el of steps) {
      expect(el.style.left).toMatch(/%$/);
      expect(el.style.width).toMatch(/%$/);
    }
  });
});
