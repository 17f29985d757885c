import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { initialState, seek, selectLink } from "../src/playback.js";
import {
  LINK_WIDTH_MAX_PX,
  LINK_WIDTH_MIN_PX,
  firstActiveSlot,
  linkColor,
  linkSeries,
  linkWidthPx,
  renderSlot,
} from "../src/renderModel.js";
import { parseReport } from "../src/reportLoader.js";
import type { Report } from "../src/types.js";

const FIXTURES = join(__dirname, "..", "fixtures");

function fixture(name: string): Report {
  return parseReport(JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")));
}

describe("link color buckets", () => {
  it("maps the documented thresholds", () => {
    expect(linkColor(100)).toBe("green");
    expect(linkColor(99)).toBe("green");
    expect(linkColor(98.9)).toBe("amber");
    expect(linkColor(90)).toBe("amber");
    expect(linkColor(80)).toBe("amber");
    expect(linkColor(79.9)).toBe("red");
    expect(linkColor(50)).toBe("red");
    expect(linkColor(0)).toBe("red");
    expect(linkColor(undefined)).toBe("gray");
  });
});

describe("link width", () => {
  it("is linear in log-throughput within 3..12 px", () => {
    expect(linkWidthPx(undefined)).toBe(LINK_WIDTH_MIN_PX);
    expect(linkWidthPx(0)).toBe(LINK_WIDTH_MIN_PX);
    expect(linkWidthPx(1e3)).toBe(LINK_WIDTH_MIN_PX);
    expect(linkWidthPx(1e9)).toBe(LINK_WIDTH_MAX_PX);
    expect(linkWidthPx(1e12)).toBe(LINK_WIDTH_MAX_PX);
    const mid = linkWidthPx(1e6);
    expect(mid).toBeCloseTo((LINK_WIDTH_MIN_PX + LINK_WIDTH_MAX_PX) / 2, 5);
    // log-linearity: equal ratios, equal increments
    expect(linkWidthPx(1e5) - linkWidthPx(1e4)).toBeCloseTo(linkWidthPx(1e7) - linkWidthPx(1e6), 5);
  });
});

describe("renderSlot on the golden report", () => {
  const report = fixture("golden/report.json");

  it("renders markers with speed labels at slot positions", () => {
    const visual = renderSlot(report, initialState(report.data.length));
    expect(visual.nodes.length).toBe(3);
    const mr1 = visual.nodes.find((n) => n.name === "MR1")!;
    expect(mr1.lat).toBe(report.data[0]!.nodes.find((n) => n.name === "MR1")!.lat);
    expect(mr1.speedLabel).toMatch(/m\/s$/);
  });

  it("shows lossless links as green with verbatim stats", () => {
    const visual = renderSlot(report, initialState(report.data.length));
    const active = visual.links.filter((l) => l.active);
    expect(active.length).toBe(2);
    for (const link of active) {
      expect(link.color).toBe("green");
      expect(link.dashed).toBe(false);
      expect(link.stats!.pdr).toBe(100.0);
    }
  });

  it("marks links absent in a slot as gray dashed", () => {
    // The golden report's trailing slots carry node stats only.
    const last = report.data.length - 1;
    const visual = renderSlot(report, seek(initialState(report.data.length), last));
    expect(visual.links.every((l) => !l.active)).toBe(true);
    expect(visual.links.every((l) => l.color === "gray" && l.dashed)).toBe(true);
  });

  it("side panel carries report values verbatim", () => {
    const visual = renderSlot(report, initialState(report.data.length));
    const e = report.data[0]!.end_to_end;
    const row = (label: string) => visual.endToEnd.find((r) => r.label === label)!.value;
    expect(row("packets sent")).toBe(String(e.sent));
    expect(row("transferred")).toBe(`${e.bytes} B`);
    expect(row("bandwidth")).toBe(`${e.throughput_bps} bit/s`);
    expect(row("delivery ratio")).toBe(`${e.pdr} %`);
  });

  it("clicking a link pins its per-slot series", () => {
    let state = initialState(report.data.length);
    state = selectLink(state, "MR1", "MR2");
    const visual = renderSlot(report, state);
    expect(visual.chart).not.toBeNull();
    expect(visual.chart!.title).toBe("MR1 > MR2");
    expect(visual.chart!.points.length).toBe(report.data.length);
    expect(visual.chart!.points[0]!.value).toBe(100.0);
    expect(visual.linkPanel.find((r) => r.label === "sent")!.value).toBe("40");
  });

  it("is a pure function of report and state", () => {
    const state = seek(initialState(report.data.length), 1);
    expect(renderSlot(report, state)).toEqual(renderSlot(report, state));
  });

  it("surfaces unknown keys in the extras panel", () => {
    const raw = JSON.parse(readFileSync(join(FIXTURES, "golden/report.json"), "utf-8"));
    raw.data[0].end_to_end.rssi_dbm = -57;
    const visual = renderSlot(parseReport(raw), initialState(raw.data.length));
    expect(visual.extras).toHaveProperty("rssi_dbm", -57);
  });
});

describe("handover scenario", () => {
  const report = fixture("handover/report.json");
  const truth = JSON.parse(readFileSync(join(FIXTURES, "handover/truth.json"), "utf-8"));

  it("shows the roadside-router switch at the truth slot", () => {
    const switchSlot: number = truth.switch_slot;
    expect(firstActiveSlot(report, "MR1", "AR2")).toBe(switchSlot);

    const before = renderSlot(report, seek(initialState(report.data.length), switchSlot - 1));
    const after = renderSlot(report, seek(initialState(report.data.length), switchSlot));
    const by = (v: typeof before, src: string, dst: string) =>
      v.links.find((l) => l.src === src && l.dst === dst)!;

    expect(by(before, "MR1", "AR1").active).toBe(true);
    expect(by(before, "MR1", "AR2").active).toBe(false);
    expect(by(before, "MR1", "AR2").color).toBe("gray");

    expect(by(after, "MR1", "AR2").active).toBe(true);
    expect(by(after, "MR1", "AR2").color).toBe("green");
    expect(by(after, "MR1", "AR1").active).toBe(false);
    expect(by(after, "MR1", "AR1").color).toBe("gray");
  });

  it("series for the old and new first hop flip at the switch", () => {
    const ar1 = linkSeries(report, "MR1", "AR1", "sent");
    const ar2 = linkSeries(report, "MR1", "AR2", "sent");
    const switchSlot: number = truth.switch_slot;
    expect(ar1.points[switchSlot - 1]!.value).toBeGreaterThan(0);
    expect(ar1.points[switchSlot]!.value).toBeNull();
    expect(ar2.points[switchSlot - 1]!.value).toBeNull();
    expect(ar2.points[switchSlot]!.value).toBeGreaterThan(0);
  });
});
