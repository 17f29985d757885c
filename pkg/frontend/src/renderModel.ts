/**
 * The visual model for one slot: a pure function of (report, playback state).
 *
 * Every displayed value is taken verbatim from the report; the viewer never
 * recomputes a metric. Link width encodes throughput (3..12 px, linear in
 * log-throughput) and color encodes the delivery ratio: >= 99% green,
 * >= 80% amber, below that red, and gray dashes when the link carried no
 * traffic in the slot.
 */

import type { PlaybackState } from "./playback.js";
import type { LinkSlotStats, Report, SlotEntry } from "./types.js";
import { extensionsOf } from "./reportLoader.js";

export const LINK_WIDTH_MIN_PX = 3;
export const LINK_WIDTH_MAX_PX = 12;
// Width ramps across six decades: 1 kbit/s renders minimal, 1 Gbit/s maximal.
export const LINK_WIDTH_LOG_MIN = 3; // log10(1e3)
export const LINK_WIDTH_LOG_MAX = 9; // log10(1e9)

export const PDR_GREEN_AT = 99;
export const PDR_AMBER_AT = 80;

export type LinkColor = "green" | "amber" | "red" | "gray";

export interface NodeMarker {
  name: string;
  lat: number;
  lon: number;
  speedLabel: string; // shown next to the marker
  extrapolated: boolean;
  selected: boolean;
}

export interface LinkLine {
  src: string;
  dst: string;
  /** Endpoint positions; undefined when either node has no fix this slot. */
  from?: { lat: number; lon: number };
  to?: { lat: number; lon: number };
  widthPx: number;
  color: LinkColor;
  dashed: boolean;
  active: boolean; // carried traffic in this slot
  selected: boolean;
  stats: LinkSlotStats | null;
}

export interface PanelRow {
  label: string;
  value: string;
}

export interface SlotVisual {
  slot: number;
  timeUs: number;
  timeLabel: string; // seconds since experiment start
  nodes: NodeMarker[];
  links: LinkLine[];
  endToEnd: PanelRow[];
  linkPanel: PanelRow[]; // for the selected link, empty otherwise
  extras: Record<string, unknown>;
  chart: ChartSeries | null;
}

export interface ChartSeries {
  title: string;
  metric: string;
  points: { slot: number; value: number | null }[];
}

export function linkColor(pdr: number | undefined): LinkColor {
  if (pdr === undefined) return "gray";
  if (pdr >= PDR_GREEN_AT) return "green";
  if (pdr >= PDR_AMBER_AT) return "amber";
  return "red";
}

export function linkWidthPx(throughputBps: number | undefined): number {
  if (throughputBps === undefined || throughputBps <= 0) return LINK_WIDTH_MIN_PX;
  const t = (Math.log10(throughputBps) - LINK_WIDTH_LOG_MIN) / (LINK_WIDTH_LOG_MAX - LINK_WIDTH_LOG_MIN);
  const clamped = Math.min(Math.max(t, 0), 1);
  return LINK_WIDTH_MIN_PX + clamped * (LINK_WIDTH_MAX_PX - LINK_WIDTH_MIN_PX);
}

/** Every link that appears in any slot of the report, in stable order. */
export function knownLinks(report: Report): { src: string; dst: string }[] {
  const seen = new Map<string, { src: string; dst: string }>();
  for (const slot of report.data) {
    for (const link of slot.links) {
      seen.set(`${link.src}>${link.dst}`, { src: link.src, dst: link.dst });
    }
  }
  return [...seen.keys()].sort().map((k) => seen.get(k)!);
}

const KNOWN_E2E = new Set([
  "sent", "delivered", "pdr", "bytes", "throughput_bps", "rtt_avg_ms",
  "jitter_rtt_ms", "jitter_iperf_ms", "hop_count", "hop_count_min", "hop_count_max",
]);
const KNOWN_SLOT = new Set(["slot", "time_us", "end_to_end", "nodes", "links"]);

function fmt(value: unknown, unit = ""): string {
  if (value === undefined || value === null) return "-";
  return `${value}${unit}`;
}

export function renderSlot(report: Report, state: PlaybackState): SlotVisual {
  const entry: SlotEntry | undefined = report.data[state.slot];
  if (entry === undefined) {
    return {
      slot: state.slot, timeUs: 0, timeLabel: "-", nodes: [], links: [],
      endToEnd: [], linkPanel: [], extras: {}, chart: null,
    };
  }

  const positions = new Map(entry.nodes.map((n) => [n.name, { lat: n.lat, lon: n.lon }]));
  const nodes: NodeMarker[] = entry.nodes.map((n) => ({
    name: n.name,
    lat: n.lat,
    lon: n.lon,
    speedLabel: `${n.speed_mps} m/s`,
    extrapolated: n.extrapolated,
    selected: state.selectedNode === n.name,
  }));

  const statsByLink = new Map(entry.links.map((l) => [`${l.src}>${l.dst}`, l]));
  const links: LinkLine[] = knownLinks(report).map(({ src, dst }) => {
    const stats = statsByLink.get(`${src}>${dst}`) ?? null;
    return {
      src,
      dst,
      from: positions.get(src),
      to: positions.get(dst),
      widthPx: stats ? linkWidthPx(stats.throughput_bps) : LINK_WIDTH_MIN_PX,
      color: stats ? linkColor(stats.pdr) : "gray",
      dashed: stats === null,
      active: stats !== null,
      selected: state.selectedLink?.src === src && state.selectedLink?.dst === dst,
      stats,
    };
  });

  const e = entry.end_to_end;
  const endToEnd: PanelRow[] = [
    { label: "packets sent", value: fmt(e.sent) },
    { label: "packets delivered", value: fmt(e.delivered) },
    { label: "delivery ratio", value: fmt(e.pdr, " %") },
    { label: "transferred", value: fmt(e.bytes, " B") },
    { label: "bandwidth", value: fmt(e.throughput_bps, " bit/s") },
    { label: "rtt", value: fmt(e.rtt_avg_ms, " ms") },
    { label: "jitter (rtt)", value: fmt(e.jitter_rtt_ms, " ms") },
    { label: "jitter (iperf)", value: fmt(e.jitter_iperf_ms, " ms") },
    { label: "hops", value: fmt(e.hop_count) },
  ];

  let linkPanel: PanelRow[] = [];
  let chart: ChartSeries | null = null;
  if (state.selectedLink !== null) {
    const { src, dst } = state.selectedLink;
    const stats = statsByLink.get(`${src}>${dst}`);
    linkPanel = [
      { label: "link", value: `${src} > ${dst}` },
      { label: "sent", value: fmt(stats?.sent) },
      { label: "received", value: fmt(stats?.received) },
      { label: "delivery ratio", value: fmt(stats?.pdr, " %") },
      { label: "transferred", value: fmt(stats?.bytes, " B") },
      { label: "bandwidth", value: fmt(stats?.throughput_bps, " bit/s") },
      { label: "distance", value: fmt(stats?.distance_m, " m") },
    ];
    chart = linkSeries(report, src, dst, "pdr");
  }

  const extras = {
    ...extensionsOf(report.experiment as unknown as Record<string, unknown>, new Set([
      "id", "name", "started_at_us", "slot_width_s", "nodes",
      "clock_offsets_us", "scenario", "quality",
    ])),
    ...extensionsOf(entry as unknown as Record<string, unknown>, KNOWN_SLOT),
    ...extensionsOf(e as unknown as Record<string, unknown>, KNOWN_E2E),
  };

  return {
    slot: entry.slot,
    timeUs: entry.time_us,
    timeLabel: `${((entry.time_us - report.experiment.started_at_us) / 1e6).toFixed(0)} s`,
    nodes,
    links,
    endToEnd,
    linkPanel,
    extras,
    chart,
  };
}

/** Per-slot series of one link metric, values verbatim from the report. */
export function linkSeries(report: Report, src: string, dst: string, metric: "pdr" | "throughput_bps" | "sent" | "received"): ChartSeries {
  const points = report.data.map((slot) => {
    const stats = slot.links.find((l) => l.src === src && l.dst === dst);
    const value = stats ? (stats[metric] as number | undefined) : undefined;
    return { slot: slot.slot, value: value === undefined ? null : value };
  });
  return { title: `${src} > ${dst}`, metric, points };
}

/** First slot in which a link reports traffic; null if it never does. */
export function firstActiveSlot(report: Report, src: string, dst: string): number | null {
  for (const slot of report.data) {
    if (slot.links.some((l) => l.src === src && l.dst === dst && l.sent > 0)) {
      return slot.slot;
    }
  }
  return null;
}
