/**
 * Loading and validation of report.json + track.geojson.
 *
 * Validation is strict enough that the viewer never renders partial
 * garbage: a violation aborts the load with the offending JSON path.
 */

import type { Bounds, Report, SlotEntry, TrackCollection } from "./types.js";

export class SchemaError extends Error {
  constructor(message: string, readonly path: string) {
    super(`${path}: ${message}`);
  }
}

const KNOWN_EXPERIMENT_KEYS = new Set([
  "id", "name", "started_at_us", "slot_width_s", "nodes",
  "clock_offsets_us", "scenario", "quality",
]);
const KNOWN_SLOT_KEYS = new Set(["slot", "time_us", "end_to_end", "nodes", "links"]);
const KNOWN_E2E_KEYS = new Set([
  "sent", "delivered", "pdr", "bytes", "throughput_bps", "rtt_avg_ms",
  "jitter_rtt_ms", "jitter_iperf_ms", "hop_count", "hop_count_min", "hop_count_max",
]);
const KNOWN_LINK_KEYS = new Set([
  "src", "dst", "sent", "received", "pdr", "bytes", "throughput_bps", "distance_m",
]);
const KNOWN_NODE_KEYS = new Set(["name", "lat", "lon", "speed_mps", "extrapolated"]);

function requireObject(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new SchemaError("expected an object", path);
  }
  return value as Record<string, unknown>;
}

function requireArray(value: unknown, path: string): unknown[] {
  if (!Array.isArray(value)) throw new SchemaError("expected an array", path);
  return value;
}

function requireNumber(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new SchemaError("expected a finite number", path);
  }
  return value;
}

function requireString(value: unknown, path: string): string {
  if (typeof value !== "string") throw new SchemaError("expected a string", path);
  return value;
}

function optionalNumber(
  obj: Record<string, unknown>, key: string, path: string, lo?: number, hi?: number,
): number | undefined {
  if (!(key in obj)) return undefined;
  const v = requireNumber(obj[key], `${path}.${key}`);
  if (lo !== undefined && v < lo) throw new SchemaError(`${key} below ${lo}`, `${path}.${key}`);
  if (hi !== undefined && v > hi) throw new SchemaError(`${key} above ${hi}`, `${path}.${key}`);
  return v;
}

/** Extension entries: every key the schema does not define. */
export function extensionsOf(obj: Record<string, unknown>, known: Set<string>): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const key of Object.keys(obj).sort()) {
    if (!known.has(key)) out[key] = obj[key];
  }
  return out;
}

export function parseReport(raw: unknown): Report {
  const tree = requireObject(raw, "$");
  if (tree.format_version !== 1) {
    throw new SchemaError(`unsupported format_version ${String(tree.format_version)}`, "format_version");
  }
  const exp = requireObject(tree.experiment, "experiment");
  requireString(exp.id, "experiment.id");
  requireString(exp.name, "experiment.name");
  requireNumber(exp.started_at_us, "experiment.started_at_us");
  requireNumber(exp.slot_width_s, "experiment.slot_width_s");
  const nodeNames = new Set<string>();
  const nodes = requireArray(exp.nodes, "experiment.nodes").map((item, i) => {
    const n = requireObject(item, `experiment.nodes[${i}]`);
    const name = requireString(n.name, `experiment.nodes[${i}].name`);
    nodeNames.add(name);
    return { name, role: typeof n.role === "string" ? n.role : "other" };
  });

  const data = requireArray(tree.data, "data").map((item, i) => parseSlot(item, i, nodeNames));
  for (let i = 1; i < data.length; i++) {
    if (data[i]!.time_us <= data[i - 1]!.time_us) {
      throw new SchemaError("data not ordered by time", `data[${i}].time_us`);
    }
  }
  return {
    format_version: 1,
    experiment: { ...(exp as object), nodes } as Report["experiment"],
    data,
  };
}

function parseSlot(item: unknown, i: number, nodeNames: Set<string>): SlotEntry {
  const path = `data[${i}]`;
  const slot = requireObject(item, path);
  requireNumber(slot.slot, `${path}.slot`);
  requireNumber(slot.time_us, `${path}.time_us`);
  const ee = requireObject(slot.end_to_end, `${path}.end_to_end`);
  const sent = requireNumber(ee.sent ?? 0, `${path}.end_to_end.sent`);
  const delivered = requireNumber(ee.delivered ?? 0, `${path}.end_to_end.delivered`);
  if (delivered > sent) throw new SchemaError("delivered exceeds sent", `${path}.end_to_end.delivered`);
  optionalNumber(ee, "pdr", `${path}.end_to_end`, 0, 100);

  const nodes = requireArray(slot.nodes ?? [], `${path}.nodes`).map((raw, k) => {
    const n = requireObject(raw, `${path}.nodes[${k}]`);
    const name = requireString(n.name, `${path}.nodes[${k}].name`);
    if (!nodeNames.has(name)) throw new SchemaError(`undeclared node ${name}`, `${path}.nodes[${k}].name`);
    const lat = requireNumber(n.lat, `${path}.nodes[${k}].lat`);
    const lon = requireNumber(n.lon, `${path}.nodes[${k}].lon`);
    if (lat < -90 || lat > 90) throw new SchemaError("lat out of range", `${path}.nodes[${k}].lat`);
    if (lon < -180 || lon > 180) throw new SchemaError("lon out of range", `${path}.nodes[${k}].lon`);
    return n as unknown as SlotEntry["nodes"][number];
  });

  const links = requireArray(slot.links ?? [], `${path}.links`).map((raw, k) => {
    const l = requireObject(raw, `${path}.links[${k}]`);
    requireString(l.src, `${path}.links[${k}].src`);
    requireString(l.dst, `${path}.links[${k}].dst`);
    const lsent = requireNumber(l.sent ?? 0, `${path}.links[${k}].sent`);
    const lrecv = requireNumber(l.received ?? 0, `${path}.links[${k}].received`);
    if (lrecv > lsent) throw new SchemaError("received exceeds sent", `${path}.links[${k}].received`);
    optionalNumber(l, "pdr", `${path}.links[${k}]`, 0, 100);
    return l as unknown as SlotEntry["links"][number];
  });

  return { ...(slot as object), nodes, links } as SlotEntry;
}

export function parseTrack(raw: unknown): TrackCollection {
  const tree = requireObject(raw, "$");
  if (tree.type !== "FeatureCollection") {
    throw new SchemaError("expected a FeatureCollection", "type");
  }
  const features = requireArray(tree.features ?? [], "features").map((item, i) => {
    const f = requireObject(item, `features[${i}]`);
    if (f.type !== "Feature") throw new SchemaError("expected a Feature", `features[${i}].type`);
    const geometry = requireObject(f.geometry, `features[${i}].geometry`);
    if (geometry.type !== "Point" && geometry.type !== "LineString") {
      throw new SchemaError("expected Point or LineString", `features[${i}].geometry.type`);
    }
    requireArray(geometry.coordinates, `features[${i}].geometry.coordinates`);
    return f as unknown as TrackCollection["features"][number];
  });
  return { type: "FeatureCollection", features };
}

/** Bounding box over every coordinate in the track file (lon-lat order). */
export function trackBounds(track: TrackCollection): Bounds | null {
  let bounds: Bounds | null = null;
  const add = (lon: number, lat: number) => {
    if (bounds === null) {
      bounds = { minLat: lat, maxLat: lat, minLon: lon, maxLon: lon };
    } else {
      bounds.minLat = Math.min(bounds.minLat, lat);
      bounds.maxLat = Math.max(bounds.maxLat, lat);
      bounds.minLon = Math.min(bounds.minLon, lon);
      bounds.maxLon = Math.max(bounds.maxLon, lon);
    }
  };
  for (const f of track.features) {
    if (f.geometry.type === "Point") {
      const [lon, lat] = f.geometry.coordinates as number[];
      add(lon as number, lat as number);
    } else {
      for (const pair of f.geometry.coordinates as number[][]) {
        add(pair[0]!, pair[1]!);
      }
    }
  }
  return bounds;
}
