/**
 * Shapes of the analyzer's external artifacts: the three-layer report
 * (format_version 1) and the GeoJSON track file. Unknown keys are carried
 * along verbatim so future attributes surface in the extras panel instead
 * of disappearing.
 */

export interface EndToEndStats {
  sent: number;
  delivered: number;
  pdr?: number;
  bytes: number;
  throughput_bps: number;
  rtt_avg_ms?: number;
  jitter_rtt_ms?: number;
  jitter_iperf_ms?: number;
  hop_count?: number;
  hop_count_min?: number;
  hop_count_max?: number;
  [extra: string]: unknown;
}

export interface NodeSlotStats {
  name: string;
  lat: number;
  lon: number;
  speed_mps: number;
  extrapolated: boolean;
  [extra: string]: unknown;
}

export interface LinkSlotStats {
  src: string;
  dst: string;
  sent: number;
  received: number;
  pdr?: number;
  bytes: number;
  throughput_bps: number;
  distance_m?: number;
  [extra: string]: unknown;
}

export interface SlotEntry {
  slot: number;
  time_us: number;
  end_to_end: EndToEndStats;
  nodes: NodeSlotStats[];
  links: LinkSlotStats[];
  [extra: string]: unknown;
}

export interface Experiment {
  id: string;
  name: string;
  started_at_us: number;
  slot_width_s: number;
  nodes: { name: string; role: string }[];
  clock_offsets_us?: Record<string, number>;
  scenario?: Record<string, unknown>;
  quality?: Record<string, unknown>;
  [extra: string]: unknown;
}

export interface Report {
  format_version: number;
  experiment: Experiment;
  data: SlotEntry[];
}

export interface TrackFeature {
  type: "Feature";
  geometry: { type: "LineString" | "Point"; coordinates: number[] | number[][] };
  properties: Record<string, unknown>;
}

export interface TrackCollection {
  type: "FeatureCollection";
  features: TrackFeature[];
}

export interface LatLon {
  lat: number;
  lon: number;
}

export interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}
