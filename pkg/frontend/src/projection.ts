/**
 * Equirectangular projection of a track bounding box onto the canvas,
 * padded and latitude-corrected. Good for the few-km extents of a drive
 * test; tile layers, when configured, use standard web-mercator math.
 */

import type { Bounds } from "./types.js";

export interface Projection {
  toCanvas(lat: number, lon: number): { x: number; y: number };
  center: { lat: number; lon: number };
}

export function makeProjection(
  bounds: Bounds, width: number, height: number, paddingPx = 40,
): Projection {
  const center = {
    lat: (bounds.minLat + bounds.maxLat) / 2,
    lon: (bounds.minLon + bounds.maxLon) / 2,
  };
  const latScaleFix = Math.cos((center.lat * Math.PI) / 180);
  const spanLat = Math.max(bounds.maxLat - bounds.minLat, 1e-6);
  const spanLon = Math.max((bounds.maxLon - bounds.minLon) * latScaleFix, 1e-6);
  const usableW = Math.max(width - 2 * paddingPx, 1);
  const usableH = Math.max(height - 2 * paddingPx, 1);
  const scale = Math.min(usableW / spanLon, usableH / spanLat);
  return {
    center,
    toCanvas(lat: number, lon: number) {
      const x = width / 2 + (lon - center.lon) * latScaleFix * scale;
      const y = height / 2 - (lat - center.lat) * scale;
      return { x, y };
    },
  };
}

/** Web-mercator tile coordinates for an OSM-style {z}/{x}/{y} template. */
export function tileAt(lat: number, lon: number, zoom: number): { x: number; y: number } {
  const n = 2 ** zoom;
  const x = Math.floor(((lon + 180) / 360) * n);
  const rad = (lat * Math.PI) / 180;
  const y = Math.floor(((1 - Math.log(Math.tan(rad) + 1 / Math.cos(rad)) / Math.PI) / 2) * n);
  return { x, y };
}
