/**
 * Entry point. Experiments are listed in experiments.json next to the page:
 *
 *   [{"label": "golden", "report": "golden/report.json",
 *     "track": "golden/track.geojson"}, ...]
 *
 * Optional viewer.config.json may set {"tileUrlTemplate": "...", "tileZoom": 15};
 * without it (or offline) tracks render on the plain canvas.
 */

import { Viewer, type ViewerConfig } from "./viewer.js";

async function fetchJson(url: string): Promise<unknown | null> {
  try {
    const resp = await fetch(url);
    if (!resp.ok) return null;
    return await resp.json();
  } catch {
    return null;
  }
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app container");
  const config = ((await fetchJson("viewer.config.json")) ?? {}) as ViewerConfig;
  const viewer = new Viewer(root, config);

  // A manifest next to the page wins; the packaged fixtures are the demo.
  const manifest =
    (await fetchJson("experiments.json")) ?? (await fetchJson("fixtures/experiments.json"));
  if (!Array.isArray(manifest) || manifest.length === 0) {
    root.insertAdjacentHTML(
      "beforeend",
      "<p>No experiments.json found. Analyze a run, then list its report.json and track.geojson there.</p>",
    );
    return;
  }
  for (const entry of manifest as { label: string; report: string; track: string }[]) {
    const report = await fetchJson(entry.report);
    const track = await fetchJson(entry.track);
    if (report === null || track === null) continue;
    viewer.addExperiment(entry.label, report, track);
  }
}

boot();
