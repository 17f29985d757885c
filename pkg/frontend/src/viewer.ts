/**
 * DOM shell: canvas map, timeline controls, side panels and the experiment
 * picker. All rendering decisions come from renderModel; this file only
 * paints and forwards events.
 *
 * Map tiles are pluggable through ViewerConfig.tileUrlTemplate; without one
 * (or without network) tracks render on a plain canvas so the viewer works
 * fully offline.
 */

import * as playback from "./playback.js";
import { SPEEDS, type PlaybackState, type Speed } from "./playback.js";
import { makeProjection, tileAt, type Projection } from "./projection.js";
import { renderSlot, type LinkColor, type SlotVisual } from "./renderModel.js";
import { parseReport, parseTrack, trackBounds, SchemaError } from "./reportLoader.js";
import type { Report, TrackCollection } from "./types.js";

export interface ViewerConfig {
  /** e.g. "https://tile.openstreetmap.org/{z}/{x}/{y}.png"; empty = offline. */
  tileUrlTemplate?: string;
  tileZoom?: number;
}

export interface LoadedExperiment {
  label: string;
  report: Report;
  track: TrackCollection;
}

const COLOR_CSS: Record<LinkColor, string> = {
  green: "#2e9e4f",
  amber: "#e0a800",
  red: "#d23f31",
  gray: "#9a9a9a",
};

export class Viewer {
  private experiments: LoadedExperiment[] = [];
  private current: LoadedExperiment | null = null;
  private state: PlaybackState = playback.initialState(0);
  private projection: Projection | null = null;
  private frameHandle: number | null = null;
  private lastFrameMs: number | null = null;
  private tiles = new Map<string, HTMLImageElement>();

  constructor(
    private readonly root: HTMLElement,
    private readonly config: ViewerConfig = {},
  ) {
    this.buildDom();
  }

  /** Load one experiment (already-fetched JSON values) and select it. */
  addExperiment(label: string, reportRaw: unknown, trackRaw: unknown): void {
    try {
      const report = parseReport(reportRaw);
      const track = parseTrack(trackRaw);
      this.experiments.push({ label, report, track });
      this.refreshPicker();
      this.selectExperiment(this.experiments.length - 1);
    } catch (err) {
      if (err instanceof SchemaError) {
        this.showError(`cannot load ${label} — ${err.message}`);
        return;
      }
      throw err;
    }
  }

  selectExperiment(index: number): void {
    const exp = this.experiments[index];
    if (exp === undefined) return;
    this.current = exp;
    this.state = playback.initialState(exp.report.data.length);
    const bounds = trackBounds(exp.track);
    const canvas = this.canvas();
    this.projection = bounds
      ? makeProjection(bounds, canvas.width, canvas.height)
      : null;
    this.hideError();
    this.syncControls();
    this.paint();
  }

  // --- controls ---------------------------------------------------------

  onPlayPause(): void {
    this.state = this.state.playing ? playback.pause(this.state) : playback.play(this.state);
    if (this.state.playing) this.startLoop();
    this.syncControls();
    this.paint();
  }

  onStep(direction: 1 | -1): void {
    this.state = playback.step(this.state, direction);
    this.syncControls();
    this.paint();
  }

  onSeek(slot: number): void {
    this.state = playback.seek(this.state, slot);
    this.syncControls();
    this.paint();
  }

  onSpeed(speed: Speed): void {
    this.state = playback.play(playback.pause(this.state), speed);
    this.state = { ...this.state, playing: false };
    this.syncControls();
  }

  private startLoop(): void {
    if (this.frameHandle !== null) return;
    this.lastFrameMs = null;
    const tick = (nowMs: number) => {
      this.frameHandle = null;
      if (!this.state.playing) return;
      if (this.lastFrameMs !== null) {
        this.state = playback.advance(this.state, (nowMs - this.lastFrameMs) / 1000);
      }
      this.lastFrameMs = nowMs;
      this.syncControls();
      this.paint();
      if (this.state.playing) this.frameHandle = requestAnimationFrame(tick);
    };
    this.frameHandle = requestAnimationFrame(tick);
  }

  // --- painting ---------------------------------------------------------

  paint(): void {
    if (this.current === null) return;
    const visual = renderSlot(this.current.report, this.state);
    this.paintMap(visual);
    this.paintPanels(visual);
    this.paintChart(visual);
  }

  private paintMap(visual: SlotVisual): void {
    const canvas = this.canvas();
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#f2efe9";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const proj = this.projection;
    if (proj === null || this.current === null) return;
    this.paintTiles(ctx, proj);

    // Faint full tracks for spatial context.
    ctx.strokeStyle = "#c8c3ba";
    ctx.lineWidth = 1.5;
    for (const f of this.current.track.features) {
      if (f.geometry.type !== "LineString") continue;
      ctx.beginPath();
      (f.geometry.coordinates as number[][]).forEach(([lon, lat], i) => {
        const { x, y } = proj.toCanvas(lat!, lon!);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    }

    for (const link of visual.links) {
      if (link.from === undefined || link.to === undefined) continue;
      const a = proj.toCanvas(link.from.lat, link.from.lon);
      const b = proj.toCanvas(link.to.lat, link.to.lon);
      ctx.beginPath();
      ctx.setLineDash(link.dashed ? [6, 6] : []);
      ctx.lineWidth = link.selected ? link.widthPx + 2 : link.widthPx;
      ctx.strokeStyle = COLOR_CSS[link.color];
      ctx.moveTo(a.x, a.y);
      ctx.lineTo(b.x, b.y);
      ctx.stroke();
      ctx.setLineDash([]);
    }

    ctx.font = "12px sans-serif";
    for (const node of visual.nodes) {
      const { x, y } = proj.toCanvas(node.lat, node.lon);
      ctx.beginPath();
      ctx.fillStyle = node.selected ? "#1154a3" : "#333";
      ctx.arc(x, y, node.extrapolated ? 4 : 6, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#222";
      ctx.fillText(`${node.name} (${node.speedLabel})`, x + 8, y - 8);
    }
  }

  private paintTiles(ctx: CanvasRenderingContext2D, proj: Projection): void {
    const template = this.config.tileUrlTemplate;
    if (!template) return;
    const zoom = this.config.tileZoom ?? 15;
    const { x, y } = tileAt(proj.center.lat, proj.center.lon, zoom);
    for (let dx = -1; dx <= 1; dx++) {
      for (let dy = -1; dy <= 1; dy++) {
        const url = template
          .replace("{z}", String(zoom))
          .replace("{x}", String(x + dx))
          .replace("{y}", String(y + dy));
        let img = this.tiles.get(url);
        if (img === undefined) {
          img = new Image();
          img.src = url;
          img.onload = () => this.paint();
          this.tiles.set(url, img);
        }
        if (img.complete && img.naturalWidth > 0) {
          const canvas = this.canvas();
          ctx.globalAlpha = 0.7;
          ctx.drawImage(img, canvas.width / 2 + (dx - 0.5) * 256, canvas.height / 2 + (dy - 0.5) * 256);
          ctx.globalAlpha = 1;
        }
      }
    }
  }

  private paintPanels(visual: SlotVisual): void {
    this.el("slot-label").textContent = `slot ${visual.slot} — t = ${visual.timeLabel}`;
    const table = (rows: { label: string; value: string }[]) =>
      rows.map((r) => `<tr><td>${r.label}</td><td>${r.value}</td></tr>`).join("");
    this.el("e2e-panel").innerHTML = `<table>${table(visual.endToEnd)}</table>`;
    this.el("link-panel").innerHTML = visual.linkPanel.length
      ? `<table>${table(visual.linkPanel)}</table>`
      : "<em>click a link in the list to pin it</em>";
    const extras = Object.entries(visual.extras);
    this.el("extras-panel").textContent = extras.length
      ? JSON.stringify(visual.extras, null, 1)
      : "";
    const list = this.el("link-list");
    list.innerHTML = "";
    for (const link of visual.links) {
      const button = document.createElement("button");
      button.textContent = `${link.src}>${link.dst}`;
      button.style.borderLeft = `${Math.round(link.widthPx)}px solid ${COLOR_CSS[link.color]}`;
      if (link.selected) button.classList.add("selected");
      button.addEventListener("click", () => {
        this.state = playback.selectLink(this.state, link.src, link.dst);
        this.paint();
      });
      list.appendChild(button);
    }
  }

  private paintChart(visual: SlotVisual): void {
    const canvas = this.el("chart") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d");
    if (ctx === null) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (visual.chart === null) return;
    const points = visual.chart.points;
    const w = canvas.width, h = canvas.height;
    ctx.fillStyle = "#fff";
    ctx.fillRect(0, 0, w, h);
    ctx.strokeStyle = "#1154a3";
    ctx.beginPath();
    const max = Math.max(...points.map((p) => p.value ?? 0), 1);
    let started = false;
    for (const p of points) {
      if (p.value === null) continue;
      const x = (p.slot / Math.max(points.length - 1, 1)) * (w - 20) + 10;
      const y = h - 14 - (p.value / max) * (h - 28);
      if (!started) { ctx.moveTo(x, y); started = true; } else ctx.lineTo(x, y);
    }
    ctx.stroke();
    // Current slot cursor.
    ctx.strokeStyle = "#d23f31";
    const cx = (visual.slot / Math.max(points.length - 1, 1)) * (w - 20) + 10;
    ctx.beginPath();
    ctx.moveTo(cx, 0);
    ctx.lineTo(cx, h);
    ctx.stroke();
    ctx.fillStyle = "#222";
    ctx.font = "11px sans-serif";
    ctx.fillText(`${visual.chart.title} — ${visual.chart.metric}`, 10, 11);
  }

  // --- dom plumbing -----------------------------------------------------

  private buildDom(): void {
    this.root.innerHTML = `
      <div class="viewer">
        <header>
          <select id="picker"></select>
          <button id="step-back" title="one step backward">&#9198;</button>
          <button id="play-pause">&#9205;</button>
          <button id="step-fwd" title="one step forward">&#9197;</button>
          <select id="speed">${SPEEDS.map((s) => `<option value="${s}" ${s === 1 ? "selected" : ""}>${s}x</option>`).join("")}</select>
          <input id="timeline" type="range" min="0" max="0" value="0" step="1">
          <span id="slot-label"></span>
        </header>
        <div id="error" hidden></div>
        <main>
          <canvas id="map" width="760" height="520"></canvas>
          <aside>
            <h3>end to end</h3>
            <div id="e2e-panel"></div>
            <h3>links</h3>
            <div id="link-list"></div>
            <div id="link-panel"></div>
            <canvas id="chart" width="300" height="140"></canvas>
            <h3 class="extras-h">extras</h3>
            <pre id="extras-panel"></pre>
          </aside>
        </main>
      </div>`;
    this.el("play-pause").addEventListener("click", () => this.onPlayPause());
    this.el("step-fwd").addEventListener("click", () => this.onStep(1));
    this.el("step-back").addEventListener("click", () => this.onStep(-1));
    this.el("speed").addEventListener("change", (e) => {
      const value = Number((e.target as HTMLSelectElement).value) as Speed;
      this.onSpeed(value);
    });
    this.el("timeline").addEventListener("input", (e) => {
      this.onSeek(Number((e.target as HTMLInputElement).value));
    });
    this.el("picker").addEventListener("change", (e) => {
      this.selectExperiment(Number((e.target as HTMLSelectElement).value));
    });
  }

  private refreshPicker(): void {
    const picker = this.el("picker") as HTMLSelectElement;
    picker.innerHTML = this.experiments
      .map((exp, i) => `<option value="${i}">${exp.label}</option>`)
      .join("");
    picker.value = String(this.experiments.length - 1);
  }

  private syncControls(): void {
    const timeline = this.el("timeline") as HTMLInputElement;
    timeline.max = String(this.state.lastSlot);
    timeline.value = String(this.state.slot);
    timeline.disabled = this.current === null || this.current.report.data.length === 0;
    (this.el("play-pause") as HTMLButtonElement).disabled = timeline.disabled;
    (this.el("step-fwd") as HTMLButtonElement).disabled = timeline.disabled;
    (this.el("step-back") as HTMLButtonElement).disabled = timeline.disabled;
    this.el("play-pause").innerHTML = this.state.playing ? "&#9208;" : "&#9205;";
  }

  private showError(message: string): void {
    const el = this.el("error");
    el.hidden = false;
    el.textContent = message;
  }

  private hideError(): void {
    this.el("error").hidden = true;
  }

  private canvas(): HTMLCanvasElement {
    return this.el("map") as HTMLCanvasElement;
  }

  private el(id: string): HTMLElement {
    const found = this.root.querySelector(`#${id}`);
    if (found === null) throw new Error(`missing #${id}`);
    return found as HTMLElement;
  }
}
