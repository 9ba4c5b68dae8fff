/** View layer: pure formatters over DashboardState plus a thin DOM patcher.
 *
 * Everything that decides what to show is a pure function returning
 * strings or small structs; applyState only copies those results onto
 * elements by id. No metric is computed here, only formatting.
 */

import type { BlocklistEntry, DdosStatus, ModelMetadata, TimelinePoint } from "./api.js";
import type { DashboardState } from "./state.js";

export interface BannerView {
  kind: "attack" | "clear" | "unknown";
  label: string;
}

export function bannerView(status: DdosStatus | null): BannerView {
  if (status === null) return { kind: "unknown", label: "waiting for service" };
  if (status.ddos) return { kind: "attack", label: "DDoS attack detected" };
  return { kind: "clear", label: "no attack in window" };
}

export function staleBadge(state: Pick<DashboardState, "stale" | "missedPolls">): string {
  if (!state.stale) return "";
  return `stale: ${state.missedPolls} polls missed`;
}

export function fmtPercent(x: number): string {
  return `${(100 * x).toFixed(2)}%`;
}

export function fmtSeconds(x: number): string {
  return `${x.toFixed(3)} s`;
}

export function fmtTimestamp(epochSeconds: number): string {
  return new Date(epochSeconds * 1000).toISOString().replace("T", " ").slice(0, 19);
}

const ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => ESCAPES[ch] ?? ch);
}

/** Per-class rows of the current window, total last. */
export function windowRows(window: Record<string, number>): Array<[string, number]> {
  const rows = Object.entries(window).filter(([name]) => name !== "total");
  rows.push(["total", window["total"] ?? 0]);
  return rows;
}

export interface TimelineGeometry {
  countPoints: string;
  blockedPoints: string;
  maxCount: number;
}

/** Scale the timeline onto an SVG viewport; flat zero line when empty. */
export function timelineGeometry(points: TimelinePoint[], width: number, height: number): TimelineGeometry {
  const pad = 4;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const maxCount = Math.max(1, ...points.map((p) => p.count));
  const n = points.length;
  const x = (i: number) => (n <= 1 ? pad + innerW / 2 : pad + (innerW * i) / (n - 1));
  const y = (v: number) => pad + innerH * (1 - v / maxCount);
  const line = (pick: (p: TimelinePoint) => number) =>
    points.map((p, i) => `${x(i).toFixed(1)},${y(pick(p)).toFixed(1)}`).join(" ");
  return {
    countPoints: line((p) => p.count),
    blockedPoints: line((p) => p.blocked),
    maxCount,
  };
}

export function timelineSvg(points: TimelinePoint[], width: number, height: number): string {
  const geo = timelineGeometry(points, width, height);
  return (
    `<polyline fill="none" stroke="#4cc9f0" stroke-width="1.5" points="${geo.countPoints}"/>` +
    `<polyline fill="none" stroke="#ef4444" stroke-width="1.5" points="${geo.blockedPoints}"/>`
  );
}

export function blocklistRowsHtml(entries: BlocklistEntry[]): string {
  if (entries.length === 0) {
    return `<tr><td colspan="3" class="empty">blocklist is empty</td></tr>`;
  }
  return entries
    .map((e) => {
      const source = escapeHtml(e.source);
      return (
        `<tr><td>${source}</td><td>${fmtTimestamp(e.added_at)}</td>` +
        `<td><button type="button" class="remove-source" data-source="${source}">remove</button></td></tr>`
      );
    })
    .join("");
}

export function modelPanelHtml(meta: ModelMetadata | null): string {
  if (meta === null || !meta.loaded) {
    return `<p class="empty">no model loaded</p>`;
  }
  const rows: Array<[string, string]> = [
    ["kind", meta.kind ?? ""],
    ["model id", meta.model_id ?? ""],
    ["stored accuracy", meta.stored_accuracy == null ? "n/a" : fmtPercent(meta.stored_accuracy)],
    ["evaluation time", meta.stored_eval_seconds == null ? "n/a" : fmtSeconds(meta.stored_eval_seconds)],
    ["PCA components", meta.pca_components == null ? "none" : String(meta.pca_components)],
    ["path", meta.path ?? ""],
  ];
  const body = rows
    .map(([k, v]) => `<tr><th>${escapeHtml(k)}</th><td>${escapeHtml(v)}</td></tr>`)
    .join("");
  return `<table class="kv">${body}</table>`;
}

export function configSummary(state: DashboardState): string {
  if (!state.config) return "";
  const c = state.config;
  return `listening on ${c.listen}, window ${c.window_seconds} s`;
}

/** Base URL precedence: injected global, then ?api= query, then default. */
export function resolveBaseUrl(search: string, injected?: unknown): string {
  if (typeof injected === "string" && injected.length > 0) return injected;
  const match = new URLSearchParams(search).get("api");
  if (match) return match;
  return "http://127.0.0.1:5000";
}

/** Copy the formatted state onto the static skeleton in index.html. */
export function applyState(doc: Document, state: DashboardState): void {
  const byId = (id: string) => doc.getElementById(id);

  const banner = byId("banner");
  if (banner) {
    const view = bannerView(state.status);
    banner.textContent = view.label;
    banner.className = `banner ${view.kind}`;
  }

  const stale = byId("stale-badge");
  if (stale) stale.textContent = staleBadge(state);

  const status = state.status;
  const acc = byId("stat-accuracy");
  if (acc) acc.textContent = status ? fmtPercent(status.accuracy) : "-";
  const calc = byId("stat-calc");
  if (calc) calc.textContent = status ? fmtSeconds(status.calculation_time_s) : "-";

  const windowBody = byId("window-body");
  if (windowBody) {
    windowBody.innerHTML = status
      ? windowRows(status.window)
          .map(([name, count]) => `<tr><th>${escapeHtml(name)}</th><td>${count}</td></tr>`)
          .join("")
      : "";
  }

  const timeline = byId("timeline");
  if (timeline) timeline.innerHTML = status ? timelineSvg(status.timeline, 600, 120) : "";

  const slider = byId("threshold-slider") as HTMLInputElement | null;
  if (slider && state.config && doc.activeElement !== slider) {
    slider.value = String(state.config.threshold);
  }
  const thresholdValue = byId("threshold-value");
  if (thresholdValue) {
    thresholdValue.textContent = state.config ? state.config.threshold.toFixed(2) : "-";
  }

  const summary = byId("config-summary");
  if (summary) summary.textContent = configSummary(state);

  const blocklistBody = byId("blocklist-body");
  if (blocklistBody) blocklistBody.innerHTML = blocklistRowsHtml(state.blocklist);

  const modelPanel = byId("model-panel");
  if (modelPanel) modelPanel.innerHTML = modelPanelHtml(state.model);

  const errorLine = byId("error-line");
  if (errorLine) errorLine.textContent = state.lastError ?? "";
}
