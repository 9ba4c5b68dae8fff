import { describe, expect, it } from "vitest";

import type { DdosStatus, TimelinePoint } from "../src/api.js";
import {
  bannerView,
  blocklistRowsHtml,
  configSummary,
  escapeHtml,
  fmtPercent,
  fmtSeconds,
  modelPanelHtml,
  resolveBaseUrl,
  staleBadge,
  timelineGeometry,
  timelineSvg,
  windowRows,
} from "../src/ui.js";
import type { DashboardState } from "../src/state.js";

function status(overrides: Partial<DdosStatus> = {}): DdosStatus {
  return {
    ddos: false,
    accuracy: 0.97,
    calculation_time_s: 1.25,
    window: { BENIGN: 10, "DDoS-DNS": 0, "DDoS-NTP": 0, "DDoS-UDP": 2, total: 12 },
    timeline: [],
    ...overrides,
  };
}

describe("bannerView", () => {
  it("is unknown before the first successful poll", () => {
    expect(bannerView(null)).toEqual({ kind: "unknown", label: "waiting for service" });
  });

  it("goes red on ddos=true and green otherwise", () => {
    expect(bannerView(status({ ddos: true })).kind).toBe("attack");
    expect(bannerView(status({ ddos: true })).label).toMatch(/attack detected/);
    expect(bannerView(status({ ddos: false })).kind).toBe("clear");
  });
});

describe("staleBadge", () => {
  it("is empty while polls succeed and named once stale", () => {
    expect(staleBadge({ stale: false, missedPolls: 2 })).toBe("");
    expect(staleBadge({ stale: true, missedPolls: 3 })).toBe("stale: 3 polls missed");
  });
});

describe("formatters", () => {
  it("renders percents and seconds with fixed precision", () => {
    expect(fmtPercent(0.9931)).toBe("99.31%");
    expect(fmtPercent(0)).toBe("0.00%");
    expect(fmtSeconds(1.2345)).toBe("1.234 s");
  });

  it("escapes html metacharacters", () => {
    expect(escapeHtml(`<script>"a"&'b'</script>`)).toBe(
      "&lt;script&gt;&quot;a&quot;&amp;&#39;b&#39;&lt;/script&gt;",
    );
  });
});

describe("windowRows", () => {
  it("lists every class and puts total last", () => {
    const rows = windowRows(status().window);
    expect(rows[rows.length - 1]).toEqual(["total", 12]);
    expect(rows.map(([name]) => name)).toEqual([
      "BENIGN",
      "DDoS-DNS",
      "DDoS-NTP",
      "DDoS-UDP",
      "total",
    ]);
  });
});

describe("timelineGeometry", () => {
  const flat: TimelinePoint[] = [
    { t: 0, count: 0, blocked: 0 },
    { t: 1, count: 0, blocked: 0 },
    { t: 2, count: 0, blocked: 0 },
  ];

  it("draws an empty window as a flat baseline", () => {
    const geo = timelineGeometry(flat, 600, 120);
    const ys = geo.countPoints.split(" ").map((p) => Number(p.split(",")[1]));
    expect(new Set(ys).size).toBe(1);
    expect(ys[0]).toBe(116); // height - pad
    expect(geo.maxCount).toBe(1);
  });

  it("spreads x across the viewport and scales y to the peak", () => {
    const points: TimelinePoint[] = [
      { t: 0, count: 0, blocked: 0 },
      { t: 1, count: 10, blocked: 5 },
      { t: 2, count: 5, blocked: 0 },
    ];
    const geo = timelineGeometry(points, 600, 120);
    const coords = geo.countPoints.split(" ").map((p) => p.split(",").map(Number));
    expect(coords[0]?.[0]).toBe(4);
    expect(coords[2]?.[0]).toBe(596);
    expect(coords[1]?.[1]).toBe(4); // the peak touches the top pad
    expect(geo.maxCount).toBe(10);
    const blocked = geo.blockedPoints.split(" ").map((p) => p.split(",").map(Number));
    expect(blocked[1]?.[1]).toBe(60); // half the peak sits mid-viewport
  });

  it("emits both polylines in the svg markup", () => {
    const svg = timelineSvg(flat, 600, 120);
    expect(svg.match(/<polyline/g)).toHaveLength(2);
  });
});

describe("blocklistRowsHtml", () => {
  it("shows a placeholder row when empty", () => {
    expect(blocklistRowsHtml([])).toContain("blocklist is empty");
  });

  it("renders one row per entry and escapes the source", () => {
    const html = blocklistRowsHtml([
      { source: "10.0.0.9", added_at: 1_700_000_000 },
      { source: "<b>evil</b>", added_at: 1_700_000_001 },
    ]);
    expect(html.match(/<tr>/g)).toHaveLength(2);
    expect(html).toContain("10.0.0.9");
    expect(html).toContain("&lt;b&gt;evil&lt;/b&gt;");
    expect(html).not.toContain("<b>evil</b>");
    expect(html.match(/class="remove-source"/g)).toHaveLength(2);
  });
});

describe("modelPanelHtml", () => {
  it("reports when nothing is loaded", () => {
    expect(modelPanelHtml(null)).toContain("no model loaded");
    expect(modelPanelHtml({ loaded: false })).toContain("no model loaded");
  });

  it("shows kind, id, stored metrics, and path", () => {
    const html = modelPanelHtml({
      loaded: true,
      kind: "RF",
      model_id: "rf-42-abcd1234",
      stored_accuracy: 0.9931,
      stored_eval_seconds: 12.5,
      pca_components: 10,
      path: "/models/rf.fsnt",
    });
    expect(html).toContain("RF");
    expect(html).toContain("rf-42-abcd1234");
    expect(html).toContain("99.31%");
    expect(html).toContain("12.500 s");
    expect(html).toContain("/models/rf.fsnt");
  });

  it("marks missing stored metrics as n/a", () => {
    const html = modelPanelHtml({ loaded: true, kind: "DT", stored_accuracy: null });
    expect(html).toContain("n/a");
  });
});

describe("configSummary", () => {
  it("summarizes listen address and window", () => {
    const state = {
      config: {
        threshold: 0.5,
        window_seconds: 60,
        listen: "127.0.0.1:5000",
        blocklist_path: "bl.json",
        model_path: null,
      },
    } as unknown as DashboardState;
    expect(configSummary(state)).toBe("listening on 127.0.0.1:5000, window 60 s");
  });
});

describe("resolveBaseUrl", () => {
  it("prefers the injected global, then ?api=, then the default", () => {
    expect(resolveBaseUrl("?api=http://h:1", "http://injected:9")).toBe("http://injected:9");
    expect(resolveBaseUrl("?api=http://h:1")).toBe("http://h:1");
    expect(resolveBaseUrl("")).toBe("http://127.0.0.1:5000");
  });

  it("ignores non-string injections", () => {
    expect(resolveBaseUrl("", 42)).toBe("http://127.0.0.1:5000");
  });
});
