// DOM wiring. All analytics numbers shown here come straight from one API
// response each; this file only moves them between elements.

import { ApiClient, ApiError } from "./api.js";
import type { FetchLike } from "./api.js";
import { parseAsc } from "./asc.js";
import { compareTotals, submitQuery, validateRequest } from "./console.js";
import type { DisplayResult } from "./console.js";
import { ascSource, gridSource, paintHeatmap, renderHeatmap } from "./heatmap.js";
import { drawOccupancy } from "./occupancy.js";
import { Poller } from "./poller.js";
import { rampGradient } from "./ramp.js";
import { ConsoleState } from "./state.js";
import type { GridResult, QueryRequestRec, TotalResult, ViewStatus } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setOptions(select: HTMLSelectElement, names: string[], keep?: string | null): void {
  const previous = keep ?? select.value;
  select.innerHTML = "";
  for (const name of names) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    select.appendChild(opt);
  }
  if (names.includes(previous)) select.value = previous;
}

function resultNode(display: DisplayResult): HTMLElement {
  const box = document.createElement("div");
  if (display.kind === "scalar") {
    const div = document.createElement("div");
    div.className = "scalar";
    div.textContent = display.text;
    box.appendChild(div);
  } else if (display.kind === "table") {
    const table = document.createElement("table");
    const head = table.insertRow();
    for (const c of display.columns) {
      const th = document.createElement("th");
      th.textContent = c;
      head.appendChild(th);
    }
    for (const row of display.rows) {
      const tr = table.insertRow();
      for (const cell of row) tr.insertCell().textContent = cell;
    }
    box.appendChild(table);
  } else if (display.kind === "grid") {
    box.textContent = `${display.text} (rendered on the heatmap panel)`;
  } else {
    box.className = "problems";
    box.textContent = display.field
      ? `${display.code} (${display.field}): ${display.message}`
      : `${display.code}: ${display.message}`;
  }
  return box;
}

export interface BootHandle {
  state: ConsoleState;
  ready: Promise<void>;
  refreshNow: () => Promise<void>;
  stop: () => void;
}

export function boot(baseUrl = "..", fetchFn?: FetchLike): BootHandle {
  const api = new ApiClient(baseUrl, fetchFn);
  const state = new ConsoleState();
  let views: ViewStatus[] = [];

  const banner = el<HTMLDivElement>("error-banner");
  const viewSelect = el<HTMLSelectElement>("view-select");
  const layerSelect = el<HTMLSelectElement>("layer-select");
  const canvas = el<HTMLCanvasElement>("heatmap");
  const occCanvas = el<HTMLCanvasElement>("occ-chart");

  el<HTMLDivElement>("legend-bar").style.background = rampGradient();

  function showError(err: unknown): void {
    banner.textContent = err instanceof Error ? err.message : String(err);
    banner.classList.remove("hidden");
  }

  function clearError(): void {
    banner.classList.add("hidden");
  }

  function finalParams(): { radius: number; population: number; baseline: string } {
    return {
      radius: Number(el<HTMLInputElement>("final-radius").value),
      population: Number(el<HTMLInputElement>("final-population").value),
      baseline: el<HTMLInputElement>("final-baseline").value,
    };
  }

  async function refreshHeatmap(): Promise<void> {
    const view = state.selectedView;
    if (!view) return;
    let render;
    let meta: string;
    if (state.layer === "raw") {
      const result = (await api.query({ view, aggregate: "grid" })) as GridResult;
      render = renderHeatmap(gridSource(result));
      meta = `watermark ${result.watermark}, seq ${result.as_of_seq}`;
    } else {
      const params = state.layer === "final" ? finalParams() : { radius: finalParams().radius };
      const text = await api.exportAsc(view, state.layer, params);
      render = renderHeatmap(ascSource(parseAsc(text)));
      meta = `${state.layer} layer export`;
    }
    // painting only happens after a good render; a throw above leaves the
    // previous overlay on screen, per the error contract
    paintHeatmap(canvas, render);
    el<HTMLSpanElement>("legend-min").textContent = render.legend.min;
    el<HTMLSpanElement>("legend-max").textContent = render.legend.max;
    el<HTMLSpanElement>("map-meta").textContent = meta;
    el<HTMLSpanElement>("hottest").textContent = render.hottest
      ? `hottest cell (${render.hottest.row}, ${render.hottest.col}) = ${render.hottest.value}`
      : "no data cells";
  }

  const poller = new Poller(async () => {
    await refreshHeatmap();
    clearError();
  }, state.pollIntervalMs);
  poller.onError = showError;

  async function loadViews(): Promise<void> {
    views = (await api.views()).views;
    const names = views.map((v) => v.name);
    setOptions(viewSelect, names, state.selectedView);
    if (!state.selectedView && names.length > 0) {
      state.selectedView = names[0];
      viewSelect.value = names[0];
    }
    const current = views.find((v) => v.name === state.selectedView);
    if (current) {
      state.setViewport(current.spec.bbox);
      setOptions(el<HTMLSelectElement>("occ-venue"), [...current.venues]);
    }
    setOptions(el<HTMLSelectElement>("cmp-a"), names);
    setOptions(el<HTMLSelectElement>("cmp-b"), names);
  }

  viewSelect.addEventListener("change", () => {
    state.selectedView = viewSelect.value;
    const current = views.find((v) => v.name === state.selectedView);
    if (current) {
      state.setViewport(current.spec.bbox);
      setOptions(el<HTMLSelectElement>("occ-venue"), [...current.venues]);
    }
    poller.refresh();
  });

  layerSelect.addEventListener("change", () => {
    state.layer = layerSelect.value as ConsoleState["layer"];
    el<HTMLDivElement>("final-params").classList.toggle("hidden", state.layer === "raw");
    poller.refresh();
  });

  const pollInput = el<HTMLInputElement>("poll-interval");
  pollInput.addEventListener("change", () => {
    state.pollIntervalMs = Number(pollInput.value) * 1000;
    pollInput.value = String(state.pollIntervalMs / 1000);
    poller.setIntervalMs(state.pollIntervalMs);
  });

  el<HTMLButtonElement>("refresh").addEventListener("click", () => poller.refresh());

  const statusTimer = setInterval(() => {
    const s = poller.stats;
    el<HTMLSpanElement>("poll-status").textContent =
      `polls ${s.completed} ok, ${s.failed} failed, ${s.coalesced} coalesced`;
  }, 1000);

  // ----- query console -----

  const historyList = el<HTMLUListElement>("q-history");

  function renderHistory(): void {
    historyList.innerHTML = "";
    for (const entry of [...state.history].reverse()) {
      const li = document.createElement("li");
      const btn = document.createElement("button");
      btn.textContent = "replay";
      btn.addEventListener("click", () => {
        const req = state.replay(entry.id);
        if (req) void runQuery(req);
      });
      li.appendChild(btn);
      const label = document.createElement("span");
      if (!entry.ok) label.className = "err";
      label.textContent = `${entry.request.aggregate} on ${entry.request.view}: ${entry.summary}`;
      li.appendChild(label);
      historyList.appendChild(li);
    }
  }

  async function runQuery(req: QueryRequestRec): Promise<void> {
    const problems = validateRequest(req, views);
    const problemsEl = el<HTMLSpanElement>("q-problems");
    if (problems.length > 0) {
      problemsEl.textContent = problems.join("; ");
      return;
    }
    problemsEl.textContent = "";
    const display = await submitQuery(api, state, req);
    const out = el<HTMLDivElement>("q-result");
    out.innerHTML = "";
    out.appendChild(resultNode(display));
    renderHistory();
  }

  el<HTMLFormElement>("query-form").addEventListener("submit", (e) => {
    e.preventDefault();
    const req: QueryRequestRec = {
      view: state.selectedView ?? "",
      aggregate: el<HTMLSelectElement>("q-aggregate").value as QueryRequestRec["aggregate"],
    };
    const k = el<HTMLInputElement>("q-k").value;
    if (k !== "") req.k = Number(k);
    const corners = ["q-minlat", "q-minlon", "q-maxlat", "q-maxlon"].map(
      (id) => el<HTMLInputElement>(id).value,
    );
    if (corners.some((v) => v !== "")) {
      req.sub_bbox = {
        min_lat: Number(corners[0]),
        min_lon: Number(corners[1]),
        max_lat: Number(corners[2]),
        max_lon: Number(corners[3]),
      };
    }
    const start = el<HTMLInputElement>("q-start").value;
    const end = el<HTMLInputElement>("q-end").value;
    if (start !== "" || end !== "") {
      req.sub_window = { start: Number(start), end: Number(end) };
    }
    void runQuery(req);
  });

  // ----- compare -----

  el<HTMLButtonElement>("cmp-run").addEventListener("click", async () => {
    state.compareScenarios = true;
    const out = el<HTMLDivElement>("cmp-result");
    try {
      const { a, b } = await compareTotals(
        api,
        el<HTMLSelectElement>("cmp-a").value,
        el<HTMLSelectElement>("cmp-b").value,
      );
      out.innerHTML = "";
      const pair: [string, TotalResult][] = [
        [a.view, a],
        [b.view, b],
      ];
      const table = document.createElement("table");
      for (const [name, result] of pair) {
        const tr = table.insertRow();
        tr.insertCell().textContent = name;
        tr.insertCell().textContent = String(result.value);
      }
      out.appendChild(table);
    } catch (err) {
      out.innerHTML = "";
      out.appendChild(
        resultNode(
          err instanceof ApiError
            ? { kind: "error", code: err.code, message: err.message, field: err.field }
            : { kind: "error", code: "network_error", message: String(err) },
        ),
      );
    }
  });

  // ----- occupancy -----

  el<HTMLButtonElement>("occ-run").addEventListener("click", async () => {
    const emptyEl = el<HTMLDivElement>("occ-empty");
    const metaEl = el<HTMLDivElement>("occ-meta");
    emptyEl.classList.add("hidden");
    try {
      const curve = await api.occupancy(el<HTMLSelectElement>("occ-venue").value, {
        bin: Number(el<HTMLInputElement>("occ-bin").value),
        confidence: Number(el<HTMLInputElement>("occ-confidence").value),
        seed: Number(el<HTMLInputElement>("occ-seed").value),
        resamples: Number(el<HTMLInputElement>("occ-resamples").value),
      });
      drawOccupancy(occCanvas, curve);
      metaEl.textContent =
        `${curve.venue_id}: ${curve.n_days} days, confidence ${curve.confidence}, ` +
        `seed ${curve.seed}, resamples ${curve.resamples}`;
    } catch (err) {
      if (err instanceof ApiError && err.code === "no_observations") {
        const ctx = occCanvas.getContext("2d");
        ctx?.clearRect(0, 0, occCanvas.width, occCanvas.height);
        metaEl.textContent = "";
        emptyEl.textContent = `no observations for this venue: ${err.message}`;
        emptyEl.classList.remove("hidden");
      } else {
        showError(err);
      }
    }
  });

  // initial load, then poll
  const ready = loadViews()
    .then(() => poller.start())
    .catch(showError);

  return {
    state,
    ready,
    refreshNow: refreshHeatmap,
    stop: () => {
      poller.stop();
      clearInterval(statusTimer);
    },
  };
}

if (typeof document !== "undefined" && document.getElementById("view-select")) {
  boot();
}
