// DOM rendering: the panel is re-rendered from (state, pending commands) on
// every feed message. Full-state redraws at 1 Hz are cheap at this scale and
// keep the view trivially consistent with the reducer.

import { effectiveRouting } from "./commands.js";
import type { CommandTracker } from "./commands.js";
import { isReady, type PanelState } from "./state.js";

const BANDS = ["5g", "2g4"];

export interface Handlers {
  onToggle(group: string, links: string[]): void;
  onEstop(engage: boolean): void;
}

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(value: number, digits = 1): string {
  return value.toFixed(digits);
}

function renderLinks(state: PanelState): HTMLElement {
  const box = el("div", "card");
  box.appendChild(el("h2", undefined, "Links"));
  for (const link of state.overview!.links) {
    const row = el("div", "link-row" + (link.up ? "" : " down"));
    row.appendChild(el("span", "link-name", link.link));
    const bar = el("div", "signal-track");
    const fill = el("div", "signal-fill");
    fill.style.width = `${Math.round(link.signal_strength * 100)}%`;
    bar.appendChild(fill);
    row.appendChild(bar);
    row.appendChild(el("span", "link-rate", `${fmt(link.mbits_per_s)} Mbit/s`));
    if (!link.up) {
      row.appendChild(el("span", "link-outage", "outage"));
    }
    box.appendChild(row);
  }
  return box;
}

function renderFlows(state: PanelState): HTMLElement {
  const box = el("div", "card wide");
  const totals = state.overview!.totals;
  box.appendChild(
    el(
      "h2",
      undefined,
      `Flows: down ${fmt(totals.down["5g"])} / ${fmt(totals.down["2g4"])}, up ${fmt(totals.up["5g"])} / ${fmt(totals.up["2g4"])} Mbit/s`,
    ),
  );
  const table = el("table") as HTMLTableElement;
  const head = table.createTHead().insertRow();
  for (const col of ["topic", "dir", "link", "Mbit/s", "pkt/s", "est. drops", "dups"]) {
    head.appendChild(el("th", undefined, col));
  }
  const body = table.createTBody();
  for (const flow of state.overview!.flows) {
    const row = body.insertRow();
    row.insertCell().textContent = flow.name;
    row.insertCell().textContent = flow.direction;
    row.insertCell().textContent = flow.link;
    row.insertCell().textContent = fmt(flow.mbits_per_s, 2);
    row.insertCell().textContent = fmt(flow.packets_per_s, 0);
    const drops = row.insertCell();
    drops.textContent = String(flow.est_dropped);
    if (flow.est_dropped > 0) drops.className = "drops";
    row.insertCell().textContent = String(flow.duplicates);
  }
  box.appendChild(table);
  return box;
}

function renderRouting(state: PanelState, tracker: CommandTracker, handlers: Handlers): HTMLElement {
  const box = el("div", "card");
  box.appendChild(el("h2", undefined, "Routing"));
  const routing = effectiveRouting(state.overview!.routing, tracker.pendingRouting());
  for (const [group, entry] of routing) {
    const row = el("div", "route-row" + (entry.pending ? " pending" : ""));
    row.appendChild(el("span", "route-group", group));
    for (const band of BANDS) {
      const label = el("label", "band-toggle") as HTMLLabelElement;
      const input = el("input") as HTMLInputElement;
      input.type = "checkbox";
      input.checked = entry.links.includes(band);
      input.disabled = entry.pending;
      input.addEventListener("change", () => {
        const next = BANDS.filter((b) => (b === band ? input.checked : entry.links.includes(b)));
        if (next.length === 0) {
          input.checked = true; // a group cannot ride zero links
          return;
        }
        handlers.onToggle(group, next);
      });
      label.appendChild(input);
      label.appendChild(document.createTextNode(band));
      row.appendChild(label);
    }
    if (entry.pending) {
      row.appendChild(el("span", "pending-note", "pending..."));
    }
    box.appendChild(row);
  }
  return box;
}

function renderChecks(state: PanelState): HTMLElement {
  const box = el("div", "card");
  const rows = state.checks!.results;
  const bad = rows.filter((r) => r.status !== "ok").length;
  box.appendChild(el("h2", undefined, bad === 0 ? "Checks: go" : `Checks: ${bad} blocking`));
  for (const row of rows) {
    const line = el("div", `check-row ${row.status}`);
    line.appendChild(el("span", "check-dot"));
    line.appendChild(el("span", "check-name", row.name));
    line.appendChild(el("span", "check-msg", row.message));
    box.appendChild(line);
  }
  return box;
}

function renderSafety(state: PanelState, handlers: Handlers): HTMLElement {
  const box = el("div", "card");
  const safety = state.safety!;
  const engaged = safety.estop.effective_engaged;
  box.appendChild(el("h2", undefined, "Safety"));
  const indicator = el("div", "estop-indicator" + (engaged ? " engaged" : ""));
  indicator.textContent = engaged ? "E-STOP ENGAGED" : "e-stop released";
  box.appendChild(indicator);
  const button = el("button", "estop-button" + (engaged ? " release" : "")) as HTMLButtonElement;
  button.textContent = engaged ? "Release E-stop" : "E-STOP";
  button.addEventListener("click", () => handlers.onEstop(!engaged));
  box.appendChild(button);
  for (const arm of safety.arms) {
    const row = el("div", `arm-row ${arm.mode}`);
    row.appendChild(el("span", "arm-name", `${arm.arm} arm`));
    row.appendChild(el("span", "arm-mode", arm.mode));
    if (arm.mode === "fading") {
      row.appendChild(el("span", "arm-fade", `${Math.round(arm.fade_progress * 100)}%`));
    }
    box.appendChild(row);
  }
  return box;
}

export function render(
  root: HTMLElement,
  state: PanelState,
  tracker: CommandTracker,
  handlers: Handlers,
  notice: string | null,
): void {
  root.textContent = "";
  const status = el("div", "status-bar" + (state.connected ? " live" : " offline"));
  status.textContent = state.connected
    ? `live / sim t=${state.overview ? fmt(state.overview.t_s) : "?"} s`
    : "disconnected";
  root.appendChild(status);
  if (state.banner) {
    root.appendChild(el("div", "banner", state.banner));
  }
  if (notice) {
    root.appendChild(el("div", "banner warn", notice));
  }
  if (!isReady(state)) {
    root.appendChild(el("div", "empty", "waiting for the first full snapshot..."));
    return;
  }
  const grid = el("div", "grid");
  grid.appendChild(renderFlows(state));
  grid.appendChild(renderLinks(state));
  grid.appendChild(renderRouting(state, tracker, handlers));
  grid.appendChild(renderChecks(state));
  grid.appendChild(renderSafety(state, handlers));
  root.appendChild(grid);
}
