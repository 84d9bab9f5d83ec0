// Single-page wiring. '#/' shows the slice list and request form,
// '#/slice/<id>' the live view with the state badge, swim lanes, duration
// and audit results. The API base URL comes from ?api=, then localStorage,
// then same-origin.

import { ApiError, PortalApi } from "./api.js";
import { renderSliceForm } from "./form.js";
import { SlicePoller } from "./poll.js";
import { layoutSwimLanes, renderSwimLanes } from "./swimlane.js";
import { formatDuration, type SliceRecord } from "./model.js";

const TERMINAL_STATES = new Set(["active", "rolled_back", "failed", "deleted"]);

function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(location.search).get("api");
  if (fromQuery != null) {
    localStorage.setItem("qslice_api", fromQuery);
    return fromQuery;
  }
  return localStorage.getItem("qslice_api") ?? "";
}

const api = new PortalApi(apiBaseUrl());
let poller: SlicePoller | null = null;

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text != null) node.textContent = text;
  return node;
}

function clearView(): HTMLElement {
  if (poller) {
    poller.stop();
    poller = null;
  }
  const view = document.getElementById("view")!;
  view.replaceChildren();
  return view;
}

async function showHome(): Promise<void> {
  const view = clearView();
  view.appendChild(el("h2", undefined, "Slices"));
  const table = el("table", "slice-list");
  view.appendChild(table);

  const [slices, presets, topology] = await Promise.all([
    api.listSlices(), api.presets(), api.topology(),
  ]);
  for (const s of slices) {
    const row = el("tr");
    const link = el("a", undefined, s.slice_id) as HTMLAnchorElement;
    link.href = `#/slice/${encodeURIComponent(s.slice_id)}`;
    row.appendChild(el("td")).appendChild(link);
    row.appendChild(el("td", `state ${s.state}`, s.state));
    row.appendChild(el("td", undefined, s.name));
    table.appendChild(row);
  }

  view.appendChild(el("h2", undefined, "Request a slice"));
  view.appendChild(renderSliceForm(document, presets, topology.sites, {
    onSubmit: async (descriptor, useCase) => {
      await api.submitSlice(descriptor, useCase);
      // fire provisioning and navigate straight to the live view to watch it
      void api.provisionSlice(descriptor.slice_id).catch((error) => {
        console.error("provision failed", error);
      });
      location.hash = `#/slice/${encodeURIComponent(descriptor.slice_id)}`;
    },
  }));
}

function renderRecord(view: HTMLElement, record: SliceRecord): void {
  view.replaceChildren();
  const head = el("div", "slice-head");
  head.appendChild(el("h2", undefined, record.descriptor.slice_id));
  head.appendChild(el("span", `badge state ${record.state}`, record.state));
  head.appendChild(el("span", "duration",
                      "provision: "
                      + formatDuration(record.timings.provision_duration_s)));
  view.appendChild(head);

  if (record.failure) {
    view.appendChild(el("div", "failure",
                        `failure: ${JSON.stringify(record.failure)}`));
  }

  view.appendChild(renderSwimLanes(document, layoutSwimLanes(record.step_log)));

  const audit = el("div", "audit");
  audit.id = "audit";
  view.appendChild(audit);

  if (record.state === "active") {
    const teardown = el("button", "teardown", "Tear down") as HTMLButtonElement;
    teardown.addEventListener("click", () => {
      teardown.disabled = true;
      void api.deprovisionSlice(record.descriptor.slice_id)
        .then(() => { location.hash = "#/"; })
        .catch((error) => { audit.textContent = String(error); });
    });
    view.appendChild(teardown);
  }
}

async function showAudit(sliceId: string): Promise<void> {
  const target = document.getElementById("audit");
  if (!target) return;
  const report = await api.auditSlice(sliceId);
  target.replaceChildren(el("h3", undefined,
                            `audit: ${report.ok ? "ok" : "VIOLATION"}`));
  for (const [role, conn] of Object.entries(report.per_connection)) {
    target.appendChild(el(
      "div", conn.ok ? "conn ok" : "conn bad",
      `${role}: required ${conn.required}, achieved ${conn.achieved_min}`));
  }
}

function showSlice(sliceId: string): void {
  const view = clearView();
  view.appendChild(el("p", undefined, "loading…"));
  poller = new SlicePoller(
    api, sliceId,
    (record) => {
      renderRecord(view, record);
      if (TERMINAL_STATES.has(record.state)) {
        poller?.stop();
        if (record.state === "active") void showAudit(sliceId);
      }
    },
    (error) => {
      if (error instanceof ApiError && error.status === 404) {
        poller?.stop();
        view.replaceChildren(el("p", "missing", "slice not found"));
      } else {
        console.error(error);
      }
    });
  poller.start();
}

function route(): void {
  const hash = location.hash || "#/";
  const slice = hash.match(/^#\/slice\/(.+)$/);
  if (slice) {
    showSlice(decodeURIComponent(slice[1]));
  } else {
    void showHome().catch((error) => {
      clearView().appendChild(el("p", "missing", String(error)));
    });
  }
}

window.addEventListener("hashchange", route);
route();
