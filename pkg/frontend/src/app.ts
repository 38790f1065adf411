/**
 * Browser bootstrap: wires the filter bar, navigation and forms to the
 * controller, and keeps the URL in sync with the view state so every screen
 * is deep-linkable. The alert feed polls while the watchlist view is open.
 */

import { ApiClient } from "./api.js";
import { DashboardController } from "./controller.js";
import { DEFAULT_STATE, parseViewState, serializeViewState, type ViewState } from "./state.js";

const ALERT_POLL_INTERVAL_MS = 10_000;

declare global {
  interface Window {
    CROSSD_API_BASE?: string;
  }
}

const client = new ApiClient(window.CROSSD_API_BASE ?? "");
const controller = new DashboardController(client);

let state: ViewState = parseViewState(window.location.search);
let pollTimer: number | undefined;

function main(): HTMLElement {
  return document.getElementById("main")!;
}

async function refresh(push = true): Promise<void> {
  const query = serializeViewState(state);
  if (push) {
    const url = query ? `?${query}` : window.location.pathname;
    window.history.pushState(null, "", url);
  }
  syncFilterBar();
  const html = await controller.load(state);
  if (html) main().innerHTML = html;
  managePolling();
}

function managePolling(): void {
  if (state.view === "watchlists" && pollTimer === undefined) {
    pollTimer = window.setInterval(async () => {
      const html = await controller.load(state);
      if (html && state.view === "watchlists") main().innerHTML = html;
    }, ALERT_POLL_INTERVAL_MS);
  } else if (state.view !== "watchlists" && pollTimer !== undefined) {
    window.clearInterval(pollTimer);
    pollTimer = undefined;
  }
}

function syncFilterBar(): void {
  const bar = document.getElementById("filters") as HTMLFormElement | null;
  if (!bar) return;
  bar.style.display = state.view === "explorer" ? "" : "none";
  (bar.elements.namedItem("language") as HTMLInputElement).value = state.language ?? "";
  (bar.elements.namedItem("license") as HTMLInputElement).value = state.license ?? "";
  (bar.elements.namedItem("q") as HTMLInputElement).value = state.text ?? "";
  (bar.elements.namedItem("min_criticality") as HTMLInputElement).value =
    state.minCriticality !== undefined ? String(state.minCriticality) : "";
  (bar.elements.namedItem("critical_only") as HTMLInputElement).checked = state.criticalOnly;
  (bar.elements.namedItem("sort") as HTMLSelectElement).value = state.sort;
}

function readFilterBar(): void {
  const bar = document.getElementById("filters") as HTMLFormElement;
  const value = (name: string) => (bar.elements.namedItem(name) as HTMLInputElement).value.trim();
  state = {
    ...state,
    view: "explorer",
    language: value("language") || undefined,
    license: value("license") || undefined,
    text: value("q") || undefined,
    minCriticality: value("min_criticality") === "" ? undefined : Number(value("min_criticality")),
    criticalOnly: (bar.elements.namedItem("critical_only") as HTMLInputElement).checked,
    sort: (bar.elements.namedItem("sort") as HTMLSelectElement).value as ViewState["sort"],
    offset: 0,
  };
}

function wireEvents(): void {
  document.getElementById("filters")!.addEventListener("change", () => {
    readFilterBar();
    void refresh();
  });
  document.getElementById("filters")!.addEventListener("submit", (event) => {
    event.preventDefault();
    readFilterBar();
    void refresh();
  });

  for (const link of document.querySelectorAll<HTMLAnchorElement>("nav a[data-view]")) {
    link.addEventListener("click", (event) => {
      event.preventDefault();
      state = { ...DEFAULT_STATE, view: link.dataset.view as ViewState["view"] };
      void refresh();
    });
  }

  document.getElementById("main")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const projectLink = target.closest<HTMLAnchorElement>("[data-project-link]");
    if (projectLink) {
      event.preventDefault();
      state = { ...state, view: "detail", project: projectLink.dataset.projectLink };
      void refresh();
      return;
    }
    const deleteButton = target.closest<HTMLButtonElement>(".delete-watchlist");
    if (deleteButton) {
      const token = window.prompt("write token") ?? "";
      void client.deleteWatchlist(deleteButton.dataset.id!, token).then(() => refresh(false));
    }
  });

  document.getElementById("main")!.addEventListener("change", (event) => {
    const select = (event.target as HTMLElement).closest<HTMLSelectElement>(".metric-select");
    if (select) {
      state = { ...state, metric: select.value };
      void refresh();
    }
  });

  document.getElementById("main")!.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    event.preventDefault();
    const fields = new FormData(form);
    if (form.classList.contains("attestation-form")) {
      void client
        .submitAttestation(
          form.dataset.project!,
          {
            metric_id: String(fields.get("metric_id")),
            assessor: String(fields.get("assessor")),
            value: Number(fields.get("value")),
            evidence_uri: String(fields.get("evidence_uri") || "") || undefined,
          },
          String(fields.get("token")),
        )
        .then(() => refresh(false))
        .catch((err) => window.alert(String(err)));
    } else if (form.classList.contains("watchlist-form")) {
      void client
        .createWatchlist(
          {
            subscriber: String(fields.get("subscriber")),
            projects: String(fields.get("projects")).split(",").map((s) => s.trim()).filter(Boolean),
            rules: String(fields.get("rules")).split(",").map((s) => s.trim()).filter(Boolean),
            delivery: { log_sink: true },
          },
          String(fields.get("token")),
        )
        .then(() => refresh(false))
        .catch((err) => window.alert(String(err)));
    }
  });

  window.addEventListener("popstate", () => {
    state = parseViewState(window.location.search);
    void refresh(false);
  });
}

wireEvents();
void refresh(false);
