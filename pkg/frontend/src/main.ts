// Entry point: wires the session, dashboard, keyboard and polling together.

import { ApiClient } from "./api.js";
import { bindKeys } from "./keyboard.js";
import { AnnotatorSession, Dashboard } from "./store.js";
import {
  renderBanner,
  renderCard,
  renderDashboard,
  renderVerdictLog,
} from "./render.js";

const POLL_MS = 3000;
const RETRY_MS = 5000;

function requireEl(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("annotator");
  if (fromQuery) return fromQuery;
  const stored = window.localStorage.getItem("annotator_id");
  if (stored) return stored;
  const entered = window.prompt("annotator id?") ?? "anonymous";
  window.localStorage.setItem("annotator_id", entered);
  return entered;
}

async function boot() {
  const api = new ApiClient("");
  const session = new AnnotatorSession(api, annotatorId());
  const dashboard = new Dashboard(api);

  const dashboardEl = requireEl("dashboard");
  const cardEl = requireEl("card");
  const logEl = requireEl("verdict-log");
  const bannerEl = requireEl("banner");
  const advanceBtn = requireEl("advance") as HTMLButtonElement;
  requireEl("who").textContent = session.annotatorId;

  function redraw() {
    renderDashboard(dashboardEl, dashboard.summary, dashboard.adoptionSeries());
    renderCard(cardEl, session.current());
    renderVerdictLog(logEl, session.verdictLog);
    const banner = !session.connected
      ? "server unreachable; verdicts are kept and retried"
      : session.lastError ?? dashboard.lastError;
    renderBanner(bannerEl, banner ?? null);
    advanceBtn.disabled = !dashboard.canAdvance();
    advanceBtn.title = dashboard.canAdvance()
      ? "train, score and queue the next round"
      : "queue must be fully labeled first";
  }

  async function verdict(v: 0 | 1 | "skip") {
    const item = session.current();
    if (!item) return;
    await session.submit(item.post_id, v);
    if (!session.items.length) {
      await session.refreshQueue();
    }
    await dashboard.refresh();
    redraw();
  }

  bindKeys((v) => void verdict(v));
  for (const [id, v] of [["btn-wlt", 1], ["btn-normal", 0], ["btn-skip", "skip"]] as const) {
    requireEl(id).addEventListener("click", () => void verdict(v));
  }
  advanceBtn.addEventListener("click", async () => {
    if (!window.confirm("Advance the round? This trains and rescoring may take a while.")) {
      return;
    }
    try {
      await dashboard.advance();
      await session.refreshQueue();
    } catch (err) {
      dashboard.lastError = err instanceof Error ? err.message : String(err);
    }
    redraw();
  });

  await dashboard.refresh();
  await session.refreshQueue();
  redraw();

  setInterval(async () => {
    await dashboard.refresh();
    if (!session.items.length) {
      await session.refreshQueue();
    }
    redraw();
  }, POLL_MS);
  setInterval(async () => {
    if (session.pending.length) {
      await session.retryPending();
      redraw();
    }
  }, RETRY_MS);
}

void boot();
