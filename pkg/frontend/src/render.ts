// DOM rendering. Everything goes through textContent (no innerHTML for
// post-derived strings) and sanitizeText, so an unmasked mention or link
// never reaches the page.

import { sanitizeText, sparkline } from "./store.js";
import type { QueueItem, StateSummary, VerdictLogEntry } from "./types.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderDashboard(
  root: HTMLElement,
  summary: StateSummary | null,
  series: number[],
): void {
  root.replaceChildren();
  if (!summary) {
    root.appendChild(el("span", "muted", "loading state..."));
    return;
  }
  const progress = `${summary.labeled_count} / ${summary.stop_at} labeled`;
  root.appendChild(el("span", "stat", `round ${summary.round_index}`));
  root.appendChild(el("span", "stat", progress));
  root.appendChild(el("span", "stat conflicts", `${summary.conflict_count} conflicts`));
  root.appendChild(el("span", "stat", `${summary.queue_remaining} queued`));
  const spark = el("span", "spark", sparkline(series));
  spark.title = "adoptions per round";
  root.appendChild(spark);
  if (summary.stopped) {
    root.appendChild(el("span", "stat done", "budget reached"));
  }
}

export function renderCard(root: HTMLElement, item: QueueItem | null): void {
  root.replaceChildren();
  if (!item) {
    root.appendChild(el("p", "muted", "awaiting next round"));
    return;
  }
  root.appendChild(el("div", "post-id", item.post_id));
  root.appendChild(el("p", "post-text", sanitizeText(item.text)));
  if (item.ocr_text) {
    const ocr = el("p", "ocr-text", `OCR: ${sanitizeText(item.ocr_text)}`);
    root.appendChild(ocr);
  }
  if (item.image_urls.length) {
    const strip = el("div", "images");
    for (const url of item.image_urls) {
      const img = document.createElement("img");
      img.src = url;
      img.alt = "post image";
      strip.appendChild(img);
    }
    root.appendChild(strip);
  }
  root.appendChild(
    el("p", "hint", "keys: 1 = WLT, 0 = Normal, s = Skip"),
  );
}

export function renderVerdictLog(root: HTMLElement, entries: VerdictLogEntry[]): void {
  root.replaceChildren();
  for (const entry of entries.slice(0, 12)) {
    const line = el("li", `log-${entry.status}`);
    const score = entry.score === null ? "" : ` (score ${entry.score.toFixed(3)})`;
    line.textContent = `${entry.post_id}: ${entry.verdict} -> ${entry.status}${score}`;
    root.appendChild(line);
  }
}

export function renderBanner(root: HTMLElement, message: string | null): void {
  root.replaceChildren();
  root.classList.toggle("hidden", message === null);
  if (message !== null) {
    root.appendChild(el("span", undefined, message));
  }
}
