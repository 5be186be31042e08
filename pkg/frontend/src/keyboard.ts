// Keyboard shortcuts: 1 = WLT, 0 = Normal, s = Skip.

import type { Verdict } from "./types.js";

export function verdictForKey(key: string): Verdict | null {
  switch (key) {
    case "1":
      return 1;
    case "0":
      return 0;
    case "s":
    case "S":
      return "skip";
    default:
      return null;
  }
}

export function bindKeys(onVerdict: (verdict: Verdict) => void): () => void {
  function handler(event: KeyboardEvent) {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    const verdict = verdictForKey(event.key);
    if (verdict !== null) {
      event.preventDefault();
      onVerdict(verdict);
    }
  }
  document.addEventListener("keydown", handler);
  return () => document.removeEventListener("keydown", handler);
}
