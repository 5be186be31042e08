// Client-side session state: queue view with optimistic removal, a retry
// queue for verdicts that failed to reach the server, and the dashboard
// mirror of /api/state. Counts shown in the UI always come from the server;
// nothing here derives them from partial data.

import { ApiClient, ApiError } from "./api.js";
import type {
  QueueItem,
  StateSummary,
  Verdict,
  VerdictLogEntry,
} from "./types.js";

// Defense in depth: the server masks mentions/links, but never render a raw
// span even if a field slips through.
const RAW_URL = /(?:https?:\/\/\S*|(?<![\w.])www\.\S*)/gi;
const RAW_MENTION = /(?<![A-Za-z0-9_@])@[A-Za-z0-9_]+/g;

export function sanitizeText(text: string): string {
  return text.replace(RAW_URL, "{{URL}}").replace(RAW_MENTION, "{{MENTION}}");
}

interface PendingVerdict {
  postId: string;
  verdict: Verdict;
}

export class AnnotatorSession {
  items: QueueItem[] = [];
  verdictLog: VerdictLogEntry[] = [];
  pending: PendingVerdict[] = [];
  connected = true;
  lastError: string | null = null;

  constructor(
    private api: ApiClient,
    readonly annotatorId: string,
  ) {}

  current(): QueueItem | null {
    return this.items.length ? this.items[0] : null;
  }

  async refreshQueue(): Promise<void> {
    try {
      this.items = await this.api.getQueue(this.annotatorId);
      this.connected = true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = err.message;
      } else {
        // server unreachable; keep current items, show the retry banner
        this.connected = false;
      }
    }
  }

  /** Optimistically remove the item and send the verdict.
   *
   * 409 means the server already resolved the item (peer vote, conflict,
   * recycled); server truth wins and the queue is refreshed. Network
   * failures keep the verdict locally for retry, so a verdict submitted
   * once is delivered at least once; the server dedups per annotator+post.
   */
  async submit(postId: string, verdict: Verdict): Promise<void> {
    this.items = this.items.filter((item) => item.post_id !== postId);
    try {
      const ack = await this.api.submitAnnotation(this.annotatorId, postId, verdict);
      this.verdictLog.unshift({
        post_id: postId,
        verdict,
        status: ack.status,
        score: ack.score,
      });
      this.connected = true;
      this.lastError = null;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = err.message;
        await this.refreshQueue();
      } else {
        this.pending.push({ postId, verdict });
        this.connected = false;
        this.verdictLog.unshift({
          post_id: postId,
          verdict,
          status: "pending-retry",
          score: null,
        });
      }
    }
  }

  /** Re-send verdicts that never reached the server. */
  async retryPending(): Promise<void> {
    const queue = this.pending;
    this.pending = [];
    for (const entry of queue) {
      try {
        const ack = await this.api.submitAnnotation(
          this.annotatorId,
          entry.postId,
          entry.verdict,
        );
        this.resolveRetry(entry.postId, ack.status, ack.score);
        this.connected = true;
      } catch (err) {
        if (err instanceof ApiError) {
          // duplicate or stale: the server already has the truth
          this.resolveRetry(entry.postId, "superseded", null);
          await this.refreshQueue();
        } else {
          this.pending.push(entry);
          this.connected = false;
        }
      }
    }
  }

  private resolveRetry(
    postId: string,
    status: VerdictLogEntry["status"],
    score: number | null,
  ): void {
    const entry = this.verdictLog.find(
      (e) => e.post_id === postId && e.status === "pending-retry",
    );
    if (entry) {
      entry.status = status;
      entry.score = score;
    }
  }
}

export class Dashboard {
  summary: StateSummary | null = null;
  lastError: string | null = null;

  constructor(private api: ApiClient) {}

  async refresh(): Promise<void> {
    try {
      this.summary = await this.api.getState();
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
    }
  }

  canAdvance(): boolean {
    return (
      this.summary !== null &&
      this.summary.queue_remaining === 0 &&
      !this.summary.stopped
    );
  }

  /** Adoption counts ordered seed, round:0, round:1, ... for the sparkline. */
  adoptionSeries(): number[] {
    if (!this.summary) return [];
    const byRound = this.summary.adoption_by_round;
    const series: number[] = [];
    if ("seed" in byRound) series.push(byRound["seed"]);
    const rounds = Object.keys(byRound)
      .filter((k) => k.startsWith("round:"))
      .map((k) => parseInt(k.slice("round:".length), 10))
      .sort((a, b) => a - b);
    for (const r of rounds) series.push(byRound[`round:${r}`]);
    return series;
  }

  async advance(): Promise<StateSummary> {
    const summary = await this.api.advanceRound();
    this.summary = summary;
    return summary;
  }
}

const SPARK_CHARS = "▁▂▃▄▅▆▇█";

export function sparkline(values: number[]): string {
  if (!values.length) return "";
  const max = Math.max(...values, 1);
  return values
    .map((v) => SPARK_CHARS[Math.min(Math.round((v / max) * 7), 7)])
    .join("");
}
