// DTOs mirroring the labeling service HTTP API.

export interface StateSummary {
  round_index: number;
  labeled_count: number;
  stop_at: number;
  pool_count: number;
  queue_remaining: number;
  conflict_count: number;
  adoption_by_round: Record<string, number>;
  stopped: boolean;
  annotators_required: number;
  model_snapshot_id: string;
}

export interface QueueItem {
  post_id: string;
  text: string;
  image_urls: string[];
  ocr_text: string | null;
  votes_recorded: number;
}

export type Verdict = 0 | 1 | "skip";

export type MergeStatus = "adopted" | "conflict_excluded" | "awaiting" | "recycled";

export interface AnnotationAck {
  post_id: string;
  status: MergeStatus;
  label: number | null;
  // the model score, revealed only after the verdict is recorded
  score: number | null;
}

export interface VerdictLogEntry {
  post_id: string;
  verdict: Verdict;
  // "superseded": the server already resolved this item (peer vote or our
  // earlier delivery); server truth wins
  status: MergeStatus | "pending-retry" | "superseded";
  score: number | null;
}
