// Thin typed client over the labeling service HTTP API.

import type { AnnotationAck, QueueItem, StateSummary, Verdict } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(readonly baseUrl: string, fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body as T;
  }

  getState(): Promise<StateSummary> {
    return this.request<StateSummary>("/api/state");
  }

  async getQueue(annotatorId: string): Promise<QueueItem[]> {
    const body = await this.request<{ items: QueueItem[] }>(
      `/api/queue?annotator=${encodeURIComponent(annotatorId)}`,
    );
    return body.items;
  }

  submitAnnotation(
    annotatorId: string,
    postId: string,
    verdict: Verdict,
  ): Promise<AnnotationAck> {
    return this.request<AnnotationAck>("/api/annotations", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        annotator_id: annotatorId,
        post_id: postId,
        verdict,
      }),
    });
  }

  advanceRound(): Promise<StateSummary> {
    return this.request<StateSummary>("/api/rounds/advance", { method: "POST" });
  }

  exportDataset(): Promise<{ out_dir: string; manifest: Record<string, unknown> }> {
    return this.request("/api/export");
  }
}
