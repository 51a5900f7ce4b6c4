/**
 * Typed client for the annotation backend (JSON over /api/v1).
 *
 * Submissions that fail at the transport level are queued and replayed on
 * reconnect; a 409 on replay means the first attempt actually landed, so
 * it is treated as success.
 */

import { PassKind, Violation } from "./protocol.js";
import { RatingPayload } from "./stepper.js";

export interface SessionInfo {
  session_id: string;
  pass: PassKind;
  queue_size: number;
}

export interface TaskDescriptor {
  example_id: string;
  pass: PassKind;
  dims: string[];
  audio: { prompt: string; a: string; b: string };
}

export type SubmitResult =
  | { kind: "stored" }
  | { kind: "duplicate" }
  | { kind: "rejected"; violations: Violation[] }
  | { kind: "queued" };

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly token: string;
  private readonly fetchFn: FetchLike;
  private pending: RatingPayload[] = [];

  constructor(base: string, token: string,
              fetchFn: FetchLike = (u, i) => fetch(u, i)) {
    this.base = base.replace(/\/+$/, "");
    this.token = token;
    this.fetchFn = fetchFn;
  }

  private headers(): Record<string, string> {
    return {
      "Content-Type": "application/json",
      "X-Annotator-Token": this.token,
    };
  }

  async openSession(pass: PassKind, opts: { fraction?: number;
                    seed?: number } = {}): Promise<SessionInfo> {
    const response = await this.fetchFn(`${this.base}/api/v1/sessions`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ pass, ...opts }),
    });
    if (!response.ok) {
      throw new Error(`session open failed: ${response.status}`);
    }
    return (await response.json()) as SessionInfo;
  }

  async nextTask(sessionId: string): Promise<TaskDescriptor | null> {
    const response = await this.fetchFn(
      `${this.base}/api/v1/tasks/next?session=${encodeURIComponent(sessionId)}`,
      { headers: this.headers() });
    if (response.status === 204) return null;
    if (!response.ok) throw new Error(`task fetch failed: ${response.status}`);
    return (await response.json()) as TaskDescriptor;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  private async post(payload: RatingPayload): Promise<SubmitResult> {
    const response = await this.fetchFn(`${this.base}/api/v1/ratings`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(payload),
    });
    if (response.status === 201) return { kind: "stored" };
    if (response.status === 409) return { kind: "duplicate" };
    if (response.status === 422) {
      const body = (await response.json()) as { detail: Violation[] };
      return { kind: "rejected", violations: body.detail };
    }
    throw new Error(`ratings POST failed: ${response.status}`);
  }

  /** Submit one rating; transport failures queue the payload. */
  async submitRating(payload: RatingPayload): Promise<SubmitResult> {
    try {
      return await this.post(payload);
    } catch {
      this.pending.push(payload);
      return { kind: "queued" };
    }
  }

  /** Replay queued submissions; duplicates count as delivered. */
  async flushQueue(): Promise<number> {
    const queue = this.pending;
    this.pending = [];
    let delivered = 0;
    for (const payload of queue) {
      try {
        const result = await this.post(payload);
        if (result.kind === "stored" || result.kind === "duplicate") {
          delivered += 1;
        }
        // rejected payloads are dropped: the server has spoken
      } catch {
        this.pending.push(payload);
      }
    }
    return delivered;
  }

  async agreement(passA: string, passB: string): Promise<unknown> {
    const response = await this.fetchFn(
      `${this.base}/api/v1/agreement?pass_a=${passA}&pass_b=${passB}`,
      { headers: this.headers() });
    if (!response.ok) throw new Error(`agreement failed: ${response.status}`);
    return response.json();
  }
}
