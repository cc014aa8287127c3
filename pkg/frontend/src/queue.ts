// Local label queue: clicks enqueue labels immediately; a drain loop posts
// them one at a time so a network failure never loses a label.

import { ApiError } from "./api";
import type { SessionApi } from "./api";
import type { SessionState } from "./types";

export class LabelQueue {
  private pending: number[] = [];
  private active: Promise<void> | null = null;
  lastError: string | null = null;

  constructor(
    private api: SessionApi,
    private sessionId: string,
    private onState: (s: SessionState) => void,
    private onError: (message: string | null) => void,
    private retryDelayMs = 800,
  ) {}

  get size(): number {
    return this.pending.length;
  }

  push(label: number): void {
    this.pending.push(label);
    void this.drain();
  }

  /** Await completion of all queued deliveries (shared across callers). */
  drain(): Promise<void> {
    if (!this.active) {
      this.active = this.run().finally(() => {
        this.active = null;
      });
    }
    return this.active;
  }

  private async run(): Promise<void> {
    while (this.pending.length > 0) {
      const label = this.pending[0];
      try {
        const state = await this.api.postLabels(this.sessionId, [label]);
        this.pending.shift();
        this.lastError = null;
        this.onError(null);
        this.onState(state);
      } catch (err) {
        this.lastError = err instanceof Error ? err.message : String(err);
        this.onError(this.lastError);
        if (err instanceof ApiError) {
          // the server rejected the label (wrong phase, overflow): keeping
          // it would wedge the queue, so drop it and surface the error
          this.pending.shift();
        } else {
          await new Promise((r) => setTimeout(r, this.retryDelayMs));
        }
      }
    }
  }
}
