import { describe, expect, it, vi } from "vitest";

import { ApiError, SessionApi } from "../src/api";
import { LabelQueue } from "../src/queue";
import { makeState } from "./fixtures";

function apiWith(postLabels: (id: string, labels: number[]) => Promise<any>): SessionApi {
  const api = new SessionApi("");
  api.postLabels = postLabels as any;
  return api;
}

describe("label queue", () => {
  it("delivers labels in order", async () => {
    const sent: number[][] = [];
    const api = apiWith(async (_id, labels) => {
      sent.push(labels);
      return makeState();
    });
    const q = new LabelQueue(api, "s", () => {}, () => {}, 1);
    q.push(1);
    q.push(0);
    q.push(1);
    await q.drain();
    expect(sent).toEqual([[1], [0], [1]]);
    expect(q.size).toBe(0);
  });

  it("keeps labels and retries after a network failure", async () => {
    let failures = 2;
    const sent: number[] = [];
    const errors: (string | null)[] = [];
    const api = apiWith(async (_id, labels) => {
      if (failures > 0) {
        failures -= 1;
        throw new TypeError("fetch failed");
      }
      sent.push(labels[0]);
      return makeState();
    });
    const q = new LabelQueue(api, "s", () => {}, (e) => errors.push(e), 1);
    q.push(1);
    await q.drain();
    expect(sent).toEqual([1]); // no label loss
    expect(errors.filter(Boolean).length).toBeGreaterThan(0);
    expect(errors[errors.length - 1]).toBeNull(); // banner cleared on success
  });

  it("drops a label the server rejects instead of wedging", async () => {
    const api = apiWith(async () => {
      throw new ApiError(409, "PhaseError", "not accepting labels");
    });
    const errors: (string | null)[] = [];
    const q = new LabelQueue(api, "s", () => {}, (e) => errors.push(e), 1);
    q.push(1);
    await q.drain();
    expect(q.size).toBe(0);
    expect(errors.some((e) => e && e.includes("PhaseError"))).toBe(true);
  });

  it("notifies new state after each accepted label", async () => {
    const states: number[] = [];
    let labeled = 0;
    const api = apiWith(async () => {
      labeled += 1;
      const s = makeState();
      s.preferences.labeled = labeled;
      return s;
    });
    const q = new LabelQueue(api, "s", (s) => states.push(s.preferences.labeled), () => {}, 1);
    q.push(1);
    q.push(0);
    await q.drain();
    expect(states).toEqual([1, 2]);
  });
});
