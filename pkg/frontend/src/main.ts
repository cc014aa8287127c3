// Boot: a config form creates a session (or the URL hash resumes one), then
// the controller takes over.

import { SessionApi } from "./api";
import { App } from "./app";
import type { CreateSessionBody } from "./types";

interface Defaults {
  family_path?: string | null;
  checkpoint_path?: string | null;
}

function field(form: HTMLElement, label: string, id: string, value: string): HTMLInputElement {
  const row = document.createElement("label");
  row.className = "form-row";
  row.textContent = label;
  const input = document.createElement("input");
  input.id = id;
  input.value = value;
  row.appendChild(input);
  form.appendChild(row);
  return input;
}

export async function boot(root: HTMLElement, api = new SessionApi("")): Promise<App | null> {
  const existing = window.location.hash.replace(/^#/, "");
  if (existing) {
    const app = new App(root, api, existing);
    await app.start();
    return app;
  }
  let defaults: Defaults = {};
  try {
    const res = await fetch("defaults.json");
    if (res.ok) defaults = await res.json();
  } catch {
    // standalone dev server; the form starts blank
  }
  const form = document.createElement("div");
  form.className = "config-form";
  const title = document.createElement("h2");
  title.textContent = "start a session";
  form.appendChild(title);
  const family = field(form, "family JSON", "cfg-family", defaults.family_path ?? "");
  const checkpoint = field(form, "checkpoint", "cfg-checkpoint", defaults.checkpoint_path ?? "");
  const pairs = field(form, "preference pairs", "cfg-pairs", "10");
  const budget = field(form, "budget", "cfg-budget", "10");
  const seed = field(form, "seed", "cfg-seed", "0");
  const button = document.createElement("button");
  button.id = "cfg-create";
  button.textContent = "create session";
  form.appendChild(button);
  root.appendChild(form);

  return new Promise((resolve) => {
    button.onclick = async () => {
      const body: CreateSessionBody = {
        family_path: family.value,
        checkpoint_path: checkpoint.value,
        expert_mode: "interactive",
        m_pairs: Number(pairs.value),
        budget: Number(budget.value),
        seed: Number(seed.value),
      };
      try {
        const state = await api.createSession(body);
        window.location.hash = state.id;
        root.textContent = "";
        const app = new App(root, api, state.id);
        await app.start();
        resolve(app);
      } catch (err) {
        let banner = form.querySelector(".error-banner") as HTMLElement | null;
        if (!banner) {
          banner = document.createElement("div");
          banner.className = "error-banner";
          form.appendChild(banner);
        }
        banner.textContent = err instanceof Error ? err.message : String(err);
      }
    };
  });
}

declare global {
  interface Window {
    __EXPERT_CONSOLE_TEST__?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__EXPERT_CONSOLE_TEST__) {
  const root = document.getElementById("app");
  if (root) void boot(root);
}
