// Acceptance-level tests: a fixture-seeded server, keyboard-only review,
// and the dashboard panels. The mock server implements the same contract
// (paths, status codes, verdict completeness) as the real API.

import { afterEach, describe, expect, it, vi } from "vitest";

import { Client } from "../src/api.js";
import { App } from "../src/app.js";
import {
  TINY_TAXONOMY,
  MockServer,
  fairnessFixture,
  makeTask,
  sixGroupSnapshot,
} from "./mockServer.js";

const CHIP_SETS = [
  [{ code: "3.3", label: "Organisation-Teamworking", score: 0.91 }],
  [
    { code: "3.3", label: "Organisation-Teamworking", score: 0.84 },
    { code: "3.5", label: "Organisation-Documentation", score: 0.66 },
  ],
  [
    { code: "3.5", label: "Organisation-Documentation", score: 0.77 },
    { code: "4.5", label: "Jobs/Task-Risk assessment", score: 0.58 },
  ],
];

function tenTasks() {
  return Array.from({ length: 10 }, (_, i) =>
    makeTask(i + 1, CHIP_SETS[i % CHIP_SETS.length]),
  );
}

async function settle(): Promise<void> {
  for (let i = 0; i < 6; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

function pressKey(key: string): Promise<void> {
  document.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true }));
  return settle();
}

function buildApp(server: MockServer): App {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  return new App(root, new Client("", server.fetch), {
    annotator: "alice",
    batch: "demo",
    pollMs: 60_000,
  });
}

let app: App | null = null;

afterEach(() => {
  app?.stop();
  app = null;
  document.body.innerHTML = "";
});

describe("review loop", () => {
  it("fetch-next renders the task with undecided chips", async () => {
    const server = new MockServer(tenTasks(), TINY_TAXONOMY);
    app = buildApp(server);
    await app.start();
    await settle();
    const chips = document.querySelectorAll(".chip");
    expect(chips.length).toBeGreaterThan(0);
    expect(document.querySelectorAll(".chip.correct")).toHaveLength(0);
    expect(
      document.querySelector<HTMLButtonElement>("#submit-verdict")?.disabled,
    ).toBe(true);
  });

  it("submit advances to the next task", async () => {
    const server = new MockServer(tenTasks(), TINY_TAXONOMY);
    app = buildApp(server);
    await app.start();
    await settle();
    const firstTask = document.querySelector(".task-card")?.getAttribute("data-task");
    await pressKey("y"); // single-chip task
    await pressKey("Enter");
    expect(server.verdicts).toHaveLength(1);
    const secondTask = document.querySelector(".task-card")?.getAttribute("data-task");
    expect(secondTask).not.toBe(firstTask);
  });

  it("a 10-task queue is fully drainable by keyboard only", async () => {
    const server = new MockServer(tenTasks(), TINY_TAXONOMY);
    app = buildApp(server);
    await app.start();
    await settle();

    let guard = 0;
    while (document.querySelector(".task-card") && guard < 100) {
      guard += 1;
      const chipCount = document.querySelectorAll(".chip:not(.added)").length;
      for (let i = 0; i < chipCount; i += 1) {
        await pressKey(i % 2 === 0 ? "y" : "n");
      }
      await pressKey("Enter");
    }

    expect(server.verdicts).toHaveLength(10);
    expect(server.queue().done).toBe(10);
    expect(document.querySelector(".idle-state")).not.toBeNull();
    expect(document.querySelector("#queue-counters")?.textContent).toContain(
      "done 10",
    );
  });

  it("polling picks up a task that appears after idle", async () => {
    vi.useFakeTimers();
    try {
      const server = new MockServer([], TINY_TAXONOMY);
      app = buildApp(server);
      await app.start();
      expect(document.querySelector(".idle-state")).not.toBeNull();
      server.tasks.push({ ...makeTask(42, CHIP_SETS[0]), authors: new Set() });
      await vi.advanceTimersByTimeAsync(61_000);
      expect(document.querySelector(".task-card")).not.toBeNull();
    } finally {
      vi.useRealTimers();
    }
  });

  it("adding a concept via the picker lands in the verdict", async () => {
    const server = new MockServer(
      [makeTask(1, CHIP_SETS[0])], TINY_TAXONOMY);
    app = buildApp(server);
    await app.start();
    await settle();
    await pressKey("a"); // open picker
    const pick = document.querySelector<HTMLElement>('[data-pick="4.5"]');
    expect(pick).not.toBeNull();
    pick?.click();
    await settle();
    expect(document.querySelector(".chip.added")).not.toBeNull();
    await pressKey("y");
    await pressKey("Enter");
    expect(server.verdicts[0].payload.added_concepts).toEqual(["4.5"]);
  });

  it("retrain button reports the new model version", async () => {
    const server = new MockServer([makeTask(1, CHIP_SETS[0])], TINY_TAXONOMY);
    app = buildApp(server);
    await app.start();
    await settle();
    await pressKey("y");
    await pressKey("Enter");
    (document.getElementById("retrain") as HTMLButtonElement).click();
    await settle();
    expect(document.getElementById("banner")?.textContent).toContain(
      "model version 2",
    );
  });
});

describe("dashboard", () => {
  it("renders six group bars from the snapshot and a signed-rank panel", async () => {
    const server = new MockServer(
      [], TINY_TAXONOMY, sixGroupSnapshot(), fairnessFixture());
    app = buildApp(server);
    await app.start();
    (document.getElementById("fair-a") as HTMLInputElement).value = "Black";
    (document.getElementById("fair-b") as HTMLInputElement).value = "White British";
    (document.getElementById("dash-refresh") as HTMLButtonElement).click();
    await settle();

    const bars = document.querySelectorAll("#groups-panel .group-bar");
    expect(bars).toHaveLength(6);
    expect(
      [...bars].map((bar) => (bar as HTMLElement).dataset.group),
    ).toContain("White British");
    const wilcoxon = document.querySelector("#wilcoxon-panel .wilcoxon-panel");
    expect(wilcoxon).not.toBeNull();
    expect(wilcoxon?.querySelector('[data-field="p"]')?.textContent).toBe("0.42");
    // all numbers come from the API payload, none are recomputed client-side
    expect(document.querySelector("#metrics-panel")?.textContent).toContain("0.80");
  });

  it("shows the error envelope when no snapshot exists", async () => {
    const server = new MockServer([], TINY_TAXONOMY, null, null);
    app = buildApp(server);
    await app.start();
    (document.getElementById("dash-refresh") as HTMLButtonElement).click();
    await settle();
    expect(document.getElementById("banner")?.textContent).toContain(
      "NoVerdictsForBatch",
    );
  });
});
