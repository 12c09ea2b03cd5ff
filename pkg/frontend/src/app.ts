// Application shell: wires the verdict state machine, the API client, and
// the dashboard panels together. One in-flight verdict at a time; new
// tasks arrive by polling (single-writer store, desk-scale traffic).

import { ApiError, Client } from "./api.js";
import {
  renderConceptTable,
  renderGroupBars,
  renderOverall,
  renderQueueCounters,
  renderWilcoxonPanel,
} from "./dashboard.js";
import { renderIdleState, renderTaskCard, renderTaxonomyPicker } from "./taskView.js";
import type { QueueCounts, TaskView, TaxonomyTree } from "./types.js";
import {
  addConcept,
  decideChip,
  handleKey,
  isComplete,
  newVerdictState,
  removeAdded,
  toPayload,
  type VerdictState,
} from "./verdict.js";

export interface AppOptions {
  annotator: string;
  batch: string;
  pollMs: number;
}

const DEFAULTS: AppOptions = { annotator: "reviewer", batch: "demo", pollMs: 4000 };

export class App {
  readonly options: AppOptions;
  private task: TaskView | null = null;
  private verdict: VerdictState | null = null;
  private taxonomy: TaxonomyTree | null = null;
  private queue: QueueCounts | null = null;
  private submitting = false;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private root: HTMLElement,
    private client: Client,
    options: Partial<AppOptions> = {},
  ) {
    this.options = { ...DEFAULTS, ...options };
    this.root.innerHTML = `
      <header>
        <h1>annotation review</h1>
        <div id="queue-counters"></div>
        <button id="retrain">retrain model</button>
      </header>
      <div id="banner" class="banner" hidden></div>
      <main>
        <section id="review-pane"></section>
        <section id="dashboard-pane">
          <div class="dashboard-controls">
            <label>version <input id="dash-version" type="number" value="1" min="1"></label>
            <label>batch <input id="dash-batch" value="${this.options.batch}"></label>
            <label>group A <input id="fair-a" value=""></label>
            <label>group B <input id="fair-b" value=""></label>
            <button id="dash-refresh">refresh dashboard</button>
          </div>
          <div id="metrics-panel"></div>
          <div id="groups-panel"></div>
          <div id="concepts-panel"></div>
          <div id="wilcoxon-panel"></div>
        </section>
      </main>`;
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("input", (event) => this.onInput(event));
    this.root.ownerDocument.addEventListener("keydown", (event) =>
      this.onKey(event as KeyboardEvent),
    );
  }

  // -- lifecycle ----------------------------------------------------------

  async start(): Promise<void> {
    try {
      this.taxonomy = await this.client.taxonomy();
    } catch (error) {
      this.showError(error);
    }
    await this.advance();
    this.pollTimer = setInterval(() => {
      if (!this.task && !this.submitting) void this.advance();
    }, this.options.pollMs);
  }

  stop(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
    this.pollTimer = null;
  }

  /** Fetch the next task (or idle state) and render it. */
  async advance(): Promise<void> {
    try {
      this.task = await this.client.nextTask(this.options.annotator);
      this.hideBanner();
    } catch (error) {
      this.showError(error);
      return;
    }
    if (this.task?.queue) this.queue = this.task.queue;
    this.verdict = this.task ? newVerdictState(this.task) : null;
    this.renderReview();
  }

  async submit(): Promise<void> {
    if (!this.task || !this.verdict || this.submitting) return;
    const payload = toPayload(this.verdict, this.options.annotator);
    if (!payload) return;
    this.submitting = true;
    this.renderReview(); // disables the submit button against double-send
    try {
      const ack = await this.client.submitVerdict(this.task.task_id, payload);
      this.queue = ack.queue;
    } catch (error) {
      if (error instanceof ApiError && error.status >= 400 && error.status < 500) {
        this.showBanner(`${error.code}: ${error.message} (skipping task)`);
      } else {
        this.showError(error);
        this.submitting = false;
        this.renderReview();
        return;
      }
    }
    this.submitting = false;
    await this.advance();
  }

  async retrain(): Promise<void> {
    try {
      const result = await this.client.retrain();
      this.showBanner(`retrained: model version ${result.version}`);
      const versionInput = this.root.querySelector<HTMLInputElement>("#dash-version");
      if (versionInput) versionInput.value = String(result.version);
    } catch (error) {
      this.showError(error);
    }
  }

  async refreshDashboard(): Promise<void> {
    const version = Number(
      this.root.querySelector<HTMLInputElement>("#dash-version")?.value ?? "1",
    );
    const batch =
      this.root.querySelector<HTMLInputElement>("#dash-batch")?.value ??
      this.options.batch;
    try {
      const snapshot = await this.client.metrics(version, batch);
      this.panel("metrics-panel").innerHTML = renderOverall(snapshot);
      this.panel("groups-panel").innerHTML = renderGroupBars(snapshot);
      this.panel("concepts-panel").innerHTML = renderConceptTable(snapshot);
      const groupA = this.root.querySelector<HTMLInputElement>("#fair-a")?.value ?? "";
      const groupB = this.root.querySelector<HTMLInputElement>("#fair-b")?.value ?? "";
      if (groupA && groupB) {
        const fair = await this.client.fairness(version, batch, groupA, groupB);
        this.panel("wilcoxon-panel").innerHTML = renderWilcoxonPanel(fair);
      }
    } catch (error) {
      this.showError(error);
    }
  }

  // -- rendering ----------------------------------------------------------

  private panel(id: string): HTMLElement {
    return this.root.querySelector(`#${id}`) as HTMLElement;
  }

  private renderReview(): void {
    const pane = this.panel("review-pane");
    const counters = this.panel("queue-counters");
    if (counters && this.queue) counters.innerHTML = renderQueueCounters(this.queue);
    if (!this.task || !this.verdict) {
      const note = this.queue
        ? `done ${this.queue.done} of ${this.queue.total}; polling for more`
        : "polling for tasks";
      pane.innerHTML = renderIdleState(note);
      return;
    }
    pane.innerHTML = renderTaskCard(this.verdict, this.task.text, this.task.stale);
    if (this.submitting) {
      const button = pane.querySelector<HTMLButtonElement>("#submit-verdict");
      if (button) button.disabled = true;
    }
    if (this.verdict.pickerOpen && this.taxonomy) {
      pane.insertAdjacentHTML("beforeend", renderTaxonomyPicker(this.taxonomy));
    }
  }

  private showBanner(message: string): void {
    const banner = this.panel("banner");
    banner.textContent = message;
    banner.hidden = false;
  }

  private hideBanner(): void {
    this.panel("banner").hidden = true;
  }

  private showError(error: unknown): void {
    const message =
      error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : `network error: ${String(error)} (will retry)`;
    this.showBanner(message);
  }

  // -- events -------------------------------------------------------------

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "INPUT") return; // typing in a filter box
    if (!this.verdict) return;
    const { state, action } = handleKey(this.verdict, event.key);
    this.verdict = state;
    if (action === "submit") {
      void this.submit();
      return;
    }
    if (action !== "none") this.renderReview();
  }

  private onClick(event: Event): void {
    const target = event.target as HTMLElement | null;
    if (!target) return;
    const chipButton = target.closest<HTMLElement>("[data-chip]");
    if (chipButton && this.verdict) {
      const index = Number(chipButton.dataset.chip);
      const current = this.verdict.chips[index]?.decision;
      this.verdict = decideChip(
        this.verdict,
        index,
        current === "correct" ? "incorrect" : "correct",
      );
      this.renderReview();
      return;
    }
    const pick = target.closest<HTMLElement>("[data-pick]");
    if (pick && this.verdict) {
      this.verdict = addConcept(
        this.verdict,
        pick.dataset.pick as string,
        pick.dataset.label ?? (pick.dataset.pick as string),
      );
      this.renderReview();
      return;
    }
    const remove = target.closest<HTMLElement>("[data-remove]");
    if (remove && this.verdict) {
      this.verdict = removeAdded(this.verdict, remove.dataset.remove as string);
      this.renderReview();
      return;
    }
    switch (target.id) {
      case "add-concept":
        if (this.verdict) {
          this.verdict = { ...this.verdict, pickerOpen: true };
          this.renderReview();
        }
        break;
      case "submit-verdict":
        if (this.verdict && isComplete(this.verdict)) void this.submit();
        break;
      case "retrain":
        void this.retrain();
        break;
      case "dash-refresh":
        void this.refreshDashboard();
        break;
    }
  }

  private onInput(event: Event): void {
    const target = event.target as HTMLInputElement | null;
    if (target?.id === "picker-filter" && this.taxonomy) {
      const picker = this.root.querySelector("#taxonomy-picker");
      if (picker) {
        picker.outerHTML = renderTaxonomyPicker(this.taxonomy, target.value);
        const input = this.root.querySelector<HTMLInputElement>("#picker-filter");
        if (input) {
          input.focus();
          input.setSelectionRange(input.value.length, input.value.length);
        }
      }
    }
  }
}
