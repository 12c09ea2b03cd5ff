// Read-only dashboard rendering: per-group correctness bars, per-concept
// table, and the signed-rank comparison panel. All values arrive from the
// API; nothing is computed client-side beyond formatting.

import type { FairnessResponse, QueueCounts, Snapshot } from "./types.js";

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function pct(value: number | null): string {
  return value === null ? "-" : value.toFixed(2);
}

export function renderGroupBars(snapshot: Snapshot): string {
  const bars = snapshot.per_group.rows
    .map((row) => {
      const height = row.pct_correct ?? 0;
      return (
        `<div class="group-bar" data-group="${escapeHtml(row.group)}">` +
        `<div class="bar" style="height:${height.toFixed(2)}px" ` +
        `title="${row.correct} correct / ${row.incorrect} incorrect"></div>` +
        `<div class="value">${pct(row.pct_correct)}</div>` +
        `<div class="name">${escapeHtml(row.group)}</div></div>`
      );
    })
    .join("");
  const summary = snapshot.per_group;
  return `
    <div class="group-bars">${bars}</div>
    <p class="group-summary">
      ${summary.sum_correct} correct / ${summary.sum_incorrect} incorrect,
      overall ${pct(summary.overall_pct)}% (group SD ${summary.group_pct_sd.toFixed(2)})
    </p>`;
}

export function renderOverall(snapshot: Snapshot): string {
  const order = [
    ["precision", "Precision"],
    ["recall", "Recall"],
    ["f_score", "F-score"],
    ["misclassification", "Misclassification"],
    ["accuracy", "Accuracy"],
    ["balanced_accuracy", "Balanced Accuracy"],
  ] as const;
  const rows = order
    .map(([key, title]) => {
      const cell = snapshot.overall[key];
      const mean = cell && cell.mean !== null ? cell.mean.toFixed(2) : "-";
      const sd = cell ? cell.sd.toFixed(2) : "-";
      return `<tr><td>${title}</td><td>${mean}</td><td>${sd}</td></tr>`;
    })
    .join("");
  return `
    <table class="overall-table">
      <thead><tr><th>metric</th><th>avg</th><th>sd</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderConceptTable(snapshot: Snapshot): string {
  const rows = snapshot.per_concept
    .map(
      (row) =>
        `<tr data-code="${row.code}"><td>${escapeHtml(row.label)}</td>` +
        `<td>${pct(row.pct_correct)}</td>` +
        `<td>${row.tp}</td><td>${row.fp}</td><td>${row.fn}</td></tr>`,
    )
    .join("");
  return `
    <table class="concept-table">
      <thead><tr><th>concept</th><th>correct %</th><th>tp</th><th>fp</th><th>fn</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderWilcoxonPanel(fair: FairnessResponse): string {
  const { result } = fair;
  const z = result.z === null ? "-" : result.z.toFixed(3);
  const note = fair.note ? `<p class="note">${escapeHtml(fair.note)}</p>` : "";
  return `
    <div class="wilcoxon-panel">
      <h3>${escapeHtml(fair.group_a)} vs ${escapeHtml(fair.group_b)}</h3>
      <table class="wilcoxon-table">
        <tr><td>pairs</td><td data-field="n">${fair.n_pairs}</td></tr>
        <tr><td>medians</td>
            <td>${fair.median_a.toFixed(2)}% / ${fair.median_b.toFixed(2)}%</td></tr>
        <tr><td>SDs</td>
            <td>${fair.sd_a.toFixed(2)}% / ${fair.sd_b.toFixed(2)}%</td></tr>
        <tr><td>W</td><td data-field="w">${result.w.toFixed(1)}</td></tr>
        <tr><td>Z</td><td data-field="z">${z}</td></tr>
        <tr><td>p</td><td data-field="p">${result.p_value.toFixed(2)}</td></tr>
        <tr><td>method</td><td>${escapeHtml(result.method)}</td></tr>
      </table>
      ${note}
    </div>`;
}

export function renderQueueCounters(queue: QueueCounts): string {
  return (
    `<span class="counter">pending ${queue.pending}</span>` +
    `<span class="counter">stale ${queue.stale}</span>` +
    `<span class="counter">done ${queue.done}</span>` +
    `<span class="counter">skipped ${queue.skipped}</span>`
  );
}
