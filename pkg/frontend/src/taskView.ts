// HTML builders for the verification card: sentence, decision chips, and
// the taxonomy picker for adding concepts the model missed. Builders
// return markup strings so they can be asserted without a browser.

import type { TaxonomyNode, TaxonomyTree } from "./types.js";
import type { VerdictState } from "./verdict.js";
import { isComplete } from "./verdict.js";

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderChips(state: VerdictState): string {
  return state.chips
    .map((chip, i) => {
      const classes = ["chip"];
      if (i === state.cursor) classes.push("focused");
      if (chip.decision) classes.push(chip.decision);
      const mark = chip.decision === "correct" ? "[y]"
        : chip.decision === "incorrect" ? "[n]" : "[ ]";
      return (
        `<button class="${classes.join(" ")}" data-chip="${i}" ` +
        `data-code="${escapeHtml(chip.code)}">` +
        `<span class="mark">${mark}</span> ` +
        `<span class="label">${escapeHtml(chip.label)}</span> ` +
        `<span class="score">${chip.score.toFixed(4)}</span></button>`
      );
    })
    .join("");
}

export function renderAdded(state: VerdictState): string {
  return state.added
    .map(
      (entry) =>
        `<span class="chip added" data-added="${escapeHtml(entry.code)}">` +
        `+ ${escapeHtml(entry.label)}` +
        `<button class="remove" data-remove="${escapeHtml(entry.code)}">x</button></span>`,
    )
    .join("");
}

export function renderTaskCard(
  state: VerdictState,
  sentence: string,
  stale: boolean,
): string {
  const submitDisabled = isComplete(state) ? "" : "disabled";
  const staleBadge = stale ? '<span class="stale-badge">stale model</span>' : "";
  return `
    <div class="task-card" data-task="${escapeHtml(state.taskId)}">
      ${staleBadge}
      <p class="sentence">${escapeHtml(sentence)}</p>
      <div class="chips">${renderChips(state)}</div>
      <div class="added-row">${renderAdded(state)}</div>
      <div class="actions">
        <button id="add-concept">add concept (a)</button>
        <button id="submit-verdict" ${submitDisabled}>submit (Enter)</button>
      </div>
      <p class="hint">y = correct, n = incorrect, arrows move, a = add, Enter = submit</p>
    </div>`;
}

export function renderIdleState(queueNote: string): string {
  return `
    <div class="idle-state">
      <p>No tasks waiting.</p>
      <p class="queue-note">${escapeHtml(queueNote)}</p>
    </div>`;
}

function nodeMatches(node: TaxonomyNode, needle: string): boolean {
  const haystack = `${node.code} ${node.name} ${node.label}`.toLowerCase();
  return haystack.includes(needle);
}

export function renderTaxonomyPicker(tree: TaxonomyTree, filter = ""): string {
  const needle = filter.trim().toLowerCase();

  const renderNode = (node: TaxonomyNode): string => {
    const children = node.children.map(renderNode).filter(Boolean).join("");
    const selfVisible = !needle || nodeMatches(node, needle);
    if (!selfVisible && !children) return "";
    const pickable = node.annotatable
      ? `<button class="pick" data-pick="${node.code}" ` +
        `data-label="${escapeHtml(node.label)}">${node.code} ${escapeHtml(node.name)}</button>`
      : `<span class="branch">${node.code} ${escapeHtml(node.name)}</span>`;
    return `<li>${pickable}${children ? `<ul>${children}</ul>` : ""}</li>`;
  };

  const items = tree.roots.map(renderNode).filter(Boolean).join("");
  return `
    <div class="picker" id="taxonomy-picker">
      <input type="text" id="picker-filter" placeholder="filter concepts"
             value="${escapeHtml(filter)}" autofocus>
      <ul class="taxonomy-tree">${items}</ul>
    </div>`;
}
