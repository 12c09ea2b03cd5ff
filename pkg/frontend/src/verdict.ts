// Verdict entry state machine. Pure and immutable so keyboard handling is
// unit-testable without a DOM: y/n decide the focused chip, arrows move,
// "a" opens the add-concept picker, Enter submits once every chip is
// decided (mirroring the server's IncompleteDecisions rule client-side).

import type { TaskView, VerdictPayload } from "./types.js";

export type Decision = "correct" | "incorrect";

export interface ChipState {
  code: string;
  label: string;
  score: number;
  decision: Decision | null;
}

export interface VerdictState {
  taskId: string;
  chips: ChipState[];
  cursor: number;
  added: { code: string; label: string }[];
  pickerOpen: boolean;
}

export type KeyAction = "none" | "changed" | "submit" | "open-picker" | "close-picker";

export function newVerdictState(task: TaskView): VerdictState {
  return {
    taskId: task.task_id,
    chips: task.predicted.map((chip) => ({
      code: chip.code,
      label: chip.label,
      score: chip.score,
      decision: null,
    })),
    cursor: 0,
    added: [],
    pickerOpen: false,
  };
}

export function decideChip(
  state: VerdictState,
  index: number,
  decision: Decision,
): VerdictState {
  if (index < 0 || index >= state.chips.length) return state;
  const chips = state.chips.map((chip, i) =>
    i === index ? { ...chip, decision } : chip,
  );
  const cursor = Math.min(index + 1, Math.max(chips.length - 1, 0));
  return { ...state, chips, cursor };
}

export function moveCursor(state: VerdictState, delta: number): VerdictState {
  if (!state.chips.length) return state;
  const cursor = Math.min(Math.max(state.cursor + delta, 0), state.chips.length - 1);
  return { ...state, cursor };
}

export function addConcept(
  state: VerdictState,
  code: string,
  label: string,
): VerdictState {
  if (state.chips.some((chip) => chip.code === code)) return state; // already predicted
  if (state.added.some((entry) => entry.code === code)) return state;
  return { ...state, added: [...state.added, { code, label }], pickerOpen: false };
}

export function removeAdded(state: VerdictState, code: string): VerdictState {
  return { ...state, added: state.added.filter((entry) => entry.code !== code) };
}

export function isComplete(state: VerdictState): boolean {
  return state.chips.every((chip) => chip.decision !== null);
}

export function toPayload(
  state: VerdictState,
  annotatorId: string,
): VerdictPayload | null {
  if (!isComplete(state)) return null;
  const decisions: Record<string, Decision> = {};
  for (const chip of state.chips) {
    decisions[chip.code] = chip.decision as Decision;
  }
  return {
    annotator_id: annotatorId,
    decisions,
    added_concepts: state.added.map((entry) => entry.code),
  };
}

export interface KeyResult {
  state: VerdictState;
  action: KeyAction;
}

export function handleKey(state: VerdictState, key: string): KeyResult {
  if (state.pickerOpen) {
    if (key === "Escape") {
      return { state: { ...state, pickerOpen: false }, action: "close-picker" };
    }
    return { state, action: "none" }; // picker has its own input handling
  }
  switch (key) {
    case "y":
    case "Y":
      return { state: decideChip(state, state.cursor, "correct"), action: "changed" };
    case "n":
    case "N":
      return { state: decideChip(state, state.cursor, "incorrect"), action: "changed" };
    case "a":
    case "A":
      return { state: { ...state, pickerOpen: true }, action: "open-picker" };
    case "ArrowRight":
    case "l":
      return { state: moveCursor(state, 1), action: "changed" };
    case "ArrowLeft":
    case "h":
      return { state: moveCursor(state, -1), action: "changed" };
    case "Enter":
      return isComplete(state)
        ? { state, action: "submit" }
        : { state, action: "none" };
    default:
      return { state, action: "none" };
  }
}
