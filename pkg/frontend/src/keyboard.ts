// Keyboard shortcut map: number keys select a criterion, y/n/v set its
// state, arrows move the selection, Enter submits. Pure translation
// from a key name to an action; the app layer applies it.

import type { JudgmentValue } from "./types.js";

export type KeyAction =
  | { kind: "select"; index: number }
  | { kind: "set"; value: JudgmentValue }
  | { kind: "move"; delta: 1 | -1 }
  | { kind: "submit" };

export function actionForKey(
  key: string,
  criterionCount: number,
): KeyAction | null {
  if (key >= "1" && key <= "9") {
    const index = key.charCodeAt(0) - "1".charCodeAt(0);
    return index < criterionCount ? { kind: "select", index } : null;
  }
  if (key === "0") {
    // tenth criterion; the largest shipped rubric has exactly ten
    return criterionCount >= 10 ? { kind: "select", index: 9 } : null;
  }
  switch (key) {
    case "y":
    case "Y":
      return { kind: "set", value: "met" };
    case "n":
    case "N":
      return { kind: "set", value: "not_met" };
    case "v":
    case "V":
      return { kind: "set", value: "not_visible" };
    case "ArrowDown":
    case "j":
      return { kind: "move", delta: 1 };
    case "ArrowUp":
    case "k":
      return { kind: "move", delta: -1 };
    case "Enter":
      return { kind: "submit" };
    default:
      return null;
  }
}
