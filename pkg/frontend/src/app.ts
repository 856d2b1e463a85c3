// DOM layer: renders the annotation queue from SessionState and wires
// keyboard and pointer input to it. All server traffic goes through
// ApiClient; all judgment state lives in state.ts.

import { ApiClient, type SubmitOutcome } from "./api.js";
import { actionForKey } from "./keyboard.js";
import {
  NOT_VISIBLE_HINT,
  buildAnnotation,
  buildHolistic,
  canSubmit,
  flattenCriteria,
  missingKeys,
  newDraft,
  selectDelta,
  selectIndex,
  setJudgment,
  setRating,
  type CriterionRef,
  type Draft,
} from "./state.js";
import type { JudgmentValue, NextImage, Session } from "./types.js";

// ── DOM helpers ─────────────────────────────────────

type Attrs = Record<string, string | boolean | ((e: Event) => void) | null>;

function el(
  tag: string,
  attrs: Attrs = {},
  ...children: Array<string | Node | null>
): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (v == null || v === false) continue;
    if (k === "className" && typeof v === "string") node.className = v;
    else if (k.startsWith("on") && typeof v === "function")
      node.addEventListener(k.slice(2).toLowerCase(), v as EventListener);
    else if (v === true) node.setAttribute(k, "");
    else if (typeof v === "string") node.setAttribute(k, v);
  }
  for (const c of children) {
    if (typeof c === "string") node.appendChild(document.createTextNode(c));
    else if (c) node.appendChild(c);
  }
  return node;
}

// ── App state ───────────────────────────────────────

type Banner =
  | { kind: "info" | "error"; text: string }
  | { kind: "issues"; issues: string[] }
  | { kind: "duplicate"; text: string }
  | { kind: "retry"; text: string };

interface App {
  client: ApiClient;
  annotator: string;
  session: Session;
  refs: CriterionRef[];
  image: NextImage | null; // null once the queue is complete
  draft: Draft;
  banner: Banner | null;
  highlightMissing: boolean;
  busy: boolean;
}

let app: App | null = null;

const ANNOTATOR_KEY = "rubriceval.annotator";
const RATING_SCALE = "three_point";

// ── Boot and session flow ───────────────────────────

async function boot(): Promise<void> {
  const stored = sessionStorage.getItem(ANNOTATOR_KEY);
  if (!stored) {
    renderLogin();
    return;
  }
  await startSession(stored);
}

async function startSession(annotator: string): Promise<void> {
  const client = new ApiClient();
  try {
    const session = await client.session(annotator);
    const image = await client.nextImage(annotator);
    sessionStorage.setItem(ANNOTATOR_KEY, annotator);
    app = {
      client,
      annotator,
      session,
      refs: flattenCriteria(session.rubric),
      image,
      draft: newDraft(image ? image.image_id : ""),
      banner: null,
      highlightMissing: false,
      busy: false,
    };
    render();
  } catch (err) {
    renderLogin(`Could not reach the service: ${String(err)}`);
  }
}

async function advance(): Promise<void> {
  if (!app) return;
  const image = await app.client.nextImage(app.annotator);
  const progress = await app.client.progress(app.annotator);
  app.session.progress = { done: progress.done, total: progress.total };
  app.image = image;
  app.draft = newDraft(image ? image.image_id : "");
  app.banner = null;
  app.highlightMissing = false;
}

// ── Submission ──────────────────────────────────────

async function trySubmit(overwrite = false): Promise<void> {
  if (!app || !app.image || app.busy) return;
  if (!canSubmit(app.refs, app.draft)) {
    app.highlightMissing = true;
    app.banner = {
      kind: "error",
      text: "Set every criterion before submitting.",
    };
    render();
    return;
  }
  app.busy = true;
  render();
  const record = buildAnnotation(app.session, app.refs, app.draft, overwrite);
  const outcome = await app.client.submit(record);
  await applyOutcome(outcome, overwrite);
}

async function applyOutcome(
  outcome: SubmitOutcome,
  overwrite: boolean,
): Promise<void> {
  if (!app) return;
  app.busy = false;
  switch (outcome.kind) {
    case "created": {
      const holistic = buildHolistic(
        app.session,
        app.draft,
        RATING_SCALE,
        overwrite,
      );
      if (holistic) {
        const ratingOutcome = await app.client.submit(holistic);
        if (ratingOutcome.kind !== "created") {
          // judgments are saved; report the rating problem and move on
          console.warn("holistic rating not stored", ratingOutcome);
        }
      }
      try {
        await advance();
      } catch (err) {
        app.banner = { kind: "retry", text: String(err) };
      }
      break;
    }
    case "duplicate":
      // entered state stays; replacing is an explicit second step
      app.banner = { kind: "duplicate", text: outcome.message };
      break;
    case "invalid":
      app.banner = { kind: "issues", issues: outcome.issues };
      break;
    case "error":
      app.banner = { kind: "retry", text: outcome.message };
      break;
  }
  render();
}

// ── Keyboard ────────────────────────────────────────

function onKeydown(event: KeyboardEvent): void {
  if (!app || !app.image || app.busy) return;
  const target = event.target as HTMLElement | null;
  if (target && /^(INPUT|TEXTAREA|SELECT)$/.test(target.tagName)) return;
  const action = actionForKey(event.key, app.refs.length);
  if (!action) return;
  event.preventDefault();
  switch (action.kind) {
    case "select":
      selectIndex(app.refs, app.draft, action.index);
      break;
    case "move":
      selectDelta(app.refs, app.draft, action.delta);
      break;
    case "set": {
      const ref = app.refs[app.draft.selected];
      if (ref) {
        setJudgment(app.draft, ref.key, action.value);
        selectDelta(app.refs, app.draft, 1);
      }
      break;
    }
    case "submit":
      void trySubmit();
      return; // trySubmit renders
  }
  render();
}

// ── Rendering ───────────────────────────────────────

function render(): void {
  const root = document.getElementById("app")!;
  root.innerHTML = "";
  if (!app) return;
  if (!app.image) {
    root.appendChild(renderDone());
    return;
  }
  root.appendChild(renderHeader());
  if (app.banner) root.appendChild(renderBanner(app.banner));
  root.appendChild(
    el(
      "main",
      { className: "panes" },
      renderImagePane(app.image),
      renderChecklist(),
    ),
  );
}

function renderLogin(problem?: string): void {
  const root = document.getElementById("app")!;
  root.innerHTML = "";
  const input = el("input", {
    type: "text",
    id: "annotator-input",
    placeholder: "annotator id",
    autofocus: true,
  }) as HTMLInputElement;
  const start = (e: Event) => {
    e.preventDefault();
    const value = input.value.trim();
    if (value) void startSession(value);
  };
  root.appendChild(
    el(
      "form",
      { className: "login", onsubmit: start },
      el("h1", {}, "Artifact annotation"),
      el(
        "p",
        { className: "muted" },
        "Enter your annotator id to load your queue.",
      ),
      problem ? el("p", { className: "problem" }, problem) : null,
      input,
      el("button", { type: "submit" }, "Start"),
    ),
  );
  input.focus();
}

function renderHeader(): HTMLElement {
  const a = app!;
  const { done, total } = a.session.progress;
  return el(
    "header",
    {},
    el("h1", {}, a.session.artifact.display_name),
    el(
      "div",
      { className: "session-meta" },
      el("span", {}, `annotator ${a.annotator}`),
      el("span", { className: "progress" }, `${done} / ${total} images`),
      a.draft.dirty
        ? el("span", { className: "unsaved" }, "unsaved changes")
        : null,
    ),
  );
}

function renderBanner(banner: Banner): HTMLElement {
  switch (banner.kind) {
    case "issues":
      return el(
        "div",
        { className: "banner error" },
        el("strong", {}, "The service rejected the record:"),
        el(
          "ul",
          {},
          ...banner.issues.map((issue) => el("li", {}, issue)),
        ),
        el("p", { className: "muted" }, "Your entries are unchanged."),
      );
    case "duplicate":
      return el(
        "div",
        { className: "banner warn" },
        el("span", {}, banner.text),
        el(
          "button",
          { onclick: () => void trySubmit(true) },
          "Replace existing annotation",
        ),
      );
    case "retry":
      return el(
        "div",
        { className: "banner error" },
        el("span", {}, `Request failed: ${banner.text}`),
        el(
          "button",
          { onclick: () => void trySubmit() },
          "Retry",
        ),
        el("p", { className: "muted" }, "Your entries are unchanged."),
      );
    default:
      return el("div", { className: `banner ${banner.kind}` }, banner.text);
  }
}

function renderImagePane(image: NextImage): HTMLElement {
  return el(
    "section",
    { className: "image-pane" },
    el("img", { src: image.url, alt: image.image_id }),
    el("p", { className: "muted small" }, image.image_id),
  );
}

function renderChecklist(): HTMLElement {
  const a = app!;
  const form = el("section", { className: "checklist" });
  const missing = new Set(missingKeys(a.refs, a.draft));
  for (const theme of a.session.rubric.themes) {
    const block = el("div", { className: "theme" });
    block.appendChild(el("h2", {}, theme.id));
    // the theme's value statement stays visible; it frames how its
    // criteria are meant to be read
    block.appendChild(el("p", { className: "theme-desc" }, theme.description));
    for (const criterion of theme.criteria) {
      const ref = a.refs.find(
        (r) => r.themeId === theme.id && r.criterionId === criterion.id,
      )!;
      block.appendChild(renderCriterion(ref, missing));
    }
    form.appendChild(block);
  }
  form.appendChild(renderRating());
  form.appendChild(renderSubmitRow(missing.size));
  return form;
}

function renderCriterion(
  ref: CriterionRef,
  missing: Set<string>,
): HTMLElement {
  const a = app!;
  const value = a.draft.values.get(ref.key);
  const selected = a.refs[a.draft.selected]?.key === ref.key;
  const flagged = a.highlightMissing && missing.has(ref.key);
  const row = el("div", {
    className:
      "criterion" +
      (selected ? " selected" : "") +
      (flagged ? " missing" : ""),
    onclick: () => {
      selectIndex(a.refs, a.draft, ref.ordinal - 1);
      render();
    },
  });
  row.appendChild(el("span", { className: "ordinal" }, String(ref.ordinal)));
  const body = el("div", { className: "criterion-body" });
  body.appendChild(el("p", {}, ref.text));
  if (ref.note) body.appendChild(el("p", { className: "muted small" }, ref.note));
  body.appendChild(
    el(
      "div",
      { className: "tri-state" },
      stateButton(ref, "met", "Met", value),
      stateButton(ref, "not_met", "Not met", value),
      stateButton(ref, "not_visible", `Not visible (${NOT_VISIBLE_HINT})`, value),
    ),
  );
  row.appendChild(body);
  return row;
}

function stateButton(
  ref: CriterionRef,
  value: JudgmentValue,
  label: string,
  current: JudgmentValue | undefined,
): HTMLElement {
  return el(
    "button",
    {
      type: "button",
      className: "state" + (current === value ? " active" : ""),
      onclick: (e) => {
        e.stopPropagation();
        const a = app!;
        selectIndex(a.refs, a.draft, ref.ordinal - 1);
        setJudgment(a.draft, ref.key, value);
        render();
      },
    },
    label,
  );
}

function renderRating(): HTMLElement {
  const a = app!;
  const scale = a.session.rating_scales[RATING_SCALE] ?? [];
  const row = el(
    "div",
    { className: "rating" },
    el("span", {}, "Overall rating (optional, 1 = inappropriate):"),
  );
  for (const value of scale) {
    row.appendChild(
      el(
        "button",
        {
          type: "button",
          className: "state" + (a.draft.rating === value ? " active" : ""),
          onclick: () => {
            setRating(a.draft, a.draft.rating === value ? null : value);
            render();
          },
        },
        String(value),
      ),
    );
  }
  return row;
}

function renderSubmitRow(missingCount: number): HTMLElement {
  const a = app!;
  const blocked = missingCount > 0;
  return el(
    "div",
    { className: "submit-row" },
    el(
      "button",
      {
        className: "submit" + (blocked ? " blocked" : ""),
        disabled: a.busy,
        onclick: () => void trySubmit(),
      },
      a.busy ? "Saving..." : "Submit and next (Enter)",
    ),
    blocked
      ? el(
          "span",
          { className: "muted small" },
          `${missingCount} criteria still unset`,
        )
      : null,
    el(
      "span",
      { className: "muted small hints" },
      "keys: 1-9 select, y/n/v set, Enter submits",
    ),
  );
}

function renderDone(): HTMLElement {
  const a = app!;
  const { done, total } = a.session.progress;
  return el(
    "div",
    { className: "done" },
    el("h1", {}, "Queue complete"),
    el("p", {}, `${done} / ${total} images annotated (100%).`),
    el(
      "p",
      { className: "muted" },
      "You can close this tab; every annotation is stored.",
    ),
  );
}

// ── Wiring ──────────────────────────────────────────

document.addEventListener("keydown", onKeydown);
window.addEventListener("beforeunload", (event) => {
  if (app?.draft.dirty) event.preventDefault();
});
void boot();
