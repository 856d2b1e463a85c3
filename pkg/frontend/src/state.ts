// Session state for one annotator working through the image queue.
// Pure data and functions; the DOM layer renders from this and never
// invents judgments on its own.

import type {
  AnnotationPost,
  HolisticPost,
  JudgmentValue,
  RubricView,
  Session,
} from "./types.js";

// Shown next to the not_visible control: the analysis side treats an
// unassessable criterion as met, and the annotator should know that.
export const NOT_VISIBLE_HINT = "defaults to pass";

export interface CriterionRef {
  themeId: string;
  criterionId: string;
  key: string; // "Theme1/C2", matches store and report keys
  ordinal: number; // 1-based position, drives the number-key shortcuts
  text: string;
  note: string | null;
}

export function flattenCriteria(rubric: RubricView): CriterionRef[] {
  const refs: CriterionRef[] = [];
  for (const theme of rubric.themes) {
    for (const criterion of theme.criteria) {
      refs.push({
        themeId: theme.id,
        criterionId: criterion.id,
        key: `${theme.id}/${criterion.id}`,
        ordinal: refs.length + 1,
        text: criterion.text,
        note: criterion.vacuous_note,
      });
    }
  }
  return refs;
}

export interface Draft {
  imageId: string;
  values: Map<string, JudgmentValue>;
  selected: number; // index into flattenCriteria order
  rating: number | null; // optional holistic rating
  dirty: boolean; // unsaved changes
}

export function newDraft(imageId: string): Draft {
  return {
    imageId,
    values: new Map(),
    selected: 0,
    rating: null,
    dirty: false,
  };
}

export function setJudgment(
  draft: Draft,
  key: string,
  value: JudgmentValue,
): void {
  draft.values.set(key, value);
  draft.dirty = true;
}

export function setRating(draft: Draft, rating: number | null): void {
  draft.rating = rating;
  draft.dirty = true;
}

export function missingKeys(refs: CriterionRef[], draft: Draft): string[] {
  return refs.filter((ref) => !draft.values.has(ref.key)).map((ref) => ref.key);
}

export function canSubmit(refs: CriterionRef[], draft: Draft): boolean {
  return missingKeys(refs, draft).length === 0;
}

export function selectIndex(
  refs: CriterionRef[],
  draft: Draft,
  index: number,
): void {
  if (index >= 0 && index < refs.length) draft.selected = index;
}

export function selectDelta(
  refs: CriterionRef[],
  draft: Draft,
  delta: number,
): void {
  selectIndex(refs, draft, draft.selected + delta);
}

function rubricRef(session: Session) {
  return {
    rubric_id: session.rubric.rubric_id,
    version: session.rubric.version,
    content_hash: session.rubric.content_hash,
  };
}

// The posted judgment set is exactly the drafted one: every criterion
// present, values copied, nothing defaulted. Callers must check
// canSubmit first; an incomplete draft is a bug here, not a request.
export function buildAnnotation(
  session: Session,
  refs: CriterionRef[],
  draft: Draft,
  overwrite = false,
): AnnotationPost {
  const missing = missingKeys(refs, draft);
  if (missing.length > 0) {
    throw new Error(`criteria still unset: ${missing.join(", ")}`);
  }
  const judgments: Record<string, Record<string, JudgmentValue>> = {};
  for (const ref of refs) {
    const value = draft.values.get(ref.key)!;
    (judgments[ref.themeId] ??= {})[ref.criterionId] = value;
  }
  const post: AnnotationPost = {
    kind: "criterion_annotation",
    source: { kind: "human", annotator_id: session.annotator_id },
    image_id: draft.imageId,
    rubric: rubricRef(session),
    judgments,
  };
  if (overwrite) post.overwrite = true;
  return post;
}

export function buildHolistic(
  session: Session,
  draft: Draft,
  scale: string,
  overwrite = false,
): HolisticPost | null {
  if (draft.rating == null) return null;
  const allowed = session.rating_scales[scale];
  if (!allowed || !allowed.includes(draft.rating)) {
    throw new Error(`rating ${draft.rating} is not on the ${scale} scale`);
  }
  const post: HolisticPost = {
    kind: "holistic_rating",
    source: { kind: "human", annotator_id: session.annotator_id },
    image_id: draft.imageId,
    rubric: rubricRef(session),
    rating: draft.rating,
    rating_scale: scale,
  };
  if (overwrite) post.overwrite = true;
  return post;
}
