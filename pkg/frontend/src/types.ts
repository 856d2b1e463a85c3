// Wire types for the /api/v1/ endpoints. Field names mirror the JSON
// the service sends and the store accepts; see docs/formats.md in the
// parent package.

export type JudgmentValue = "met" | "not_met" | "not_visible";

export interface CriterionView {
  id: string;
  text: string;
  vacuous_note: string | null;
}

export interface ThemeView {
  id: string;
  description: string;
  criteria: CriterionView[];
}

export interface RubricView {
  rubric_id: string;
  artifact_id: string;
  version: string;
  content_hash: string;
  themes: ThemeView[];
}

export interface Session {
  annotator_id: string;
  artifact: { artifact_id: string; display_name: string };
  rubric: RubricView;
  rating_scales: Record<string, number[]>;
  progress: { done: number; total: number };
}

export interface NextImage {
  image_id: string;
  url: string;
}

export interface Progress {
  annotator_id: string;
  done: number;
  total: number;
}

export interface AnnotationPost {
  kind: "criterion_annotation";
  source: { kind: "human"; annotator_id: string };
  image_id: string;
  rubric: { rubric_id: string; version: string; content_hash: string };
  judgments: Record<string, Record<string, JudgmentValue>>;
  overwrite?: boolean;
}

export interface HolisticPost {
  kind: "holistic_rating";
  source: { kind: "human"; annotator_id: string };
  image_id: string;
  rubric: { rubric_id: string; version: string; content_hash: string };
  rating: number;
  rating_scale: string;
  overwrite?: boolean;
}

export interface SubmitResult {
  record_id: string;
  image_id: string;
}
