// Thin typed client for the annotation service. Only the documented
// /api/v1/ endpoints are used; fetch is injectable for tests.

import type {
  AnnotationPost,
  HolisticPost,
  NextImage,
  Progress,
  Session,
  SubmitResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

// Submission failures are expected states the UI renders inline, so the
// client returns them as values instead of throwing.
export type SubmitOutcome =
  | { kind: "created"; result: SubmitResult }
  | { kind: "duplicate"; message: string }
  | { kind: "invalid"; issues: string[] }
  | { kind: "error"; message: string };

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
  ) {}

  private url(path: string, annotator?: string): string {
    const suffix =
      annotator === undefined
        ? ""
        : `?annotator=${encodeURIComponent(annotator)}`;
    return `${this.baseUrl}${path}${suffix}`;
  }

  private async getJson<T>(path: string, annotator: string): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.url(path, annotator));
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (!res.ok) {
      throw new ApiError(`${path} failed (${res.status})`, res.status);
    }
    return (await res.json()) as T;
  }

  session(annotator: string): Promise<Session> {
    return this.getJson<Session>("/api/v1/session", annotator);
  }

  progress(annotator: string): Promise<Progress> {
    return this.getJson<Progress>("/api/v1/progress", annotator);
  }

  // null means the queue is complete (204)
  async nextImage(annotator: string): Promise<NextImage | null> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.url("/api/v1/images/next", annotator));
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (res.status === 204) return null;
    if (!res.ok) {
      throw new ApiError(`/api/v1/images/next failed (${res.status})`, res.status);
    }
    return (await res.json()) as NextImage;
  }

  async submit(record: AnnotationPost | HolisticPost): Promise<SubmitOutcome> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.url("/api/v1/annotations"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(record),
      });
    } catch (err) {
      return { kind: "error", message: `service unreachable: ${String(err)}` };
    }
    if (res.status === 201) {
      return { kind: "created", result: (await res.json()) as SubmitResult };
    }
    let payload: Record<string, unknown> = {};
    try {
      payload = (await res.json()) as Record<string, unknown>;
    } catch {
      // non-JSON error body; fall through with the status alone
    }
    if (res.status === 409) {
      return {
        kind: "duplicate",
        message: String(payload.message ?? "annotation already exists"),
      };
    }
    if (res.status === 422) {
      const issues = Array.isArray(payload.issues)
        ? payload.issues.map(String)
        : ["record rejected"];
      return { kind: "invalid", issues };
    }
    return {
      kind: "error",
      message: String(payload.message ?? `submit failed (${res.status})`),
    };
  }
}
