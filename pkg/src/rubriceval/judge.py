"""Judge prompting, verdict parsing, seed runs, and consensus.

The judge receives one image plus a rubric rendered into a fixed prompt
template and must answer with a JSON verdict: per-criterion 0/1 values
nested by theme under "criteria_evaluation", plus an "overall_assessment".
The overall value the model reports is retained, but the authoritative
overall is recomputed as the conjunction of the criteria; a mismatch is
flagged, not rejected.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import os
import uuid
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Protocol, Sequence

from .annotations import AnnotationRecord, KIND_CRITERION, SourceRef, now_timestamp
from .errors import (
    ContractError,
    TransportError,
    VerdictParseError,
    VerdictSchemaError,
    VerdictValueError,
)
from .httpclient import HttpJsonClient
from .rubric import CriterionKey, Rubric, aggregate, content_hash, validate_rubric


@dataclass(frozen=True)
class JudgeConfig:
    model_id: str
    endpoint: str = ""
    temperature: float = 1.0
    n_seeds: int = 5
    max_retries_per_call: int = 3
    request_timeout: float = 60.0
    parallelism: int = 1

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ContractError("n_seeds must be >= 1")
        if self.temperature < 0:
            raise ContractError("temperature must be >= 0")
        if self.max_retries_per_call < 0:
            raise ContractError("max_retries_per_call must be >= 0")


@dataclass(frozen=True)
class PromptBundle:
    text: str
    image_ref: str
    rubric_hash: str


@dataclass(frozen=True)
class RawVerdict:
    raw_text: str
    parse_status: str  # ok | parse_error | schema_error | value_error


@dataclass(frozen=True)
class JudgeVerdict:
    image_id: str
    rubric_id: str
    rubric_version: str
    rubric_hash: str
    seed_index: int
    criteria: dict[CriterionKey, int]
    overall_reported: int
    overall_computed: int
    consistent: bool
    raw_ref: str | None = None


PROMPT_TEMPLATE = """You are an expert at assessing whether AI-generated images of a {artifact} meet a set of evaluation criteria.

You will be provided with:

1) An image generated from the prompt "{generation_prompt}".
2) A set of evaluation criteria, grouped by theme where each theme includes a description that should inform your interpretation of the criteria within that theme.

Evaluation Criteria

{criteria_section}

Your Task

Determine whether the image meets each criterion, based on:

1) The generated image
2) The text prompt.
3) Your understanding of a {artifact}.
4) The description of the criteria, and the theme it belongs to.

For each criterion, respond with:

1 if the image meets the criterion.

0 if the image does not meet the criterion.

Return your evaluation as a valid JSON object with the following structure:

{skeleton}

The "overall_assessment" should be 1 ONLY if all criteria across all themes are met (i.e., all values are 1); otherwise, it should be 0.

Ensure the JSON is properly formatted and valid.
"""


def _criteria_section(rubric: Rubric) -> str:
    blocks: list[str] = []
    for theme in rubric.themes:
        blocks.append(theme.id)
        blocks.append(theme.description)
        for criterion in theme.criteria:
            blocks.append(f"{criterion.id}: {criterion.text}")
    return "\n\n".join(blocks)


def _json_skeleton(rubric: Rubric) -> str:
    lines = ["{", '  "criteria_evaluation": {']
    for t_index, theme in enumerate(rubric.themes):
        lines.append(f'    "{theme.id}": {{')
        for c_index, criterion in enumerate(theme.criteria):
            comma = "," if c_index < len(theme.criteria) - 1 else ""
            lines.append(f'      "{criterion.id}": 1 or 0{comma}')
        comma = "," if t_index < len(rubric.themes) - 1 else ""
        lines.append(f"    }}{comma}")
    lines.append("  },")
    lines.append('  "overall_assessment": 1 or 0')
    lines.append("}")
    return "\n".join(lines)


def build_judge_prompt(
    rubric: Rubric, artifact_name: str, generation_prompt: str, image_ref: str = ""
) -> PromptBundle:
    """Render the judge prompt for one rubric; deterministic per input."""
    issues = validate_rubric(rubric)
    if issues:
        raise ContractError(
            "cannot build a judge prompt from an invalid rubric: "
            + "; ".join(str(i) for i in issues)
        )
    if not artifact_name.strip():
        raise ContractError("artifact_name is empty")
    if not generation_prompt.strip():
        raise ContractError("generation_prompt is empty")
    text = PROMPT_TEMPLATE.format(
        artifact=artifact_name,
        generation_prompt=generation_prompt,
        criteria_section=_criteria_section(rubric),
        skeleton=_json_skeleton(rubric),
    )
    return PromptBundle(text=text, image_ref=image_ref, rubric_hash=content_hash(rubric))


def extract_json_object(text: str) -> dict:
    """The first parseable JSON object in text, skipping prose and fences."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    raise VerdictParseError("no JSON object found in judge response")


def _coerce_binary(value, where: str) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int) and value in (0, 1):
        return value
    raise VerdictValueError(f"{where} must be 0 or 1, got {value!r}")


def parse_verdict(
    raw: str,
    rubric: Rubric,
    image_id: str = "",
    seed_index: int = 0,
    raw_ref: str | None = None,
) -> JudgeVerdict:
    """Parse one judge response; raises the matching verdict error class.

    Surrounding prose and markdown code fences are tolerated: the first
    parseable JSON object in the response is used.
    """
    doc = extract_json_object(raw)
    missing = [k for k in ("criteria_evaluation", "overall_assessment") if k not in doc]
    if missing:
        raise VerdictSchemaError(f"verdict missing keys: {', '.join(missing)}")
    evaluation = doc["criteria_evaluation"]
    if not isinstance(evaluation, dict):
        raise VerdictSchemaError("criteria_evaluation must be an object")

    expected_themes = [t.id for t in rubric.themes]
    got_themes = list(evaluation)
    if set(got_themes) != set(expected_themes):
        extra = sorted(set(got_themes) - set(expected_themes))
        absent = sorted(set(expected_themes) - set(got_themes))
        parts = []
        if absent:
            parts.append("missing themes: " + ", ".join(absent))
        if extra:
            parts.append("unknown themes: " + ", ".join(extra))
        raise VerdictSchemaError("; ".join(parts))

    criteria: dict[CriterionKey, int] = {}
    for theme in rubric.themes:
        theme_doc = evaluation[theme.id]
        if not isinstance(theme_doc, dict):
            raise VerdictSchemaError(f"{theme.id} must be an object")
        expected = [c.id for c in theme.criteria]
        if set(theme_doc) != set(expected):
            extra = sorted(set(theme_doc) - set(expected))
            absent = sorted(set(expected) - set(theme_doc))
            parts = []
            if absent:
                parts.append(f"{theme.id} missing criteria: " + ", ".join(absent))
            if extra:
                parts.append(f"{theme.id} unknown criteria: " + ", ".join(extra))
            raise VerdictSchemaError("; ".join(parts))
        for criterion in theme.criteria:
            criteria[CriterionKey(theme.id, criterion.id)] = _coerce_binary(
                theme_doc[criterion.id], f"{theme.id}/{criterion.id}"
            )

    overall_reported = _coerce_binary(doc["overall_assessment"], "overall_assessment")
    overall_computed = aggregate(criteria, rubric)
    return JudgeVerdict(
        image_id=image_id,
        rubric_id=rubric.rubric_id,
        rubric_version=rubric.version,
        rubric_hash=content_hash(rubric),
        seed_index=seed_index,
        criteria=criteria,
        overall_reported=overall_reported,
        overall_computed=overall_computed,
        consistent=overall_reported == overall_computed,
        raw_ref=raw_ref,
    )


def serialize_verdict(verdict: JudgeVerdict, rubric: Rubric) -> str:
    """The judge-response-shaped JSON for a verdict; parse_verdict inverts it."""
    evaluation: dict[str, dict[str, int]] = {}
    for theme in rubric.themes:
        evaluation[theme.id] = {
            c.id: verdict.criteria[CriterionKey(theme.id, c.id)] for c in theme.criteria
        }
    return json.dumps(
        {"criteria_evaluation": evaluation, "overall_assessment": verdict.overall_reported},
        indent=2,
    )


class JudgeClient(Protocol):
    def evaluate(
        self, prompt: PromptBundle, image: "ImagePayload", config: JudgeConfig, seed_index: int
    ) -> str:
        """Returns the raw model response text; raises TransportError on failure."""
        ...


@dataclass(frozen=True)
class ImagePayload:
    """Image content for one judge call: bytes to embed, or a remote URL."""

    image_id: str
    data: bytes | None = None
    url: str | None = None
    media_type: str = "image/png"

    def __post_init__(self):
        if (self.data is None) == (self.url is None):
            raise ContractError("image payload needs exactly one of data or url")


class HttpJudgeClient:
    """Chat-completions-style judge transport.

    Sends one user message carrying the prompt text and the image (base64
    data URL or remote URL); reads the first choice's message content.
    The API key comes from the JUDGE_API_KEY environment variable unless a
    key is passed explicitly.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        api_key_env: str = "JUDGE_API_KEY",
        http: HttpJsonClient | None = None,
    ):
        self.endpoint = endpoint
        key = api_key if api_key is not None else os.environ.get(api_key_env, "")
        self.http = http if http is not None else HttpJsonClient()
        if key:
            self.http.headers.setdefault("Authorization", f"Bearer {key}")

    def evaluate(
        self, prompt: PromptBundle, image: ImagePayload, config: JudgeConfig, seed_index: int = 0
    ) -> str:
        if image.url is not None:
            image_url = image.url
        else:
            encoded = base64.b64encode(image.data).decode("ascii")
            image_url = f"data:{image.media_type};base64,{encoded}"
        payload = {
            "model": config.model_id,
            "temperature": config.temperature,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt.text},
                        {"type": "image_url", "image_url": {"url": image_url}},
                    ],
                }
            ],
        }
        body = self.http.post_json(self.endpoint, payload)
        return self._message_content(body)

    def complete(self, system_text: str, user_text: str, config: JudgeConfig) -> str:
        """Text-only completion over the same transport (no image part)."""
        payload = {
            "model": config.model_id,
            "temperature": config.temperature,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
        }
        body = self.http.post_json(self.endpoint, payload)
        return self._message_content(body)

    @staticmethod
    def _message_content(body: dict) -> str:
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"judge response missing message content: {exc}")


class MockJudgeClient:
    """Replays scripted responses for offline runs and tests.

    Script: JSONL, one entry per line with fields
      image_id: exact id or "*" for any image
      seed_index: optional; omitted matches any seed
      responses: list of raw response texts consumed per attempt (the last
        entry repeats once exhausted); or response: a single text
      transport_error: optional true to raise TransportError for attempts
        consumed from `responses` whose value is null
    """

    def __init__(self, script_path: str | os.PathLike):
        self._entries: list[dict] = []
        with open(script_path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ContractError(f"mock script line {line_no}: {exc}")
                if "responses" not in entry and "response" not in entry:
                    raise ContractError(
                        f"mock script line {line_no}: needs response or responses"
                    )
                entry["_attempts"] = 0
                self._entries.append(entry)
        self.calls: list[tuple[str, int]] = []

    def _find(self, image_id: str, seed_index: int) -> dict:
        def matches(entry, require_seed):
            if entry["image_id"] not in (image_id, "*"):
                return False
            if require_seed:
                return entry.get("seed_index") == seed_index
            return "seed_index" not in entry

        for require_seed in (True, False):
            for entry in self._entries:
                if matches(entry, require_seed):
                    return entry
        raise TransportError(
            f"mock judge script has no entry for image {image_id!r} seed {seed_index}"
        )

    def evaluate(
        self, prompt: PromptBundle, image: ImagePayload, config: JudgeConfig, seed_index: int = 0
    ) -> str:
        entry = self._find(image.image_id, seed_index)
        responses = entry.get("responses")
        if responses is None:
            responses = [entry["response"]]
        index = min(entry["_attempts"], len(responses) - 1)
        entry["_attempts"] += 1
        value = responses[index]
        self.calls.append((image.image_id, seed_index))
        if value is None:
            raise TransportError("scripted transport failure")
        return value


@dataclass
class SeedFailure:
    seed_index: int
    attempts: int
    reason: str


@dataclass
class RetryEvent:
    seed_index: int
    attempt: int
    reason: str


@dataclass
class JudgeRunResult:
    image_id: str
    verdicts: list[JudgeVerdict]
    failures: list[SeedFailure]
    retries: list[RetryEvent]

    @property
    def judge_failed(self) -> bool:
        return not self.verdicts


RawSink = Callable[[str, int, int, str, str], str]
"""(image_id, seed_index, attempt, status, raw_text) -> archive reference."""


def judge_image(
    image: ImagePayload,
    rubric: Rubric,
    config: JudgeConfig,
    client: JudgeClient,
    artifact_name: str,
    generation_prompt: str,
    seed_indices: Sequence[int] | None = None,
    raw_sink: RawSink | None = None,
) -> JudgeRunResult:
    """Run the judge across seeds with bounded retries per call.

    A "seed" is one independent stochastic call; its index is recorded.
    Each seed makes up to 1 + max_retries_per_call attempts, retrying on
    transport failures and on malformed verdicts. A seed that never yields
    a parseable verdict is logged as a failure; an image whose seeds all
    fail is judge_failed and must be excluded (and counted) downstream.
    """
    prompt = build_judge_prompt(
        rubric, artifact_name, generation_prompt, image_ref=image.image_id
    )
    if seed_indices is None:
        seed_indices = range(config.n_seeds)
    verdicts: list[JudgeVerdict] = []
    failures: list[SeedFailure] = []
    retries: list[RetryEvent] = []
    for seed_index in seed_indices:
        attempts = 0
        last_reason = ""
        verdict = None
        while attempts < 1 + config.max_retries_per_call:
            attempts += 1
            try:
                raw = client.evaluate(prompt, image, config, seed_index)
            except TransportError as exc:
                last_reason = f"transport: {exc}"
                if raw_sink is not None:
                    raw_sink(image.image_id, seed_index, attempts, "transport_error", "")
                retries.append(RetryEvent(seed_index, attempts, last_reason))
                continue
            raw_ref = None
            try:
                verdict = parse_verdict(
                    raw, rubric, image_id=image.image_id, seed_index=seed_index
                )
                status = "ok"
            except (VerdictParseError, VerdictSchemaError, VerdictValueError) as exc:
                status = {
                    VerdictParseError: "parse_error",
                    VerdictSchemaError: "schema_error",
                    VerdictValueError: "value_error",
                }[type(exc)]
                last_reason = f"{status}: {exc}"
            if raw_sink is not None:
                raw_ref = raw_sink(image.image_id, seed_index, attempts, status, raw)
            if verdict is not None:
                if raw_ref is not None:
                    verdict = dataclasses.replace(verdict, raw_ref=raw_ref)
                verdicts.append(verdict)
                break
            retries.append(RetryEvent(seed_index, attempts, last_reason))
        if verdict is None:
            failures.append(SeedFailure(seed_index, attempts, last_reason))
    return JudgeRunResult(
        image_id=image.image_id, verdicts=verdicts, failures=failures, retries=retries
    )


@dataclass(frozen=True)
class ConsensusVerdict:
    image_id: str
    rubric_hash: str
    n_seeds: int
    fractions: dict[CriterionKey, Fraction]
    majority: dict[CriterionKey, int]
    overall: int


def consensus_verdict(verdicts: Sequence[JudgeVerdict], rubric: Rubric) -> ConsensusVerdict:
    """Per-criterion met-fraction and strict-majority labels over seeds.

    A criterion's majority label is 1 only when its met-fraction exceeds
    one half; an exact tie resolves to 0. The overall label is the
    conjunction of the majorities.
    """
    if not verdicts:
        raise ContractError("consensus over zero verdicts is undefined")
    hashes = {v.rubric_hash for v in verdicts}
    if len(hashes) != 1:
        raise ContractError("verdicts reference different rubric hashes")
    if hashes != {content_hash(rubric)}:
        raise ContractError("verdicts reference a different rubric than provided")
    images = {v.image_id for v in verdicts}
    if len(images) != 1:
        raise ContractError(f"verdicts span multiple images: {sorted(images)}")
    keys = rubric.criterion_keys()
    fractions: dict[CriterionKey, Fraction] = {}
    majority: dict[CriterionKey, int] = {}
    for key in keys:
        values = [v.criteria[key] for v in verdicts]
        fraction = Fraction(sum(values), len(values))
        fractions[key] = fraction
        majority[key] = 1 if fraction > Fraction(1, 2) else 0
    return ConsensusVerdict(
        image_id=verdicts[0].image_id,
        rubric_hash=verdicts[0].rubric_hash,
        n_seeds=len(verdicts),
        fractions=fractions,
        majority=majority,
        overall=min(majority.values()),
    )


def verdict_to_record(
    verdict: JudgeVerdict, model_id: str, run_id: str | None = None
) -> AnnotationRecord:
    """Persistable store record for one seed verdict (met/not_met only)."""
    judgments = {
        key: ("met" if value == 1 else "not_met")
        for key, value in verdict.criteria.items()
    }
    return AnnotationRecord(
        record_id=uuid.uuid4().hex,
        kind=KIND_CRITERION,
        source=SourceRef.mllm(model_id=model_id, seed_index=verdict.seed_index, run_id=run_id),
        image_id=verdict.image_id,
        rubric_id=verdict.rubric_id,
        rubric_version=verdict.rubric_version,
        rubric_hash=verdict.rubric_hash,
        judgments=judgments,
        raw_ref=verdict.raw_ref,
        timestamp=now_timestamp(),
    )


class RawArchive:
    """Append-only JSONL archive of raw judge responses for audit."""

    def __init__(self, path: str | os.PathLike, run_id: str | None = None):
        self.path = os.fspath(path)
        self.run_id = run_id

    def sink(self, image_id: str, seed_index: int, attempt: int, status: str, raw_text: str) -> str:
        entry_id = uuid.uuid4().hex
        entry = {
            "entry_id": entry_id,
            "image_id": image_id,
            "seed_index": seed_index,
            "attempt": attempt,
            "status": status,
            "raw_text": raw_text,
            "timestamp": now_timestamp(),
        }
        if self.run_id:
            entry["run_id"] = self.run_id
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
        return f"raw:{entry_id}"
