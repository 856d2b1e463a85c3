"""LLM rubric generation and lexical rubric comparison.

Generates a single-theme baseline rubric from a text-only LLM and
compares rubrics structurally. The comparison is lexical (normalized
exact or substring matching); deciding whether two differently worded
criteria mean the same thing is expert work and stays out of scope, and
every rendered report says so up front.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import ContractError, RubricParseError, RubricValidationError
from .judge import JudgeConfig
from .rubric import Criterion, Rubric, Theme, content_hash, validate_rubric

SYSTEM_PROMPT = (
    "You are a helpful and precise assistant that can create binary "
    "evaluation criteria to evaluate images of cultural artifacts. Your "
    "task is to generate evaluation criteria for assessing whether an "
    "image contains a culturally appropriate depiction of an object. Each "
    "criterion should be a statement in which you would answer true/false. "
    "The criteria should describe the most important visual "
    "characteristics that should be present or absent in a correct "
    "depiction of the object. The criteria should not be in the form of a "
    "one sentence statement, not a question. You should return your final "
    "answer as a valid JSON object."
)

USER_PROMPT_PREFIX = "Create evaluation criteria for the given prompt instruction:"

GENERATED_THEME_DESCRIPTION = "LLM-generated criteria"


def build_rubricgen_prompts(generation_prompt: str) -> tuple[str, str]:
    """(system text, user text) for one rubric-generation call."""
    if not generation_prompt.strip():
        raise ContractError("generation_prompt must be non-empty")
    return SYSTEM_PROMPT, f'{USER_PROMPT_PREFIX}\n"{generation_prompt}"'


def _first_json_value(text: str):
    decoder = json.JSONDecoder()
    starts = sorted(
        [m.start() for m in re.finditer(r"[\[{]", text)],
    )
    for start in starts:
        try:
            value, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            continue
        if isinstance(value, (dict, list)):
            return value
    raise RubricParseError("no JSON value found in LLM response")


_TEXT_FIELDS = ("criterion", "text", "description", "statement")
_LIST_FIELDS = ("criteria", "evaluation_criteria", "rubric")


def _collect_texts(value) -> list[str]:
    texts: list[str] = []
    if isinstance(value, list):
        for item in value:
            if isinstance(item, str):
                texts.append(item)
            elif isinstance(item, dict):
                for field in _TEXT_FIELDS:
                    if isinstance(item.get(field), str):
                        texts.append(item[field])
                        break
    elif isinstance(value, dict):
        for field in _LIST_FIELDS:
            if field in value and isinstance(value[field], (list, dict)):
                return _collect_texts(value[field])
        for key in value:  # keyed criteria like {"C1": "...", "C2": "..."}
            if isinstance(value[key], str):
                texts.append(value[key])
    return [t.strip() for t in texts if t.strip()]


def parse_generated_rubric(raw: str, artifact_id: str) -> Rubric:
    """A single-theme rubric from an LLM response, criteria renumbered C1..Cn."""
    texts = _collect_texts(_first_json_value(raw))
    if not texts:
        raise RubricParseError("response contained no parseable criteria")
    rubric = Rubric(
        rubric_id=f"{artifact_id}_llm",
        artifact_id=artifact_id,
        version="1.0",
        themes=(
            Theme(
                id="Theme1",
                description=GENERATED_THEME_DESCRIPTION,
                criteria=tuple(
                    Criterion(id=f"C{i}", text=text)
                    for i, text in enumerate(texts, start=1)
                ),
            ),
        ),
    )
    issues = validate_rubric(rubric)
    if issues:
        raise RubricValidationError(issues)
    return rubric


def generate_rubric(
    generation_prompt: str, artifact_id: str, config: JudgeConfig, client
) -> Rubric:
    """One LLM call (client.complete) parsed into a rubric."""
    system_text, user_text = build_rubricgen_prompts(generation_prompt)
    raw = client.complete(system_text, user_text, config)
    return parse_generated_rubric(raw, artifact_id)


# Lexical diff


def normalize_text(text: str) -> str:
    """Lowercase, punctuation stripped to spaces, whitespace collapsed."""
    return re.sub(r"\s+", " ", re.sub(r"[^\w\s]", " ", text.lower())).strip()


def texts_match(a: str, b: str) -> str | None:
    """Match kind ("equal" | "substring") or None."""
    na, nb = normalize_text(a), normalize_text(b)
    if na == nb:
        return "equal"
    if na and nb and (na in nb or nb in na):
        return "substring"
    return None


@dataclass(frozen=True)
class MatchedPair:
    left_key: str
    left_text: str
    right_key: str
    right_text: str
    kind: str


@dataclass(frozen=True)
class UnmatchedCriterion:
    key: str
    text: str


@dataclass(frozen=True)
class RubricDiff:
    left_id: str
    right_id: str
    left_hash: str
    right_hash: str
    left_theme_count: int
    right_theme_count: int
    left_criterion_count: int
    right_criterion_count: int
    matched: tuple[MatchedPair, ...]
    unmatched_left: tuple[UnmatchedCriterion, ...]
    unmatched_right: tuple[UnmatchedCriterion, ...]


def _flat_criteria(rubric: Rubric) -> list[tuple[str, str]]:
    return [(str(key), rubric.criterion(key).text) for key in rubric.criterion_keys()]


def diff_rubrics(left: Rubric, right: Rubric) -> RubricDiff:
    """Greedy in-order one-to-one lexical matching; leftovers listed per side."""
    left_items = _flat_criteria(left)
    right_items = _flat_criteria(right)
    matched = []
    used_right: set[int] = set()
    matched_left: set[int] = set()
    for i, (left_key, left_text) in enumerate(left_items):
        for j, (right_key, right_text) in enumerate(right_items):
            if j in used_right:
                continue
            kind = texts_match(left_text, right_text)
            if kind is not None:
                matched.append(
                    MatchedPair(left_key, left_text, right_key, right_text, kind)
                )
                used_right.add(j)
                matched_left.add(i)
                break
    return RubricDiff(
        left_id=left.rubric_id,
        right_id=right.rubric_id,
        left_hash=content_hash(left),
        right_hash=content_hash(right),
        left_theme_count=len(left.themes),
        right_theme_count=len(right.themes),
        left_criterion_count=len(left_items),
        right_criterion_count=len(right_items),
        matched=tuple(matched),
        unmatched_left=tuple(
            UnmatchedCriterion(k, t)
            for i, (k, t) in enumerate(left_items)
            if i not in matched_left
        ),
        unmatched_right=tuple(
            UnmatchedCriterion(k, t)
            for j, (k, t) in enumerate(right_items)
            if j not in used_right
        ),
    )


DIFF_LIMITATION_NOTE = (
    "Lexical comparison only: criteria match when their normalized texts "
    "are equal or one contains the other. Differently worded criteria with "
    "the same meaning will not match; semantic alignment needs expert review."
)


def diff_to_dict(diff: RubricDiff) -> dict:
    return {
        "note": DIFF_LIMITATION_NOTE,
        "left": {
            "rubric_id": diff.left_id,
            "content_hash": diff.left_hash,
            "themes": diff.left_theme_count,
            "criteria": diff.left_criterion_count,
        },
        "right": {
            "rubric_id": diff.right_id,
            "content_hash": diff.right_hash,
            "themes": diff.right_theme_count,
            "criteria": diff.right_criterion_count,
        },
        "matched": [
            {
                "left_key": p.left_key,
                "left_text": p.left_text,
                "right_key": p.right_key,
                "right_text": p.right_text,
                "kind": p.kind,
            }
            for p in diff.matched
        ],
        "unmatched_left": [
            {"key": u.key, "text": u.text} for u in diff.unmatched_left
        ],
        "unmatched_right": [
            {"key": u.key, "text": u.text} for u in diff.unmatched_right
        ],
    }


def render_diff_report(diff: RubricDiff) -> str:
    """Human-readable side-by-side listing with the limitation stated first."""
    lines = [
        f"Rubric diff: {diff.left_id} (left) vs {diff.right_id} (right)",
        DIFF_LIMITATION_NOTE,
        "",
        f"left: {diff.left_criterion_count} criteria in {diff.left_theme_count} themes"
        f" | right: {diff.right_criterion_count} criteria in"
        f" {diff.right_theme_count} themes",
        "",
        f"Matched ({len(diff.matched)}):",
    ]
    for pair in diff.matched:
        lines.append(
            f"  {pair.left_key} ~ {pair.right_key} [{pair.kind}]"
        )
        lines.append(f"    left:  {pair.left_text}")
        lines.append(f"    right: {pair.right_text}")
    lines.append("")
    lines.append(f"Only in left ({len(diff.unmatched_left)}):")
    for item in diff.unmatched_left:
        lines.append(f"  {item.key}: {item.text}")
    lines.append("")
    lines.append(f"Only in right ({len(diff.unmatched_right)}):")
    for item in diff.unmatched_right:
        lines.append(f"  {item.key}: {item.text}")
    return "\n".join(lines) + "\n"
