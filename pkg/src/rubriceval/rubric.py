"""Rubric model: themes of binary criteria and the all-criteria-met aggregation.

A rubric is an ordered list of themes, each an ordered list of binary
criteria. An image counts as appropriate (label 1) only when every
criterion across every theme is met; a single miss makes it 0. Theme and
criterion order in the source file is authoritative and preserved
everywhere downstream (prompts, JSON keys, reports).
"""

from __future__ import annotations

import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, NamedTuple, Union

from .errors import ContractError, RubricParseError, RubricValidationError

SCHEMA_VERSION = 1

_THEME_ID_RE = re.compile(r"^Theme([1-9][0-9]*)$")
_CRITERION_ID_RE = re.compile(r"^C([1-9][0-9]*)$")


class CriterionKey(NamedTuple):
    """Addresses one criterion inside a rubric, e.g. ('Theme1', 'C3')."""

    theme_id: str
    criterion_id: str

    def __str__(self) -> str:
        return f"{self.theme_id}/{self.criterion_id}"


@dataclass(frozen=True)
class Criterion:
    id: str
    text: str
    # A conditional pass clause carried verbatim inside the criterion text
    # (e.g. "If no oarsmen are present, consider the criteria as met.").
    # Recorded separately for tooling; the harness never evaluates it.
    vacuous_note: str | None = None


@dataclass(frozen=True)
class Theme:
    id: str
    description: str
    criteria: tuple[Criterion, ...]


@dataclass(frozen=True)
class Rubric:
    rubric_id: str
    artifact_id: str
    version: str
    themes: tuple[Theme, ...]
    schema_version: int = SCHEMA_VERSION

    def criterion_keys(self) -> list[CriterionKey]:
        """All criterion keys in rubric order."""
        return [
            CriterionKey(t.id, c.id) for t in self.themes for c in t.criteria
        ]

    def criterion(self, key: CriterionKey) -> Criterion:
        for t in self.themes:
            if t.id == key.theme_id:
                for c in t.criteria:
                    if c.id == key.criterion_id:
                        return c
        raise KeyError(str(key))

    @property
    def criterion_count(self) -> int:
        return sum(len(t.criteria) for t in self.themes)


@dataclass(frozen=True)
class Issue:
    """One validation finding, located by a theme/criterion path."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}" if self.path else self.message


def validate_rubric(rubric: Rubric) -> list[Issue]:
    """Check every structural invariant; empty list means the rubric is valid.

    Issues are data, not errors: callers that must reject invalid rubrics
    (load_rubric does) raise RubricValidationError with this list.
    """
    issues: list[Issue] = []
    if not rubric.rubric_id:
        issues.append(Issue("", "rubric_id is empty"))
    if not rubric.artifact_id:
        issues.append(Issue("", "artifact_id is empty"))
    if not isinstance(rubric.schema_version, int):
        issues.append(Issue("", "schema_version must be an integer"))
    if not rubric.themes:
        issues.append(Issue("", "no themes"))
        return issues

    seen_theme_ids = set()
    for t_index, theme in enumerate(rubric.themes, start=1):
        path = theme.id or f"themes[{t_index - 1}]"
        m = _THEME_ID_RE.match(theme.id)
        if not m:
            issues.append(Issue(path, f"theme id {theme.id!r} does not match Theme<n>"))
        elif int(m.group(1)) != t_index:
            issues.append(
                Issue(path, f"non-consecutive theme ids: expected Theme{t_index}")
            )
        if theme.id in seen_theme_ids:
            issues.append(Issue(path, f"duplicate theme id {theme.id!r}"))
        seen_theme_ids.add(theme.id)
        if not theme.description.strip():
            issues.append(Issue(path, "theme description is empty"))
        if not theme.criteria:
            issues.append(Issue(path, "theme has no criteria"))
            continue
        seen_criterion_ids = set()
        for c_index, criterion in enumerate(theme.criteria, start=1):
            c_path = f"{path}/{criterion.id or f'criteria[{c_index - 1}]'}"
            cm = _CRITERION_ID_RE.match(criterion.id)
            if not cm:
                issues.append(
                    Issue(c_path, f"criterion id {criterion.id!r} does not match C<n>")
                )
            elif int(cm.group(1)) != c_index:
                issues.append(
                    Issue(c_path, f"non-consecutive criterion ids: expected C{c_index}")
                )
            if criterion.id in seen_criterion_ids:
                issues.append(Issue(c_path, f"duplicate criterion id {criterion.id!r}"))
            seen_criterion_ids.add(criterion.id)
            if not criterion.text.strip():
                issues.append(Issue(c_path, "criterion text is empty"))
    return issues


def _parse_criterion(obj, path: str) -> Criterion:
    if not isinstance(obj, dict):
        raise RubricParseError(f"{path}: criterion must be an object")
    return Criterion(
        id=str(obj.get("id", "")),
        text=str(obj.get("text", "")),
        vacuous_note=obj.get("vacuous_note"),
    )


def _parse_theme(obj, path: str) -> Theme:
    if not isinstance(obj, dict):
        raise RubricParseError(f"{path}: theme must be an object")
    raw_criteria = obj.get("criteria", [])
    if not isinstance(raw_criteria, list):
        raise RubricParseError(f"{path}: criteria must be a list")
    criteria = tuple(
        _parse_criterion(c, f"{path}/criteria[{i}]") for i, c in enumerate(raw_criteria)
    )
    return Theme(
        id=str(obj.get("id", "")),
        description=str(obj.get("description", "")),
        criteria=criteria,
    )


Source = Union[str, bytes, IO[bytes], IO[str], "io.IOBase"]


def load_rubric(source: Source) -> Rubric:
    """Parse and validate a rubric document (JSON text, bytes, or stream).

    Raises RubricParseError on malformed syntax (message carries the
    location json reports) and RubricValidationError when any structural
    invariant fails.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise RubricParseError(
            f"malformed rubric JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(obj, dict):
        raise RubricParseError("rubric document must be a JSON object")
    raw_themes = obj.get("themes", [])
    if not isinstance(raw_themes, list):
        raise RubricParseError("themes must be a list")
    rubric = Rubric(
        rubric_id=str(obj.get("rubric_id", "")),
        artifact_id=str(obj.get("artifact_id", "")),
        version=str(obj.get("version", "")),
        schema_version=obj.get("schema_version", SCHEMA_VERSION),
        themes=tuple(
            _parse_theme(t, f"themes[{i}]") for i, t in enumerate(raw_themes)
        ),
    )
    issues = validate_rubric(rubric)
    if issues:
        raise RubricValidationError(issues)
    return rubric


def rubric_to_dict(rubric: Rubric) -> dict:
    doc: dict = {
        "rubric_id": rubric.rubric_id,
        "artifact_id": rubric.artifact_id,
        "version": rubric.version,
        "schema_version": rubric.schema_version,
        "themes": [],
    }
    for theme in rubric.themes:
        t: dict = {
            "id": theme.id,
            "description": theme.description,
            "criteria": [],
        }
        for criterion in theme.criteria:
            c: dict = {"id": criterion.id, "text": criterion.text}
            if criterion.vacuous_note is not None:
                c["vacuous_note"] = criterion.vacuous_note
            t["criteria"].append(c)
        doc["themes"].append(t)
    return doc


def serialize_rubric(rubric: Rubric) -> str:
    """Canonical JSON text; load_rubric(serialize_rubric(r)) == r."""
    return json.dumps(rubric_to_dict(rubric), ensure_ascii=False, indent=2) + "\n"


def content_hash(rubric: Rubric) -> str:
    """SHA-256 over the canonical serialization; stable under reserialization."""
    canonical = json.dumps(
        rubric_to_dict(rubric), ensure_ascii=False, separators=(",", ":"), sort_keys=True
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _as_binary(value, key: CriterionKey) -> int:
    if isinstance(value, bool):
        return int(value)
    if value in (0, 1):
        return int(value)
    raise ContractError(f"label for {key} must be 0 or 1, got {value!r}")


def aggregate(labels: Mapping[CriterionKey, int], rubric: Rubric) -> int:
    """Conjunction over all criteria: 1 iff every label is 1.

    The label map must contain exactly one binary entry per criterion of
    the rubric; any mismatch is a contract error listing the difference.
    """
    expected = set(rubric.criterion_keys())
    if not expected:
        raise ContractError("rubric has no criteria; aggregate is undefined")
    got = set(labels)
    if got != expected:
        missing = sorted(str(k) for k in expected - got)
        extra = sorted(str(k) for k in got - expected)
        parts = []
        if missing:
            parts.append("missing: " + ", ".join(missing))
        if extra:
            parts.append("extra: " + ", ".join(extra))
        raise ContractError("label keys do not match rubric criteria (" + "; ".join(parts) + ")")
    return min(_as_binary(labels[k], k) for k in expected)


class RubricPack:
    """An immutable collection of rubrics, addressable by id and content hash."""

    def __init__(self, rubrics: Iterable[Rubric]):
        self._by_id: dict[str, Rubric] = {}
        self._by_hash: dict[str, Rubric] = {}
        for r in rubrics:
            if r.rubric_id in self._by_id:
                raise ContractError(f"duplicate rubric_id {r.rubric_id!r} in pack")
            self._by_id[r.rubric_id] = r
            self._by_hash[content_hash(r)] = r

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def ids(self) -> list[str]:
        return list(self._by_id)

    def get(self, rubric_id: str) -> Rubric:
        try:
            return self._by_id[rubric_id]
        except KeyError:
            raise KeyError(f"no rubric {rubric_id!r} in pack (have: {', '.join(self._by_id)})")

    def by_hash(self, digest: str) -> Rubric | None:
        return self._by_hash.get(digest)
