"""Annotation records, rating rules, and the append-only JSONL store.

Records come from two kinds of sources (human annotators and judge model
runs) and two kinds of content (per-criterion judgments and image-level
holistic ratings). Raw inputs are preserved: ratings are binarized and
not_visible judgments resolved only at analysis time, never at capture.

Label rules:
  - binarize_rating: three_point 1 -> 0, 2 -> 1, 3 -> 1; two_point 1 -> 0, 2 -> 1
  - majority_label: 1 iff strict majority of 1s; exact tie -> 0
  - resolve: met -> 1, not_met -> 0, not_visible -> 1 (default-pass),
    overall = conjunction over criteria
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import uuid
from dataclasses import dataclass, field, replace
from typing import IO, Callable, Iterable, Iterator, Mapping, Sequence

from .errors import ContractError, DuplicateRecordError, RecordValidationError
from .rubric import CriterionKey, Rubric, RubricPack, aggregate, content_hash

MET = "met"
NOT_MET = "not_met"
NOT_VISIBLE = "not_visible"
JUDGMENT_VALUES = (MET, NOT_MET, NOT_VISIBLE)

KIND_CRITERION = "criterion_annotation"
KIND_HOLISTIC = "holistic_rating"
RECORD_KINDS = (KIND_CRITERION, KIND_HOLISTIC)

RATING_SCALES: dict[str, tuple[int, ...]] = {
    "two_point": (1, 2),
    "three_point": (1, 2, 3),
}


def binarize_rating(rating: int, scale: str) -> int:
    """Map a raw rating to the binary appropriate (1) / inappropriate (0)."""
    try:
        valid = RATING_SCALES[scale]
    except KeyError:
        raise ContractError(
            f"unknown rating scale {scale!r} (have: {', '.join(RATING_SCALES)})"
        )
    if rating not in valid:
        raise ContractError(f"rating {rating!r} out of range for {scale} scale {valid}")
    return 0 if rating == 1 else 1


def majority_label(labels: Sequence[int]) -> int:
    """Strict-majority vote over binary labels; an exact tie yields 0."""
    if not labels:
        raise ContractError("majority_label over an empty list is undefined")
    ones = 0
    for value in labels:
        if value not in (0, 1):
            raise ContractError(f"labels must be 0 or 1, got {value!r}")
        ones += value
    return 1 if ones * 2 > len(labels) else 0


@dataclass(frozen=True)
class SourceRef:
    """Identifies who produced a record: a human annotator or a judge run."""

    kind: str  # "human" | "mllm"
    annotator_id: str | None = None
    model_id: str | None = None
    seed_index: int | None = None
    run_id: str | None = None

    @staticmethod
    def human(annotator_id: str) -> "SourceRef":
        return SourceRef(kind="human", annotator_id=annotator_id)

    @staticmethod
    def mllm(model_id: str, seed_index: int, run_id: str | None = None) -> "SourceRef":
        return SourceRef(kind="mllm", model_id=model_id, seed_index=seed_index, run_id=run_id)

    def identity(self) -> tuple:
        if self.kind == "human":
            return ("human", self.annotator_id)
        return ("mllm", self.model_id, self.seed_index)


@dataclass(frozen=True)
class AnnotationRecord:
    record_id: str
    kind: str
    source: SourceRef
    image_id: str
    rubric_id: str
    rubric_version: str
    rubric_hash: str
    judgments: dict[CriterionKey, str] | None = None
    holistic_rating: int | None = None
    rating_scale: str | None = None
    raw_ref: str | None = None
    timestamp: str = ""
    overwrite: bool = False


@dataclass(frozen=True)
class ResolvedLabels:
    image_id: str
    source: SourceRef
    criteria: dict[CriterionKey, int]
    overall: int


def now_timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def new_record_id() -> str:
    return uuid.uuid4().hex


def resolve(rec: AnnotationRecord, rubric: Rubric) -> ResolvedLabels:
    """Turn stored judgments into binary labels under the default-pass rule."""
    if rec.kind != KIND_CRITERION or rec.judgments is None:
        raise ContractError("resolve requires a criterion_annotation record")
    if rec.rubric_hash != content_hash(rubric):
        raise ContractError(
            f"record {rec.record_id} references rubric hash {rec.rubric_hash[:12]}..., "
            f"not the provided rubric"
        )
    criteria: dict[CriterionKey, int] = {}
    for key, value in rec.judgments.items():
        if value not in JUDGMENT_VALUES:
            raise ContractError(f"judgment {key} has invalid value {value!r}")
        criteria[key] = 0 if value == NOT_MET else 1
    return ResolvedLabels(
        image_id=rec.image_id,
        source=rec.source,
        criteria=criteria,
        overall=aggregate(criteria, rubric),
    )


def validate_record(rec: AnnotationRecord, rubric: Rubric | None) -> list[str]:
    """All invariant violations for one record; empty list means valid.

    rubric is the one matching rec.rubric_hash, or None when the hash is
    unknown to the caller's pack (itself a violation).
    """
    problems: list[str] = []
    if rec.kind not in RECORD_KINDS:
        problems.append(f"unknown record kind {rec.kind!r}")
    if not rec.record_id:
        problems.append("record_id is empty")
    if not rec.image_id:
        problems.append("image_id is empty")
    if rec.source.kind == "human":
        if not rec.source.annotator_id:
            problems.append("human source requires annotator_id")
    elif rec.source.kind == "mllm":
        if not rec.source.model_id:
            problems.append("mllm source requires model_id")
        if rec.source.seed_index is None or rec.source.seed_index < 0:
            problems.append("mllm source requires a seed_index >= 0")
    else:
        problems.append(f"unknown source kind {rec.source.kind!r}")

    if rubric is None:
        problems.append(f"unknown rubric hash {rec.rubric_hash!r}")
    if rec.kind == KIND_CRITERION:
        if rec.holistic_rating is not None:
            problems.append("criterion_annotation must not carry holistic_rating")
        if rec.judgments is None:
            problems.append("criterion_annotation requires judgments")
        else:
            for key, value in rec.judgments.items():
                if value not in JUDGMENT_VALUES:
                    problems.append(f"judgment {key} has invalid value {value!r}")
                elif value == NOT_VISIBLE and rec.source.kind == "mllm":
                    problems.append(f"mllm judgment {key} may not be not_visible")
            if rubric is not None:
                expected = set(rubric.criterion_keys())
                got = set(rec.judgments)
                if got != expected:
                    missing = sorted(str(k) for k in expected - got)
                    extra = sorted(str(k) for k in got - expected)
                    if missing:
                        problems.append("judgments missing keys: " + ", ".join(missing))
                    if extra:
                        problems.append("judgments have unknown keys: " + ", ".join(extra))
    elif rec.kind == KIND_HOLISTIC:
        if rec.judgments is not None:
            problems.append("holistic_rating record must not carry judgments")
        if rec.holistic_rating is None:
            problems.append("holistic_rating record requires a rating")
        elif rec.rating_scale not in RATING_SCALES:
            problems.append(f"unknown rating scale {rec.rating_scale!r}")
        elif rec.holistic_rating not in RATING_SCALES[rec.rating_scale]:
            problems.append(
                f"rating {rec.holistic_rating} out of range for {rec.rating_scale}"
            )
    return problems


# Wire form. Judgments nest by theme so files read in rubric structure:
# {"Theme1": {"C1": "met", ...}, ...}. Every field name below is part of
# the file contract (see docs/formats.md).


def record_to_dict(rec: AnnotationRecord) -> dict:
    doc: dict = {
        "kind": rec.kind,
        "record_id": rec.record_id,
        "image_id": rec.image_id,
        "rubric": {
            "rubric_id": rec.rubric_id,
            "version": rec.rubric_version,
            "content_hash": rec.rubric_hash,
        },
        "source": _source_to_dict(rec.source),
        "timestamp": rec.timestamp,
    }
    if rec.judgments is not None:
        nested: dict[str, dict[str, str]] = {}
        for key, value in rec.judgments.items():
            nested.setdefault(key.theme_id, {})[key.criterion_id] = value
        doc["judgments"] = nested
    if rec.holistic_rating is not None:
        doc["rating"] = rec.holistic_rating
        doc["rating_scale"] = rec.rating_scale
    if rec.raw_ref is not None:
        doc["raw_ref"] = rec.raw_ref
    if rec.overwrite:
        doc["overwrite"] = True
    return doc


def _source_to_dict(source: SourceRef) -> dict:
    if source.kind == "human":
        return {"kind": "human", "annotator_id": source.annotator_id}
    doc = {
        "kind": "mllm",
        "model_id": source.model_id,
        "seed_index": source.seed_index,
    }
    if source.run_id is not None:
        doc["run_id"] = source.run_id
    return doc


def _require(doc: Mapping, key: str, line_no: int | None = None):
    if key not in doc:
        where = f" at line {line_no}" if line_no is not None else ""
        raise RecordValidationError(f"record{where} missing field {key!r}")
    return doc[key]


def record_from_dict(doc: Mapping, *, require_id: bool = True) -> AnnotationRecord:
    """Parse the wire form; raises RecordValidationError on shape problems.

    With require_id=False a missing record_id/timestamp is left empty and
    filled in by the store on append (fresh submissions rather than
    round-tripped exports).
    """
    if not isinstance(doc, Mapping):
        raise RecordValidationError("record line must be a JSON object")
    kind = _require(doc, "kind")
    rubric_ref = _require(doc, "rubric")
    if not isinstance(rubric_ref, Mapping):
        raise RecordValidationError("rubric field must be an object")
    raw_source = _require(doc, "source")
    if not isinstance(raw_source, Mapping):
        raise RecordValidationError("source field must be an object")
    source_kind = str(raw_source.get("kind", ""))
    if source_kind == "human":
        source = SourceRef.human(str(raw_source.get("annotator_id", "")))
    elif source_kind == "mllm":
        seed = raw_source.get("seed_index")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise RecordValidationError("mllm source requires integer seed_index")
        source = SourceRef.mllm(
            model_id=str(raw_source.get("model_id", "")),
            seed_index=seed,
            run_id=raw_source.get("run_id"),
        )
    else:
        raise RecordValidationError(f"unknown source kind {source_kind!r}")

    judgments = None
    if "judgments" in doc:
        raw_j = doc["judgments"]
        if not isinstance(raw_j, Mapping):
            raise RecordValidationError("judgments must be an object")
        judgments = {}
        for theme_id, crits in raw_j.items():
            if not isinstance(crits, Mapping):
                raise RecordValidationError(
                    f"judgments[{theme_id!r}] must be an object of criterion values"
                )
            for criterion_id, value in crits.items():
                judgments[CriterionKey(str(theme_id), str(criterion_id))] = str(value)
    rating = doc.get("rating")
    if rating is not None and (not isinstance(rating, int) or isinstance(rating, bool)):
        raise RecordValidationError("rating must be an integer")
    if require_id:
        record_id = str(_require(doc, "record_id"))
    else:
        record_id = str(doc.get("record_id", ""))
    return AnnotationRecord(
        record_id=record_id,
        kind=str(kind),
        source=source,
        image_id=str(_require(doc, "image_id")),
        rubric_id=str(rubric_ref.get("rubric_id", "")),
        rubric_version=str(rubric_ref.get("version", "")),
        rubric_hash=str(rubric_ref.get("content_hash", "")),
        judgments=judgments,
        holistic_rating=rating,
        rating_scale=doc.get("rating_scale"),
        raw_ref=doc.get("raw_ref"),
        timestamp=str(doc.get("timestamp", "")),
        overwrite=bool(doc.get("overwrite", False)),
    )


@dataclass
class ImportSummary:
    imported: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def __str__(self) -> str:
        lines = [f"imported {self.imported}, rejected {len(self.rejected)}"]
        for line_no, reason in self.rejected:
            lines.append(f"  line {line_no}: {reason}")
        return "\n".join(lines)


class AnnotationStore:
    """Append-only JSONL store with write-time validation.

    Every append validates the record against the rubric its hash names.
    Human (source, image, rubric) duplicates are refused unless the new
    record carries overwrite=true; the superseded record stays in the file
    for audit and the overwriting record wins in effective_records().
    """

    def __init__(self, path: str | os.PathLike, rubrics: Iterable[Rubric] = ()):
        self.path = os.fspath(path)
        self._by_hash: dict[str, Rubric] = {content_hash(r): r for r in rubrics}
        self._records: list[AnnotationRecord] = []
        # (source identity, image, rubric hash, kind) of records on file
        self._human_seen: set[tuple] = set()
        if os.path.exists(self.path):
            self._load()

    @staticmethod
    def with_pack(path: str | os.PathLike, pack: RubricPack) -> "AnnotationStore":
        return AnnotationStore(path, list(pack))

    def add_rubric(self, rubric: Rubric) -> None:
        self._by_hash[content_hash(rubric)] = rubric

    def rubric_for(self, rubric_hash: str) -> Rubric | None:
        return self._by_hash.get(rubric_hash)

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                    rec = record_from_dict(doc, require_id=False)
                except (json.JSONDecodeError, RecordValidationError) as exc:
                    raise RecordValidationError(
                        f"{self.path} line {line_no}: {exc}"
                    ) from exc
                self._records.append(rec)
                if rec.source.kind == "human":
                    self._human_seen.add(self._dedupe_key(rec))

    @staticmethod
    def _dedupe_key(rec: AnnotationRecord) -> tuple:
        return (rec.source.identity(), rec.image_id, rec.rubric_hash, rec.kind)

    def append(self, rec: AnnotationRecord) -> AnnotationRecord:
        """Validate and persist one record; returns it with defaults filled."""
        if not rec.record_id:
            rec = replace(rec, record_id=new_record_id())
        if not rec.timestamp:
            rec = replace(rec, timestamp=now_timestamp())
        problems = validate_record(rec, self._by_hash.get(rec.rubric_hash))
        if problems:
            raise RecordValidationError("; ".join(problems))
        if rec.source.kind == "human":
            key = self._dedupe_key(rec)
            if key in self._human_seen and not rec.overwrite:
                raise DuplicateRecordError(
                    f"annotation for image {rec.image_id!r} by "
                    f"{rec.source.annotator_id!r} already exists; "
                    "set overwrite to replace it"
                )
        line = json.dumps(record_to_dict(rec), ensure_ascii=False, sort_keys=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        self._records.append(rec)
        if rec.source.kind == "human":
            self._human_seen.add(self._dedupe_key(rec))
        return rec

    def records(
        self,
        kind: str | None = None,
        source_kind: str | None = None,
        rubric_hash: str | None = None,
        image_id: str | None = None,
    ) -> list[AnnotationRecord]:
        """All records on file, in append order, optionally filtered."""
        out = []
        for rec in self._records:
            if kind is not None and rec.kind != kind:
                continue
            if source_kind is not None and rec.source.kind != source_kind:
                continue
            if rubric_hash is not None and rec.rubric_hash != rubric_hash:
                continue
            if image_id is not None and rec.image_id != image_id:
                continue
            out.append(rec)
        return out

    def effective_records(self, **filters) -> list[AnnotationRecord]:
        """records() with superseded human records dropped (last overwrite wins)."""
        latest: dict[tuple, AnnotationRecord] = {}
        order: list[tuple] = []
        for rec in self.records(**filters):
            key = self._dedupe_key(rec) if rec.source.kind == "human" else (
                rec.source.identity(), rec.image_id, rec.rubric_hash, rec.kind, rec.record_id
            )
            if key not in latest:
                order.append(key)
            latest[key] = rec
        return [latest[k] for k in order]

    def has_mllm_verdict(self, image_id: str, seed_index: int, rubric_hash: str, model_id: str) -> bool:
        for rec in self._records:
            s = rec.source
            if (
                s.kind == "mllm"
                and rec.image_id == image_id
                and s.seed_index == seed_index
                and rec.rubric_hash == rubric_hash
                and s.model_id == model_id
                and rec.kind == KIND_CRITERION
            ):
                return True
        return False

    def __len__(self) -> int:
        return len(self._records)

    def import_annotations(self, stream: IO[str] | Iterable[str]) -> ImportSummary:
        """Import records line by line; bad lines are rejected, not fatal.

        Each rejected line is reported with its number and reason; valid
        lines after a bad one still import.
        """
        summary = ImportSummary()
        for line_no, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                rec = record_from_dict(doc, require_id=False)
                self.append(rec)
            except (json.JSONDecodeError, RecordValidationError, DuplicateRecordError) as exc:
                summary.rejected.append((line_no, str(exc)))
                continue
            summary.imported += 1
        return summary

    def export_annotations(
        self, predicate: Callable[[AnnotationRecord], bool] | None = None
    ) -> Iterator[str]:
        """Lossless JSONL lines for every stored record, in append order."""
        for rec in self._records:
            if predicate is None or predicate(rec):
                yield json.dumps(record_to_dict(rec), ensure_ascii=False, sort_keys=True) + "\n"
