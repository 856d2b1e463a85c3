"""Agreement and validity analytics over resolved annotation labels.

All computation is exact: counts and fractions are held as
fractions.Fraction end to end, so the disaggregation identity

    overall = p * pos + (1 - p) * neg,  p = reference base rate

holds with zero tolerance whenever both strata are nonempty. Floats appear
only when reports are rendered.

Two seed-reduction modes relate multi-seed judge verdicts to one reference
label per image:
  - mean: every (image, seed) verdict is compared against the image's
    reference label, so each successful call counts once and the aggregate
    equals the per-seed metric mean whenever all images share the same
    seed coverage.
  - majority: seeds collapse first to one consensus verdict per image
    (per-criterion strict majority, tie -> 0), then images are compared.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .annotations import ResolvedLabels, binarize_rating, majority_label
from .errors import ContractError
from .rubric import CriterionKey, Rubric, content_hash

REDUCTION_MODES = ("mean", "majority")


@dataclass(frozen=True)
class AgreementCell:
    """Agreement over n compared pairs; agreement is None iff n = 0."""

    n: int
    agreement: Fraction | None

    @property
    def value(self) -> float | None:
        return None if self.agreement is None else float(self.agreement)


@dataclass(frozen=True)
class Disaggregation:
    overall: AgreementCell
    pos: AgreementCell
    neg: AgreementCell


@dataclass(frozen=True)
class CriterionRow:
    reference_base_rate: Fraction | None
    prediction_base_rate: Fraction | None
    overall: AgreementCell
    pos: AgreementCell
    neg: AgreementCell


@dataclass(frozen=True)
class AgreementReport:
    artifact_id: str
    rubric_id: str
    rubric_hash: str
    reduction: str
    n_images: int
    exclusions: int
    excluded_images: tuple[str, ...]
    seeds_used: tuple[int, ...]
    reference_base_rate: Fraction | None
    prediction_base_rate: Fraction | None
    overall: AgreementCell
    pos: AgreementCell
    neg: AgreementCell
    per_criterion: dict[CriterionKey, CriterionRow]


@dataclass(frozen=True)
class ModelRow:
    n: int
    appropriate_fraction: Fraction
    violations: dict[CriterionKey, Fraction]


@dataclass(frozen=True)
class ModelBreakdown:
    models: dict[str, ModelRow]


@dataclass(frozen=True)
class ValidationSummary:
    n_images: int
    agreement: Fraction | None
    contested_fraction: Fraction
    community_base_rate: Fraction | None
    measure_base_rate: Fraction | None


def _check_binary(labels: Iterable[int], what: str) -> list[int]:
    out = []
    for v in labels:
        if v not in (0, 1) or isinstance(v, bool):
            raise ContractError(f"{what} must be 0 or 1, got {v!r}")
        out.append(v)
    return out


def agreement(pred: Sequence[int], ref: Sequence[int]) -> AgreementCell:
    """Fraction of positions where pred equals ref; empty input -> null cell."""
    if len(pred) != len(ref):
        raise ContractError(
            f"pred and ref differ in length ({len(pred)} vs {len(ref)})"
        )
    pred = _check_binary(pred, "pred labels")
    ref = _check_binary(ref, "ref labels")
    n = len(pred)
    if n == 0:
        return AgreementCell(0, None)
    hits = sum(1 for p, r in zip(pred, ref) if p == r)
    return AgreementCell(n, Fraction(hits, n))


def disaggregate(pred: Sequence[int], ref: Sequence[int]) -> Disaggregation:
    """Agreement overall and within the strata ref = 1 / ref = 0."""
    if len(pred) != len(ref):
        raise ContractError(
            f"pred and ref differ in length ({len(pred)} vs {len(ref)})"
        )
    pos_pairs = [(p, r) for p, r in zip(pred, ref) if r == 1]
    neg_pairs = [(p, r) for p, r in zip(pred, ref) if r == 0]
    return Disaggregation(
        overall=agreement(pred, ref),
        pos=agreement([p for p, _ in pos_pairs], [r for _, r in pos_pairs]),
        neg=agreement([p for p, _ in neg_pairs], [r for _, r in neg_pairs]),
    )


def base_rate(labels: Sequence[int]) -> Fraction:
    """Mean of binary labels; the fraction labeled appropriate."""
    if len(labels) == 0:
        raise ContractError("base_rate over an empty label list is undefined")
    labels = _check_binary(labels, "labels")
    return Fraction(sum(labels), len(labels))


def contested_fraction(label_multisets: Sequence[Sequence[int]]) -> Fraction:
    """Fraction of images whose labels are not unanimous."""
    if len(label_multisets) == 0:
        raise ContractError("contested_fraction requires at least one image")
    split = 0
    for labels in label_multisets:
        if len(labels) == 0:
            raise ContractError("each image needs at least one label")
        labels = _check_binary(labels, "labels")
        if 0 in labels and 1 in labels:
            split += 1
    return Fraction(split, len(label_multisets))


def seed_reduce(values: Sequence, mode: str = "mean"):
    """Collapse per-seed values: arithmetic mean, or strict majority (tie -> 0)."""
    if len(values) == 0:
        raise ContractError("seed_reduce over an empty list is undefined")
    if mode == "mean":
        total = Fraction(0)
        for v in values:
            total += Fraction(v)
        return total / len(values)
    if mode == "majority":
        return majority_label(list(values))
    raise ContractError(f"unknown reduction mode {mode!r} (have: mean, majority)")


def interannotator(a: Sequence[int], b: Sequence[int]) -> Fraction:
    """Agreement between two annotators' final per-image labels."""
    if len(a) != len(b):
        raise ContractError(f"label vectors differ in length ({len(a)} vs {len(b)})")
    cell = agreement(a, b)
    if cell.agreement is None:
        raise ContractError("interannotator agreement over zero images is undefined")
    return cell.agreement


def reference_labels(
    records: Sequence[ResolvedLabels], rubric: Rubric
) -> dict[str, ResolvedLabels]:
    """Collapse multiple annotators into one reference label set per image.

    Per criterion: strict majority across annotators, tie -> 0. Overall is
    the conjunction of the majorities, so the overall reference row is
    derivable from the per-criterion reference rows. Each record counts as
    one vote; callers dedupe superseded records first.
    """
    keys = rubric.criterion_keys()
    by_image: dict[str, list[ResolvedLabels]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, []).append(rec)
    out: dict[str, ResolvedLabels] = {}
    for image_id, votes in by_image.items():
        criteria: dict[CriterionKey, int] = {}
        for key in keys:
            criteria[key] = majority_label([v.criteria[key] for v in votes])
        out[image_id] = ResolvedLabels(
            image_id=image_id,
            source=votes[0].source,
            criteria=criteria,
            overall=min(criteria.values()),
        )
    return out


def consensus_labels(
    verdicts: Sequence[ResolvedLabels], rubric: Rubric
) -> ResolvedLabels:
    """One consensus label set from multiple seed verdicts of one image."""
    if not verdicts:
        raise ContractError("consensus over zero verdicts is undefined")
    image_ids = {v.image_id for v in verdicts}
    if len(image_ids) != 1:
        raise ContractError(f"verdicts span multiple images: {sorted(image_ids)}")
    keys = rubric.criterion_keys()
    criteria = {
        key: majority_label([v.criteria[key] for v in verdicts]) for key in keys
    }
    return ResolvedLabels(
        image_id=verdicts[0].image_id,
        source=verdicts[0].source,
        criteria=criteria,
        overall=min(criteria.values()),
    )


def _cell_from_pairs(pairs: list[tuple[int, int]]) -> Disaggregation:
    return disaggregate([p for p, _ in pairs], [r for _, r in pairs])


def _rate(values: list[int]) -> Fraction | None:
    return None if not values else Fraction(sum(values), len(values))


def build_agreement_report(
    pred: Sequence[ResolvedLabels],
    ref: Sequence[ResolvedLabels],
    rubric: Rubric,
    reduction: str = "mean",
    artifact_id: str | None = None,
) -> AgreementReport:
    """Compare judge verdicts (pred, one per image and seed) against human
    reference labels (ref, one per image and annotator).

    Images with reference labels but no verdicts are excluded and counted;
    verdicts for images without reference labels are a contract error.
    """
    if reduction not in REDUCTION_MODES:
        raise ContractError(f"unknown reduction mode {reduction!r} (have: mean, majority)")
    keys = rubric.criterion_keys()
    refs = reference_labels(ref, rubric)

    pred_by_image: dict[str, list[ResolvedLabels]] = {}
    for v in pred:
        pred_by_image.setdefault(v.image_id, []).append(v)

    stray = sorted(set(pred_by_image) - set(refs))
    if stray:
        missing = sorted(set(refs) - set(pred_by_image))
        raise ContractError(
            "image sets do not match: verdicts without reference labels: "
            + ", ".join(stray)
            + (
                "; reference labels without verdicts: " + ", ".join(missing)
                if missing
                else ""
            )
        )

    ref_order = sorted(refs)
    included = [img for img in ref_order if pred_by_image.get(img)]
    excluded = tuple(img for img in ref_order if not pred_by_image.get(img))

    def seed_order(v: ResolvedLabels):
        return v.source.seed_index if v.source.seed_index is not None else 0

    overall_pairs: list[tuple[int, int]] = []
    per_key_pairs: dict[CriterionKey, list[tuple[int, int]]] = {k: [] for k in keys}
    seeds_used: set[int] = set()
    for image_id in included:
        verdicts = sorted(pred_by_image[image_id], key=seed_order)
        for v in verdicts:
            if v.source.seed_index is not None:
                seeds_used.add(v.source.seed_index)
        reference = refs[image_id]
        if reduction == "mean":
            compared = verdicts
        else:
            compared = [consensus_labels(verdicts, rubric)]
        for v in compared:
            overall_pairs.append((v.overall, reference.overall))
            for key in keys:
                per_key_pairs[key].append((v.criteria[key], reference.criteria[key]))

    top = _cell_from_pairs(overall_pairs)
    per_criterion: dict[CriterionKey, CriterionRow] = {}
    for key in keys:
        pairs = per_key_pairs[key]
        cells = _cell_from_pairs(pairs)
        per_criterion[key] = CriterionRow(
            reference_base_rate=_rate([r for _, r in pairs]),
            prediction_base_rate=_rate([p for p, _ in pairs]),
            overall=cells.overall,
            pos=cells.pos,
            neg=cells.neg,
        )
    return AgreementReport(
        artifact_id=artifact_id or rubric.artifact_id,
        rubric_id=rubric.rubric_id,
        rubric_hash=content_hash(rubric),
        reduction=reduction,
        n_images=len(included),
        exclusions=len(excluded),
        excluded_images=excluded,
        seeds_used=tuple(sorted(seeds_used)),
        reference_base_rate=_rate([r for _, r in overall_pairs]),
        prediction_base_rate=_rate([p for p, _ in overall_pairs]),
        overall=top.overall,
        pos=top.pos,
        neg=top.neg,
        per_criterion=per_criterion,
    )


def model_breakdown(
    labeled_images: Sequence[tuple[str, Mapping[CriterionKey, int]]],
    rubric: Rubric,
) -> ModelBreakdown:
    """Per-model appropriate fraction and per-criterion violation frequency.

    labeled_images pairs each image's model_id with its binary criteria
    labels (one consensus or single-source label set per image).
    """
    keys = rubric.criterion_keys()
    by_model: dict[str, list[Mapping[CriterionKey, int]]] = {}
    for model_id, criteria in labeled_images:
        if not model_id:
            raise ContractError("every image needs a model_id for a model breakdown")
        missing = [str(k) for k in keys if k not in criteria]
        if missing:
            raise ContractError(
                f"criteria labels missing keys: {', '.join(missing)}"
            )
        by_model.setdefault(model_id, []).append(criteria)
    models: dict[str, ModelRow] = {}
    for model_id in sorted(by_model):
        images = by_model[model_id]
        n = len(images)
        appropriate = sum(min(c[k] for k in keys) for c in images)
        violations = {
            key: Fraction(sum(1 for c in images if c[key] == 0), n) for key in keys
        }
        models[model_id] = ModelRow(
            n=n,
            appropriate_fraction=Fraction(appropriate, n),
            violations=violations,
        )
    return ModelBreakdown(models=models)


def workshop_validation(
    rubric_labels: Mapping[str, int],
    ratings: Mapping[str, Sequence[tuple[int, str]]],
) -> ValidationSummary:
    """Compare rubric-derived labels against holistic participant ratings.

    Each rating binarizes per its own scale; participants' binary labels
    majority-vote per image (tie -> 0) into the community label.
    """
    images = sorted(rubric_labels)
    if set(ratings) != set(images):
        stray = sorted(set(ratings) ^ set(images))
        raise ContractError(
            "rubric labels and ratings cover different images: " + ", ".join(stray)
        )
    community: dict[str, int] = {}
    binarized: list[list[int]] = []
    for image_id in images:
        image_ratings = ratings[image_id]
        if not image_ratings:
            raise ContractError(f"image {image_id!r} has no ratings")
        labels = [binarize_rating(r, scale) for r, scale in image_ratings]
        binarized.append(labels)
        community[image_id] = majority_label(labels)
    if not images:
        return ValidationSummary(0, None, Fraction(0), None, None)
    measure = [rubric_labels[img] for img in images]
    comm = [community[img] for img in images]
    return ValidationSummary(
        n_images=len(images),
        agreement=agreement(measure, comm).agreement,
        contested_fraction=contested_fraction(binarized),
        community_base_rate=base_rate(comm),
        measure_base_rate=base_rate(measure),
    )


def check_decomposition_identity(report: AgreementReport) -> bool:
    """True when overall = p*pos + (1-p)*neg holds exactly (both strata nonempty)."""
    if report.pos.agreement is None or report.neg.agreement is None:
        return True
    p = report.reference_base_rate
    expected = p * report.pos.agreement + (1 - p) * report.neg.agreement
    return report.overall.agreement == expected


# Structured (JSON-ready) views of the report types; rendering to tables
# lives in reporting.


def cell_to_dict(cell: AgreementCell) -> dict:
    return {
        "n": cell.n,
        "agreement": None if cell.agreement is None else float(cell.agreement),
    }


def report_to_dict(report: AgreementReport) -> dict:
    return {
        "artifact_id": report.artifact_id,
        "rubric_id": report.rubric_id,
        "rubric_hash": report.rubric_hash,
        "reduction": report.reduction,
        "n_images": report.n_images,
        "exclusions": report.exclusions,
        "excluded_images": list(report.excluded_images),
        "seeds_used": list(report.seeds_used),
        "reference_base_rate": (
            None if report.reference_base_rate is None else float(report.reference_base_rate)
        ),
        "prediction_base_rate": (
            None if report.prediction_base_rate is None else float(report.prediction_base_rate)
        ),
        "overall": cell_to_dict(report.overall),
        "pos": cell_to_dict(report.pos),
        "neg": cell_to_dict(report.neg),
        "per_criterion": {
            str(key): {
                "reference_base_rate": (
                    None if row.reference_base_rate is None else float(row.reference_base_rate)
                ),
                "prediction_base_rate": (
                    None if row.prediction_base_rate is None else float(row.prediction_base_rate)
                ),
                "overall": cell_to_dict(row.overall),
                "pos": cell_to_dict(row.pos),
                "neg": cell_to_dict(row.neg),
            }
            for key, row in report.per_criterion.items()
        },
    }


def breakdown_to_dict(breakdown: ModelBreakdown) -> dict:
    return {
        "models": {
            model_id: {
                "n": row.n,
                "appropriate_fraction": float(row.appropriate_fraction),
                "violations": {str(k): float(v) for k, v in row.violations.items()},
            }
            for model_id, row in breakdown.models.items()
        }
    }


def validation_to_dict(summary: ValidationSummary) -> dict:
    return {
        "n_images": summary.n_images,
        "agreement": None if summary.agreement is None else float(summary.agreement),
        "contested_fraction": float(summary.contested_fraction),
        "community_base_rate": (
            None if summary.community_base_rate is None else float(summary.community_base_rate)
        ),
        "measure_base_rate": (
            None if summary.measure_base_rate is None else float(summary.measure_base_rate)
        ),
    }
