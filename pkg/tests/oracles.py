"""Brute-force reference implementations used to check analytics.

Everything here is written as plain counting loops over plain dicts, with
fractions.Fraction arithmetic, and shares no code with the package beyond
key types. Slow and obvious on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction


def o_binarize(rating, scale):
    if scale == "three_point":
        return {1: 0, 2: 1, 3: 1}[rating]
    if scale == "two_point":
        return {1: 0, 2: 1}[rating]
    raise ValueError(scale)


def o_majority(labels):
    ones = sum(1 for v in labels if v == 1)
    zeros = sum(1 for v in labels if v == 0)
    if ones > zeros:
        return 1
    return 0


def o_resolve_judgments(judgments):
    """Map met/not_visible -> 1, not_met -> 0."""
    out = {}
    for key, value in judgments.items():
        if value == "not_met":
            out[key] = 0
        else:
            out[key] = 1
    return out


def o_conjunction(labels_map):
    for v in labels_map.values():
        if v == 0:
            return 0
    return 1


def o_cell(pairs):
    """(n, agreement Fraction or None) over (pred, ref) pairs."""
    n = 0
    hits = 0
    for pred, ref in pairs:
        n += 1
        if pred == ref:
            hits += 1
    if n == 0:
        return (0, None)
    return (n, Fraction(hits, n))


def o_disaggregate(pairs):
    pairs = list(pairs)
    pos = [(p, r) for p, r in pairs if r == 1]
    neg = [(p, r) for p, r in pairs if r == 0]
    return {
        "overall": o_cell(pairs),
        "pos": o_cell(pos),
        "neg": o_cell(neg),
    }


def o_mean(values):
    values = list(values)
    if not values:
        return None
    total = Fraction(0)
    for v in values:
        total += Fraction(v)
    return total / len(values)


def o_contested(multisets):
    n = 0
    split = 0
    for labels in multisets:
        n += 1
        if 0 in labels and 1 in labels:
            split += 1
    return Fraction(split, n)


def o_histogram(values, width):
    nbins = int(Fraction(1) / Fraction(width))
    counts = [0] * nbins
    for v in values:
        idx = int(Fraction(v) / Fraction(width))
        if idx >= nbins:  # value exactly 1.0 joins the last (closed) bin
            idx = nbins - 1
        counts[idx] += 1
    return counts


@dataclass
class OracleInstance:
    """Raw material for one randomized agreement-report check.

    keys: criterion keys in rubric order.
    images: image ids in order.
    ref: image -> annotator -> key -> judgment string.
    pred: image -> seed index -> key -> 0/1. An image absent from pred (or
        with no seeds) has no verdicts and must be excluded.
    model_of: image -> model id (optional, for breakdown checks).
    """

    keys: list
    images: list
    ref: dict
    pred: dict
    model_of: dict = field(default_factory=dict)


def o_reference_labels(inst):
    """Per-criterion majority over annotators (tie -> 0), then conjunction."""
    out = {}
    for image in inst.images:
        annotators = inst.ref[image]
        criteria = {}
        for key in inst.keys:
            votes = []
            for ann in sorted(annotators):
                judgments = annotators[ann]
                votes.append(0 if judgments[key] == "not_met" else 1)
            criteria[key] = o_majority(votes)
        out[image] = {"criteria": criteria, "overall": o_conjunction(criteria)}
    return out


def o_pred_majority_labels(inst, image):
    """Per-criterion majority across seeds (tie -> 0), then conjunction."""
    seeds = inst.pred[image]
    criteria = {}
    for key in inst.keys:
        votes = [seeds[s][key] for s in sorted(seeds)]
        criteria[key] = o_majority(votes)
    return {"criteria": criteria, "overall": o_conjunction(criteria)}


def o_agreement_report(inst, reduction):
    """Full expected report content, as nested plain values.

    mean mode compares every (image, seed) verdict against the image's
    reference label, so each successful call counts once; majority mode
    compares one consensus verdict per image.
    """
    refs = o_reference_labels(inst)
    included = [img for img in inst.images if inst.pred.get(img)]
    excluded = [img for img in inst.images if not inst.pred.get(img)]

    overall_pairs = []
    per_key_pairs = {key: [] for key in inst.keys}
    if reduction == "mean":
        for image in included:
            for seed in sorted(inst.pred[image]):
                verdict = inst.pred[image][seed]
                overall_pairs.append(
                    (o_conjunction(verdict), refs[image]["overall"])
                )
                for key in inst.keys:
                    per_key_pairs[key].append(
                        (verdict[key], refs[image]["criteria"][key])
                    )
    elif reduction == "majority":
        for image in included:
            consensus = o_pred_majority_labels(inst, image)
            overall_pairs.append((consensus["overall"], refs[image]["overall"]))
            for key in inst.keys:
                per_key_pairs[key].append(
                    (consensus["criteria"][key], refs[image]["criteria"][key])
                )
    else:
        raise ValueError(reduction)

    report = {
        "n_images": len(included),
        "exclusions": len(excluded),
        "reference_base_rate": o_mean(r for _, r in overall_pairs),
        "prediction_base_rate": o_mean(p for p, _ in overall_pairs),
    }
    report.update(o_disaggregate(overall_pairs))
    report["per_criterion"] = {}
    for key in inst.keys:
        pairs = per_key_pairs[key]
        row = {
            "reference_base_rate": o_mean(r for _, r in pairs),
            "prediction_base_rate": o_mean(p for p, _ in pairs),
        }
        row.update(o_disaggregate(pairs))
        report["per_criterion"][key] = row
    return report


def o_model_breakdown(entries, keys):
    """entries: list of (model_id, criteria map key -> 0/1)."""
    by_model = {}
    for model_id, criteria in entries:
        by_model.setdefault(model_id, []).append(criteria)
    out = {}
    for model_id in sorted(by_model):
        images = by_model[model_id]
        n = len(images)
        appropriate = sum(o_conjunction(c) for c in images)
        violations = {}
        for key in keys:
            violated = sum(1 for c in images if c[key] == 0)
            violations[key] = Fraction(violated, n)
        out[model_id] = {
            "n": n,
            "appropriate_fraction": Fraction(appropriate, n),
            "violations": violations,
        }
    return out


def o_workshop(rubric_labels, ratings_by_image):
    """rubric_labels: image -> 0/1; ratings_by_image: image -> [(rating, scale)].

    Ratings binarize per their scale; per-image majority with tie -> 0.
    """
    images = sorted(rubric_labels)
    community = {}
    binarized = {}
    for image in images:
        labels = [o_binarize(r, s) for r, s in ratings_by_image[image]]
        binarized[image] = labels
        community[image] = o_majority(labels)
    pairs = [(rubric_labels[img], community[img]) for img in images]
    return {
        "n_images": len(images),
        "agreement": o_cell(pairs)[1],
        "contested_fraction": o_contested([binarized[img] for img in images]),
        "community_base_rate": o_mean(community[img] for img in images),
        "measure_base_rate": o_mean(rubric_labels[img] for img in images),
    }
