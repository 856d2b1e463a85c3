"""Deterministic rendering of analysis results into tables and series.

Emits CSV, markdown pipe tables, or structured JSON for each supported
target shape. Numbers are rounded half away from zero at a configurable
decimal count; empty cells render as the literal N/A in text formats and
null in the structured format. Figures are emitted as data series, not
raster images.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from math import floor

from .analytics import AgreementReport, ModelBreakdown
from .errors import ContractError
from .rubric import Rubric

FORMATS = ("csv", "markdown", "structured")
TARGETS = (
    "table1",
    "table4",
    "table5",
    "table6",
    "per_criterion",
    "histogram",
    "violation_bars",
)

NA = "N/A"


@dataclass(frozen=True)
class RenderSpec:
    format: str
    target: str
    decimals: int = 2

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ContractError(f"unknown format {self.format!r}; expected {FORMATS}")
        if self.target not in TARGETS:
            raise ContractError(f"unknown target {self.target!r}; expected {TARGETS}")
        if self.decimals < 0:
            raise ContractError("decimals must be >= 0")


def _exact(value) -> Fraction:
    """Numbers as exact fractions; floats read as their decimal rendering.

    JSON numbers are decimal text, so a float like 0.3 means 3/10 here,
    not its binary approximation.
    """
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def round_half_away(value, decimals: int = 2) -> str:
    """Fixed-point decimal string, ties rounded away from zero."""
    scaled = _exact(value) * 10**decimals
    if scaled >= 0:
        n = floor(scaled + Fraction(1, 2))
    else:
        n = -floor(-scaled + Fraction(1, 2))
    if decimals == 0:
        return str(n)
    q = 10**decimals
    sign = "-" if n < 0 else ""
    return f"{sign}{abs(n) // q}.{abs(n) % q:0{decimals}d}"


def rounded_float(value, decimals: int = 2) -> float:
    return float(round_half_away(value, decimals))


def _cell(value, decimals: int):
    if value is None:
        return None
    if isinstance(value, str):
        return value
    return round_half_away(value, decimals)


# Target shapes: each builder returns (headers, rows) where a row is a
# list of str-or-None cells. None renders as N/A (text) or null (structured).


def _require(data: dict, key: str, target: str):
    if not isinstance(data, dict) or key not in data:
        raise ContractError(f"{target} data must carry {key!r}")
    return data[key]


AGREEMENT_COLUMNS = (
    "human_appropriate",
    "mllm_appropriate",
    "agreement_overall",
    "agreement_appropriate",
    "agreement_inappropriate",
)

AGREEMENT_FIELDS = (
    "reference_base_rate",
    "prediction_base_rate",
    "overall",
    "pos",
    "neg",
)


def _agreement_cells(row: dict, decimals: int) -> list:
    return [_cell(row.get(field), decimals) for field in AGREEMENT_FIELDS]


def _table1(data: dict, decimals: int):
    rows = _require(data, "rows", "table1")
    headers = ["artifact", *AGREEMENT_COLUMNS]
    body = [
        [str(_require(row, "label", "table1 row")), *_agreement_cells(row, decimals)]
        for row in rows
    ]
    return headers, body


def _table4(data: dict, decimals: int):
    rows = _require(data, "rows", "table4")
    headers = [
        "artifact",
        "n_images",
        "agreement",
        "contested_fraction",
        "community_base_rate",
        "measure_base_rate",
    ]
    body = []
    for row in rows:
        body.append(
            [
                str(_require(row, "label", "table4 row")),
                _cell(row.get("n_images"), 0),
                _cell(row.get("agreement"), decimals),
                _cell(row.get("contested_fraction"), decimals),
                _cell(row.get("community_base_rate"), decimals),
                _cell(row.get("measure_base_rate"), decimals),
            ]
        )
    return headers, body


def _table5(data: dict, decimals: int):
    rows = _require(data, "rows", "table5")
    headers = ["artifact", "annotator_agreement"]
    body = [
        [
            str(_require(row, "label", "table5 row")),
            _cell(row.get("agreement"), decimals),
        ]
        for row in rows
    ]
    return headers, body


def _table6(data: dict, decimals: int):
    columns = _require(data, "columns", "table6")
    rows = _require(data, "rows", "table6")
    headers = ["artifact", *columns, "total_appropriate"]
    body = []
    for row in rows:
        values = row.get("values", {})
        body.append(
            [
                str(_require(row, "label", "table6 row")),
                *[_cell(values.get(column), decimals) for column in columns],
                _cell(row.get("total"), decimals),
            ]
        )
    return headers, body


def _short_key(key: str) -> str:
    # "Theme1/C2" -> "T1, C2"
    theme, _, criterion = key.partition("/")
    return f"T{theme.removeprefix('Theme')}, {criterion}"


def _per_criterion(data: dict, decimals: int):
    rows = _require(data, "rows", "per_criterion")
    final = data.get("final")
    headers = ["criterion", "description", *AGREEMENT_COLUMNS]
    body = []
    if final is not None:
        body.append(["Final label", "", *_agreement_cells(final, decimals)])
    for row in rows:
        body.append(
            [
                _short_key(str(_require(row, "key", "per_criterion row"))),
                str(row.get("description", "")),
                *_agreement_cells(row, decimals),
            ]
        )
    return headers, body


def _histogram_target(data: dict, decimals: int):
    values = _require(data, "values", "histogram")
    width = data.get("bin_width", Fraction(1, 10))
    bins = histogram(values, width)
    headers = ["bin", "count"]
    body = []
    for lower, upper, closed, count in bins:
        bracket = "]" if closed else ")"
        label = (
            f"[{round_half_away(lower, decimals)}, "
            f"{round_half_away(upper, decimals)}{bracket}"
        )
        body.append([label, str(count)])
    return headers, body


def _violation_bars(data: dict, decimals: int):
    models = _require(data, "models", "violation_bars")
    headers = ["model_id", "criterion", "violation_frequency"]
    body = []
    for model in models:
        model_id = str(_require(model, "model_id", "violation_bars model"))
        for point in _require(model, "series", "violation_bars model"):
            body.append(
                [
                    model_id,
                    _short_key(str(_require(point, "key", "violation_bars point"))),
                    _cell(point.get("frequency"), decimals),
                ]
            )
    return headers, body


_BUILDERS = {
    "table1": _table1,
    "table4": _table4,
    "table5": _table5,
    "table6": _table6,
    "per_criterion": _per_criterion,
    "histogram": _histogram_target,
    "violation_bars": _violation_bars,
}


def render(data: dict, spec: RenderSpec) -> bytes:
    """Deterministic bytes for one (data, spec) pair."""
    headers, body = _BUILDERS[spec.target](data, spec.decimals)
    if spec.format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(headers)
        for row in body:
            writer.writerow([NA if cell is None else cell for cell in row])
        return out.getvalue().encode("utf-8")
    if spec.format == "markdown":
        lines = [
            "| " + " | ".join(headers) + " |",
            "| " + " | ".join("---" for _ in headers) + " |",
        ]
        for row in body:
            cells = [NA if cell is None else str(cell) for cell in row]
            lines.append("| " + " | ".join(cells) + " |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    doc = {
        "target": spec.target,
        "headers": headers,
        "rows": [
            {header: cell for header, cell in zip(headers, row)} for row in body
        ],
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


# Histograms (left-closed bins, last bin closed at 1)


def histogram(values, width=Fraction(1, 10)):
    """Ordered (lower, upper, closed_right, count) bins over [0, 1]."""
    width = _exact(width)
    if width <= 0 or width > 1:
        raise ContractError("bin width must be in (0, 1]")
    nbins_exact = Fraction(1) / width
    if nbins_exact.denominator != 1:
        raise ContractError("bin width must divide 1 evenly")
    nbins = int(nbins_exact)
    counts = [0] * nbins
    for value in values:
        v = _exact(value)
        if v < 0 or v > 1:
            raise ContractError(f"histogram value {value!r} outside [0, 1]")
        index = min(int(v / width), nbins - 1)
        counts[index] += 1
    return [
        (i * width, (i + 1) * width, i == nbins - 1, counts[i])
        for i in range(nbins)
    ]


# Adapters from analytics objects to target shapes


def agreement_row(label: str, report: AgreementReport) -> dict:
    return {
        "label": label,
        "reference_base_rate": report.reference_base_rate,
        "prediction_base_rate": report.prediction_base_rate,
        "overall": report.overall.agreement,
        "pos": report.pos.agreement,
        "neg": report.neg.agreement,
    }


def table1_data(entries: list[tuple[str, AgreementReport]]) -> dict:
    return {"rows": [agreement_row(label, report) for label, report in entries]}


def per_criterion_data(report: AgreementReport, rubric: Rubric) -> dict:
    rows = []
    for key in rubric.criterion_keys():
        row = report.per_criterion[key]
        rows.append(
            {
                "key": str(key),
                "description": rubric.criterion(key).text,
                "reference_base_rate": row.reference_base_rate,
                "prediction_base_rate": row.prediction_base_rate,
                "overall": row.overall.agreement,
                "pos": row.pos.agreement,
                "neg": row.neg.agreement,
            }
        )
    return {
        "artifact": report.artifact_id,
        "final": {
            "reference_base_rate": report.reference_base_rate,
            "prediction_base_rate": report.prediction_base_rate,
            "overall": report.overall.agreement,
            "pos": report.pos.agreement,
            "neg": report.neg.agreement,
        },
        "rows": rows,
    }


def violation_bars_data(breakdown: ModelBreakdown, rubric: Rubric) -> dict:
    keys = rubric.criterion_keys()
    models = []
    for model_id in sorted(breakdown.models):
        row = breakdown.models[model_id]
        series = [
            {"key": str(key), "frequency": row.violations.get(key, Fraction(0))}
            for key in keys
        ]
        models.append({"model_id": model_id, "series": series})
    return {"models": models}
