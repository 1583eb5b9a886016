"""Raw score -> 0..3 norm value, SKT total and severity class.

Norm cutoffs depend on subtest, age band and IQ band. The actual published
values are not distributed with this package; tables are loaded from JSON
files, and the bundled example table is synthetic and refuses to load unless
explicitly allowed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from ._jsonio import PositionedDocument, load_json_with_positions
from .errors import ExampleNormsError, NormError
from .model import IqBand, SubjectMeta, SubtestId
from .scoring import RawScore

ALL_SUBTESTS = 9
MEMORY_SUBTESTS = frozenset({SubtestId.S2, SubtestId.S8, SubtestId.S9})
ATTENTION_SUBTESTS = frozenset({SubtestId.S1, SubtestId.S3, SubtestId.S6, SubtestId.S7})


class Severity(str, enum.Enum):
    NCI = "NCI"
    MCI = "MCI"
    MILD_DEM = "MildDem"
    MODERATE_DEM = "ModerateDem"
    SEVERE_DEM = "SevereDem"
    VERY_SEVERE_DEM = "VerySevereDem"


_BANDS = (
    (4, Severity.NCI),
    (8, Severity.MCI),
    (13, Severity.MILD_DEM),
    (18, Severity.MODERATE_DEM),
    (23, Severity.SEVERE_DEM),
    (27, Severity.VERY_SEVERE_DEM),
)


def classify_total(total: int) -> Severity:
    """Severity class of an SKT total score (0..27)."""
    if isinstance(total, bool) or int(total) != total or not 0 <= total <= 27:
        raise ValueError(f"SKT total must be an integer in 0..27, got {total!r}")
    for upper, severity in _BANDS:
        if total <= upper:
            return severity
    raise AssertionError("unreachable")


def cognitive_group(total: int) -> str:
    """NCI / MCI / DEM grouping used in subgroup reports."""
    sev = classify_total(total)
    if sev is Severity.NCI:
        return "NCI"
    if sev is Severity.MCI:
        return "MCI"
    return "DEM"


@dataclass(frozen=True)
class AgeBand:
    label: str
    min_years: int
    max_years: int

    def contains(self, age: int) -> bool:
        return self.min_years <= age <= self.max_years


@dataclass(frozen=True)
class NormTable:
    age_bands: tuple[AgeBand, ...]
    cutoffs: Mapping[tuple[SubtestId, str, IqBand], tuple[float, float, float]]
    comparison: str = "inclusive_upper"
    name: str = ""
    example: bool = False

    def age_band(self, age: int) -> AgeBand:
        for band in self.age_bands:
            if band.contains(age):
                return band
        raise NormError(f"no age band covers age {age}")

    def cell(self, subtest: SubtestId, meta: SubjectMeta) -> tuple[float, float, float]:
        band = self.age_band(meta.age_years)
        key = (subtest, band.label, meta.iq_band)
        try:
            return self.cutoffs[key]
        except KeyError:
            raise NormError(f"no norm cell for subtest {subtest.value}, age band "
                            f"{band.label}, IQ band {meta.iq_band.value}") from None


def raw_to_norm(raw: RawScore | float, meta: SubjectMeta, table: NormTable,
                subtest: SubtestId | None = None) -> int:
    """Norm value 0..3: raw <= c1 -> 0, <= c2 -> 1, <= c3 -> 2, else 3.

    With ``comparison == "exclusive_upper"`` the tests are strict (<).
    """
    if isinstance(raw, RawScore):
        subtest, value = subtest or raw.subtest, raw.value
    else:
        value = float(raw)
        if subtest is None:
            raise ValueError("subtest is required for a bare raw value")
    cuts = table.cell(subtest, meta)
    strict = table.comparison == "exclusive_upper"
    for norm, c in enumerate(cuts):
        if (value < c) if strict else (value <= c):
            return norm
    return 3


@dataclass(frozen=True)
class SktResult:
    subject_id: str
    norm_scores: Mapping[SubtestId, int]
    total: int
    severity: Severity
    partial: bool
    memory_subtotal: int
    attention_subtotal: int
    raw_scores: Mapping[SubtestId, RawScore] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "norm_scores": {k.value: v for k, v in sorted(self.norm_scores.items())},
            "total": self.total,
            "severity": self.severity.value,
            "partial": self.partial,
            "memory_subtotal": self.memory_subtotal,
            "attention_subtotal": self.attention_subtotal,
            "raw_scores": {k.value: v.to_dict() for k, v in sorted(self.raw_scores.items())},
        }


def assemble_result(subject_id: str, meta: SubjectMeta, raws: Mapping[SubtestId, RawScore],
                    table: NormTable) -> SktResult:
    if not raws:
        raise ValueError("at least one raw score is required")
    norms = {sub: raw_to_norm(r, meta, table, sub) for sub, r in raws.items()}
    total = sum(norms.values())
    return SktResult(
        subject_id=subject_id,
        norm_scores=norms,
        total=total,
        severity=classify_total(total),
        partial=len(norms) < ALL_SUBTESTS,
        memory_subtotal=sum(v for k, v in norms.items() if k in MEMORY_SUBTESTS),
        attention_subtotal=sum(v for k, v in norms.items() if k in ATTENTION_SUBTESTS),
        raw_scores=dict(raws),
    )


# --- file format -----------------------------------------------------------

NORM_TABLE_SCHEMA = {
    "type": "object",
    "required": ["age_bands", "cutoffs"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "example": {"type": "boolean"},
        "description": {"type": "string"},
        "comparison": {"enum": ["inclusive_upper", "exclusive_upper"]},
        "iq_bands": {
            "type": "array",
            "items": {"enum": [b.value for b in IqBand]},
        },
        "age_bands": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["label", "min", "max"],
                "additionalProperties": False,
                "properties": {
                    "label": {"type": "string", "minLength": 1},
                    "min": {"type": "integer", "minimum": 18},
                    "max": {"type": "integer"},
                },
            },
        },
        "cutoffs": {
            "type": "object",
            "propertyNames": {"enum": [s.value for s in SubtestId]},
            "additionalProperties": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "propertyNames": {"enum": [b.value for b in IqBand]},
                    "additionalProperties": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
            },
        },
    },
}


def norm_table_from_document(doc: PositionedDocument) -> NormTable:
    """Validate a parsed norm-table document; errors point at file lines."""
    data = doc.data
    validator = jsonschema.Draft202012Validator(NORM_TABLE_SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        raise doc.error(tuple(err.absolute_path), err.message)

    if data.get("iq_bands", [b.value for b in IqBand]) != [b.value for b in IqBand]:
        raise doc.error(("iq_bands",), "must list exactly Below90, Band90to110, Above110")

    bands = []
    for i, b in enumerate(data["age_bands"]):
        if b["max"] < b["min"]:
            raise doc.error(("age_bands", i), "max < min")
        if bands and b["min"] <= bands[-1].max_years:
            raise doc.error(("age_bands", i), "age bands must be sorted and non-overlapping")
        bands.append(AgeBand(b["label"], b["min"], b["max"]))
    labels = [b.label for b in bands]
    if len(set(labels)) != len(labels):
        raise doc.error(("age_bands",), "age band labels must be unique")

    cutoffs = {}
    for sub in SubtestId:
        per_sub = data["cutoffs"].get(sub.value)
        if per_sub is None:
            raise doc.error(("cutoffs",), f"missing subtest {sub.value}")
        extra = sorted(set(per_sub) - set(labels))
        if extra:
            raise doc.error(("cutoffs", sub.value, extra[0]), "unknown age band label")
        for label in labels:
            cells = per_sub.get(label)
            if cells is None:
                raise doc.error(("cutoffs", sub.value), f"missing age band {label!r}")
            for iq in IqBand:
                cut = cells.get(iq.value)
                path = ("cutoffs", sub.value, label, iq.value)
                if cut is None:
                    raise doc.error(("cutoffs", sub.value, label), f"missing IQ band {iq.value}")
                if not (cut[0] <= cut[1] <= cut[2]):
                    raise doc.error(path, f"cutoffs must be non-decreasing, got {cut}")
                cutoffs[(sub, label, iq)] = (float(cut[0]), float(cut[1]), float(cut[2]))
    return NormTable(
        age_bands=tuple(bands),
        cutoffs=cutoffs,
        comparison=data.get("comparison", "inclusive_upper"),
        name=data.get("name", ""),
        example=bool(data.get("example", False)),
    )


def load_norm_table(path: str | Path, allow_example: bool = False) -> NormTable:
    table = norm_table_from_document(load_json_with_positions(path))
    if table.example and not allow_example:
        raise ExampleNormsError(
            f"{path}: this is a synthetic example norm table, not clinical norms; "
            "pass allow_example=True (--allow-example-norms) to use it anyway")
    return table


def example_norms_path() -> Path:
    return Path(str(resources.files("sktscore") / "data" / "example_norms.json"))
