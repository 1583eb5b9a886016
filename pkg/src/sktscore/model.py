"""Domain types shared by the scorers, plus record validation and JSON I/O.

All types are frozen dataclasses. Constructors do not enforce invariants so
that malformed input can be loaded and reported by :func:`validate_record`
instead of failing halfway through a cohort.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from ._jsonio import InputError, PositionedDocument


class SubtestId(str, enum.Enum):
    """The seven SKT subtests that can be scored from audio alone."""

    S1 = "S1"  # object naming (timed)
    S2 = "S2"  # immediate recall (omissions)
    S3 = "S3"  # reading numbers (timed)
    S6 = "S6"  # counting symbols (timed)
    S7 = "S7"  # interference (timed)
    S8 = "S8"  # delayed recall (omissions)
    S9 = "S9"  # recognition (omissions)

    @classmethod
    def parse(cls, value: Any) -> "SubtestId":
        if isinstance(value, SubtestId):
            return value
        text = str(value).strip().upper()
        if not text.startswith("S"):
            text = "S" + text
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown subtest {value!r}") from None

    def __str__(self) -> str:
        return self.value


TIMED_SUBTESTS = frozenset({SubtestId.S1, SubtestId.S3, SubtestId.S6, SubtestId.S7})
OMISSION_SUBTESTS = frozenset({SubtestId.S2, SubtestId.S8, SubtestId.S9})
# group two of the automatic evaluation: the 60 s no-response fallback applies
FALLBACK_SUBTESTS = frozenset({SubtestId.S3, SubtestId.S6, SubtestId.S7})


class Source(str, enum.Enum):
    GROUND_TRUTH = "ground_truth"
    ASR = "asr"


class Speaker(str, enum.Enum):
    SUBJECT = "subject"
    EXAMINER = "examiner"


class ExpectedKind(str, enum.Enum):
    OBJECT_SET = "object_set"
    NUMBER_SET = "number_set"
    COUNT_RANGE = "count_range"
    LETTER_SET = "letter_set"


class IqBand(str, enum.Enum):
    BELOW_90 = "Below90"
    BAND_90_TO_110 = "Band90to110"
    ABOVE_110 = "Above110"

    @classmethod
    def parse(cls, value: Any) -> "IqBand":
        if isinstance(value, IqBand):
            return value
        aliases = {"<90": cls.BELOW_90, "90-110": cls.BAND_90_TO_110, ">110": cls.ABOVE_110}
        text = str(value).strip()
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown IQ band {value!r}") from None


@dataclass(frozen=True)
class WordToken:
    text: str
    start_s: float
    end_s: float
    confidence: float | None = None
    # per-token speaker; overrides Transcript.speaker when set
    speaker: Speaker | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"text": self.text, "start_s": self.start_s, "end_s": self.end_s}
        if self.confidence is not None:
            d["confidence"] = self.confidence
        if self.speaker is not None:
            d["speaker"] = self.speaker.value
        return d


@dataclass(frozen=True)
class Transcript:
    tokens: tuple[WordToken, ...] = ()
    source: Source = Source.ASR
    speaker: Speaker | None = None

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def speaker_of(self, index: int) -> Speaker | None:
        tok = self.tokens[index]
        return tok.speaker if tok.speaker is not None else self.speaker

    def is_examiner(self, index: int) -> bool:
        return self.speaker_of(index) is Speaker.EXAMINER

    def subject_indices(self) -> list[int]:
        return [i for i in range(len(self.tokens)) if not self.is_examiner(i)]

    def words(self) -> list[str]:
        return [t.text for t in self.tokens]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"source": self.source.value,
                             "tokens": [t.to_dict() for t in self.tokens]}
        if self.speaker is not None:
            d["speaker"] = self.speaker.value
        return d


@dataclass(frozen=True)
class ExpectedResponse:
    kind: ExpectedKind
    items: tuple[str, ...]
    synonyms: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    count_min: int | None = None
    count_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "synonyms",
                           {k: tuple(v) for k, v in dict(self.synonyms).items()})

    def variants(self, item: str) -> tuple[str, ...]:
        return (item,) + tuple(self.synonyms.get(item, ()))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "items": list(self.items)}
        if self.synonyms:
            d["synonyms"] = {k: list(v) for k, v in sorted(self.synonyms.items())}
        if self.count_min is not None:
            d["count_min"] = self.count_min
        if self.count_max is not None:
            d["count_max"] = self.count_max
        return d


@dataclass(frozen=True)
class SubjectMeta:
    age_years: int
    iq_band: IqBand
    expert_total: int | None = None
    expert_raw: Mapping[SubtestId, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"age_years": self.age_years, "iq_band": self.iq_band.value}
        if self.expert_total is not None:
            d["expert_total"] = self.expert_total
        if self.expert_raw:
            d["expert_raw"] = {k.value: v for k, v in sorted(self.expert_raw.items())}
        return d


@dataclass(frozen=True)
class SubtestRecord:
    subject_id: str
    subtest: SubtestId
    transcript: Transcript
    task_onset_s: float
    expected: ExpectedResponse
    subject_meta: SubjectMeta


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_transcript(t: Transcript) -> list[str]:
    out = []
    prev_start = None
    for i, tok in enumerate(t.tokens):
        if not isinstance(tok.text, str) or not tok.text.strip():
            out.append(f"WordToken.text is empty @ index {i}")
        if not (_is_number(tok.start_s) and _is_number(tok.end_s)):
            out.append(f"WordToken timestamps are not finite numbers @ index {i}")
            continue
        if tok.start_s < 0:
            out.append(f"WordToken.start_s < 0 @ index {i}")
        if tok.end_s < tok.start_s:
            out.append(f"WordToken.end_s < start_s @ index {i}")
        if tok.confidence is not None and not (
                _is_number(tok.confidence) and 0.0 <= tok.confidence <= 1.0):
            out.append(f"WordToken.confidence outside [0,1] @ index {i}")
        if prev_start is not None and tok.start_s < prev_start:
            out.append(f"Transcript.tokens not sorted by start_s @ index {i}")
        prev_start = tok.start_s
    return out


def validate_expected(e: ExpectedResponse) -> list[str]:
    out = []
    if not e.items:
        out.append("ExpectedResponse.items is empty")
    for key in e.synonyms:
        if key not in e.items:
            out.append(f"ExpectedResponse.synonyms key {key!r} not in items")
    if e.kind is ExpectedKind.COUNT_RANGE:
        if e.count_min is None or e.count_max is None:
            out.append("ExpectedResponse.count_min/count_max required for count_range")
        elif e.count_min > e.count_max:
            out.append("ExpectedResponse.count_min > count_max")
    elif e.count_min is not None or e.count_max is not None:
        out.append("ExpectedResponse.count_min/count_max only allowed for count_range")
    return out


def validate_meta(m: SubjectMeta) -> list[str]:
    out = []
    if not isinstance(m.age_years, int) or isinstance(m.age_years, bool) or m.age_years < 18:
        out.append("SubjectMeta.age_years must be an integer >= 18")
    if not isinstance(m.iq_band, IqBand):
        out.append("SubjectMeta.iq_band must be one of Below90, Band90to110, Above110")
    if m.expert_total is not None and not (
            isinstance(m.expert_total, int) and 0 <= m.expert_total <= 27):
        out.append("SubjectMeta.expert_total outside 0..27")
    return out


def validate_record(record: SubtestRecord) -> list[str]:
    """Return every invariant violation in ``record``; empty means valid."""
    out = []
    if not isinstance(record.subtest, SubtestId):
        out.append(f"SubtestRecord.subtest {record.subtest!r} is not a scoreable subtest")
    out.extend(validate_transcript(record.transcript))
    out.extend(validate_expected(record.expected))
    out.extend(validate_meta(record.subject_meta))
    if not _is_number(record.task_onset_s):
        out.append("SubtestRecord.task_onset_s is not a finite number")
    elif record.transcript.tokens:
        first = record.transcript.tokens[0].start_s
        if _is_number(first) and record.task_onset_s > first:
            out.append("SubtestRecord.task_onset_s > start_s of first token")
    return out


# --- JSON ------------------------------------------------------------------

def transcript_from_dict(d: Mapping[str, Any]) -> Transcript:
    tokens = []
    for tok in d.get("tokens", []):
        speaker = tok.get("speaker")
        tokens.append(WordToken(
            text=tok["text"],
            start_s=tok["start_s"],
            end_s=tok["end_s"],
            confidence=tok.get("confidence"),
            speaker=Speaker(speaker) if speaker is not None else None,
        ))
    speaker = d.get("speaker")
    return Transcript(
        tokens=tuple(tokens),
        source=Source(d.get("source", "asr")),
        speaker=Speaker(speaker) if speaker is not None else None,
    )


def expected_from_dict(d: Mapping[str, Any]) -> ExpectedResponse:
    return ExpectedResponse(
        kind=ExpectedKind(d["kind"]),
        items=tuple(str(x) for x in d["items"]),
        synonyms={str(k): tuple(str(x) for x in v) for k, v in d.get("synonyms", {}).items()},
        count_min=d.get("count_min"),
        count_max=d.get("count_max"),
    )


def meta_from_dict(d: Mapping[str, Any]) -> SubjectMeta:
    return SubjectMeta(
        age_years=d["age_years"],
        iq_band=IqBand.parse(d["iq_band"]),
        expert_total=d.get("expert_total"),
        expert_raw={SubtestId.parse(k): v for k, v in d.get("expert_raw", {}).items()},
    )


@dataclass(frozen=True)
class SubjectBundle:
    """One subject: metadata plus one record per administered subtest."""

    subject_id: str
    meta: SubjectMeta
    records: tuple[SubtestRecord, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "meta": self.meta.to_dict(),
            "subtests": [
                {
                    "subtest": r.subtest.value,
                    "task_onset_s": r.task_onset_s,
                    "transcript": r.transcript.to_dict(),
                    "expected": r.expected.to_dict(),
                }
                for r in self.records
            ],
        }


def bundles_from_document(
    doc: PositionedDocument,
    default_expected: Mapping[SubtestId, ExpectedResponse] | None = None,
) -> list[SubjectBundle]:
    """Parse a records file.

    Accepted shapes: a single subject object, a list of them, or an object with
    a ``subjects`` list. A subtest entry without ``expected`` takes the
    response set from ``default_expected`` (the scoring config).
    """
    data = doc.data
    if isinstance(data, dict) and "subjects" in data:
        items, base = data["subjects"], ("subjects",)
    elif isinstance(data, list):
        items, base = data, ()
    else:
        items, base = [data], None
    if not isinstance(items, list):
        raise doc.error(("subjects",), "expected a list of subjects")

    default_expected = default_expected or {}
    bundles = []
    for si, subj in enumerate(items):
        spath = () if base is None else base + (si,)
        if not isinstance(subj, dict):
            raise doc.error(spath, "expected a subject object")
        try:
            sid = str(subj["subject_id"])
            meta = meta_from_dict(subj["meta"])
        except KeyError as exc:
            raise doc.error(spath, f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise doc.error(spath + ("meta",), str(exc)) from None
        records = []
        for ri, entry in enumerate(subj.get("subtests", [])):
            rpath = spath + ("subtests", ri)
            try:
                subtest = SubtestId.parse(entry["subtest"])
                if "expected" in entry:
                    expected = expected_from_dict(entry["expected"])
                elif subtest in default_expected:
                    expected = default_expected[subtest]
                else:
                    raise doc.error(rpath, f"no expected response for {subtest.value} "
                                           "in record or config")
                records.append(SubtestRecord(
                    subject_id=sid,
                    subtest=subtest,
                    transcript=transcript_from_dict(entry["transcript"]),
                    task_onset_s=entry["task_onset_s"],
                    expected=expected,
                    subject_meta=meta,
                ))
            except KeyError as exc:
                raise doc.error(rpath, f"missing field {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                if isinstance(exc, InputError):
                    raise
                raise doc.error(rpath, str(exc)) from None
        bundles.append(SubjectBundle(sid, meta, tuple(records)))
    return bundles


def iter_violations(bundles: Iterable[SubjectBundle]) -> Iterable[str]:
    for b in bundles:
        for r in b.records:
            for v in validate_record(r):
                yield f"{b.subject_id}/{r.subtest.value}: {v}"
