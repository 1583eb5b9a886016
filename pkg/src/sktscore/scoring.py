"""Raw scores for SKT subtests 1, 2, 3, 6, 7, 8 and 9 from time-stamped transcripts.

Timed subtests (1, 3, 6, 7) score the seconds from task onset to the end of
the last valid response word, clamped to [0, 60]. Memory subtests (2, 8, 9)
score the number of expected objects that were never named.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from ._jsonio import InputError, load_config_file, load_json_with_positions
from .errors import ScoringError
from .matcher import (DEFAULT_NEGATION_WINDOW, NEGATION_LEXICON, CommandNegationFilter,
                      MatchOptions, MatchResult, NegationFilter, NoNegationFilter,
                      RuleNegationFilter, best_variant, clean_token, find_expected)
from .model import (FALLBACK_SUBTESTS, ExpectedKind, ExpectedResponse, SubtestId,
                    SubtestRecord, Transcript, expected_from_dict)
from .numword import DEFAULT_DIALECT, load_dialect, normalize_transcript, parse_number_word

MAX_SECONDS = 60.0
FALLBACK_SECONDS = 60.0

DIAG_NO_MATCH_S1 = "no-match-s1-scored-60"
DIAG_NO_VERBAL = "no-verbal-response"
DIAG_FALLBACK = "no-valid-response-fallback-60"
DIAG_CLAMPED = "duration-clamped"


class TimedMode(str, enum.Enum):
    LAST_EXPECTED = "last_expected"
    LAST_WORD = "last_word"


EXPECTED_KIND = {
    SubtestId.S1: ExpectedKind.OBJECT_SET,
    SubtestId.S2: ExpectedKind.OBJECT_SET,
    SubtestId.S8: ExpectedKind.OBJECT_SET,
    SubtestId.S9: ExpectedKind.OBJECT_SET,
    SubtestId.S3: ExpectedKind.NUMBER_SET,
    SubtestId.S6: ExpectedKind.COUNT_RANGE,
    SubtestId.S7: ExpectedKind.LETTER_SET,
}


@dataclass(frozen=True)
class RawScore:
    subtest: SubtestId
    value: float
    fallback_used: bool = False
    matched: tuple[MatchResult, ...] = ()
    diagnostics: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "subtest": self.subtest.value,
            "value": self.value,
            "fallback_used": self.fallback_used,
            "matched": [m.to_dict() for m in self.matched],
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True)
class ScoringConfig:
    threshold: float = 0.9
    reference_side: str = "target"
    rounding: str = "floor"
    s6_mode: TimedMode = TimedMode.LAST_EXPECTED
    # "rule", "none" or "command"
    negation_filter: str = "rule"
    negation_command: str | None = None
    negation_window: int = DEFAULT_NEGATION_WINDOW
    negation_lexicon: tuple[str, ...] = tuple(sorted(NEGATION_LEXICON))
    dialect: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_DIALECT))
    expected: Mapping[SubtestId, ExpectedResponse] = field(default_factory=dict)

    @property
    def match_options(self) -> MatchOptions:
        return MatchOptions(self.threshold, self.reference_side, self.rounding)

    def make_negation_filter(self) -> NegationFilter:
        if self.negation_filter == "rule":
            return RuleNegationFilter(self.negation_window, self.negation_lexicon)
        if self.negation_filter == "none":
            return NoNegationFilter()
        if self.negation_filter == "command":
            if not self.negation_command:
                raise ScoringError("negation_filter 'command' needs negation_command")
            return CommandNegationFilter(self.negation_command)
        raise ScoringError(f"unknown negation filter {self.negation_filter!r}")

    def fingerprint(self) -> dict[str, Any]:
        d = asdict(self)
        d["s6_mode"] = self.s6_mode.value
        d["negation_lexicon"] = list(self.negation_lexicon)
        d["dialect"] = dict(sorted(self.dialect.items()))
        d["expected"] = {k.value: v.to_dict() for k, v in sorted(self.expected.items())}
        return d


def load_scoring_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> ScoringConfig:
    """Read a JSON/TOML scoring config.

    Keys: ``threshold``, ``reference_side``, ``rounding``, ``s6_mode``,
    ``negation_filter``, ``negation_command``, ``negation_window``,
    ``negation_lexicon`` (path), ``dialect`` (path) and ``expected``, a map
    from subtest id to an expected-response file path. Relative paths
    resolve against the config file. ``overrides`` (already-parsed values,
    e.g. from the command line) win over file values.
    """
    path = Path(path)
    data = dict(load_config_file(path))
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    base = path.parent
    return config_from_dict(data, base, source=str(path))


def config_from_dict(data: Mapping[str, Any], base: Path = Path("."),
                     source: str | None = None) -> ScoringConfig:
    known = {"threshold", "reference_side", "rounding", "s6_mode", "negation_filter",
             "negation_command", "negation_window", "negation_lexicon", "dialect", "expected"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"unknown scoring config keys: {', '.join(unknown)}", source)
    kwargs: dict[str, Any] = {}
    try:
        for key in ("threshold", "reference_side", "rounding", "negation_filter",
                    "negation_command", "negation_window"):
            if key in data:
                kwargs[key] = data[key]
        if "s6_mode" in data:
            kwargs["s6_mode"] = TimedMode(data["s6_mode"])
        if "negation_lexicon" in data:
            lex = data["negation_lexicon"]
            if isinstance(lex, str):
                lex = load_config_list(base / lex)
            kwargs["negation_lexicon"] = tuple(sorted(str(w).lower() for w in lex))
        if "dialect" in data:
            d = data["dialect"]
            kwargs["dialect"] = load_dialect(base / d) if isinstance(d, str) else {
                **DEFAULT_DIALECT, **{str(k).lower(): int(v) for k, v in d.items()}}
        expected = {}
        for sub, entry in dict(data.get("expected", {})).items():
            sid = SubtestId.parse(sub)
            if isinstance(entry, str):
                doc = load_json_with_positions(base / entry)
                entry = doc.data
            expected[sid] = expected_from_dict(entry)
        kwargs["expected"] = expected
        cfg = ScoringConfig(**kwargs)
        cfg.match_options  # validates threshold / knobs
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid scoring config: {exc}", source) from None
    return cfg


def load_config_list(path: Path) -> list[str]:
    doc = load_json_with_positions(path)
    data = doc.data
    if isinstance(data, dict):
        data = data.get("lexicon")
    if not isinstance(data, list):
        raise doc.error((), "expected a JSON list of words")
    return [str(w) for w in data]


# --- helpers ---------------------------------------------------------------

def _check(record: SubtestRecord, allowed: Sequence[SubtestId]) -> None:
    if record.subtest not in allowed:
        names = ", ".join(s.value for s in allowed)
        raise ScoringError(f"scorer handles {names}, got {record.subtest.value}")
    kind = EXPECTED_KIND[record.subtest]
    if record.expected.kind is not kind:
        raise ScoringError(f"{record.subtest.value} needs an expected response of kind "
                           f"{kind.value}, got {record.expected.kind.value}")


def _duration(end_s: float, onset_s: float) -> tuple[float, bool]:
    # millisecond resolution; keeps 18.4 - 2.0 at 16.4
    d = round(end_s - onset_s, 3)
    clamped = min(max(d, 0.0), MAX_SECONDS)
    return clamped, clamped != d


def _has_subject_speech(t: Transcript) -> bool:
    return any(clean_token(t.tokens[i].text) for i in t.subject_indices())


def _omission_score(record: SubtestRecord, hits: Sequence[MatchResult]) -> RawScore:
    diags = () if _has_subject_speech(record.transcript) else (DIAG_NO_VERBAL,)
    n_items = len(dict.fromkeys(record.expected.items))
    return RawScore(record.subtest, float(n_items - len(hits)), False, tuple(hits), diags)


# --- scorers ---------------------------------------------------------------

def score_naming_s1(record: SubtestRecord, threshold: float = 0.9,
                    options: MatchOptions | None = None) -> RawScore:
    """Seconds from onset to the end of the last named object.

    No named object at all scores 60 with a diagnostic; the no-response
    fallback flag is reserved for subtests 3, 6 and 7.
    """
    _check(record, (SubtestId.S1,))
    hits = find_expected(record.transcript, record.expected, threshold, options)
    if not hits:
        return RawScore(SubtestId.S1, MAX_SECONDS, False, (), (DIAG_NO_MATCH_S1,))
    value, clamped = _duration(hits[-1].end_s, record.task_onset_s)
    return RawScore(SubtestId.S1, value, False, tuple(hits), (DIAG_CLAMPED,) if clamped else ())


def score_recall(record: SubtestRecord, threshold: float = 0.9,
                 options: MatchOptions | None = None) -> RawScore:
    """Omitted objects for immediate (S2) or delayed (S8) recall."""
    _check(record, (SubtestId.S2, SubtestId.S8))
    hits = find_expected(record.transcript, record.expected, threshold, options)
    return _omission_score(record, hits)


def score_recognition_s9(record: SubtestRecord, threshold: float = 0.9,
                         filter: NegationFilter | None = None,
                         options: MatchOptions | None = None) -> RawScore:
    """Omitted objects in the recognition task, ignoring negated namings.

    A failing external filter raises :class:`~sktscore.errors.ClientError`;
    callers can retry with :class:`~sktscore.matcher.RuleNegationFilter`.
    """
    _check(record, (SubtestId.S9,))
    hits = find_expected(record.transcript, record.expected, threshold, options)
    negation = filter if filter is not None else RuleNegationFilter()
    kept = negation(record.transcript, hits)
    return _omission_score(record, kept)


def _valid_response(word: str, expected: ExpectedResponse, opts: MatchOptions,
                    dialect: Mapping[str, int]) -> str | None:
    """Canonical item a token stands for in a timed task, or None."""
    if expected.kind is ExpectedKind.COUNT_RANGE:
        n = parse_number_word(word, dialect)
        if n is not None and expected.count_min <= n <= expected.count_max:
            return str(n)
        return None
    if expected.kind is ExpectedKind.NUMBER_SET:
        n = parse_number_word(word, dialect)
        if n is None:
            return None
        for item in expected.items:
            if parse_number_word(item, dialect) == n:
                return item
        return None
    for item in expected.items:
        if best_variant(word, item, expected, opts) is not None:
            return item
    return None


def valid_response_tokens(t: Transcript, expected: ExpectedResponse,
                          options: MatchOptions | None = None,
                          dialect: Mapping[str, int] | None = None) -> list[MatchResult]:
    """Every subject token that belongs to the expected response set, in order."""
    opts = options or MatchOptions()
    dialect = DEFAULT_DIALECT if dialect is None else dialect
    out = []
    for i in t.subject_indices():
        tok = t.tokens[i]
        word = clean_token(tok.text)
        if not word:
            continue
        item = _valid_response(word, expected, opts, dialect)
        if item is not None:
            sim = 1.0 if expected.kind in (ExpectedKind.COUNT_RANGE, ExpectedKind.NUMBER_SET) \
                else max(best_variant(word, item, expected, opts) or 0.0, 0.0)
            out.append(MatchResult(item, tok.text, i, tok.start_s, tok.end_s, sim))
    return out


def score_timed_set(record: SubtestRecord, threshold: float = 0.9,
                    mode: TimedMode = TimedMode.LAST_EXPECTED,
                    options: MatchOptions | None = None,
                    dialect: Mapping[str, int] | None = None) -> RawScore:
    """Processing time for reading numbers (S3), counting (S6) or interference (S7).

    ``LAST_EXPECTED`` ends the task at the last valid response token;
    ``LAST_WORD`` at the last subject token. Without any valid response
    token the score falls back to 60 s.
    """
    _check(record, (SubtestId.S3, SubtestId.S6, SubtestId.S7))
    opts = options or MatchOptions(threshold=threshold)
    mode = TimedMode(mode)
    t = record.transcript
    if record.subtest is SubtestId.S3:
        t, _ = normalize_transcript(t, dialect)
    valid = valid_response_tokens(t, record.expected, opts, dialect)
    if not valid:
        return RawScore(record.subtest, FALLBACK_SECONDS, True, (), (DIAG_FALLBACK,))
    if mode is TimedMode.LAST_WORD:
        end = max(t.tokens[i].end_s for i in t.subject_indices())
    else:
        end = valid[-1].end_s
    value, clamped = _duration(end, record.task_onset_s)
    return RawScore(record.subtest, value, False, tuple(valid),
                    (DIAG_CLAMPED,) if clamped else ())


def score_record(record: SubtestRecord, config: ScoringConfig | None = None,
                 negation: NegationFilter | None = None) -> RawScore:
    """Dispatch ``record`` to its subtest scorer."""
    config = config or ScoringConfig()
    opts = config.match_options
    sub = record.subtest
    if sub is SubtestId.S1:
        return score_naming_s1(record, config.threshold, opts)
    if sub in (SubtestId.S2, SubtestId.S8):
        return score_recall(record, config.threshold, opts)
    if sub is SubtestId.S9:
        f = negation if negation is not None else config.make_negation_filter()
        return score_recognition_s9(record, config.threshold, f, opts)
    if sub in FALLBACK_SUBTESTS:
        mode = config.s6_mode if sub is SubtestId.S6 else TimedMode.LAST_EXPECTED
        return score_timed_set(record, config.threshold, mode, opts, config.dialect)
    raise ScoringError(f"no scorer for subtest {sub!r}")
