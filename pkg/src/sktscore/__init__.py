"""Automated Syndrom-Kurz-Test (SKT) scoring from time-stamped transcripts.

Also ships the tools to audit such a scorer per cognitive subgroup: WER/WC,
Pearson correlation reports and a synthetic-cohort simulator.
"""

from .errors import ClientError, ExampleNormsError, InputError, NormError, ScoringError
from .matcher import MatchResult, filter_negated, find_expected, levenshtein, matches
from .metrics import AlignmentCounts, GroupReport, ResultRow, align_words, pearson, subgroup_report
from .model import (ExpectedKind, ExpectedResponse, IqBand, Source, Speaker, SubjectMeta,
                    SubtestId, SubtestRecord, Transcript, WordToken, validate_record)
from .norms import NormTable, Severity, SktResult, assemble_result, classify_total, raw_to_norm
from .numword import NumberSpan, normalize_transcript, parse_number_word
from .scoring import RawScore, ScoringConfig, TimedMode, score_record

__version__ = "0.1.0"

__all__ = [
    "AlignmentCounts", "ClientError", "ExampleNormsError", "ExpectedKind", "ExpectedResponse",
    "GroupReport", "InputError", "IqBand", "MatchResult", "NormError", "NormTable", "NumberSpan",
    "RawScore", "ResultRow", "ScoringConfig", "ScoringError", "Severity", "SktResult", "Source",
    "Speaker", "SubjectMeta", "SubtestId", "SubtestRecord", "TimedMode", "Transcript", "WordToken",
    "align_words", "assemble_result", "classify_total", "filter_negated", "find_expected",
    "levenshtein", "matches", "normalize_transcript", "parse_number_word", "pearson",
    "raw_to_norm", "score_record", "subgroup_report", "validate_record",
]
