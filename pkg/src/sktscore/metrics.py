"""WER / word correctness, Pearson correlation and per-group evaluation reports."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import SubtestId

log = logging.getLogger(__name__)

GROUPS = ("NCI", "MCI", "DEM")
POOLED = "All"

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


def tokenize(text: str, lowercase: bool = True, strip_punctuation: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    if strip_punctuation:
        text = _PUNCT.sub(" ", text)
    return text.split()


@dataclass(frozen=True)
class AlignmentCounts:
    substitutions: int
    deletions: int
    insertions: int
    hits: int
    ref_len: int

    def __post_init__(self):
        if self.hits + self.substitutions + self.deletions != self.ref_len:
            raise ValueError("hits + substitutions + deletions must equal ref_len")

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            raise ZeroDivisionError("WER is undefined for an empty reference")
        return self.errors / self.ref_len

    @property
    def wc(self) -> float:
        if self.ref_len == 0:
            raise ZeroDivisionError("WC is undefined for an empty reference")
        return self.hits / self.ref_len

    def __add__(self, other: "AlignmentCounts") -> "AlignmentCounts":
        return AlignmentCounts(self.substitutions + other.substitutions,
                               self.deletions + other.deletions,
                               self.insertions + other.insertions,
                               self.hits + other.hits,
                               self.ref_len + other.ref_len)


ZERO_COUNTS = AlignmentCounts(0, 0, 0, 0, 0)


def _align(ref: Sequence[str], hyp: Sequence[str]) -> AlignmentCounts:
    n, m = len(ref), len(hyp)
    # dp[j] = (edits, -hits): minimum edits, ties broken towards more hits
    prev = [(j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0)]
        r = ref[i - 1]
        for j in range(1, m + 1):
            e, h = prev[j - 1]
            diag = (e, h - 1) if r == hyp[j - 1] else (e + 1, h)
            up = (prev[j][0] + 1, prev[j][1])
            left = (cur[j - 1][0] + 1, cur[j - 1][1])
            cur.append(min(diag, up, left))
        prev = cur
    edits, neg_hits = prev[m]
    hits = -neg_hits
    subs = n + m - 2 * hits - edits
    return AlignmentCounts(subs, n - hits - subs, m - hits - subs, hits, n)


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> AlignmentCounts:
    """Minimum-edit word alignment counts.

    Among alignments with the fewest edits the one with the most hits is
    chosen, which fixes S, D and I uniquely.
    """
    if not ref:
        raise ValueError("reference is empty; WER is undefined")
    return _align(ref, hyp)


def corpus_counts(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> AlignmentCounts:
    """Summed counts over utterances; corpus WER is errors / total reference words."""
    total = ZERO_COUNTS
    for ref, hyp in pairs:
        total = total + _align(ref, hyp)
    return total


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("x and y must be 1-D sequences of equal length")
    if len(xa) < 2:
        raise ValueError("need at least two points")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0 or np.ptp(xa) == 0 or np.ptp(ya) == 0:
        raise ValueError("undefined correlation: constant input")
    # separate roots: sxx * syy can underflow for tiny spreads
    den = math.sqrt(sxx) * math.sqrt(syy)
    if den == 0.0:
        raise ValueError("undefined correlation: spread too small to resolve")
    r = float(np.dot(xc, yc)) / den
    return min(1.0, max(-1.0, r))


# --- subgroup reports ------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    """Automatic vs expert raw score for one subject and subtest.

    ``auto_raw_asr`` comes from the ASR transcript, ``auto_raw_gt`` from the
    manual transcript. Word lists are the manual (ref) and ASR (hyp) words.
    """

    subject: str
    subtest: SubtestId
    expert_raw: float
    auto_raw_asr: float | None = None
    auto_raw_gt: float | None = None
    ref_words: tuple[str, ...] = ()
    hyp_words: tuple[str, ...] = ()


@dataclass(frozen=True)
class SubtestStats:
    n: int
    pearson_gt: float | None = None
    pearson_asr: float | None = None
    wer: float | None = None
    wc: float | None = None


@dataclass(frozen=True)
class GroupReport:
    group: str
    n: int  # subjects
    per_subtest: Mapping[SubtestId, SubtestStats] = field(default_factory=dict)
    overall: SubtestStats = SubtestStats(0)


def _safe_pearson(pairs: list[tuple[float, float]], label: str) -> float | None:
    if len(pairs) < 2:
        return None
    x, y = zip(*pairs)
    try:
        return pearson(x, y)
    except ValueError:
        log.warning("%s: correlation undefined (constant scores)", label)
        return None


def _stats(rows: Sequence[ResultRow], label: str) -> SubtestStats:
    gt = [(r.auto_raw_gt, r.expert_raw) for r in rows if r.auto_raw_gt is not None]
    asr = [(r.auto_raw_asr, r.expert_raw) for r in rows if r.auto_raw_asr is not None]
    counts = corpus_counts((r.ref_words, r.hyp_words) for r in rows if r.ref_words)
    wer = counts.wer if counts.ref_len else None
    wc = counts.wc if counts.ref_len else None
    return SubtestStats(len(rows), _safe_pearson(gt, label + " GT"),
                        _safe_pearson(asr, label + " ASR"), wer, wc)


def group_report(group: str, rows: Sequence[ResultRow]) -> GroupReport:
    subjects = {r.subject for r in rows}
    per = {}
    for sub in SubtestId:
        sub_rows = [r for r in rows if r.subtest is sub]
        if sub_rows:
            per[sub] = _stats(sub_rows, f"{group}/{sub.value}")
    return GroupReport(group, len(subjects), per, _stats(rows, f"{group}/overall"))


def subgroup_report(results: Sequence[ResultRow], grouping: Mapping[str, str],
                    groups: Sequence[str] = GROUPS) -> list[GroupReport]:
    """One report per cognitive group plus the pooled ``All`` report.

    The overall row pools every (subject, subtest) point; WER/WC are
    corpus-level. Groups with fewer than two subjects are left out.
    """
    if not results:
        return []
    reports = []
    for g in groups:
        rows = [r for r in results if grouping.get(r.subject) == g]
        n = len({r.subject for r in rows})
        if n < 2:
            if n:
                log.warning("group %s has %d subject(s); omitted from report", g, n)
            continue
        reports.append(group_report(g, rows))
    reports.append(group_report(POOLED, list(results)))
    return reports


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.2f}"


def _fmt_csv(v: float | None) -> str:
    return "" if v is None else repr(round(v, 6))


def report_to_csv(reports: Sequence[GroupReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "subtest", "n", "pearson_gt", "pearson_asr", "wer", "wc"])
    for rep in reports:
        rows = [(s.value, st) for s, st in rep.per_subtest.items()] + [("Overall", rep.overall)]
        for name, st in rows:
            w.writerow([rep.group, name, st.n, _fmt_csv(st.pearson_gt), _fmt_csv(st.pearson_asr),
                        _fmt_csv(st.wer), _fmt_csv(st.wc)])
    return buf.getvalue()


def report_to_markdown(reports: Sequence[GroupReport]) -> str:
    """Two tables: correlations per subtest x group, then WER/WC per subtest x group."""
    groups = [r.group for r in reports]
    by = {r.group: r for r in reports}
    subtests = [s for s in SubtestId if any(s in r.per_subtest for r in reports)]

    def cell(rep: GroupReport, sub: SubtestId | None) -> SubtestStats | None:
        return rep.overall if sub is None else rep.per_subtest.get(sub)

    def table(cols: Sequence[str], getter) -> list[str]:
        head = ["Subtest"] + [f"{g} (n={by[g].n}) {c}" for g in groups for c in cols]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for sub in subtests + [None]:
            label = "**Overall**" if sub is None else sub.value[1:]
            vals = []
            for g in groups:
                st = cell(by[g], sub)
                vals.extend(_fmt(getter(st, c)) if st else "" for c in cols)
            lines.append("| " + " | ".join([label] + vals) + " |")
        return lines

    corr = table(["GT", "ASR"], lambda st, c: st.pearson_gt if c == "GT" else st.pearson_asr)
    err = table(["WER", "WC"], lambda st, c: st.wer if c == "WER" else st.wc)
    return "\n".join(["Pearson correlation with expert scores", ""] + corr +
                     ["", "Transcription quality (corpus-level)", ""] + err) + "\n"
