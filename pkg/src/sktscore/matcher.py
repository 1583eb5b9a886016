"""Fuzzy matching of transcript tokens against expected responses.

A token matches an expected word when its case-insensitive Levenshtein
distance stays within an edit budget derived from a similarity threshold:

    budget = floor((1 - threshold) * len(reference))

With the default threshold of 0.9 and the target word as reference, words
shorter than ten characters must match exactly.
"""

from __future__ import annotations

import json
import math
import subprocess
from dataclasses import asdict, dataclass
from typing import Iterable, Protocol, Sequence

from .errors import ClientError
from .model import ExpectedResponse, Transcript

DEFAULT_THRESHOLD = 0.9
DEFAULT_NEGATION_WINDOW = 3
NEGATION_LEXICON = frozenset({"nicht", "kein", "keine", "keinen", "nein"})
# closed-class words a negation can reach across ("nicht der Hut", "nein aber doch Hut")
FUNCTION_WORDS = frozenset({
    "der", "die", "das", "den", "dem", "des", "ein", "eine", "einen", "einem", "einer",
    "und", "oder", "aber", "doch", "sondern", "auch", "noch", "ja", "so", "also", "dann",
    "da", "hier", "es", "ich", "wir", "mal", "halt", "eben", "äh", "ähm", "öh", "hm", "mhm",
})

REFERENCE_SIDES = ("target", "candidate", "max")
ROUNDINGS = ("floor", "round", "ceil")

_STRIP = ".,;:!?\"'()[]«»„“”…-"


def clean_token(text: str) -> str:
    return text.strip().strip(_STRIP).lower()


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over code points."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_budget(length: int, threshold: float, rounding: str = "floor") -> int:
    # round first: (1 - 0.9) * 10 is 0.9999999999999998 in binary floating point
    raw = round((1.0 - threshold) * length, 9)
    if rounding == "floor":
        return max(0, math.floor(raw))
    if rounding == "ceil":
        return max(0, math.ceil(raw))
    if rounding == "round":
        return max(0, math.floor(raw + 0.5))
    raise ValueError(f"unknown rounding {rounding!r}; expected one of {ROUNDINGS}")


def _reference_length(candidate: str, target: str, reference_side: str) -> int:
    if reference_side == "target":
        return len(target)
    if reference_side == "candidate":
        return len(candidate)
    if reference_side == "max":
        return max(len(candidate), len(target))
    raise ValueError(f"unknown reference side {reference_side!r}; expected one of {REFERENCE_SIDES}")


def matches(candidate: str, target: str, threshold: float = DEFAULT_THRESHOLD,
            reference_side: str = "target", rounding: str = "floor") -> bool:
    if not target:
        raise ValueError("target must be non-empty")
    c, t = candidate.lower(), target.lower()
    budget = edit_budget(_reference_length(c, t, reference_side), threshold, rounding)
    return levenshtein(c, t) <= budget


def similarity(candidate: str, target: str) -> float:
    """1 - distance / len(target), floored at 0."""
    c, t = candidate.lower(), target.lower()
    return max(0.0, 1.0 - levenshtein(c, t) / max(len(t), 1))


@dataclass(frozen=True)
class MatchResult:
    canonical: str
    matched_surface: str
    token_index: int
    start_s: float
    end_s: float
    similarity: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MatchOptions:
    threshold: float = DEFAULT_THRESHOLD
    reference_side: str = "target"
    rounding: str = "floor"

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.reference_side not in REFERENCE_SIDES:
            raise ValueError(f"unknown reference side {self.reference_side!r}")
        if self.rounding not in ROUNDINGS:
            raise ValueError(f"unknown rounding {self.rounding!r}")


def best_variant(word: str, item: str, expected: ExpectedResponse,
                 opts: MatchOptions) -> float | None:
    """Similarity of ``word`` to the closest matching variant of ``item``, or None."""
    best = None
    for variant in expected.variants(item):
        if matches(word, variant, opts.threshold, opts.reference_side, opts.rounding):
            s = similarity(word, variant)
            if best is None or s > best:
                best = s
    return best


def find_expected(t: Transcript, expected: ExpectedResponse,
                  threshold: float = DEFAULT_THRESHOLD,
                  options: MatchOptions | None = None) -> list[MatchResult]:
    """First occurrence of each expected item in ``t``, in token order.

    Examiner tokens are skipped. A token is credited to at most one item;
    when it matches several, the first still-unmatched item in list order wins.
    """
    opts = options or MatchOptions(threshold=threshold)
    remaining = list(dict.fromkeys(expected.items))
    hits = []
    for i, tok in enumerate(t.tokens):
        if not remaining:
            break
        if t.is_examiner(i):
            continue
        word = clean_token(tok.text)
        if not word:
            continue
        for item in remaining:
            sim = best_variant(word, item, expected, opts)
            if sim is not None:
                hits.append(MatchResult(item, tok.text, i, tok.start_s, tok.end_s, sim))
                remaining.remove(item)
                break
    return hits


class NegationFilter(Protocol):
    def __call__(self, t: Transcript, hits: Sequence[MatchResult]) -> list[MatchResult]: ...


def filter_negated(t: Transcript, hits: Sequence[MatchResult],
                   window: int = DEFAULT_NEGATION_WINDOW,
                   lexicon: Iterable[str] = NEGATION_LEXICON,
                   passthrough: Iterable[str] = FUNCTION_WORDS) -> list[MatchResult]:
    """Drop hits preceded by a negation word within ``window`` tokens.

    Scanning back from a hit stops at the first token that is neither a
    negation nor a function word, so in "nicht Hut Ball" the negation covers
    "Hut" but not "Ball". Each hit is judged from the transcript alone,
    which keeps the filter idempotent.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    lexicon = frozenset(w.lower() for w in lexicon)
    passthrough = frozenset(w.lower() for w in passthrough)
    kept = []
    for h in hits:
        negated = False
        for j in range(h.token_index - 1, max(-1, h.token_index - 1 - window), -1):
            word = clean_token(t.tokens[j].text)
            if word in lexicon:
                negated = True
                break
            if word not in passthrough:
                break
        if not negated:
            kept.append(h)
    return kept


class RuleNegationFilter:
    """Built-in negation filter: lexicon lookup in a short preceding window."""

    def __init__(self, window: int = DEFAULT_NEGATION_WINDOW,
                 lexicon: Iterable[str] = NEGATION_LEXICON,
                 passthrough: Iterable[str] = FUNCTION_WORDS):
        self.window = window
        self.lexicon = frozenset(lexicon)
        self.passthrough = frozenset(passthrough)

    def __call__(self, t: Transcript, hits: Sequence[MatchResult]) -> list[MatchResult]:
        return filter_negated(t, hits, self.window, self.lexicon, self.passthrough)


class NoNegationFilter:
    def __call__(self, t: Transcript, hits: Sequence[MatchResult]) -> list[MatchResult]:
        return list(hits)


def negation_request(t: Transcript, hits: Sequence[MatchResult]) -> dict:
    return {"tokens": [tok.to_dict() for tok in t.tokens],
            "hits": [h.to_dict() for h in hits]}


def apply_kept_indices(hits: Sequence[MatchResult], reply: object) -> list[MatchResult]:
    """Validate a ``{"kept_hit_indices": [...]}`` reply and select those hits."""
    if not isinstance(reply, dict) or not isinstance(reply.get("kept_hit_indices"), list):
        raise ClientError("negation filter reply lacks a kept_hit_indices list", repr(reply)[:500])
    kept = reply["kept_hit_indices"]
    if not all(isinstance(k, int) and not isinstance(k, bool) and 0 <= k < len(hits) for k in kept):
        raise ClientError("negation filter returned out-of-range hit indices", repr(kept)[:500])
    return [hits[k] for k in sorted(set(kept))]


class CommandNegationFilter:
    """Negation filter delegated to an external command.

    The command receives ``{"tokens": [...], "hits": [...]}`` as JSON on stdin
    and must print ``{"kept_hit_indices": [...]}`` on stdout.
    """

    def __init__(self, command: Sequence[str] | str, timeout_s: float = 120.0):
        self.command = command
        self.timeout_s = timeout_s

    def __call__(self, t: Transcript, hits: Sequence[MatchResult]) -> list[MatchResult]:
        hits = list(hits)
        if not hits:
            return []
        payload = json.dumps(negation_request(t, hits), ensure_ascii=False)
        try:
            proc = subprocess.run(self.command, input=payload, capture_output=True, text=True,
                                  timeout=self.timeout_s, shell=isinstance(self.command, str))
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ClientError(f"negation filter could not run: {exc}") from None
        if proc.returncode != 0:
            raise ClientError(f"negation filter exited with status {proc.returncode}",
                              proc.stderr.strip())
        try:
            reply = json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise ClientError(f"negation filter printed malformed JSON ({exc})",
                              proc.stdout[:500]) from None
        return apply_kept_indices(hits, reply)
