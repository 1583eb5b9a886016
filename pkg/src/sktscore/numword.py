"""German number words 0-99 to digit strings.

Parsing works on single tokens only; a numeral that the recogniser split
into several tokens ("ein und zwanzig") is left alone so that every digit
token keeps the timestamps of exactly one spoken word.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

from .model import Transcript

UNITS = {
    "null": 0, "eins": 1, "zwei": 2, "drei": 3, "vier": 4,
    "fünf": 5, "sechs": 6, "sieben": 7, "acht": 8, "neun": 9,
}
TEENS = {
    "zehn": 10, "elf": 11, "zwölf": 12, "dreizehn": 13, "vierzehn": 14,
    "fünfzehn": 15, "sechzehn": 16, "siebzehn": 17, "achtzehn": 18, "neunzehn": 19,
}
TENS = {
    "zwanzig": 20, "dreißig": 30, "vierzig": 40, "fünfzig": 50,
    "sechzig": 60, "siebzig": 70, "achtzig": 80, "neunzig": 90,
}
# unit words as they appear in front of "und": "einundzwanzig", not "einsundzwanzig"
COMPOUND_UNITS = {"ein": 1, **{w: v for w, v in UNITS.items() if 2 <= v <= 9}}

DEFAULT_DIALECT: dict[str, int] = {"zwo": 2}

_SIMPLE = {**UNITS, **TEENS, **TENS}
_DIGITS = re.compile(r"0|[1-9][0-9]?")
_COMPOUND = re.compile(r"(?P<unit>[a-zäöüß]+?)und(?P<tens>[a-zäöüß]+)")
_STRIP = ".,;:!?\"'()[]«»„“”…"


@dataclass(frozen=True)
class NumberSpan:
    token_index: int
    surface: str
    value: int


def _clean(word: str) -> str:
    w = word.strip().strip(_STRIP).lower()
    # hyphenated ASR spellings ("ein-und-zwanzig") are treated as one word
    w = w.replace("-", "")
    # "dreissig" is the only 0-99 word where ss/ß can vary
    return w.replace("ss", "ß")


def parse_number_word(word: str, dialect: Mapping[str, int] | None = None) -> int | None:
    """Value of a single spoken German number token, or None.

    >>> parse_number_word("einundzwanzig")
    21
    >>> parse_number_word("Zwo")
    2
    >>> parse_number_word("Haus") is None
    True
    """
    dialect = DEFAULT_DIALECT if dialect is None else dialect
    w = _clean(word)
    if not w:
        return None
    if _DIGITS.fullmatch(w):
        return int(w)
    if w in _SIMPLE:
        return _SIMPLE[w]
    if w in dialect:
        return dialect[w]
    m = _COMPOUND.fullmatch(w)
    if m:
        unit = COMPOUND_UNITS.get(m["unit"])
        if unit is None:
            d = dialect.get(m["unit"])
            unit = d if d is not None and 1 <= d <= 9 else None
        tens = TENS.get(m["tens"])
        if unit is not None and tens is not None:
            return tens + unit
    return None


def normalize_transcript(
    t: Transcript, dialect: Mapping[str, int] | None = None
) -> tuple[Transcript, list[NumberSpan]]:
    """Replace every number-word token by its digit string.

    Token count and timestamps are left untouched.
    """
    tokens = list(t.tokens)
    spans = []
    for i, tok in enumerate(tokens):
        value = parse_number_word(tok.text, dialect)
        if value is None:
            continue
        spans.append(NumberSpan(i, tok.text, value))
        tokens[i] = replace(tok, text=str(value))
    return replace(t, tokens=tuple(tokens)), spans


def load_dialect(path: str | Path) -> dict[str, int]:
    """Read a dialect lexicon (JSON object word -> integer 0-99) merged over the default."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: dialect lexicon must be a JSON object")
    lexicon = dict(DEFAULT_DIALECT)
    for word, value in data.items():
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 99:
            raise ValueError(f"{path}: {word!r} must map to an integer 0-99")
        lexicon[_clean(word)] = value
    return lexicon


_UNIT_WORDS = {v: w for w, v in UNITS.items()}
_TEEN_WORDS = {v: w for w, v in TEENS.items()}
_TENS_WORDS = {v: w for w, v in TENS.items()}


def number_to_words(n: int) -> str:
    """Canonical German spelling of 0..99 ("einundzwanzig")."""
    if not 0 <= n <= 99:
        raise ValueError("only 0..99 are supported")
    if n < 10:
        return _UNIT_WORDS[n]
    if n < 20:
        return _TEEN_WORDS[n]
    tens, unit = divmod(n, 10)
    if unit == 0:
        return _TENS_WORDS[n]
    unit_word = "ein" if unit == 1 else _UNIT_WORDS[unit]
    return f"{unit_word}und{_TENS_WORDS[tens * 10]}"
