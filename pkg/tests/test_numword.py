import json
import time

import pytest
from hypothesis import given, strategies as st

from sktscore.numword import (DEFAULT_DIALECT, load_dialect, normalize_transcript,
                              number_to_words, parse_number_word)

from helpers import make_transcript

# independent oracle: spell 0..99 from scratch
_ONES = ["null", "eins", "zwei", "drei", "vier", "fünf", "sechs", "sieben", "acht", "neun"]
_TEN_TO_19 = ["zehn", "elf", "zwölf", "dreizehn", "vierzehn", "fünfzehn", "sechzehn",
              "siebzehn", "achtzehn", "neunzehn"]
_DECADES = {2: "zwanzig", 3: "dreißig", 4: "vierzig", 5: "fünfzig", 6: "sechzig",
            7: "siebzig", 8: "achtzig", 9: "neunzig"}


def oracle_spelling(n):
    if n < 10:
        return _ONES[n]
    if n < 20:
        return _TEN_TO_19[n - 10]
    t, u = divmod(n, 10)
    if u == 0:
        return _DECADES[t]
    head = "ein" if u == 1 else _ONES[u]
    return head + "und" + _DECADES[t]


ORACLE = {oracle_spelling(n): n for n in range(100)}


def test_every_number_word_0_to_99():
    t0 = time.perf_counter()
    got = {w: parse_number_word(w) for w in ORACLE}
    assert time.perf_counter() - t0 < 1.0
    assert got == ORACLE
    assert len(set(got.values())) == 100


def test_generator_agrees_with_oracle():
    assert all(number_to_words(n) == oracle_spelling(n) for n in range(100))


@pytest.mark.parametrize("word,value", [
    ("Zwo", 2), ("zwoundzwanzig", 22), ("Dreissig", 30), ("ein-und-zwanzig", 21),
    ("Siebzehn.", 17), ("47", 47), ("0", 0),
])
def test_variants(word, value):
    assert parse_number_word(word) == value


@pytest.mark.parametrize("word", [
    "ein", "eine", "Haus", "hundert", "einsundzwanzig", "zwanzigste", "007", "100",
    "undzwanzig", "zehnundzwanzig", "",
])
def test_rejected(word):
    assert parse_number_word(word) is None


def test_dialect_file_merges_over_default(tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"Oans": 1, "drü": 3}), encoding="utf-8")
    lex = load_dialect(p)
    assert lex["zwo"] == DEFAULT_DIALECT["zwo"]
    assert parse_number_word("oans", lex) == 1
    assert parse_number_word("drüundvierzig", lex) == 43


def test_dialect_rejects_out_of_range(tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"tausend": 1000}), encoding="utf-8")
    with pytest.raises(ValueError):
        load_dialect(p)


@given(st.lists(st.one_of(st.sampled_from(sorted(ORACLE)), st.sampled_from(
    ["Hut", "und", "äh", "zwo", "Ball"])), max_size=20))
def test_normalize_preserves_tokens_and_times(words):
    t = make_transcript(words)
    norm, spans = normalize_transcript(t)
    assert len(norm.tokens) == len(t.tokens)
    for a, b in zip(t.tokens, norm.tokens):
        assert (a.start_s, a.end_s) == (b.start_s, b.end_s)
    for s in spans:
        assert norm.tokens[s.token_index].text == str(s.value)
        assert t.tokens[s.token_index].text == s.surface
    # already normalised text is a fixed point
    again, _ = normalize_transcript(norm)
    assert again == norm
