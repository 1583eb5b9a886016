import pytest
from hypothesis import given, settings, strategies as st

from sktscore.matcher import (CommandNegationFilter, MatchOptions, edit_budget, filter_negated,
                              find_expected, levenshtein, matches)
from sktscore.model import Speaker

from helpers import make_transcript, objects


def dp_oracle(a, b):
    """Textbook full-matrix Wagner-Fischer."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[-1][-1]


short = st.text(max_size=15)


@pytest.mark.parametrize("a,b,d", [("Hut", "Hut", 0), ("Hut", "Hund", 2), ("", "abc", 3),
                                   ("Schmeterling", "Schmetterling", 1)])
def test_levenshtein_examples(a, b, d):
    assert levenshtein(a, b) == d == dp_oracle(a, b)


@settings(max_examples=300)
@given(short, short)
def test_levenshtein_matches_oracle_and_is_symmetric(a, b):
    assert levenshtein(a, b) == dp_oracle(a, b) == levenshtein(b, a)
    assert (levenshtein(a, b) == 0) == (a == b)


@settings(max_examples=200)
@given(short, short, short)
def test_triangle_inequality(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@pytest.mark.parametrize("cand,target,expected", [
    ("Schmeterling", "Schmetterling", True), ("Hund", "Hut", False), ("BALL", "Ball", True),
    ("Bal", "Ball", False), ("Schmetterlin", "Schmetterling", True),
    ("Schmeterlin", "Schmetterling", False),
])
def test_matches_examples(cand, target, expected):
    assert matches(cand, target, 0.9) is expected


def test_budget_is_floored_on_target_length():
    assert edit_budget(9, 0.9) == 0
    assert edit_budget(10, 0.9) == 1
    assert edit_budget(20, 0.9) == 2
    assert edit_budget(5, 0.9, "ceil") == 1
    assert edit_budget(5, 0.9, "round") == 1


def test_empty_target_is_an_error():
    with pytest.raises(ValueError):
        matches("x", "")


@given(st.text(min_size=1, max_size=20), st.floats(0.0, 1.0))
def test_word_always_matches_itself(word, theta):
    assert matches(word, word, theta)


def test_find_expected_first_occurrence_in_token_order():
    t = make_transcript(["der", "Hut", "und", "Ball", "Hut"])
    hits = find_expected(t, objects("Hut", "Ball", "Schere"), 0.9)
    assert [(h.canonical, h.token_index) for h in hits] == [("Hut", 1), ("Ball", 3)]
    assert find_expected(make_transcript([]), objects("Hut")) == []


def test_find_expected_synonym_and_examiner_tokens():
    t = make_transcript(["Kappe"])
    [hit] = find_expected(t, objects("Mütze", synonyms={"Mütze": ("Kappe",)}))
    assert hit.canonical == "Mütze" and hit.matched_surface == "Kappe"
    t = make_transcript(["Hut", "Hut"], speakers=[Speaker.EXAMINER, None])
    [hit] = find_expected(t, objects("Hut"))
    assert hit.token_index == 1


@given(st.lists(st.sampled_from(["Hut", "Ball", "Schere", "Uhr", "der", "nicht", "Hutt"]),
                max_size=15))
def test_find_expected_unique_subset(words):
    exp = objects("Hut", "Ball", "Schere")
    hits = find_expected(make_transcript(words), exp)
    names = [h.canonical for h in hits]
    assert len(names) == len(set(names)) and set(names) <= set(exp.items)
    assert [h.token_index for h in hits] == sorted(h.token_index for h in hits)
    assert all(h.similarity >= 0.9 for h in hits)


@pytest.mark.parametrize("words,kept", [
    (["nicht", "der", "Hut"], []),
    (["der", "Hut"], ["Hut"]),
    (["nein", "aber", "doch", "Hut"], []),
    (["nicht", "Hut", "Ball"], ["Ball"]),
    (["nein", "der", "die", "das", "Hut"], ["Hut"]),
])
def test_negation_filter(words, kept):
    t = make_transcript(words)
    hits = find_expected(t, objects("Hut", "Ball"))
    assert [h.canonical for h in filter_negated(t, hits, 3)] == kept


@given(st.lists(st.sampled_from(["Hut", "Ball", "nicht", "kein", "der", "und", "Haus"]),
                max_size=15), st.integers(0, 5))
def test_negation_filter_subset_and_idempotent(words, window):
    t = make_transcript(words)
    hits = find_expected(t, objects("Hut", "Ball"))
    once = filter_negated(t, hits, window)
    assert all(h in hits for h in once)
    assert filter_negated(t, once, window) == once


def test_command_negation_filter(tmp_path):
    script = tmp_path / "keep_last.py"
    script.write_text("import json,sys\nr=json.load(sys.stdin)\n"
                      "print(json.dumps({'kept_hit_indices':[len(r['hits'])-1]}))\n")
    import sys
    t = make_transcript(["Hut", "Ball"])
    hits = find_expected(t, objects("Hut", "Ball"))
    kept = CommandNegationFilter([sys.executable, str(script)])(t, hits)
    assert [h.canonical for h in kept] == ["Ball"]


def test_match_options_reject_unknown_knobs():
    with pytest.raises(ValueError):
        MatchOptions(reference_side="middle")
