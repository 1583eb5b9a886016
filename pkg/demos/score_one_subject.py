"""
Scoring one subject by hand
===========================

Build transcripts for a few subtests, score them and map the raw values
through the (synthetic) example norm table.
"""

# %%
from sktscore.model import (ExpectedKind, ExpectedResponse, IqBand, SubjectMeta, SubtestId,
                            SubtestRecord, Transcript, WordToken)
from sktscore.norms import assemble_result, example_norms_path, load_norm_table
from sktscore.scoring import ScoringConfig, TimedMode, score_record


def words(*timed):
    return Transcript(tuple(WordToken(w, s, e) for w, s, e in timed))


meta = SubjectMeta(age_years=74, iq_band=IqBand.BAND_90_TO_110)
objects = ExpectedResponse(ExpectedKind.OBJECT_SET,
                           ("Schlüssel", "Brille", "Schere", "Tasse", "Apfel", "Uhr"),
                           {"Tasse": ("Becher",)})

# %%
# Naming: time runs from task onset to the end of the last object named.
# "Schlussel" is one edit away from a 9-letter word, which is too much at
# the 0.9 threshold, so only the later correct naming counts.
s1 = words(("Schlussel", 2.1, 2.6), ("Brille", 3.0, 3.4), ("äh", 4.0, 4.2),
           ("Becher", 5.0, 5.5), ("Schlüssel", 9.0, 9.6))
rec = SubtestRecord("demo", SubtestId.S1, s1, 1.0, objects, meta)
print(score_record(rec))

# %%
# Recognition: "nicht" cancels the object right after it, not the one after that.
s9 = words(("nicht", 1.0, 1.2), ("Schere", 1.3, 1.8), ("Apfel", 2.0, 2.4), ("Uhr", 3.0, 3.2))
rec9 = SubtestRecord("demo", SubtestId.S9, s9, 0.5, objects, meta)
r9 = score_record(rec9)
print(r9.value, [m.canonical for m in r9.matched])

# %%
# Counting: the subject stops at 14 but keeps chatting. LAST_EXPECTED ends at
# the last valid count, LAST_WORD at the last word.
counting = ExpectedResponse(ExpectedKind.COUNT_RANGE, ("count",), count_min=1, count_max=40)
s6 = words(("zwölf", 10.0, 10.4), ("dreizehn", 11.0, 11.5), ("vierzehn", 12.0, 12.6),
           ("so", 20.0, 20.2), ("fertig", 21.0, 21.4))
rec6 = SubtestRecord("demo", SubtestId.S6, s6, 2.0, counting, meta)
for mode in TimedMode:
    print(mode.value, score_record(rec6, ScoringConfig(s6_mode=mode)).value)

# %%
# Interference with nothing usable in the transcript: the 60 s fallback.
letters = ExpectedResponse(ExpectedKind.LETTER_SET, ("A", "B"))
s7 = words(("hm", 3.0, 3.3), ("weiß", 4.0, 4.2), ("nicht", 4.3, 4.6))
print(score_record(SubtestRecord("demo", SubtestId.S7, s7, 1.0, letters, meta)))

# %%
# Norm values and total. The example table is invented, hence the explicit opt-in.
table = load_norm_table(example_norms_path(), allow_example=True)
raws = {r.subtest: score_record(r) for r in (rec, rec9, rec6)}
result = assemble_result("demo", meta, raws, table)
print(result.norm_scores, result.total, result.severity.value, "partial:", result.partial)
