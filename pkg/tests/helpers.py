from __future__ import annotations


from sktscore.model import (ExpectedKind, ExpectedResponse, IqBand, Source, SubjectMeta,
                            SubtestId, SubtestRecord, Transcript, WordToken)

META = SubjectMeta(72, IqBand.BAND_90_TO_110)


def make_transcript(words, start=1.0, step=1.0, dur=0.5, source=Source.ASR, speakers=None):
    toks = []
    for i, w in enumerate(words):
        s = start + i * step
        sp = speakers[i] if speakers else None
        toks.append(WordToken(w, s, s + dur, speaker=sp))
    return Transcript(tuple(toks), source)


def make_record(subtest, transcript, expected, onset=0.0, meta=META):
    return SubtestRecord("p01", SubtestId.parse(subtest), transcript, onset, expected, meta)


def objects(*items, synonyms=None):
    return ExpectedResponse(ExpectedKind.OBJECT_SET, items, synonyms or {})


