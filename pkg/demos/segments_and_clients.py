"""
From voice activity segments to a timed transcript
==================================================

Smooth raw VAD output, cut it into transcription units and run a stand-in
recogniser. The same flow drives a real ASR service through ``skt transcribe``.
"""

# %%
from sktscore.pipeline import Segment, build_plan, run_asr, smooth_segments

raw = [Segment(0.40, 0.90), Segment(1.05, 1.60), Segment(4.00, 4.30), Segment(9.80, 10.5)]
smoothed = smooth_segments(raw, min_gap_s=0.5, pad_s=0.25, audio_len_s=10.6)
print(smoothed)

# %%
# Smoothing the result again with pad 0 changes nothing.
print(smooth_segments(smoothed, 0.5, 0.0, 10.6) == smoothed)


# %%
class EchoAsr:
    """Pretends every unit holds one word per segment, 0.1 s into the segment."""

    def transcribe(self, request):
        segs = request["audio_chunk_ref"]["segments"]
        out, offset = [], 0.0
        for k, s in enumerate(segs):
            out.append({"text": f"w{k}", "start_s": offset + 0.1, "end_s": offset + 0.3})
            offset += s["end_s"] - s["start_s"]
        return {"tokens": out}


for strategy in ("merged", "chunked", "prompted"):
    plan = build_plan(smoothed, strategy)
    t = run_asr(plan, EchoAsr())
    print(strategy, len(plan.units()), "units:", [(tok.text, round(tok.start_s, 2)) for tok in t.tokens])
