"""Speech-segment post-processing and orchestration of external ASR/alignment clients.

Voice activity detection, Whisper inference and forced alignment all run
outside this package. Here we smooth the VAD segments, decide how audio is
cut into units for the recogniser (merged, chunked, prompted or raw), call a
client per unit and map its timestamps back onto the recording.
"""

from __future__ import annotations

import enum
import json
import subprocess
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping, Protocol, Sequence

from .errors import ClientError
from .model import Source, SubtestId, Transcript, WordToken, validate_transcript

DEFAULT_PAD_S = 0.25
DEFAULT_MIN_GAP_S = 0.5


class Strategy(str, enum.Enum):
    MERGED = "merged"
    CHUNKED = "chunked"
    PROMPTED = "prompted"
    RAW = "raw"


# default transcription strategy per subtest
DEFAULT_STRATEGIES: dict[SubtestId, Strategy] = {
    SubtestId.S1: Strategy.PROMPTED,
    SubtestId.S2: Strategy.MERGED,
    SubtestId.S3: Strategy.MERGED,
    SubtestId.S6: Strategy.MERGED,
    SubtestId.S7: Strategy.CHUNKED,
    SubtestId.S8: Strategy.MERGED,
    SubtestId.S9: Strategy.RAW,
}


@dataclass(frozen=True)
class Segment:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(f"segment end {self.end_s} must exceed start {self.start_s}")

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s

    def to_dict(self) -> dict[str, float]:
        return {"start_s": self.start_s, "end_s": self.end_s}


def segments_from_json(data: Any) -> list[Segment]:
    if isinstance(data, dict):
        data = data.get("segments")
    if not isinstance(data, list):
        raise ValueError("segments file must hold a list of {start_s, end_s}")
    return [Segment(float(d["start_s"]), float(d["end_s"])) for d in data]


def smooth_segments(segs: Sequence[Segment], min_gap_s: float = DEFAULT_MIN_GAP_S,
                    pad_s: float = DEFAULT_PAD_S, audio_len_s: float | None = None) -> list[Segment]:
    """Pad, clamp to the recording and merge segments separated by less than ``min_gap_s``.

    Running the result through again with ``pad_s=0`` changes nothing.
    """
    if min_gap_s < 0 or pad_s < 0 or (audio_len_s is not None and audio_len_s < 0):
        raise ValueError("min_gap_s, pad_s and audio_len_s must be non-negative")
    for a, b in zip(segs, segs[1:]):
        if b.start_s < a.end_s:
            raise ValueError("segments must be sorted and non-overlapping")
    hi = float("inf") if audio_len_s is None else audio_len_s
    out: list[list[float]] = []
    for s in segs:
        start = max(0.0, s.start_s - pad_s)
        end = min(hi, s.end_s + pad_s)
        if end <= start:
            continue
        # touching segments merge even when min_gap_s is 0; rounding keeps
        # 1.001 - 1.0 from counting as shorter than a 1 ms gap
        if out and (round(start - out[-1][1], 9) < min_gap_s or start <= out[-1][1]):
            out[-1][1] = max(out[-1][1], end)
        else:
            out.append([start, end])
    return [Segment(a, b) for a, b in out]


@dataclass(frozen=True)
class TranscriptionUnit:
    """One call to the recogniser: a single segment or a concatenation of segments."""

    chunk: int  # 1-based
    segments: tuple[Segment, ...]

    @property
    def start_s(self) -> float:
        return self.segments[0].start_s

    def to_global(self, t_local: float) -> float:
        """Map a time in the (possibly concatenated) unit audio to recording time."""
        if len(self.segments) == 1:
            return self.segments[0].start_s + t_local
        offset = 0.0
        for seg in self.segments:
            if t_local <= offset + seg.duration:
                return seg.start_s + (t_local - offset)
            offset += seg.duration
        last = self.segments[-1]
        return last.end_s + (t_local - offset)


@dataclass(frozen=True)
class SegmentPlan:
    strategy: Strategy
    chunks: tuple[Segment, ...]
    prompt_chain: bool = False

    def units(self) -> list[TranscriptionUnit]:
        if not self.chunks:
            return []
        if self.strategy is Strategy.MERGED:
            return [TranscriptionUnit(1, self.chunks)]
        return [TranscriptionUnit(i, (seg,)) for i, seg in enumerate(self.chunks, 1)]


def build_plan(segs: Sequence[Segment], strategy: Strategy | str,
               audio_len_s: float | None = None) -> SegmentPlan:
    """Arrange smoothed segments for transcription.

    ``RAW`` ignores the segments and transcribes the whole recording, so it
    needs ``audio_len_s``.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.RAW:
        if audio_len_s is None:
            if not segs:
                return SegmentPlan(Strategy.RAW, ())
            audio_len_s = segs[-1].end_s
        return SegmentPlan(Strategy.RAW, (Segment(0.0, audio_len_s),))
    return SegmentPlan(strategy, tuple(segs), prompt_chain=strategy is Strategy.PROMPTED)


# --- clients ---------------------------------------------------------------

class AsrClient(Protocol):
    def transcribe(self, request: Mapping[str, Any]) -> Any: ...


class AlignClient(Protocol):
    def align(self, request: Mapping[str, Any]) -> Any: ...


class CommandClient:
    """Client backed by a command that reads a JSON request on stdin and prints JSON."""

    def __init__(self, command: Sequence[str] | str, timeout_s: float = 600.0):
        self.command = command
        self.timeout_s = timeout_s

    def _call(self, request: Mapping[str, Any]) -> Any:
        try:
            proc = subprocess.run(self.command, input=json.dumps(request, ensure_ascii=False),
                                  capture_output=True, text=True, timeout=self.timeout_s,
                                  shell=isinstance(self.command, str))
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ClientError(f"client command could not run: {exc}") from None
        if proc.returncode != 0:
            raise ClientError(f"client command exited with status {proc.returncode}",
                              proc.stderr.strip())
        try:
            return json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise ClientError(f"client printed malformed JSON ({exc})", proc.stdout[:500]) from None

    transcribe = _call
    align = _call


class HttpClient:
    """Client that POSTs the JSON request to a URL and parses the JSON reply."""

    def __init__(self, url: str, timeout_s: float = 600.0):
        self.url = url
        self.timeout_s = timeout_s

    def _call(self, request: Mapping[str, Any]) -> Any:
        body = json.dumps(request, ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise ClientError(f"client request to {self.url} failed: {exc}") from None
        try:
            return json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ClientError(f"client returned malformed JSON ({exc})",
                              payload[:500].decode("utf-8", "replace")) from None

    transcribe = _call
    align = _call


def client_from_spec(spec: str, timeout_s: float = 600.0) -> CommandClient | HttpClient:
    """``http(s)://...`` selects :class:`HttpClient`, anything else is a shell command."""
    if spec.startswith(("http://", "https://")):
        return HttpClient(spec, timeout_s)
    return CommandClient(spec, timeout_s)


def _parse_tokens(reply: Any, where: str) -> list[dict[str, Any]]:
    if not isinstance(reply, dict) or not isinstance(reply.get("tokens"), list):
        raise ValueError(f"{where}: reply must be an object with a 'tokens' list")
    out = []
    for i, tok in enumerate(reply["tokens"]):
        try:
            text = tok["text"]
            start, end = float(tok["start_s"]), float(tok["end_s"])
        except (KeyError, TypeError, ValueError):
            raise ValueError(f"{where}: token {i} needs text, start_s and end_s") from None
        if not isinstance(text, str):
            raise ValueError(f"{where}: token {i} text is not a string")
        out.append({"text": text, "start_s": start, "end_s": end})
    return out


def _transcribe_unit(unit: TranscriptionUnit, n_units: int, audio_ref: Any,
                     client: AsrClient, prompt: str | None, language: str) -> list[WordToken]:
    request: dict[str, Any] = {
        "audio_chunk_ref": {
            "audio": audio_ref,
            "chunk": unit.chunk,
            "segments": [s.to_dict() for s in unit.segments],
        },
        "language": language,
    }
    if prompt is not None:
        request["prompt"] = prompt
    try:
        reply = client.transcribe(request)
        tokens = _parse_tokens(reply, f"chunk {unit.chunk}")
    except ClientError as exc:
        raise ClientError(f"ASR client failed on chunk {unit.chunk} of {n_units}: {exc}",
                          exc.diagnostics, chunk=unit.chunk) from None
    except ValueError as exc:
        raise ClientError(f"ASR client returned malformed output for chunk {unit.chunk} "
                          f"of {n_units}: {exc}", chunk=unit.chunk) from None
    out = []
    for tok in tokens:
        start = unit.to_global(tok["start_s"])
        end = max(start, unit.to_global(tok["end_s"]))
        out.append(WordToken(tok["text"], start, end))
    return out


def run_asr(plan: SegmentPlan, client: AsrClient, audio_ref: Any = None,
            language: str = "de", jobs: int = 1) -> Transcript:
    """Transcribe every unit of ``plan`` and join the tokens in recording time.

    Chunk-local timestamps are shifted by the chunk start; merged plans map
    concatenated time back through the segment boundaries. Prompted plans run
    sequentially, passing each chunk's text as prompt to the next one. Any
    chunk failure aborts the whole run.
    """
    units = plan.units()
    tokens: list[WordToken] = []
    if plan.prompt_chain:
        prompt = None
        for unit in units:
            chunk_tokens = _transcribe_unit(unit, len(units), audio_ref, client, prompt, language)
            tokens.extend(chunk_tokens)
            prompt = " ".join(t.text for t in chunk_tokens) or None
    elif jobs > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_transcribe_unit, u, len(units), audio_ref, client, None,
                                   language) for u in units]
            for fut in futures:
                tokens.extend(fut.result())
    else:
        for unit in units:
            tokens.extend(_transcribe_unit(unit, len(units), audio_ref, client, None, language))
    tokens.sort(key=lambda t: t.start_s)
    return Transcript(tuple(tokens), Source.ASR)


def run_alignment(transcript_text: str, audio_ref: Any, client: AlignClient) -> Transcript:
    """Attach word timestamps to a known text via an external forced aligner."""
    words = transcript_text.split()
    if not words:
        return Transcript((), Source.ASR)
    try:
        reply = client.align({"text": " ".join(words), "audio_ref": audio_ref})
        tokens = _parse_tokens(reply, "alignment")
    except ValueError as exc:
        raise ClientError(f"alignment client returned malformed output: {exc}") from None
    if len(tokens) != len(words):
        raise ClientError(f"alignment returned {len(tokens)} words for {len(words)} input words")
    t = Transcript(tuple(WordToken(w, tok["start_s"], tok["end_s"])
                         for w, tok in zip(words, tokens)), Source.ASR)
    problems = validate_transcript(t)
    if problems:
        raise ClientError("alignment output violates transcript invariants", "; ".join(problems))
    return t
