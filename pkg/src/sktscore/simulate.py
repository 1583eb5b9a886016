"""Synthetic SKT cohorts that reproduce subgroup evaluation pitfalls.

Each simulated subject gets a true SKT total inside its group's band, raw
scores that worsen with severity, a manual ("ground truth") transcript per
subtest and an ASR transcript corrupted with group-dependent error rates.
The pitfall study then pushes both transcripts through the real scorer and
metrics code, so pooled-vs-subgroup correlation gaps, fallback bias and the
word-count confound can be inspected on data that is safe to share.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ._jsonio import InputError, load_config_file
from .matcher import clean_token
from .metrics import GROUPS, POOLED, GroupReport, ResultRow, subgroup_report, tokenize
from .model import (ExpectedKind, ExpectedResponse, IqBand, Source, Speaker, SubjectBundle,
                    SubjectMeta, SubtestId, SubtestRecord, Transcript, WordToken)
from .numword import normalize_transcript, number_to_words, parse_number_word
from .scoring import FALLBACK_SECONDS, ScoringConfig, score_record

OBJECTS = ("Schmetterling", "Schlüssel", "Fahrrad", "Brille", "Lampe", "Schere",
           "Tasse", "Blume", "Auto", "Ball", "Hut", "Uhr")
OBJECT_SYNONYMS = {"Tasse": ("Becher",), "Auto": ("Wagen",), "Fahrrad": ("Rad",)}
INTRUSIONS = ("Tisch", "Stuhl", "Buch", "Messer", "Teller", "Haus")
S3_NUMBERS = (47, 23, 81, 36, 59, 14, 72, 68, 95, 30)
S6_COUNT_RANGE = (1, 40)
S6_TARGET = 28
LETTERS = ("A", "B")
LETTER_SYNONYMS = {"A": ("ah",), "B": ("be", "bee")}
FILLERS = ("äh", "ähm", "also", "ja", "dann", "hm", "so")
CHATTER = ("und", "dann", "war", "da", "noch", "glaube", "ich", "was", "das", "hier", "sonst")
GARBAGE = ("da", "was", "na", "jetzt", "gut", "mal", "oh", "tja")

GROUP_BANDS = {"NCI": (0, 4), "MCI": (5, 8), "DEM": (9, 27)}
SIM_SUBTESTS = (SubtestId.S1, SubtestId.S2, SubtestId.S3, SubtestId.S6,
                SubtestId.S7, SubtestId.S8, SubtestId.S9)


def default_expected() -> dict[SubtestId, ExpectedResponse]:
    objects = ExpectedResponse(ExpectedKind.OBJECT_SET, OBJECTS, OBJECT_SYNONYMS)
    return {
        SubtestId.S1: objects,
        SubtestId.S2: objects,
        SubtestId.S8: objects,
        SubtestId.S9: objects,
        SubtestId.S3: ExpectedResponse(ExpectedKind.NUMBER_SET, tuple(str(n) for n in S3_NUMBERS)),
        SubtestId.S6: ExpectedResponse(ExpectedKind.COUNT_RANGE, ("count",),
                                       count_min=S6_COUNT_RANGE[0], count_max=S6_COUNT_RANGE[1]),
        SubtestId.S7: ExpectedResponse(ExpectedKind.LETTER_SET, LETTERS, LETTER_SYNONYMS),
    }


def _per_group(nci: float, mci: float, dem: float) -> dict[str, float]:
    return {"NCI": nci, "MCI": mci, "DEM": dem}


@dataclass(frozen=True)
class SimConfig:
    n_subjects: int = 158
    seed: int = 42
    # cohort composition of the reference clinical sample (68 / 44 / 46)
    group_mix: Mapping[str, float] = field(
        default_factory=lambda: _per_group(68 / 158, 44 / 158, 46 / 158))
    # DEM totals are 9 + Poisson(dem_total_excess_mean), capped at 27
    dem_total_excess_mean: float = 8.0
    # objects named in immediate recall, at the group's mean severity
    items_named_mean: Mapping[str, float] = field(default_factory=lambda: _per_group(9.0, 7.0, 4.0))
    # change in items named per SKT point within a group
    items_named_slope: float = -0.3
    asr_sub_rate: Mapping[str, float] = field(default_factory=lambda: _per_group(0.08, 0.09, 0.12))
    asr_del_rate: Mapping[str, float] = field(default_factory=lambda: _per_group(0.06, 0.07, 0.10))
    asr_ins_rate: Mapping[str, float] = field(default_factory=lambda: _per_group(0.03, 0.03, 0.04))
    # chance that a fast speaker's letter sequence triggers repetition hallucinations
    hallucination_rate_fast_speech: float = 0.45
    fast_speech_groups: tuple[str, ...] = ("NCI",)
    # chance that the recogniser loses every valid token of a number/letter task
    fallback_rate: Mapping[str, float] = field(default_factory=lambda: _per_group(0.10, 0.07, 0.08))
    # chance that a subject gives no valid answer at all in a timed number/letter task
    no_response_rate: Mapping[str, float] = field(default_factory=lambda: _per_group(0.0, 0.02, 0.12))
    filler_rate: Mapping[str, float] = field(default_factory=lambda: _per_group(0.12, 0.14, 0.16))
    # mean number of spontaneous comment words per object task
    chatter_mean: Mapping[str, float] = field(default_factory=lambda: _per_group(5.0, 3.5, 1.5))
    pointing_rate: float = 0.02
    denial_rate: float = 0.25
    digit_output_rate: float = 0.5
    timestamp_jitter_s: float = 0.05
    expert_timing_sd_s: float = 1.0
    timed_base_s: Mapping[str, float] = field(
        default_factory=lambda: {"S1": 12.0, "S3": 10.0, "S6": 14.0, "S7": 16.0})
    timed_per_point_s: Mapping[str, float] = field(
        default_factory=lambda: {"S1": 1.8, "S3": 1.6, "S6": 2.0, "S7": 2.4})
    timed_sd_s: float = 3.0

    def validate(self) -> None:
        problems = []
        if not isinstance(self.n_subjects, int) or self.n_subjects < 1:
            problems.append("n_subjects must be a positive integer")
        for name in ("group_mix", "items_named_mean", "asr_sub_rate", "asr_del_rate",
                     "asr_ins_rate", "fallback_rate", "no_response_rate", "filler_rate",
                     "chatter_mean"):
            m = getattr(self, name)
            if set(m) != set(GROUPS):
                problems.append(f"{name} must have exactly the keys NCI, MCI, DEM")
        if set(self.group_mix) == set(GROUPS):
            if any(v < 0 for v in self.group_mix.values()):
                problems.append("group_mix fractions must be non-negative")
            if abs(sum(self.group_mix.values()) - 1.0) > 1e-9:
                problems.append("group_mix must sum to 1")
        for name in ("asr_sub_rate", "asr_del_rate", "asr_ins_rate", "fallback_rate",
                     "no_response_rate", "filler_rate"):
            if any(not 0.0 <= v <= 1.0 for v in getattr(self, name).values()):
                problems.append(f"{name} values must lie in [0, 1]")
        for g in GROUPS:
            if self.asr_sub_rate.get(g, 0) + self.asr_del_rate.get(g, 0) > 1.0:
                problems.append(f"asr_sub_rate + asr_del_rate exceeds 1 for {g}")
        for name in ("hallucination_rate_fast_speech", "pointing_rate", "denial_rate",
                     "digit_output_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must lie in [0, 1]")
        if any(g not in GROUPS for g in self.fast_speech_groups):
            problems.append("fast_speech_groups may only name NCI, MCI, DEM")
        if any(v < 0 for v in self.chatter_mean.values()):
            problems.append("chatter_mean values must be non-negative")
        for name in ("timestamp_jitter_s", "expert_timing_sd_s", "timed_sd_s",
                     "dem_total_excess_mean"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if set(self.timed_base_s) != {"S1", "S3", "S6", "S7"} or \
                set(self.timed_per_point_s) != {"S1", "S3", "S6", "S7"}:
            problems.append("timed_base_s / timed_per_point_s need keys S1, S3, S6, S7")
        if problems:
            raise ValueError("invalid simulation config: " + "; ".join(problems))

    def noiseless(self) -> "SimConfig":
        """Same cohort design with every error source switched off."""
        zero = _per_group(0.0, 0.0, 0.0)
        return replace(self, asr_sub_rate=zero, asr_del_rate=zero, asr_ins_rate=zero,
                       fallback_rate=zero, hallucination_rate_fast_speech=0.0,
                       pointing_rate=0.0, timestamp_jitter_s=0.0, expert_timing_sd_s=0.0)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["fast_speech_groups"] = list(self.fast_speech_groups)
        return {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in d.items()}


def sim_config_from_dict(data: Mapping[str, Any]) -> SimConfig:
    known = set(SimConfig.__dataclass_fields__)
    unknown = sorted(set(data) - known - {"scoring"})
    if unknown:
        raise ValueError(f"unknown simulation config keys: {', '.join(unknown)}")
    kwargs = {k: v for k, v in data.items() if k in known}
    if "fast_speech_groups" in kwargs:
        kwargs["fast_speech_groups"] = tuple(kwargs["fast_speech_groups"])
    cfg = SimConfig(**kwargs)
    cfg.validate()
    return cfg


def load_sim_config(path: str | Path, seed: int | None = None) -> tuple[SimConfig, dict]:
    """Read a JSON/TOML simulation config; returns (config, embedded scoring section)."""
    data = load_config_file(path)
    try:
        cfg = sim_config_from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc), str(path)) from None
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg, dict(data.get("scoring", {}))


def default_sim_config_path() -> Path:
    return Path(str(resources.files("sktscore") / "data" / "sim_default.json"))


# --- subjects ----------------------------------------------------------------

@dataclass(frozen=True)
class SimSubject:
    subject_id: str
    group: str
    true_total: int
    age_years: int
    iq_band: IqBand
    expert_raw: Mapping[SubtestId, float]
    onsets: Mapping[SubtestId, float]
    truth: Mapping[SubtestId, Transcript]
    asr: Mapping[SubtestId, Transcript]
    word_count: int

    @property
    def meta(self) -> SubjectMeta:
        return SubjectMeta(self.age_years, self.iq_band, self.true_total, dict(self.expert_raw))

    def bundle(self, source: Source = Source.ASR,
               expected: Mapping[SubtestId, ExpectedResponse] | None = None) -> SubjectBundle:
        expected = expected or default_expected()
        transcripts = self.asr if source is Source.ASR else self.truth
        meta = self.meta
        records = tuple(
            SubtestRecord(self.subject_id, sub, transcripts[sub], self.onsets[sub],
                          expected[sub], meta)
            for sub in SIM_SUBTESTS)
        return SubjectBundle(self.subject_id, meta, records)


def allocate_groups(n: int, mix: Mapping[str, float]) -> list[str]:
    """Largest-remainder allocation of ``n`` subjects to groups, in group order."""
    quotas = {g: n * mix[g] for g in GROUPS}
    counts = {g: int(math.floor(q + 1e-9)) for g, q in quotas.items()}
    rest = n - sum(counts.values())
    for g in sorted(GROUPS, key=lambda g: (-(quotas[g] - counts[g]), GROUPS.index(g)))[:rest]:
        counts[g] += 1
    return [g for g in GROUPS for _ in range(counts[g])]


def _draw_total(group: str, rng: np.random.Generator, dem_excess_mean: float) -> int:
    lo, hi = GROUP_BANDS[group]
    if group == "DEM":
        return int(min(hi, lo + rng.poisson(dem_excess_mean)))
    return int(rng.integers(lo, hi + 1))


def _ms(x: float) -> float:
    return round(float(x), 3)


class _Speech:
    """Builds a token stream on a time axis."""

    def __init__(self, rng: np.random.Generator, filler_rate: float):
        self.rng = rng
        self.filler_rate = filler_rate

    def lay_out(self, words: Sequence[str], onset: float, end: float) -> list[WordToken]:
        """Spread ``words`` (plus random fillers) so the last word ends exactly at ``end``."""
        rng = self.rng
        seq: list[tuple[str, bool]] = []
        for i, w in enumerate(words):
            if i > 0 and rng.random() < self.filler_rate:
                seq.append((str(rng.choice(FILLERS)), False))
            seq.append((w, True))
        if not seq:
            return []
        start = onset + float(rng.uniform(0.3, 1.0))
        end = max(end, start + 0.05 * len(seq))
        step = (end - start) / len(seq)
        out = []
        for k, (w, _) in enumerate(seq):
            t0 = start + k * step
            t1 = t0 + min(0.45, 0.8 * step)
            out.append(WordToken(w, _ms(t0), _ms(t1)))
        last = out[-1]
        out[-1] = WordToken(last.text, min(last.start_s, _ms(end)), _ms(end))
        return out


def _true_duration(cfg: SimConfig, sub: SubtestId, total: int,
                   rng: np.random.Generator) -> tuple[float, float]:
    """(task seconds capped at 60, share of the task finished within 60 s)."""
    d = max(3.0, cfg.timed_base_s[sub.value] + cfg.timed_per_point_s[sub.value] * total
            + rng.normal(0.0, cfg.timed_sd_s))
    return _ms(min(60.0, d)), min(1.0, 60.0 / d)


def _named_count(mean: float, rng: np.random.Generator, n_items: int = len(OBJECTS)) -> int:
    return int(np.clip(round(rng.normal(mean, 1.2)), 0, n_items))


def _misspell(word: str, rng: np.random.Generator) -> str:
    chars = list(word.lower())
    for _ in range(int(rng.integers(1, 3))):
        pos = int(rng.integers(0, len(chars)))
        op = rng.random()
        letter = str(rng.choice(list("aeinrstlu")))
        if op < 0.5:
            chars[pos] = letter
        elif op < 0.75 and len(chars) > 2:
            del chars[pos]
        else:
            chars.insert(pos, letter)
    out = "".join(chars)
    return out if out != word.lower() else out + "e"


def _substitute(tok: WordToken, rng: np.random.Generator) -> WordToken:
    word = clean_token(tok.text)
    n = parse_number_word(word)
    if n is not None:
        other = int(rng.integers(0, 100))
        if other == n:
            other = (n + 11) % 100
        return replace(tok, text=number_to_words(other))
    if word in ("a", "b"):
        return replace(tok, text=str(rng.choice(GARBAGE)))
    if len(word) >= 3:
        return replace(tok, text=_misspell(tok.text, rng))
    return replace(tok, text=str(rng.choice(GARBAGE)))


def _corrupt(tokens: Sequence[WordToken], group: str, cfg: SimConfig,
             rng: np.random.Generator, digits: bool) -> list[WordToken]:
    sub_p, del_p, ins_p = cfg.asr_sub_rate[group], cfg.asr_del_rate[group], cfg.asr_ins_rate[group]
    out: list[WordToken] = []
    for tok in tokens:
        if tok.speaker is Speaker.EXAMINER:
            # the recogniser has no speaker labels
            tok = replace(tok, speaker=None)
        u = rng.random()
        if u < del_p:
            continue
        if u < del_p + sub_p:
            tok = _substitute(tok, rng)
        if digits:
            n = parse_number_word(tok.text)
            if n is not None:
                tok = replace(tok, text=str(n))
        if cfg.timestamp_jitter_s > 0:
            j0, j1 = rng.normal(0.0, cfg.timestamp_jitter_s, size=2)
            start = max(0.0, tok.start_s + float(j0))
            tok = replace(tok, start_s=_ms(start), end_s=_ms(max(start, tok.end_s + float(j1))))
        out.append(tok)
        if rng.random() < ins_p:
            t = out[-1].end_s
            out.append(WordToken(str(rng.choice(GARBAGE)), _ms(t + 0.01), _ms(t + 0.2)))
    out.sort(key=lambda t: t.start_s)
    return out


def _lose_valid_tokens(tokens: Sequence[WordToken], rng: np.random.Generator) -> list[WordToken]:
    """What a recogniser produces when it misses every valid answer word."""
    return [replace(t, text=str(rng.choice(GARBAGE + FILLERS))) for t in tokens[: max(1, len(tokens) // 4)]]


def _hallucinate_repetitions(tokens: list[WordToken], onset: float,
                             rng: np.random.Generator) -> list[WordToken]:
    letters = [t for t in tokens if clean_token(t.text) in ("a", "b")]
    if not letters:
        return tokens
    pattern = [t.text for t in letters[-2:]]
    t = tokens[-1].end_s
    # the decoder loops until some point before the recording is cut at 60 s
    stop = float(rng.uniform(t, onset + 60.0))
    out = list(tokens)
    k = 0
    while t + 0.35 <= stop:
        t0 = t + 0.05
        t1 = t0 + 0.3
        out.append(WordToken(pattern[k % len(pattern)], _ms(t0), _ms(t1)))
        t = t1
        k += 1
    return out


def _simulate_subject(index: int, group: str, cfg: SimConfig,
                      rng: np.random.Generator) -> SimSubject:
    total = _draw_total(group, rng, cfg.dem_total_excess_mean)
    age = int(np.clip(round(rng.normal(73.7, 9.0)), 49, 89))
    iq_band = [IqBand.BELOW_90, IqBand.BAND_90_TO_110, IqBand.ABOVE_110][
        int(rng.choice(3, p=[0.2, 0.6, 0.2]))]
    speech = _Speech(rng, cfg.filler_rate[group])
    lo, hi = GROUP_BANDS[group]
    centre = (lo + min(hi, 15)) / 2.0
    named_mean = cfg.items_named_mean[group] + cfg.items_named_slope * (total - centre)
    digits = rng.random() < cfg.digit_output_rate

    truth: dict[SubtestId, list[WordToken]] = {}
    onsets: dict[SubtestId, float] = {}
    expert: dict[SubtestId, float] = {}
    no_response: set[SubtestId] = set()
    k2 = 0

    for sub in SIM_SUBTESTS:
        onset = _ms(rng.uniform(0.5, 3.0))
        onsets[sub] = onset
        if sub is SubtestId.S1:
            d, done = _true_duration(cfg, sub, total, rng)
            n_named = len(OBJECTS) - int(rng.binomial(len(OBJECTS), min(0.5, 0.01 * total)))
            n_named = max(1, int(round(n_named * done)))
            names = [str(w) for w in rng.permutation(OBJECTS)[:n_named]]
            truth[sub] = speech.lay_out(names, onset, onset + d)
            expert[sub] = d
        elif sub in (SubtestId.S2, SubtestId.S8, SubtestId.S9):
            if sub is SubtestId.S2:
                k = _named_count(named_mean, rng)
            elif sub is SubtestId.S8:
                k = int(np.clip(k2 - rng.binomial(max(k2, 0), min(0.6, 0.03 * total + 0.05)),
                                0, len(OBJECTS)))
            else:
                k = _named_count(named_mean + 3.0, rng)
            order = list(rng.permutation(OBJECTS))
            named, rest = order[:k], order[k:]
            words: list[str] = []
            for obj in named:
                if sub is SubtestId.S9 and rng.random() < 0.3:
                    words.extend(["ja", "der", obj])
                else:
                    words.append(obj)
            if sub is SubtestId.S9:
                for obj in rest:
                    if rng.random() < cfg.denial_rate:
                        words.extend(["nicht", obj])
            if group == "DEM" and rng.random() < 0.3:
                words.append(str(rng.choice(INTRUSIONS)))
            words.extend(str(w) for w in rng.choice(CHATTER, size=rng.poisson(cfg.chatter_mean[group])))
            if sub is not SubtestId.S9:
                words = [words[j] for j in rng.permutation(len(words))]
            if sub is SubtestId.S2:
                k2 = k
            span = 2.0 * max(len(words), 1)
            if sub is SubtestId.S9 and rng.random() < cfg.pointing_rate:
                # points at the pictures instead of naming them
                t0 = onset + 0.5
                truth[sub] = [WordToken(w, _ms(t0 + 0.4 * i), _ms(t0 + 0.4 * i + 0.3),
                                        speaker=Speaker.EXAMINER)
                              for i, w in enumerate(("und", "welche", "noch"))]
            else:
                truth[sub] = speech.lay_out([str(w) for w in words], onset, onset + span) if words else []
            expert[sub] = float(len(OBJECTS) - k)
        else:
            d, done = _true_duration(cfg, sub, total, rng)
            if rng.random() < cfg.no_response_rate[group]:
                no_response.add(sub)
                truth[sub] = speech.lay_out(["äh", "ich", "weiß", "nicht"], onset, onset + 4.0)
                expert[sub] = FALLBACK_SECONDS
                continue
            if sub is SubtestId.S3:
                words = [number_to_words(n) for n in S3_NUMBERS]
            elif sub is SubtestId.S6:
                words = [number_to_words(n) for n in range(1, S6_TARGET + 1)]
            else:
                words = [str(rng.choice(LETTERS)) for _ in range(24)]
            # slow subjects are stopped at 60 s before finishing
            words = words[:max(1, int(round(len(words) * done)))]
            toks = speech.lay_out(words, onset, onset + d)
            if sub is SubtestId.S6 and rng.random() < 0.5:
                toks.append(WordToken("fertig", _ms(toks[-1].end_s + 0.3), _ms(toks[-1].end_s + 0.7)))
            truth[sub] = toks
            expert[sub] = d

    if cfg.expert_timing_sd_s > 0:
        for sub in (SubtestId.S1, SubtestId.S3, SubtestId.S6, SubtestId.S7):
            if sub in no_response:
                continue
            noisy = expert[sub] + rng.normal(0.0, cfg.expert_timing_sd_s)
            expert[sub] = _ms(min(60.0, max(0.0, noisy)))

    asr: dict[SubtestId, list[WordToken]] = {}
    for sub in SIM_SUBTESTS:
        toks = _corrupt(truth[sub], group, cfg, rng, digits)
        if sub in (SubtestId.S3, SubtestId.S6, SubtestId.S7) and truth[sub] \
                and rng.random() < cfg.fallback_rate[group]:
            toks = _lose_valid_tokens(toks or truth[sub], rng)
        if sub is SubtestId.S7 and group in cfg.fast_speech_groups and toks \
                and rng.random() < cfg.hallucination_rate_fast_speech:
            toks = _hallucinate_repetitions(toks, onsets[sub], rng)
        if toks and toks[0].start_s < onsets[sub]:
            toks[0] = replace(toks[0], start_s=onsets[sub], end_s=max(onsets[sub], toks[0].end_s))
        asr[sub] = toks

    word_count = sum(1 for toks in truth.values() for t in toks if t.speaker is not Speaker.EXAMINER)
    return SimSubject(
        subject_id=f"sim{index:04d}",
        group=group,
        true_total=total,
        age_years=age,
        iq_band=iq_band,
        expert_raw=expert,
        onsets=onsets,
        truth={s: Transcript(tuple(v), Source.GROUND_TRUTH) for s, v in truth.items()},
        asr={s: Transcript(tuple(v), Source.ASR) for s, v in asr.items()},
        word_count=word_count,
    )


def generate_cohort(config: SimConfig) -> list[SimSubject]:
    """Seeded synthetic cohort; every subject draws from its own child RNG stream."""
    config.validate()
    groups = allocate_groups(config.n_subjects, config.group_mix)
    order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    groups = [groups[i] for i in order_rng.permutation(len(groups))]
    children = np.random.SeedSequence(config.seed).spawn(config.n_subjects)
    return [_simulate_subject(i, g, config, np.random.default_rng(children[i]))
            for i, g in enumerate(groups)]


def cohort_to_records(cohort: Sequence[SimSubject], source: Source = Source.ASR) -> list[dict]:
    """The cohort in the records-file format read by ``skt score``."""
    return [s.bundle(source).to_dict() for s in cohort]


# --- pitfall study -------------------------------------------------------------

@dataclass(frozen=True)
class PitfallSummary:
    pooled_r: float | None
    group_r: Mapping[str, float | None]
    pooled_r_gt: float | None
    group_r_gt: Mapping[str, float | None]
    gap_pooled_minus_min_group: float | None
    gap_pooled_minus_nci: float | None
    group_size: Mapping[str, int]
    fallback_count: Mapping[str, int]
    # fallback flags per subject in the group (count / group size)
    fallback_rate: Mapping[str, float]
    # mean |automatic - expert| over fallback-scored subtests
    fallback_abs_error: Mapping[str, float | None]
    fallback_asymmetry_nci_minus_dem: float | None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _words(t: Transcript) -> tuple[str, ...]:
    norm, _ = normalize_transcript(t)
    return tuple(w for i in norm.subject_indices() for w in tokenize(norm.tokens[i].text))


def run_pitfall_study(config: SimConfig, scoring: ScoringConfig | None = None,
                      cohort: Sequence[SimSubject] | None = None
                      ) -> tuple[list[GroupReport], PitfallSummary]:
    """Score simulated ASR and manual transcripts and summarise subgroup pitfalls."""
    scoring = scoring or ScoringConfig()
    if cohort is None:
        cohort = generate_cohort(config)
    negation = scoring.make_negation_filter()
    rows = []
    grouping = {}
    fb_count = {g: 0 for g in GROUPS}
    fb_err: dict[str, list[float]] = {g: [] for g in GROUPS}
    for subj in cohort:
        grouping[subj.subject_id] = subj.group
        asr_bundle = subj.bundle(Source.ASR)
        gt_bundle = subj.bundle(Source.GROUND_TRUTH)
        for rec_asr, rec_gt in zip(asr_bundle.records, gt_bundle.records):
            raw_asr = score_record(rec_asr, scoring, negation)
            raw_gt = score_record(rec_gt, scoring, negation)
            expert = subj.expert_raw[rec_asr.subtest]
            if raw_asr.fallback_used:
                fb_count[subj.group] += 1
                fb_err[subj.group].append(abs(raw_asr.value - expert))
            rows.append(ResultRow(subj.subject_id, rec_asr.subtest, expert,
                                  raw_asr.value, raw_gt.value,
                                  _words(rec_gt.transcript), _words(rec_asr.transcript)))
    reports = subgroup_report(rows, grouping)
    by = {r.group: r for r in reports}
    sizes = {g: sum(1 for s in cohort if s.group == g) for g in GROUPS}
    group_r = {g: (by[g].overall.pearson_asr if g in by else None) for g in GROUPS}
    group_r_gt = {g: (by[g].overall.pearson_gt if g in by else None) for g in GROUPS}
    pooled = by[POOLED].overall.pearson_asr if POOLED in by else None
    present = [v for v in group_r.values() if v is not None]
    fb_abs = {g: (float(np.mean(v)) if v else None) for g, v in fb_err.items()}
    summary = PitfallSummary(
        pooled_r=pooled,
        group_r=group_r,
        pooled_r_gt=by[POOLED].overall.pearson_gt if POOLED in by else None,
        group_r_gt=group_r_gt,
        gap_pooled_minus_min_group=(pooled - min(present)) if pooled is not None and present else None,
        gap_pooled_minus_nci=(pooled - group_r["NCI"])
        if pooled is not None and group_r["NCI"] is not None else None,
        group_size=sizes,
        fallback_count=fb_count,
        fallback_rate={g: (fb_count[g] / sizes[g] if sizes[g] else 0.0) for g in GROUPS},
        fallback_abs_error=fb_abs,
        fallback_asymmetry_nci_minus_dem=(fb_abs["NCI"] - fb_abs["DEM"])
        if fb_abs["NCI"] is not None and fb_abs["DEM"] is not None else None,
    )
    return reports, summary


# --- confound baseline -----------------------------------------------------------

FEATURES: dict[str, Callable[[SimSubject], float]] = {
    "word_count": lambda s: float(s.word_count),
    "age": lambda s: float(s.age_years),
}


@dataclass(frozen=True)
class ThresholdRule:
    feature: str
    threshold: float
    # True: predict DEM when value <= threshold
    below_is_positive: bool

    def predict(self, values: np.ndarray) -> np.ndarray:
        return values <= self.threshold if self.below_is_positive else values > self.threshold


def fit_threshold_rule(x: Mapping[str, np.ndarray], y: np.ndarray,
                       features: Sequence[str]) -> ThresholdRule:
    """Best single-feature threshold on training data (ties: earlier feature, lower cut)."""
    best: tuple[float, ThresholdRule] | None = None
    for name in features:
        vals = x[name]
        uniq = np.unique(vals)
        cuts = np.concatenate([[uniq[0] - 1.0], (uniq[:-1] + uniq[1:]) / 2.0])
        for cut in cuts:
            for below in (True, False):
                rule = ThresholdRule(name, float(cut), below)
                acc = float(np.mean(rule.predict(vals) == y))
                if best is None or acc > best[0]:
                    best = (acc, rule)
    assert best is not None
    return best[1]


def confound_baseline(cohort: Sequence[SimSubject], features: Sequence[str] = ("word_count",),
                      seed: int = 0, repeats: int = 25) -> float:
    """Held-out accuracy of a one-threshold DEM vs non-DEM rule on trivial features.

    Classes are balanced by subsampling the majority class, then split half
    and half (stratified) into train and test. The returned accuracy is the
    mean over ``repeats`` such random splits.
    """
    for f in features:
        if f not in FEATURES:
            raise ValueError(f"unknown feature {f!r}; choose from {sorted(FEATURES)}")
    y_all = np.array([s.group == "DEM" for s in cohort])
    pos, neg = np.flatnonzero(y_all), np.flatnonzero(~y_all)
    if len(pos) < 2 or len(neg) < 2:
        raise ValueError("confound baseline needs at least two subjects of each class")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    x = {f: np.array([FEATURES[f](s) for s in cohort]) for f in features}
    k = min(len(pos), len(neg))
    half = k // 2
    accs = []
    for _ in range(repeats):
        p = rng.permutation(pos)[:k]
        n = rng.permutation(neg)[:k]
        train = np.concatenate([p[:half], n[:half]])
        test = np.concatenate([p[half:], n[half:]])
        rule = fit_threshold_rule({f: v[train] for f, v in x.items()}, y_all[train], features)
        accs.append(np.mean(rule.predict(x[rule.feature][test]) == y_all[test]))
    return float(np.mean(accs))


def permute_word_counts(cohort: Sequence[SimSubject], seed: int = 0) -> list[SimSubject]:
    """Cohort copy with word counts shuffled across subjects (breaks any group link)."""
    rng = np.random.default_rng(seed)
    counts = [s.word_count for s in cohort]
    perm = rng.permutation(len(counts))
    return [replace(s, word_count=counts[j]) for s, j in zip(cohort, perm)]
