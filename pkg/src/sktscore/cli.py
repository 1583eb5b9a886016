"""``skt`` command line: score, evaluate, simulate, transcribe, normalize.

Exit codes
    0  success
    1  invalid input (malformed JSON, failed validation, bad config, no data)
    2  norm problem (missing norm cell, example norms without opt-in)
    3  external client failure (ASR, alignment or negation command)

Settings are taken from the command line first, then from ``SKT_*``
environment variables, then from the config file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from ._jsonio import InputError, PositionedDocument, dump_json, load_json_with_positions
from .errors import ClientError, ExampleNormsError, NormError, ScoringError
from .metrics import ResultRow, report_to_csv, report_to_markdown, subgroup_report, tokenize
from .model import (Source, SubjectBundle, SubtestId, bundles_from_document, iter_violations,
                    transcript_from_dict)
from .norms import SktResult, assemble_result, cognitive_group, load_norm_table
from .numword import DEFAULT_DIALECT, load_dialect, normalize_transcript
from .pipeline import (DEFAULT_MIN_GAP_S, DEFAULT_PAD_S, DEFAULT_STRATEGIES, Strategy,
                       build_plan, client_from_spec, run_alignment, run_asr,
                       segments_from_json, smooth_segments)
from .scoring import ScoringConfig, config_from_dict, load_scoring_config, score_record
from .simulate import (cohort_to_records, confound_baseline,
                       default_sim_config_path, generate_cohort, load_sim_config,
                       permute_word_counts, run_pitfall_study)

log = logging.getLogger("skt")

EXIT_OK, EXIT_INPUT, EXIT_NORMS, EXIT_CLIENT = 0, 1, 2, 3

# environment overrides, applied between file values and flags
ENV_SCORING = {
    "SKT_THRESHOLD": ("threshold", float),
    "SKT_S6_MODE": ("s6_mode", str),
    "SKT_NEGATION_FILTER": ("negation_filter", str),
    "SKT_NEGATION_CMD": ("negation_command", str),
}
ENV_ASR = "SKT_ASR_CMD"
ENV_ALIGN = "SKT_ALIGN_CMD"


class UsageError(Exception):
    pass


# --- helpers -----------------------------------------------------------------

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _manifest(command: str, options: Mapping[str, Any], inputs: Sequence[str | Path],
              config_hash: str, out: Path) -> str:
    outputs = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            outputs[p.relative_to(out).as_posix()] = sha256_file(p)
    return dump_json({
        "command": command,
        "options": dict(options),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "config_hash": config_hash,
        "output_dir": str(out),
        "outputs": outputs,
        "tool_version": __version__,
    })


def _safe_name(subject_id: str) -> str:
    name = re.sub(r"[^A-Za-z0-9._-]", "_", subject_id)
    return name if name not in ("", ".", "..") else "_" + name


def _env_overrides(environ: Mapping[str, str]) -> dict[str, Any]:
    out = {}
    for var, (key, conv) in ENV_SCORING.items():
        if var in environ and environ[var] != "":
            try:
                out[key] = conv(environ[var])
            except ValueError:
                raise InputError(f"{var}={environ[var]!r} is not a valid {key}") from None
    return out


def _scoring_config(path: str | None, flags: Mapping[str, Any],
                    environ: Mapping[str, str]) -> ScoringConfig:
    overrides = {**_env_overrides(environ), **{k: v for k, v in flags.items() if v is not None}}
    if path is None:
        return config_from_dict(overrides, source="<command line>")
    if not Path(path).is_file():
        raise InputError("config file not found", path)
    return load_scoring_config(path, overrides)


# --- score ------------------------------------------------------------------

def _score_bundle(bundle: SubjectBundle, config: ScoringConfig, table) -> SktResult:
    negation = config.make_negation_filter()
    raws = {}
    for rec in bundle.records:
        if rec.subtest in raws:
            raise InputError(f"subject {bundle.subject_id}: subtest {rec.subtest.value} "
                             "appears twice")
        raws[rec.subtest] = score_record(rec, config, negation)
    return assemble_result(bundle.subject_id, bundle.meta, raws, table)


SUMMARY_SUBTESTS = tuple(SubtestId)


def summary_csv(results: Sequence[SktResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject_id", "total", "severity", "partial", "memory_subtotal",
                "attention_subtotal"]
               + [f"norm_{s.value}" for s in SUMMARY_SUBTESTS]
               + [f"raw_{s.value}" for s in SUMMARY_SUBTESTS]
               + ["fallback_subtests"])
    for r in results:
        norms = [r.norm_scores.get(s, "") for s in SUMMARY_SUBTESTS]
        raws = [repr(r.raw_scores[s].value) if s in r.raw_scores else ""
                for s in SUMMARY_SUBTESTS]
        fallback = " ".join(s.value for s in SUMMARY_SUBTESTS
                            if s in r.raw_scores and r.raw_scores[s].fallback_used)
        w.writerow([r.subject_id, r.total, r.severity.value, str(r.partial).lower(),
                    r.memory_subtotal, r.attention_subtotal] + norms + raws + [fallback])
    return buf.getvalue()


def cmd_score(args: argparse.Namespace, environ: Mapping[str, str]) -> int:
    config = _scoring_config(args.config, {"threshold": args.threshold,
                                           "s6_mode": args.s6_mode}, environ)
    norms_path = args.norms or environ.get("SKT_NORMS")
    if not norms_path:
        raise UsageError("--norms FILE is required (or set SKT_NORMS)")
    table = load_norm_table(norms_path, allow_example=args.allow_example_norms)

    bundles: list[SubjectBundle] = []
    for path in args.records:
        bundles.extend(bundles_from_document(load_json_with_positions(path), config.expected))
    if not bundles:
        raise InputError("no subjects in records", ", ".join(args.records))
    problems = list(iter_violations(bundles))
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        raise InputError(f"{len(problems)} validation error(s) in records")
    ids = [b.subject_id for b in bundles]
    names = [_safe_name(i) for i in ids]
    if len(set(names)) != len(names):
        raise InputError("subject ids must be unique (after making them file-name safe)")

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda b: _score_bundle(b, config, table), bundles))
    else:
        results = [_score_bundle(b, config, table) for b in bundles]

    out = Path(args.out)
    for name, res in zip(names, results):
        _write(out / "results" / f"{name}.json", dump_json(res.to_dict()))
    summary = summary_csv(results)
    _write(out / "summary.csv", summary)
    options = {"records": list(args.records), "config": args.config, "norms": str(norms_path),
               "allow_example_norms": args.allow_example_norms,
               "threshold": config.threshold, "s6_mode": config.s6_mode.value}
    inputs = list(args.records) + [norms_path] + ([args.config] if args.config else [])
    config_hash = _sha256_text(dump_json(config.fingerprint()))
    _write(out / "manifest.json", _manifest("score", options, inputs, config_hash, out))

    if args.json:
        sys.stdout.write(dump_json({"subjects": [r.to_dict() for r in results]}))
    log.info("scored %d subject(s) into %s", len(results), out)
    return EXIT_OK


# --- evaluate -----------------------------------------------------------------

def _read_results_dir(path: str) -> dict[str, dict[SubtestId, float]]:
    """subject -> subtest -> automatic raw score, from ``skt score`` output."""
    root = Path(path)
    folder = root / "results" if (root / "results").is_dir() else root
    if not folder.is_dir():
        raise InputError("results directory not found", path)
    out = {}
    for f in sorted(folder.glob("*.json")):
        doc = load_json_with_positions(f)
        data = doc.data
        try:
            sid = str(data["subject_id"])
            out[sid] = {SubtestId.parse(k): float(v["value"])
                        for k, v in data["raw_scores"].items()}
        except (KeyError, TypeError, ValueError, AttributeError):
            raise doc.error((), "not a scoring result (needs subject_id and raw_scores)") from None
    return out


def _expert_from_items(items: Sequence[Any], source: str
                       ) -> tuple[dict[str, dict[SubtestId, float]], dict[str, int]]:
    raws: dict[str, dict[SubtestId, float]] = {}
    totals: dict[str, int] = {}
    for item in items:
        if not isinstance(item, dict) or "subject_id" not in item:
            raise InputError("expert entries need a subject_id", source)
        sid = str(item["subject_id"])
        meta = item.get("meta", item)
        for k, v in (meta.get("expert_raw") or {}).items():
            raws.setdefault(sid, {})[SubtestId.parse(k)] = float(v)
        if meta.get("expert_total") is not None:
            totals[sid] = int(meta["expert_total"])
    return raws, totals


def read_expert(path: str) -> tuple[dict[str, dict[SubtestId, float]], dict[str, int]]:
    """Expert raw scores and totals.

    CSV: columns ``subject_id, subtest, expert_raw`` and optionally
    ``expert_total``. JSON: a records file (``meta.expert_raw`` /
    ``meta.expert_total``) or a list of ``{subject_id, expert_raw, expert_total}``.
    """
    p = Path(path)
    if not p.is_file():
        raise InputError("expert file not found", path)
    if p.suffix.lower() == ".csv":
        raws: dict[str, dict[SubtestId, float]] = {}
        totals: dict[str, int] = {}
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            need = {"subject_id", "subtest", "expert_raw"}
            if not need <= set(reader.fieldnames or ()):
                raise InputError(f"CSV needs columns {', '.join(sorted(need))}", path, 1, 1)
            for lineno, row in enumerate(reader, start=2):
                try:
                    sid = row["subject_id"]
                    raws.setdefault(sid, {})[SubtestId.parse(row["subtest"])] = \
                        float(row["expert_raw"])
                    if row.get("expert_total"):
                        totals[sid] = int(row["expert_total"])
                except ValueError as exc:
                    raise InputError(str(exc), path, lineno, 1) from None
        return raws, totals
    data = load_json_with_positions(p).data
    if isinstance(data, dict):
        data = data.get("subjects", [data])
    if not isinstance(data, list):
        raise InputError("expected a list of expert entries", path)
    return _expert_from_items(data, path)


def read_groups(path: str) -> dict[str, str]:
    """Subject -> group, from CSV (``subject_id, group``) or a JSON object."""
    p = Path(path)
    if not p.is_file():
        raise InputError("groups file not found", path)
    if p.suffix.lower() == ".csv":
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not {"subject_id", "group"} <= set(reader.fieldnames or ()):
                raise InputError("CSV needs columns subject_id, group", path, 1, 1)
            return {row["subject_id"]: row["group"] for row in reader}
    data = load_json_with_positions(p).data
    if not isinstance(data, dict):
        raise InputError("groups JSON must map subject id to group", path)
    return {str(k): str(v) for k, v in data.items()}


def _words_by_key(path: str | None) -> dict[tuple[str, SubtestId], tuple[str, ...]]:
    """Number-normalised subject words per (subject, subtest) from a records file."""
    if path is None:
        return {}
    doc = load_json_with_positions(path)
    data = doc.data
    items = data.get("subjects", [data]) if isinstance(data, dict) else data
    out = {}
    try:
        for subj in items:
            sid = str(subj["subject_id"])
            for entry in subj.get("subtests", []):
                norm, _ = normalize_transcript(transcript_from_dict(entry["transcript"]))
                out[(sid, SubtestId.parse(entry["subtest"]))] = tuple(
                    w for i in norm.subject_indices() for w in tokenize(norm.tokens[i].text))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise doc.error((), f"not a records file: {exc}") from None
    return out


def cmd_evaluate(args: argparse.Namespace, environ: Mapping[str, str]) -> int:
    auto = _read_results_dir(args.auto)
    auto_gt = _read_results_dir(args.auto_gt) if args.auto_gt else {}
    expert, totals = read_expert(args.expert)
    if args.groups == "auto":
        grouping = {sid: cognitive_group(t) for sid, t in totals.items()}
    else:
        grouping = read_groups(args.groups)
    ref = _words_by_key(args.ref_transcripts)
    hyp = _words_by_key(args.hyp_transcripts)

    subjects = sorted(set(auto) & set(expert))
    if not subjects:
        raise InputError("no subject appears in both the automatic results and the expert file")
    missing_group = [s for s in subjects if s not in grouping]
    if missing_group:
        log.warning("%d subject(s) have no group and only enter the pooled report: %s",
                    len(missing_group), ", ".join(missing_group[:5]))
    rows = []
    for sid in subjects:
        for sub in SubtestId:
            if sub not in auto[sid] or sub not in expert[sid]:
                continue
            rows.append(ResultRow(sid, sub, expert[sid][sub], auto[sid][sub],
                                  auto_gt.get(sid, {}).get(sub),
                                  ref.get((sid, sub), ()), hyp.get((sid, sub), ())))
    if not rows:
        raise InputError("matched subjects share no subtest between automatic and expert scores")
    reports = subgroup_report(rows, grouping)
    text = report_to_markdown(reports) if args.format == "md" else report_to_csv(reports)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- simulate -------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace, environ: Mapping[str, str]) -> int:
    path = args.config or str(default_sim_config_path())
    if not Path(path).is_file():
        raise InputError("simulation config not found", path)
    sim, scoring_section = load_sim_config(path, seed=args.seed)
    scoring = config_from_dict({**scoring_section, **_env_overrides(environ)},
                               Path(path).parent, source=path)
    t0 = time.perf_counter()
    cohort = generate_cohort(sim)
    reports, summary = run_pitfall_study(sim, scoring, cohort)
    confound = {
        "word_count": confound_baseline(cohort, ("word_count",), seed=sim.seed),
        "word_count_permuted": confound_baseline(permute_word_counts(cohort, sim.seed),
                                                 ("word_count",), seed=sim.seed),
        "age": confound_baseline(cohort, ("age",), seed=sim.seed),
    }
    log.info("simulated %d subjects in %.2f s", len(cohort), time.perf_counter() - t0)

    out = Path(args.out)
    _write(out / "cohort_asr.json", dump_json({"subjects": cohort_to_records(cohort, Source.ASR)}))
    _write(out / "cohort_gt.json",
           dump_json({"subjects": cohort_to_records(cohort, Source.GROUND_TRUTH)}))
    _write(out / "groups.json", dump_json({s.subject_id: s.group for s in cohort}))
    _write(out / "report.csv", report_to_csv(reports))
    _write(out / "report.md", report_to_markdown(reports))
    result = {"seed": sim.seed, "n_subjects": len(cohort), "pitfalls": summary.to_dict(),
              "confound_accuracy": confound}
    _write(out / "summary.json", dump_json(result))
    config_hash = _sha256_text(dump_json({"simulation": sim.to_dict(),
                                          "scoring": scoring.fingerprint()}))
    _write(out / "manifest.json", _manifest("simulate", {"config": path, "seed": sim.seed},
                                            [path], config_hash, out))
    if args.json:
        sys.stdout.write(dump_json(result))
    return EXIT_OK


# --- transcribe / normalize -------------------------------------------------------

def cmd_transcribe(args: argparse.Namespace, environ: Mapping[str, str]) -> int:
    asr_spec = args.asr or environ.get(ENV_ASR)
    if not asr_spec:
        raise UsageError(f"no ASR client: pass --asr or set {ENV_ASR}")
    align_spec = args.align or environ.get(ENV_ALIGN)

    doc = load_json_with_positions(args.segments)
    try:
        segs = segments_from_json(doc.data)
        smoothed = smooth_segments(segs, args.min_gap, args.pad, args.audio_len)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad segments: {exc}", args.segments) from None
    if args.strategy:
        strategy = Strategy(args.strategy)
    elif args.subtest:
        strategy = DEFAULT_STRATEGIES[SubtestId.parse(args.subtest)]
    else:
        strategy = Strategy.MERGED
    plan = build_plan(smoothed, strategy, args.audio_len)
    transcript = run_asr(plan, client_from_spec(asr_spec, args.timeout), args.audio,
                         args.language, args.jobs)
    if align_spec:
        text = " ".join(t.text for t in transcript.tokens)
        transcript = run_alignment(text, args.audio, client_from_spec(align_spec, args.timeout))
    payload = dump_json({"strategy": strategy.value,
                         "segments": [s.to_dict() for s in smoothed],
                         "transcript": transcript.to_dict()})
    if args.out:
        _write(Path(args.out), payload)
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_normalize(args: argparse.Namespace, environ: Mapping[str, str]) -> int:
    dialect = load_dialect(args.dialect) if args.dialect else DEFAULT_DIALECT
    if args.input == "-":
        doc = PositionedDocument(sys.stdin.read(), "<stdin>")
    else:
        doc = load_json_with_positions(args.input)
    data = doc.data
    inner = data.get("transcript", data) if isinstance(data, dict) else data
    try:
        t = transcript_from_dict(inner)
    except (KeyError, TypeError, ValueError) as exc:
        raise doc.error((), f"not a transcript: {exc}") from None
    norm, spans = normalize_transcript(t, dialect)
    out = {"transcript": norm.to_dict(),
           "numbers": [{"token_index": s.token_index, "surface": s.surface, "value": s.value}
                       for s in spans]}
    sys.stdout.write(dump_json(out))
    return EXIT_OK


# --- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skt", description=__doc__.split("\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog="exit codes: 0 ok, 1 invalid input, 2 norms, 3 client")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("score", help="score transcripts into norm values and SKT totals")
    s.add_argument("--records", required=True, action="append",
                   help="records JSON (repeatable)")
    s.add_argument("--config", help="scoring config (JSON or TOML)")
    s.add_argument("--norms", help="norm table JSON (env SKT_NORMS)")
    s.add_argument("--allow-example-norms", action="store_true",
                   help="accept the synthetic example table")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--threshold", type=float, help="fuzzy match threshold (env SKT_THRESHOLD)")
    s.add_argument("--s6-mode", choices=["last_expected", "last_word"],
                   help="subtest 6 timing rule (env SKT_S6_MODE)")
    s.add_argument("--json", action="store_true", help="print results as JSON on stdout")
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("evaluate", help="compare automatic and expert scores per group")
    e.add_argument("--auto", required=True, help="score output dir (ASR transcripts)")
    e.add_argument("--auto-gt", help="score output dir (manual transcripts)")
    e.add_argument("--expert", required=True, help="expert scores, CSV or JSON")
    e.add_argument("--groups", default="auto",
                   help="'auto' (from expert totals) or a CSV/JSON subject->group file")
    e.add_argument("--ref-transcripts", help="records file with manual transcripts (for WER)")
    e.add_argument("--hyp-transcripts", help="records file with ASR transcripts (for WER)")
    e.add_argument("--format", choices=["csv", "md"], default="csv")
    e.add_argument("--out", help="write the report here instead of stdout")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("simulate", help="synthetic cohort and subgroup pitfall study")
    m.add_argument("--config", help="simulation config (default: shipped config)")
    m.add_argument("--seed", type=int)
    m.add_argument("--out", required=True)
    m.add_argument("--json", action="store_true", help="print the summary as JSON on stdout")
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("transcribe", help="run external ASR on smoothed speech segments")
    t.add_argument("--segments", required=True, help="VAD segments JSON")
    t.add_argument("--audio", required=True, help="audio reference passed to the client")
    t.add_argument("--asr", help=f"ASR command or URL (env {ENV_ASR})")
    t.add_argument("--align", help=f"forced-alignment command or URL (env {ENV_ALIGN})")
    t.add_argument("--strategy", choices=[x.value for x in Strategy])
    t.add_argument("--subtest", help="pick the default strategy for this subtest")
    t.add_argument("--min-gap", type=float, default=DEFAULT_MIN_GAP_S)
    t.add_argument("--pad", type=float, default=DEFAULT_PAD_S)
    t.add_argument("--audio-len", type=float)
    t.add_argument("--language", default="de")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--timeout", type=float, default=600.0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_transcribe)

    n = sub.add_parser("normalize", help="replace German number words by digits")
    n.add_argument("input", nargs="?", default="-", help="transcript JSON (default stdin)")
    n.add_argument("--dialect", help="extra dialect lexicon JSON")
    n.set_defaults(func=cmd_normalize)
    return p


def main(argv: Sequence[str] | None = None, environ: Mapping[str, str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    environ = os.environ if environ is None else environ
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args, environ)
    except (ExampleNormsError, NormError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NORMS
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(exc.diagnostics, file=sys.stderr)
        return EXIT_CLIENT
    except (InputError, ScoringError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
